"""Whole-space check through the Python API.

Runs the 64^3 homogeneous model at orders 2 and 4 and prints the
amplitude ratio and phase difference against the analytic solution at
offsets of one to four skin depths.

    python3 demos/wholespace_check.py
"""

import numpy as np

from csemfd import (
    Receiver,
    ResistivityModel,
    Simulation,
    SourceSpec,
    StretchedSegment,
    UniformSegment,
    amplitude_phase_errors,
    assemble_grid,
    build_axis,
    to_fictitious,
    wholespace_E,
)
from csemfd.oracle import WholeSpaceParams, skin_depth

FREQ = 1.0
RHO = 1.0


def grid(L, dx=100.0, pml=12):
    ax = build_axis([UniformSegment(dx, 63)], pml, -31.5 * dx)
    ay = build_axis([UniformSegment(dx, 63)], pml, -31.0 * dx)
    az = build_axis([UniformSegment(dx, 32), StretchedSegment(6170.0, 31)], pml, -32.0 * dx)
    return assemble_grid(ax, ay, az, L)


def main():
    delta = skin_depth(1.0 / RHO, FREQ)
    offsets = np.linspace(1.0, 4.0, 7) * delta
    ref = wholespace_E(WholeSpaceParams(1.0 / RHO, 2 * np.pi * FREQ),
                       [(o, 0.0, 0.0) for o in offsets])[:, 0]
    print(f"skin depth {delta:.1f} m")
    for L in (1, 2):
        g = grid(L)
        medium = to_fictitious(ResistivityModel.homogeneous(g.interior_shape, RHO), g,
                               2 * np.pi * FREQ)
        recs = [Receiver((float(o), 0.0, 0.0), "Ex") for o in offsets]
        sim = Simulation(g, medium, [FREQ], SourceSpec((0.0, 0.0, 0.0), "x"), recs)
        res = sim.run()
        ratio, dphase, _ = amplitude_phase_errors(res.green[:, 0], ref)
        print(f"\norder {2 * L}: {res.steps} steps, {res.wall_time:.1f} s, "
              f"z stretch ratio {g.z.stretch_factors[0]:.4f}")
        print("  offset/skin   ratio    dphase(deg)")
        for o, q, d in zip(offsets / delta, ratio, dphase):
            print(f"  {o:9.2f}   {q:7.4f}   {d:8.3f}")


if __name__ == "__main__":
    main()
