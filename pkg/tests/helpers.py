"""Shared numerical studies for the unit and acceptance tests."""

import numpy as np

from csemfd.fdcoeff import derivative_weights


def geometric_nodes(x0, h, r, cells):
    i = np.arange(cells + 1)
    return x0 + (h * i if r == 1.0 else h * (r ** i - 1) / (r - 1))


REFINEMENTS = (2, 3, 4, 6, 8)


def derivative_errors(L, r, refinements=REFINEMENTS, cells=8, span=2.0, x0=0.4):
    """Max error of d/dx sin at the staggered nodes of refined geometric grids.

    The base grid has ``cells`` cells of ratio ``r`` over ``span``.  A
    refinement ``m`` splits every base cell geometrically into ``m``
    pieces, which gives ratio ``r**(1/m)`` and keeps every base node.
    """
    hs, errs = [], []
    h0 = span / cells if r == 1.0 else span * (r - 1) / (r ** cells - 1)
    for m in refinements:
        rho = r ** (1.0 / m)
        h = h0 / m if r == 1.0 else h0 * (rho - 1) / (r - 1)
        x = geometric_nodes(x0, h, rho, cells * m)
        mids = 0.5 * (x[1:] + x[:-1])
        err = 0.0
        for s in range(L - 1, cells * m - L + 1):
            nodes = x[s - L + 1:s + L + 1]
            w = derivative_weights(nodes - mids[s])
            err = max(err, abs(w @ np.sin(nodes) - np.cos(mids[s])))
        hs.append(h)
        errs.append(err)
    return np.array(hs), np.array(errs)


def observed_derivative_order(L, r, **kw):
    hs, errs = derivative_errors(L, r, **kw)
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


# --------------------------------------------------------------------------- whole-space runs

def wholespace_grid(L, dx=100.0, pml=12, stretch_span=6170.0):
    """64 nodes per axis; z uniform above the source level, stretched below it.

    The x nodes are offset by half a cell so the source Ex node sits at x=0.
    """
    from csemfd.gridgen import StretchedSegment, UniformSegment, assemble_grid, build_axis

    ax = build_axis([UniformSegment(dx, 63)], pml, -31.5 * dx)
    ay = build_axis([UniformSegment(dx, 63)], pml, -31.0 * dx)
    az = build_axis([UniformSegment(dx, 32), StretchedSegment(stretch_span, 31)], pml, -32.0 * dx)
    return assemble_grid(ax, ay, az, L)


def wholespace_run(L, frequency=1.0, rho=1.0, offsets=None, **grid_kw):
    from csemfd.kernel import Receiver, Simulation, SourceSpec
    from csemfd.medium import ResistivityModel, to_fictitious
    from csemfd.oracle import WholeSpaceParams, amplitude_phase_errors, skin_depth, wholespace_E

    grid = wholespace_grid(L, **grid_kw)
    model = ResistivityModel.homogeneous(grid.interior_shape, rho)
    medium = to_fictitious(model, grid, 2 * np.pi * frequency)
    delta = skin_depth(1.0 / rho, frequency)
    if offsets is None:
        offsets = np.linspace(1.0, 4.0, 7) * delta
    recs = [Receiver((float(o), 0.0, 0.0), "Ex") for o in offsets]
    sim = Simulation(grid, medium, [frequency], SourceSpec((0.0, 0.0, 0.0), "x"), recs)
    res = sim.run()
    ref = wholespace_E(WholeSpaceParams(1.0 / rho, 2 * np.pi * frequency),
                       [r.position for r in recs])[:, 0]
    ratio, dphase, _ = amplitude_phase_errors(res.green[:, 0], ref)
    return dict(grid=grid, sim=sim, result=res, offsets=np.asarray(offsets), ratio=ratio,
                dphase=dphase, skin_depth=delta)
