"""Command-line driver: flat key=value config -> receiver tables and a manifest.

Config format
-------------
One ``key = value`` per line; ``#`` starts a comment.  See ``README.md``
for the full key list.  Axis segments are comma separated items of the
form ``uniform:<spacing>:<cells>`` or
``stretched:<span>:<cells>[:<min_spacing>][:backward]``.

Exit codes: 0 success, 2 config error, 3 stability error, 4 instability
abort, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .boundary import CpmlConfig
from .gridgen import StretchedSegment, UniformSegment, assemble_grid, build_axis
from .kernel import InstabilityError, Receiver, Simulation, SourceSpec, gaussian_derivative
from .medium import ResistivityModel, layered_model, model_ingest, to_fictitious
from .oracle import WholeSpaceParams, amplitude_phase_errors, wholespace_E

log = logging.getLogger("csemfd")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_STABILITY, EXIT_INSTABILITY = 0, 1, 2, 3, 4

DEFAULTS = {
    "order": "4",
    "x.origin": "0",
    "y.origin": "0",
    "z.origin": "0",
    "pml.layers": "12",
    "pml.reflection": "1e-3",
    "pml.order": "2",
    "pml.kappa_max": "1",
    "pml.alpha_max": "auto",
    "airwave": "false",
    "omega0": "auto",
    "source.orientation": "x",
    "source.moment": "1",
    "source.center_frequency": "auto",
    "model.anisotropy": "1",
    "tolerance": "1e-5",
    "cadence": "100",
    "safety": "0.9",
    "t_max": "auto",
    "max_steps": "auto",
    "dt": "auto",
}

KNOWN = set(DEFAULTS) | {
    "x.segments", "y.segments", "z.segments", "model.header", "model.data",
    "model.homogeneous", "model.layers", "model.air_above", "frequencies",
    "source.position", "receivers", "receivers.line", "receivers.file", "reference",
    "output",
}


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


class StabilityConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN:
            raise ConfigError(key, "unknown key")
        cfg[key] = value
    return cfg


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = parse_config_text(fh.read())
    cfg["_base"] = os.path.dirname(os.path.abspath(path))
    return cfg


def _get(cfg, key):
    if key in cfg:
        return cfg[key]
    if key in DEFAULTS:
        return DEFAULTS[key]
    raise ConfigError(key, "required key missing")


def _float(cfg, key):
    try:
        return float(_get(cfg, key))
    except ValueError as exc:
        raise ConfigError(key, f"not a number: {_get(cfg, key)!r}") from exc


def _int(cfg, key):
    try:
        return int(_get(cfg, key))
    except ValueError as exc:
        raise ConfigError(key, f"not an integer: {_get(cfg, key)!r}") from exc


def _bool(cfg, key):
    v = _get(cfg, key).lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"not a boolean: {v!r}")


def _floats(cfg, key, sep=None):
    try:
        return [float(v) for v in _get(cfg, key).replace(",", " ").split(sep)]
    except ValueError as exc:
        raise ConfigError(key, f"bad number list {_get(cfg, key)!r}") from exc


def _path(cfg, key):
    p = _get(cfg, key)
    return p if os.path.isabs(p) else os.path.join(cfg.get("_base", "."), p)


def parse_segments(text, key="segments"):
    segs = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            continue
        parts = item.split(":")
        try:
            if parts[0] == "uniform" and len(parts) == 3:
                segs.append(UniformSegment(float(parts[1]), int(parts[2])))
            elif parts[0] == "stretched" and 3 <= len(parts) <= 5:
                growth = "forward"
                rest = parts[3:]
                if rest and rest[-1] in ("forward", "backward"):
                    growth = rest.pop()
                dmin = float(rest[0]) if rest else None
                segs.append(StretchedSegment(float(parts[1]), int(parts[2]), dmin, growth))
            else:
                raise ValueError
        except ValueError as exc:
            raise ConfigError(key, f"bad segment {item!r}") from exc
    if not segs:
        raise ConfigError(key, "no segments")
    return segs


@dataclass
class RunConfig:
    """Resolved run description (every value that affects results)."""

    values: dict
    grid: object = None
    model: ResistivityModel = None
    frequencies: list = field(default_factory=list)
    omega0: float = 0.0
    source: SourceSpec = None
    receivers: list = field(default_factory=list)
    cpml: CpmlConfig = None


def _receivers(cfg):
    recs = []
    if "receivers" in cfg:
        for item in cfg["receivers"].split(";"):
            item = item.strip()
            if not item:
                continue
            parts = item.split()
            if len(parts) not in (3, 4):
                raise ConfigError("receivers", f"bad receiver {item!r}")
            try:
                pos = tuple(float(v) for v in parts[:3])
            except ValueError as exc:
                raise ConfigError("receivers", f"bad receiver {item!r}") from exc
            recs.append(Receiver(pos, parts[3] if len(parts) == 4 else "Ex"))
    if "receivers.line" in cfg:
        parts = cfg["receivers.line"].split()
        if len(parts) not in (7, 8):
            raise ConfigError("receivers.line", "expected x0 y0 z0 dx dy dz count [component]")
        try:
            x0, y0, z0, dx, dy, dz = (float(v) for v in parts[:6])
            count = int(parts[6])
        except ValueError as exc:
            raise ConfigError("receivers.line", "bad number") from exc
        comp = parts[7] if len(parts) == 8 else "Ex"
        recs += [Receiver((x0 + k * dx, y0 + k * dy, z0 + k * dz), comp) for k in range(count)]
    if "receivers.file" in cfg:
        with open(_path(cfg, "receivers.file")) as fh:
            for row in csv.DictReader(fh):
                recs.append(Receiver((float(row["x"]), float(row["y"]), float(row["z"])),
                                     row.get("component", "Ex") or "Ex"))
    if not recs:
        raise ConfigError("receivers", "no receivers given")
    for r in recs:
        if r.component not in ("Ex", "Ey", "Ez", "Hx", "Hy", "Hz"):
            raise ConfigError("receivers", f"unknown component {r.component!r}")
    return recs


def resolve(cfg: dict) -> RunConfig:
    """Build grid, model, source and receivers from a parsed config."""
    order = _int(cfg, "order")
    if order not in (2, 4, 6, 8):
        raise ConfigError("order", "must be 2, 4, 6 or 8")
    L = order // 2
    pml = _int(cfg, "pml.layers")
    airwave = _bool(cfg, "airwave")
    axes = []
    for name in "xyz":
        segs = parse_segments(_get(cfg, f"{name}.segments"), f"{name}.segments")
        layers = (0, pml) if (name == "z" and airwave) else pml
        try:
            axes.append(build_axis(segs, layers, _float(cfg, f"{name}.origin")))
        except (ValueError, RuntimeError) as exc:
            raise ConfigError(f"{name}.segments", str(exc)) from exc
    try:
        grid = assemble_grid(*axes, L=L, airwave=airwave)
    except ValueError as exc:
        raise ConfigError("order", str(exc)) from exc

    freqs = _floats(cfg, "frequencies")
    if not freqs or any(f <= 0 for f in freqs):
        raise ConfigError("frequencies", "must be positive")
    if sorted(freqs) != freqs:
        raise ConfigError("frequencies", "must be sorted ascending")
    w0 = _get(cfg, "omega0")
    omega0 = 2 * math.pi * freqs[0] if w0 == "auto" else _float(cfg, "omega0")

    interior = [a.nodes[a.pml_lo:a.n - a.pml_hi] for a in grid.axes]
    lam = _float(cfg, "model.anisotropy")
    try:
        if "model.header" in cfg:
            model = model_ingest(_path(cfg, "model.header"), _path(cfg, "model.data"))
        elif "model.layers" in cfg:
            layers = []
            for item in cfg["model.layers"].split(","):
                top, rho, *rest = (float(v) for v in item.split(":"))
                layers.append((top, rho, rest[0] if rest else 1.0))
            air = _float(cfg, "model.air_above") if "model.air_above" in cfg else None
            model = layered_model(*interior, layers, air_above=air)
        else:
            model = ResistivityModel.homogeneous(grid.interior_shape,
                                                 _float(cfg, "model.homogeneous"), lam)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError("model", str(exc)) from exc
    if tuple(model.dims) != tuple(grid.interior_shape):
        raise ConfigError("model", f"dims {model.dims} do not match grid interior "
                                   f"{grid.interior_shape}")

    pos = tuple(_floats(cfg, "source.position"))
    if len(pos) != 3:
        raise ConfigError("source.position", "expected three coordinates")
    orient = _get(cfg, "source.orientation")
    if orient not in ("x", "y", "z"):
        raise ConfigError("source.orientation", "must be x, y or z")
    source = SourceSpec(pos, orient, moment=_float(cfg, "source.moment"))
    if _get(cfg, "source.center_frequency") != "auto":
        fc = _float(cfg, "source.center_frequency")
        source.waveform, source.support = gaussian_derivative(fc)
        source.center_frequency = fc
    receivers = _receivers(cfg)
    for r in receivers + [source]:
        p = r.position
        for a, (axis, v) in enumerate(zip(grid.axes, p)):
            lo, hi = axis.interior
            if not lo <= v <= hi:
                key = "source.position" if r is source else "receivers"
                raise ConfigError(key, f"coordinate {v} outside the interior {lo}..{hi}")
    am = _get(cfg, "pml.alpha_max")
    cpml = CpmlConfig(_float(cfg, "pml.order"), _float(cfg, "pml.reflection"),
                      _float(cfg, "pml.kappa_max"), None if am == "auto" else float(am))
    return RunConfig(dict(cfg), grid, model, freqs, omega0, source, receivers, cpml)


def _fmt(v):
    return repr(float(v))


def write_tables(outdir, freqs, receivers, green):
    paths = []
    for fi, f in enumerate(freqs):
        path = os.path.join(outdir, f"receivers_{f:g}Hz.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "component", "re", "im", "amplitude", "phase_deg"])
            for r, rec in enumerate(receivers):
                g = complex(green[r, fi])
                w.writerow([_fmt(rec.position[0]), _fmt(rec.position[1]), _fmt(rec.position[2]),
                            rec.component, _fmt(g.real), _fmt(g.imag), _fmt(abs(g)),
                            _fmt(math.degrees(math.atan2(g.imag, g.real)))])
        paths.append(path)
    return paths


def read_table(path):
    rows = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    return rows


def error_panel(tables: dict, reference, source_position, outpath):
    """Per-frequency amplitude ratio / phase difference against a reference.

    ``tables`` maps frequency to a receiver-table path.  ``reference`` is
    either a dict of the same form or a CSV with columns
    ``frequency,x,y,z,component,re,im``.
    """
    if isinstance(reference, (str, os.PathLike)):
        ref = {}
        for row in read_table(reference):
            ref.setdefault(float(row["frequency"]), []).append(row)
    else:
        ref = {f: read_table(p) for f, p in reference.items()}
    src = np.asarray(source_position, dtype=float)
    out_rows = []
    for f, path in tables.items():
        fd = read_table(path)
        match = [k for k in ref if math.isclose(k, f, rel_tol=1e-9)]
        if not match:
            raise ValueError(f"reference has no frequency {f}")
        rr = ref[match[0]]
        if len(rr) != len(fd):
            raise ValueError("receiver geometry differs from the reference")
        for a, b in zip(fd, rr):
            pa = [float(a[k]) for k in "xyz"]
            pb = [float(b[k]) for k in "xyz"]
            if not np.allclose(pa, pb, rtol=0, atol=1e-6) or a["component"] != b["component"]:
                raise ValueError("receiver geometry differs from the reference")
        v = np.array([complex(float(a["re"]), float(a["im"])) for a in fd])
        vr = np.array([complex(float(b["re"]), float(b["im"])) for b in rr])
        ratio, dph, _ = amplitude_phase_errors(v, vr)
        for a, q, d in zip(fd, ratio, dph):
            off = float(np.linalg.norm(np.array([float(a[k]) for k in "xyz"]) - src))
            out_rows.append([_fmt(f), _fmt(off), a["x"], a["y"], a["z"], a["component"],
                             _fmt(q), _fmt(d)])
    with open(outpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency", "offset", "x", "y", "z", "component", "ratio", "dphase_deg"])
        w.writerows(out_rows)
    return outpath


def wholespace_reference(rc: RunConfig, outpath):
    """Write the analytic whole-space reference for a homogeneous isotropic run."""
    rho = np.unique(rc.model.rho_h)
    if len(rho) != 1 or not rc.model.isotropic or rc.source.orientation != "x":
        raise ConfigError("reference", "wholespace reference needs a homogeneous isotropic "
                                       "model and an x dipole")
    with open(outpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency", "x", "y", "z", "component", "re", "im"])
        for f in rc.frequencies:
            p = WholeSpaceParams(1.0 / float(rho[0]), 2 * math.pi * f, rc.source.moment,
                                 source=rc.source.position)
            e = wholespace_E(p, [r.position for r in rc.receivers])
            for r, rec in enumerate(rc.receivers):
                if rec.component[0] != "E":
                    raise ConfigError("reference", "wholespace reference covers E only")
                v = e[r, "xyz".index(rec.component[1])]
                w.writerow([_fmt(f), _fmt(rec.position[0]), _fmt(rec.position[1]),
                            _fmt(rec.position[2]), rec.component, _fmt(v.real), _fmt(v.imag)])
    return outpath


def run(cfg: dict, outdir: str, threads: int | None = None) -> dict:
    """Execute a run; returns the manifest dict."""
    t0 = time.perf_counter()
    rc = resolve(cfg)
    os.makedirs(outdir, exist_ok=True)
    medium = to_fictitious(rc.model, rc.grid, rc.omega0)
    safety = _float(cfg, "safety")
    if not 0 < safety <= 1:
        raise StabilityConfigError(f"safety factor {safety} outside (0, 1]")
    t_max = None if _get(cfg, "t_max") == "auto" else _float(cfg, "t_max")
    max_steps = None if _get(cfg, "max_steps") == "auto" else _int(cfg, "max_steps")
    rc.source.moment = _float(cfg, "source.moment")
    try:
        sim = Simulation(rc.grid, medium, rc.frequencies, rc.source, rc.receivers,
                         safety=safety, cpml=rc.cpml, tol=_float(cfg, "tolerance"),
                         cadence=_int(cfg, "cadence"), t_max=t_max)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from exc
    if _get(cfg, "dt") != "auto":
        dt = _float(cfg, "dt")
        if not 0 < dt <= sim.stability.dt_bound:
            raise StabilityConfigError(
                f"dt={dt} exceeds the stability bound {sim.stability.dt_bound:.6g} s")
        sim = Simulation(rc.grid, medium, rc.frequencies, rc.source, rc.receivers, dt=dt,
                         cpml=rc.cpml, tol=_float(cfg, "tolerance"),
                         cadence=_int(cfg, "cadence"), t_max=t_max)
    res = sim.run(max_steps=max_steps)
    tables = write_tables(outdir, rc.frequencies, rc.receivers, res.green)
    manifest = {
        "version": __version__,
        "config": {k: v for k, v in cfg.items() if not k.startswith("_")},
        "defaults_used": {k: v for k, v in DEFAULTS.items() if k not in cfg},
        "grid": rc.grid.describe(),
        "omega0": rc.omega0,
        "frequencies": rc.frequencies,
        "source": {"position": list(rc.source.position), "orientation": rc.source.orientation,
                   "moment": rc.source.moment, "center_frequency": rc.source.center_frequency,
                   "support": rc.source.support},
        "medium": {"c_max": medium.c_max, "c_min": medium.c_min},
        "stability": res.stability.as_dict(),
        "dt": sim.dt,
        "t_max": sim.t_max,
        "steps": res.steps,
        "converged": res.converged,
        "reliable": [bool(v) for v in res.reliable],
        "wall_time": time.perf_counter() - t0,
        "time_loop_seconds": res.wall_time,
        "seconds_per_step": res.step_time,
        "threads": threads,
        "convergence_history": res.history,
        "tables": [os.path.basename(p) for p in tables],
    }
    if "reference" in cfg:
        ref = cfg["reference"]
        if ref == "wholespace":
            ref = wholespace_reference(rc, os.path.join(outdir, "reference_wholespace.csv"))
        else:
            ref = _path(cfg, "reference")
        panel = error_panel(dict(zip(rc.frequencies, tables)), ref, rc.source.position,
                            os.path.join(outdir, "error_panel.csv"))
        manifest["error_panel"] = os.path.basename(panel)
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=float)
    return manifest


def build_parser():
    p = argparse.ArgumentParser(prog="csemfd", description=(
        "3D CSEM modelling by high-order FDTD in the fictitious wave domain."))
    p.add_argument("config", help="flat key=value run description")
    p.add_argument("-o", "--output", help="output directory (overrides the 'output' key)")
    p.add_argument("-t", "--threads", type=int, help="worker thread count")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="more log output (-v info, -vv debug)")
    p.add_argument("-q", "--quiet", action="store_true", help="errors only")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.WARNING, logging.INFO,
                                              logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        from . import _stencil

        _stencil.set_threads(args.threads)
    try:
        cfg = load_config(args.config)
        outdir = args.output or cfg.get("output") or "."
        if "output" in cfg and not args.output and not os.path.isabs(outdir):
            outdir = os.path.join(cfg["_base"], outdir)
        manifest = run(cfg, outdir, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        if isinstance(exc, StabilityConfigError):
            print(f"stability error: {exc}", file=sys.stderr)
            return EXIT_STABILITY
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"instability abort: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    log.info("done: %d steps, converged=%s", manifest["steps"], manifest["converged"])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
