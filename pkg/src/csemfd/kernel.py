"""Leapfrog time stepping of the fictitious-wave Maxwell system.

The update for step ``n -> n+1`` is

    H^{n+1/2} = H^{n-1/2} - (dt / mu) curl_+ E^n
    E^{n+1}   = E^n + (dt / eps) (curl_- H^{n+1/2} - J^{n+1/2})

where ``curl_+`` uses the forward (reference -> staggered) derivative
tables and ``curl_-`` the backward ones.  Receiver values are
transformed on the fly with the complex frequency
``omega' = (1 + i) sqrt(omega omega0)``; E is sampled at integer steps
and H at half steps.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _stencil
from .boundary import CURL_TERMS, AirwavePlan, CpmlState, build_airwave, build_cpml, CpmlConfig
from .fdcoeff import NodeStencil, interpolation_weights
from .gridgen import OperatorTable, StaggeredGrid3D
from .medium import FictitiousMedium

log = logging.getLogger(__name__)

__all__ = [
    "FieldState",
    "SourceSpec",
    "Receiver",
    "SpectralAccumulator",
    "StabilityReport",
    "InstabilityError",
    "Simulation",
    "RunResult",
    "dmax",
    "timestep_bound",
    "stability_report",
    "apply_curl_E",
    "apply_curl_H",
    "divergence_H",
    "leapfrog_step",
    "accumulate_spectrum",
    "check_convergence",
    "green_functions",
    "gaussian_derivative",
    "complex_frequency",
]

E_COMPONENTS = ("Ex", "Ey", "Ez")
H_COMPONENTS = ("Hx", "Hy", "Hz")
COMPONENTS = E_COMPONENTS + H_COMPONENTS
AXES = "xyz"


class InstabilityError(RuntimeError):
    """Raised when the fields become non-finite or grow without bound."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


# --------------------------------------------------------------------------- stability


@dataclass(frozen=True)
class StabilityReport:
    dmax: tuple
    c_max: float
    dt_bound: float
    dt: float
    safety: float

    def as_dict(self):
        return {"dmax": list(self.dmax), "c_max": self.c_max, "dt_bound": self.dt_bound,
                "dt": self.dt, "safety": self.safety}


def dmax(table: OperatorTable) -> float:
    """Largest absolute row sum of one axis' derivative tables (1/m)."""
    return table.dmax


def timestep_bound(dmaxes, c_max: float) -> float:
    """``2 / (c_max sqrt(sum D_max^2))``."""
    s = math.sqrt(sum(d * d for d in dmaxes))
    if s <= 0 or c_max <= 0:
        raise ValueError("D_max and c_max must be positive")
    return 2.0 / (c_max * s)


def stability_report(grid: StaggeredGrid3D, c_max: float, safety: float = 0.9) -> StabilityReport:
    dm = tuple(dmax(t) for t in grid.tables)
    bound = timestep_bound(dm, c_max)
    return StabilityReport(dm, c_max, bound, safety * bound, safety)


# --------------------------------------------------------------------------- fields


@dataclass
class FieldState:
    """The six staggered components and the step index."""

    Ex: np.ndarray
    Ey: np.ndarray
    Ez: np.ndarray
    Hx: np.ndarray
    Hy: np.ndarray
    Hz: np.ndarray
    n: int = 0

    @classmethod
    def zeros(cls, grid: StaggeredGrid3D):
        return cls(**{c: np.zeros(grid.component_shape(c)) for c in COMPONENTS})

    def __getitem__(self, name):
        return getattr(self, name)

    def items(self):
        return ((c, getattr(self, c)) for c in COMPONENTS)

    def max_abs(self, comps=COMPONENTS) -> float:
        return max(_stencil.max_abs(getattr(self, c)) for c in comps)

    def copy(self):
        return FieldState(**{c: getattr(self, c).copy() for c in COMPONENTS}, n=self.n)


_EMPTY3 = np.zeros((0, 0, 0))
_EMPTY1 = np.zeros(0)
_NOIDX = {}


def _noidx(n):
    if n not in _NOIDX:
        _NOIDX[n] = np.full(n, -1, dtype=np.int64)
    return _NOIDX[n]


def _sweep(axis, f, table, forward, out, coef, sign, psi=None, prof=None, ghost=None):
    W = table.plus if forward else table.minus
    off = table.L - 1 if forward else table.L
    cfull = coef.shape != (1, 1, 1)
    if prof is None or psi is None or psi.shape[0] == 0:
        pidx, pb, pa, pk, ps = _noidx(W.shape[0]), _EMPTY1, _EMPTY1, _EMPTY1, _EMPTY3
    else:
        pidx, pb, pa, pk, ps = prof.pidx, prof.b, prof.a, prof.kinv_arr, psi
    if axis == 2:
        W = table.plus_T if forward else table.minus_T
    sx, sy, sz = _stencil.sweeps()
    if axis == 0:
        sx(f, W, off, out, coef, cfull, sign, ps, pidx, pb, pa, pk)
    elif axis == 1:
        sy(f, W, off, out, coef, cfull, sign, ps, pidx, pb, pa, pk)
    else:
        g = _EMPTY3 if ghost is None else ghost
        sz(f, W, off, out, coef, cfull, sign, ps, pidx, pb, pa, pk, g)


_ONE = np.ones((1, 1, 1))


def _curl(fields, grid, targets, forward):
    out = {}
    for comp in targets:
        acc = np.zeros(grid.component_shape(comp))
        for ax_name, src, sign in CURL_TERMS[comp]:
            a = AXES.index(ax_name)
            # the stored H signs include the minus of Faraday's law
            s = -sign if forward else sign
            _sweep(a, fields[src], grid.tables[a], forward, acc, _ONE, s)
        out[comp] = acc
    return out


def apply_curl_E(fields, grid: StaggeredGrid3D) -> dict:
    """``curl E`` at the H positions using the forward tables (zero ghosts)."""
    return _curl(fields, grid, H_COMPONENTS, True)


def apply_curl_H(fields, grid: StaggeredGrid3D) -> dict:
    """``curl H`` at the E positions using the backward tables (zero ghosts)."""
    return _curl(fields, grid, E_COMPONENTS, False)


def divergence_H(fields, grid: StaggeredGrid3D) -> np.ndarray:
    """Forward-difference divergence of H at the cell centres (I, J, K)."""
    nx, ny, nz = grid.shape
    out = np.zeros((nx - 1, ny - 1, nz - 1))
    for a, comp in enumerate(H_COMPONENTS):
        _sweep(a, fields[comp], grid.tables[a], True, out, _ONE, 1.0)
    return out


# --------------------------------------------------------------------------- sources and receivers


def gaussian_derivative(fc: float, t0: float | None = None):
    """First derivative of a Gaussian with spectral peak at ``fc``, unit peak amplitude.

    Returns ``(waveform, support_end)``; the waveform is exactly zero
    outside ``[0, 2 t0]``.
    """
    if fc <= 0:
        raise ValueError("center frequency must be positive")
    t0 = 1.5 / fc if t0 is None else t0
    a = 2.0 * (math.pi * fc) ** 2
    amp = math.sqrt(2.0 * a * math.e)

    def wave(t):
        t = np.asarray(t, dtype=float)
        x = t - t0
        w = -amp * x * np.exp(-a * x * x)
        return np.where((t >= 0) & (t <= 2 * t0), w, 0.0)

    return wave, 2.0 * t0


def _window(coords, x, L):
    n = len(coords)
    width = min(2 * L, n)
    j = int(np.searchsorted(coords, x)) - width // 2
    j = min(max(j, 0), n - width)
    return j, width


def _axis_weights(coords, x, L):
    j, width = _window(coords, x, L)
    nodes = coords[j:j + width]
    if x < nodes[0] or x > nodes[-1]:
        raise ValueError(f"coordinate {x} outside the grid")
    if width % 2:
        raise ValueError("axis too short for interpolation")
    st = NodeStencil(float(x), tuple(nodes), width // 2)
    return np.arange(j, j + width), interpolation_weights(st).weights


def tensor_weights(grid: StaggeredGrid3D, comp: str, pos, L: int | None = None):
    """Flat gather indices and weights interpolating ``comp`` to ``pos``."""
    L = grid.L if L is None else L
    coords = grid.component_coords(comp)
    shape = grid.component_shape(comp)
    parts = [_axis_weights(c, p, L) for c, p in zip(coords, pos)]
    (ix, wx), (iy, wy), (iz, wz) = parts
    idx = (ix[:, None, None] * shape[1] + iy[None, :, None]) * shape[2] + iz[None, None, :]
    w = wx[:, None, None] * wy[None, :, None] * wz[None, None, :]
    keep = w != 0
    return idx[keep].ravel(), w[keep].ravel()


def dual_volume(grid: StaggeredGrid3D, comp: str) -> np.ndarray:
    """Control volume associated with each node of an E component."""
    lens = []
    for a, axis in enumerate(grid.axes):
        if comp[1] == AXES[a]:
            lens.append(axis.spacings)
        else:
            x = axis.nodes
            d = np.empty(len(x))
            d[1:-1] = 0.5 * (x[2:] - x[:-2])
            d[0] = 0.5 * (x[1] - x[0])
            d[-1] = 0.5 * (x[-1] - x[-2])
            lens.append(d)
    return lens[0][:, None, None] * lens[1][None, :, None] * lens[2][None, None, :]


@dataclass
class SourceSpec:
    """Axis-aligned electric dipole with a sampled current waveform.

    ``waveform(t)`` is the source current (A m for a unit-length dipole).
    Injection weights are built by :meth:`Simulation` from the grid.
    """

    position: tuple
    orientation: str = "x"
    waveform: object = None
    support: float = 0.0
    moment: float = 1.0
    center_frequency: float | None = None
    index: np.ndarray = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)

    @property
    def component(self):
        return "E" + self.orientation

    def amplitude(self, t):
        if self.waveform is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.moment * self.waveform(t)


@dataclass
class Receiver:
    position: tuple
    component: str = "Ex"
    index: np.ndarray = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)


def complex_frequency(omega, omega0):
    return (1.0 + 1.0j) * np.sqrt(np.asarray(omega, dtype=float) * omega0)


@dataclass
class SpectralAccumulator:
    """Running sums ``sum_n value(t_n) exp(i omega' t_n) dt`` per receiver and frequency."""

    omegas: np.ndarray
    omega0: float
    dt: float
    components: tuple
    sums: np.ndarray = None
    source_sum: np.ndarray = None
    source_scale: np.ndarray = None

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        nr, nf = len(self.components), len(self.omegas)
        if self.sums is None:
            self.sums = np.zeros((nr, nf), dtype=complex)
        if self.source_sum is None:
            self.source_sum = np.zeros(nf, dtype=complex)
            self.source_scale = np.zeros(nf)

    @property
    def omega_prime(self):
        return complex_frequency(self.omegas, self.omega0)

    def kernel(self, t):
        return np.exp(1j * self.omega_prime * t) * self.dt

    def add_source(self, t, value):
        k = self.kernel(t)
        self.source_sum += value * k
        self.source_scale += abs(value) * np.abs(k)


def accumulate_spectrum(values, acc: SpectralAccumulator, t: float, rows=None):
    """Add receiver samples taken at time ``t`` (rows default: all)."""
    k = acc.kernel(t)
    if rows is None:
        acc.sums += np.asarray(values)[:, None] * k[None, :]
    else:
        acc.sums[rows] += np.asarray(values)[:, None] * k[None, :]
    return acc


def check_convergence(previous, current, tol: float):
    """Max over receivers of ``|current - previous| / |current|``; converged if below tol.

    Returns ``(converged, change)``.  Receivers whose value and change
    are both zero contribute zero.
    """
    previous = np.asarray(previous)
    current = np.asarray(current)
    diff = np.abs(current - previous)
    mag = np.abs(current)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(diff == 0, 0.0, diff / mag)
    change = float(rel.max()) if rel.size else 0.0
    return change < tol, change


def green_functions(acc: SpectralAccumulator, rel_threshold: float = 1e-10):
    """Green's functions per receiver row and frequency.

    Returns ``(green, reliable)``: E rows are scaled by
    ``sqrt(-i omega / (2 omega0))``, H rows are the raw ratio.
    Frequencies whose source spectrum is negligible against its
    absolute sum are flagged unreliable and set to NaN.
    """
    js = acc.source_sum
    reliable = np.abs(js) > rel_threshold * np.maximum(acc.source_scale, 1e-300)
    reliable &= acc.source_scale > 0
    safe = np.where(reliable, js, 1.0)
    ratio = acc.sums / safe[None, :]
    factor = np.sqrt(-1j * acc.omegas / (2.0 * acc.omega0))
    green = np.empty_like(ratio)
    for r, comp in enumerate(acc.components):
        green[r] = ratio[r] * factor if comp.startswith("E") else ratio[r]
    # no source and no field: report zeros rather than 0/0
    quiet = ~reliable[None, :] & (acc.sums == 0)
    green[~reliable[None, :] & ~quiet] = np.nan
    green[quiet] = 0.0
    return green, reliable


# --------------------------------------------------------------------------- stepping


def leapfrog_step(fields: FieldState, sim: "Simulation"):
    """Advance ``fields`` from step n to n+1 in place."""
    sim.step(fields)
    return fields


@dataclass
class RunResult:
    green: np.ndarray
    reliable: np.ndarray
    accumulator: SpectralAccumulator
    steps: int
    converged: bool
    history: list
    stability: StabilityReport
    wall_time: float
    step_time: float
    traces: np.ndarray | None = None
    fields: FieldState | None = None


class Simulation:
    """Grid, medium, boundaries, source and receivers for one run.

    Parameters
    ----------
    grid, medium
        From :mod:`gridgen` and :mod:`medium`.
    frequencies
        Requested frequencies in Hz.
    source
        :class:`SourceSpec`; ``waveform=None`` gives a derivative-of-Gaussian
        pulse with center frequency ``c_min / (10 max cell size)``.
    receivers
        List of :class:`Receiver`.
    dt
        Time step; defaults to ``safety`` times the stability bound.
    """

    def __init__(self, grid: StaggeredGrid3D, medium: FictitiousMedium, frequencies,
                 source: SourceSpec, receivers, dt: float | None = None, safety: float = 0.9,
                 cpml: CpmlConfig | None = CpmlConfig(), tol: float = 1e-5, cadence: int = 100,
                 t_max: float | None = None, blowup: float = 1e6):
        self.grid = grid
        self.medium = medium
        self.frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
        if np.any(self.frequencies <= 0):
            raise ValueError("frequencies must be positive")
        self.source = source
        self.receivers = list(receivers)
        for comp, eps in zip(E_COMPONENTS, (medium.eps_xx, medium.eps_yy, medium.eps_zz)):
            if eps.shape != grid.component_shape(comp):
                raise ValueError(f"medium {comp} shape {eps.shape} does not match the grid")
            if np.any(eps <= 0):
                raise ValueError(
                    "air or zero conductivity inside the time-stepping grid; "
                    "place the air-water interface at the grid top and enable the airwave boundary"
                )
        self.stability = stability_report(grid, medium.c_max, safety)
        self.dt = self.stability.dt if dt is None else float(dt)
        self.tol = tol
        self.cadence = int(cadence)
        self.blowup = blowup
        max_cell = max(float(a.spacings.max()) for a in grid.axes)
        if source.waveform is None:
            fc = medium.c_min / (10.0 * max_cell)
            source.waveform, source.support = gaussian_derivative(fc)
            source.center_frequency = fc
        fsrc = source.center_frequency or medium.c_min / (10.0 * max_cell)
        if t_max is None:
            lo = np.array([a.interior[0] for a in grid.axes])
            hi = np.array([a.interior[1] for a in grid.axes])
            t_max = source.support + 4.0 * float(np.linalg.norm(hi - lo)) / medium.c_min
        self.t_max = t_max
        self.cE = {c: self.dt / e for c, e in zip(E_COMPONENTS,
                                                  (medium.eps_xx, medium.eps_yy, medium.eps_zz))}
        self.cH = np.full((1, 1, 1), self.dt / medium.mu)
        self.cpml = build_cpml(grid, self.dt, medium.c_max, fsrc, cpml) if cpml else None
        if self.cpml is not None:
            for prof in self.cpml.profiles.values():
                prof.kinv_arr = np.ascontiguousarray(prof.kinv)
        self.airwave: AirwavePlan | None = build_airwave(grid) if grid.airwave else None
        comp = source.component
        idx, w = tensor_weights(grid, comp, source.position)
        vol = dual_volume(grid, comp).ravel()[idx]
        source.index, source.weights = idx, w / vol
        self._src_coef = self.cE[comp].ravel()[idx] * source.weights
        for rec in self.receivers:
            rec.index, rec.weights = tensor_weights(grid, rec.component, rec.position)
        self.omega0 = medium.omega0
        self._ghost_e = {"Ex": None, "Ey": None}
        self._ghost_h = {"Hx": None, "Hy": None}

    # -- one step -------------------------------------------------------------

    def _update(self, fields: FieldState, targets, forward, coef_of, ghosts):
        grid = self.grid
        for comp in targets:
            out = fields[comp]
            coef = coef_of(comp)
            for ax_name, src, sign in CURL_TERMS[comp]:
                a = AXES.index(ax_name)
                psi = prof = None
                if self.cpml is not None:
                    psi = self.cpml.psi[(comp, a)]
                    prof = self.cpml.profiles[(a, forward)]
                ghost = ghosts.get(src) if a == 2 else None
                _sweep(a, fields[src], grid.tables[a], forward, out, coef, sign, psi, prof, ghost)

    def step(self, fields: FieldState):
        n = fields.n
        ghosts = {}
        if self.airwave is not None:
            ghosts["Ex"] = self.airwave.e_ghosts(fields.Ex[:, :, 0], "Ex")
            ghosts["Ey"] = self.airwave.e_ghosts(fields.Ey[:, :, 0], "Ey")
        self._update(fields, H_COMPONENTS, True, lambda c: self.cH, ghosts)
        ghosts = {}
        if self.airwave is not None:
            ghosts["Hx"], ghosts["Hy"] = self.airwave.h_ghosts(fields.Hz[:, :, 0])
        self._update(fields, E_COMPONENTS, False, lambda c: self.cE[c], ghosts)
        t_half = (n + 0.5) * self.dt
        if t_half <= self.source.support:
            j = float(self.source.amplitude(t_half))
            if j != 0.0:
                flat = fields[self.source.component].reshape(-1)
                np.subtract.at(flat, self.source.index, self._src_coef * j)
        fields.n = n + 1

    def sample(self, fields: FieldState, comps):
        rows = [r for r, rec in enumerate(self.receivers) if rec.component in comps]
        vals = np.array([
            np.dot(fields[self.receivers[r].component].reshape(-1)[self.receivers[r].index],
                   self.receivers[r].weights) for r in rows
        ])
        return rows, vals

    # -- full run -------------------------------------------------------------

    def run(self, max_steps: int | None = None, fields: FieldState | None = None,
            record_traces: bool = False, min_steps: int = 0, progress=None) -> RunResult:
        grid = self.grid
        fields = FieldState.zeros(grid) if fields is None else fields
        comps = [r.component for r in self.receivers]
        acc = SpectralAccumulator(2 * np.pi * self.frequencies, self.omega0, self.dt, tuple(comps))
        n_cap = int(math.ceil(self.t_max / self.dt))
        if max_steps is not None:
            n_cap = min(n_cap, max_steps) if min_steps == 0 else max_steps
        support_steps = int(math.ceil(self.source.support / self.dt))
        # source spectrum with the same half-step samples as the injection
        ns = np.arange(support_steps + 1)
        th = (ns + 0.5) * self.dt
        jv = self.source.amplitude(th)
        for t, v in zip(th, jv):
            if v != 0.0:
                acc.add_source(t, v)
        e_rows = [r for r, c in enumerate(comps) if c in E_COMPONENTS]
        h_rows = [r for r, c in enumerate(comps) if c in H_COMPONENTS]
        low = int(np.argmin(acc.omegas))
        history = []
        traces = [] if record_traces else None
        # growth is judged on E; H carries a different unit scale
        envelope = fields.max_abs(E_COMPONENTS)
        prev = None
        converged = False
        t_start = time.perf_counter()
        steps = 0
        log.info("run: %d max steps, dt=%.6g s, grid %s", n_cap, self.dt, grid.shape)
        while steps < n_cap:
            self.step(fields)
            steps += 1
            n = fields.n
            if h_rows:
                _, hv = self.sample(fields, H_COMPONENTS)
                accumulate_spectrum(hv, acc, (n - 0.5) * self.dt, h_rows)
            if e_rows:
                _, ev = self.sample(fields, E_COMPONENTS)
                accumulate_spectrum(ev, acc, n * self.dt, e_rows)
            if record_traces:
                traces.append(self._trace(fields))
            if n * self.dt <= self.source.support:
                envelope = max(envelope, fields.max_abs(E_COMPONENTS))
            if steps % self.cadence == 0 or steps == n_cap:
                m = fields.max_abs(E_COMPONENTS)
                if not np.isfinite(m) or not np.isfinite(fields.max_abs(H_COMPONENTS)):
                    raise InstabilityError(f"non-finite field at step {n}", n)
                if envelope > 0 and m > self.blowup * envelope:
                    raise InstabilityError(
                        f"E field grew {m / envelope:.3g}x above its reference envelope at step {n}", n)
                if envelope == 0 and m > 0:
                    envelope = m
                entry = {"step": n, "time": n * self.dt, "max_abs": m,
                         "wall": time.perf_counter() - t_start, "change": None}
                if n * self.dt > self.source.support:
                    cur = acc.sums[:, low].copy()
                    if prev is not None:
                        ok, change = check_convergence(prev, cur, self.tol)
                        entry["change"] = change
                        if ok and steps >= min_steps:
                            converged = True
                    prev = cur
                history.append(entry)
                log.info("step %d t=%.4g s max|F|=%.4g change=%s wall=%.2fs", n, n * self.dt, m,
                         entry["change"], entry["wall"])
                if progress is not None:
                    progress(entry)
                if converged:
                    break
        wall = time.perf_counter() - t_start
        green, reliable = green_functions(acc)
        return RunResult(green, reliable, acc, steps, converged, history, self.stability, wall,
                         wall / max(steps, 1), np.array(traces) if record_traces else None, fields)

    def _trace(self, fields):
        return np.array([np.dot(fields[r.component].reshape(-1)[r.index], r.weights)
                         for r in self.receivers])
