"""1D node sets with power-law stretching and their 3D tensor grids.

Each axis carries reference nodes ``x_i`` and staggered nodes ``x_I``
at the cell midpoints.  Stretched segments are geometric progressions
whose common ratio is found by fixed-point iteration so that the
segment covers its span exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .fdcoeff import (
    NodeStencil,
    derivative_weights,
    geometric_stencil_offsets,
)

__all__ = [
    "StretchSpec",
    "UniformSegment",
    "StretchedSegment",
    "Axis1D",
    "OperatorTable",
    "StaggeredGrid3D",
    "solve_stretch_factor",
    "estimate_interval_count",
    "build_axis",
    "assemble_grid",
    "uniform_axis",
]

MAX_FIXED_POINT_ITER = 200
FIXED_POINT_STEP_TOL = 1e-14


@dataclass(frozen=True)
class StretchSpec:
    span: float
    min_spacing: float
    intervals: int

    def __post_init__(self):
        if self.intervals < 1:
            raise ValueError("intervals must be >= 1")
        if self.min_spacing <= 0:
            raise ValueError("min_spacing must be positive")

    def residual(self, r: float) -> float:
        """``dx (r^n - 1)/(r - 1) - L`` for a trial ratio."""
        n, dx = self.intervals, self.min_spacing
        u = r - 1.0
        if u == 0.0:
            return n * dx - self.span
        return dx * math.expm1(n * math.log1p(u)) / u - self.span


def solve_stretch_factor(spec: StretchSpec, r0: float = 1.5, tol: float = 1e-9,
                         history: list | None = None, accelerate: bool = True) -> float:
    """Common ratio r with ``dx (r^n - 1)/(r - 1) = L``.

    The basic step is the fixed-point map ``r <- g(r) = (1 + (L/dx)(r - 1))**(1/n)``,
    a contraction for any start ``r0 > 1`` that approaches the root from
    the side it starts on.  The map is evaluated on ``u = r - 1`` with
    log1p/expm1 so ratios close to 1 keep their relative precision.

    Near ``L/(n dx) = 1`` the contraction factor tends to 1, so with
    ``accelerate`` the iteration is safeguarded by the concavity of
    ``h(u) = g(u) - u``: a Newton step taken from above the root stays
    above it, and a secant between a point below and a point above lands
    below it.  Every accepted iterate is the better of the plain step and
    the accelerated one on the starting side, so the sequence stays
    monotone.  Stops when successive iterates differ by less than 1e-14
    or after 200 evaluations of ``g``.  Accepted iterates are appended to
    ``history`` when given.
    """
    n, dx, span = spec.intervals, spec.min_spacing, spec.span
    q = span / dx
    if span < n * dx * (1.0 - 1e-15):
        raise ValueError(f"span {span} is shorter than {n} intervals of {dx}")
    if span <= n * dx * (1.0 + 1e-15) or n == 1:
        return 1.0
    if r0 <= 1.0:
        raise ValueError("initial guess must exceed 1")

    def g(u):
        return math.expm1(math.log1p(q * u) / n)

    def dh(u, gu):
        return q / (n * (1.0 + q * u)) * (1.0 + gu) - 1.0

    u = float(r0) - 1.0
    gu = g(u)
    evals = 1
    if history is not None:
        history.append(1.0 + u)
    from_above = gu < u
    other = None  # bracketing point on the far side of the root: (u, g(u) - u)
    while evals < MAX_FIXED_POINT_ITER:
        h = gu - u
        if h == 0.0:
            break
        nxt = gu  # plain fixed-point step
        if accelerate:
            slope = dh(u, gu)
            cand = None
            if from_above and slope < 0.0:
                cand = u - h / slope  # Newton from above stays above
            elif not from_above:
                if other is None and slope < 0.0:
                    # Newton from below overshoots: keep it as the far point
                    t = u - h / slope
                    gt = g(t)
                    evals += 1
                    other = (t, gt - t, gt)
                if other is not None:
                    t, ht, gt = other
                    if ht < 0.0:
                        cand = u - h * (t - u) / (ht - h)  # secant lands below
                        # refresh the far point with a Newton step from above
                        st = dh(t, gt)
                        if st < 0.0:
                            t2 = t - ht / st
                            if u < t2 < t:
                                gt2 = g(t2)
                                evals += 1
                                if gt2 - t2 <= 0.0:
                                    other = (t2, gt2 - t2, gt2)
            if cand is not None and (cand - nxt) * (-1.0 if from_above else 1.0) > 0.0:
                gc = g(cand)
                evals += 1
                hc = gc - cand
                same_side = hc <= 0.0 if from_above else hc >= 0.0
                if same_side:
                    nxt = cand
        done = abs(nxt - u) < FIXED_POINT_STEP_TOL
        if accelerate and done and nxt == gu:
            # a tiny plain step says little when g' is close to 1
            slope = dh(u, gu)
            done = slope == 0.0 or abs(h / slope) < FIXED_POINT_STEP_TOL
        u = nxt
        gu = g(u)
        evals += 1
        if history is not None:
            history.append(1.0 + u)
        if done:
            break
    r = 1.0 + u
    if abs(spec.residual(r)) > tol * span:
        raise RuntimeError(
            f"stretch factor iteration did not reach tolerance (r={r}, "
            f"residual={spec.residual(r):.3e})"
        )
    return r


def estimate_interval_count(span: float, min_spacing: float, r: float) -> int:
    """Ceiling estimate of the interval count for a given ratio."""
    if r <= 1.0:
        raise ValueError("stretch factor must exceed 1")
    x = math.log1p(span / min_spacing * (r - 1.0)) / math.log1p(r - 1.0)
    # guard against 20.0000000001 from round-off
    return max(1, math.ceil(x - 1e-9))


@dataclass(frozen=True)
class UniformSegment:
    spacing: float
    cells: int


@dataclass(frozen=True)
class StretchedSegment:
    """Geometric segment of ``cells`` intervals covering ``span``.

    With ``min_spacing=None`` the progression continues from the size of
    the adjacent cell of the neighbouring segment (its first cell is that
    size times r).  ``growth='forward'`` grows toward +x, ``'backward'``
    shrinks toward +x.
    """

    span: float
    cells: int
    min_spacing: float | None = None
    growth: str = "forward"
    r0: float = 1.5


Segment = Union[UniformSegment, StretchedSegment]

UNIFORM, STRETCHED, PML = 0, 1, 2


@dataclass
class Axis1D:
    """Reference/staggered nodes of one axis.

    ``cell_tag[c]`` is one of UNIFORM/STRETCHED/PML for the cell
    ``[x_c, x_{c+1}]``; ``cell_region`` numbers contiguous regions of
    constant ratio ``region_ratio[region]``.
    """

    nodes: np.ndarray
    cell_tag: np.ndarray
    cell_region: np.ndarray
    region_ratio: list
    pml_lo: int = 0
    pml_hi: int = 0
    stretch_factors: list = field(default_factory=list)

    @property
    def staggered(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def spacings(self) -> np.ndarray:
        """Reference spacings ``dx_i = x_i - x_{i-1}`` (one per cell)."""
        return np.diff(self.nodes)

    @property
    def staggered_spacings(self) -> np.ndarray:
        return np.diff(self.staggered)

    @property
    def interior(self) -> tuple[float, float]:
        """Coordinate range excluding the PML cells."""
        return float(self.nodes[self.pml_lo]), float(self.nodes[self.n - 1 - self.pml_hi])

    def extended(self, L: int):
        """Nodes with L ghost cells of edge size appended on either side."""
        d_lo = self.nodes[1] - self.nodes[0]
        d_hi = self.nodes[-1] - self.nodes[-2]
        lo = self.nodes[0] - d_lo * np.arange(L, 0, -1)
        hi = self.nodes[-1] + d_hi * np.arange(1, L + 1)
        return np.concatenate([lo, self.nodes, hi])

    def to_text(self) -> str:
        return "".join(f"{v!r}\n" for v in self.nodes.tolist())

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path, pml_lo=0, pml_hi=0):
        nodes = np.loadtxt(path, ndmin=1)
        ncell = len(nodes) - 1
        tag = np.full(ncell, UNIFORM)
        return cls(nodes, tag, np.zeros(ncell, dtype=int), [None], pml_lo, pml_hi)


def _resolve_segments(segments):
    """Turn a segment list into per-segment cell-size arrays."""
    sizes = [None] * len(segments)
    ratios = [None] * len(segments)
    for k, seg in enumerate(segments):
        if isinstance(seg, UniformSegment):
            if seg.spacing <= 0 or seg.cells < 1:
                raise ValueError(f"segment {k}: bad uniform segment {seg}")
            sizes[k] = np.full(seg.cells, float(seg.spacing))
            ratios[k] = 1.0
    for k, seg in enumerate(segments):
        if not isinstance(seg, StretchedSegment):
            continue
        if seg.span <= 0 or seg.cells < 1:
            raise ValueError(f"segment {k}: bad stretched segment {seg}")
        if seg.growth not in ("forward", "backward"):
            raise ValueError(f"segment {k}: growth must be forward or backward")
        if seg.min_spacing is not None:
            r = solve_stretch_factor(StretchSpec(seg.span, seg.min_spacing, seg.cells), seg.r0)
            cells = seg.min_spacing * r ** np.arange(seg.cells)
        else:
            nb = k - 1 if seg.growth == "forward" else k + 1
            if not 0 <= nb < len(segments) or sizes[nb] is None:
                raise ValueError(
                    f"segment {k}: no neighbouring segment to inherit the cell size from"
                )
            d = sizes[nb][-1] if seg.growth == "forward" else sizes[nb][0]
            # n cells d r, .., d r^n  <=>  n+1 cells from d over span + d
            r = solve_stretch_factor(StretchSpec(seg.span + d, d, seg.cells + 1), seg.r0)
            cells = d * r ** np.arange(1, seg.cells + 1)
        if seg.growth == "backward":
            cells = cells[::-1]
        sizes[k] = cells
        ratios[k] = r
    return sizes, ratios


def build_axis(segments: Sequence[Segment], pml_layers=0, origin: float = 0.0) -> Axis1D:
    """Concatenate segments into an axis and pad with equal-size PML cells.

    ``pml_layers`` is an int or a ``(lo, hi)`` pair.  ``origin`` is the
    coordinate of the first interior node.
    """
    if not segments:
        raise ValueError("at least one segment is required")
    if isinstance(pml_layers, (int, np.integer)):
        pml_lo = pml_hi = int(pml_layers)
    else:
        pml_lo, pml_hi = (int(v) for v in pml_layers)
    if pml_lo < 0 or pml_hi < 0:
        raise ValueError("pml_layers must be non-negative")
    sizes, ratios = _resolve_segments(segments)
    cells, tags, regions, region_ratio, factors = [], [], [], [], []
    for k, (seg, sz, r) in enumerate(zip(segments, sizes, ratios)):
        if np.any(sz <= 0):
            raise ValueError(f"segment {k}: non-monotonic layout")
        stretched = isinstance(seg, StretchedSegment) and r != 1.0
        if isinstance(seg, StretchedSegment):
            factors.append(r)
        cells.append(sz)
        tags.append(np.full(len(sz), STRETCHED if stretched else UNIFORM))
        ratio = (r if seg_growth(seg) == "forward" else 1.0 / r) if stretched else 1.0
        if region_ratio and region_ratio[-1] == ratio:
            regions.append(np.full(len(sz), len(region_ratio) - 1))
        else:
            region_ratio.append(ratio)
            regions.append(np.full(len(sz), len(region_ratio) - 1))
    sz = np.concatenate(cells)
    tag = np.concatenate(tags)
    reg = np.concatenate(regions)
    if pml_lo:
        sz = np.concatenate([np.full(pml_lo, sz[0]), sz])
        tag = np.concatenate([np.full(pml_lo, PML), tag])
        reg = np.concatenate([np.full(pml_lo, -1), reg])
    if pml_hi:
        sz = np.concatenate([sz, np.full(pml_hi, sz[-1])])
        tag = np.concatenate([tag, np.full(pml_hi, PML)])
        reg = np.concatenate([reg, np.full(pml_hi, -2)])
    start = origin - sz[:pml_lo].sum()
    nodes = start + np.concatenate([[0.0], np.cumsum(sz)])
    # the interior origin node is placed exactly
    nodes[pml_lo] = origin
    return Axis1D(nodes, tag, reg, region_ratio, pml_lo, pml_hi, factors)


def seg_growth(seg):
    return getattr(seg, "growth", "forward")


def uniform_axis(spacing: float, cells: int, pml_layers=0, origin: float = 0.0) -> Axis1D:
    return build_axis([UniformSegment(spacing, cells)], pml_layers, origin)


class OperatorTable:
    """Staggered first-derivative weights along one axis.

    ``plus[s, m]`` weights reference samples ``s-L+1+m`` to give the
    derivative at staggered node ``s`` (midpoint of cell ``s``);
    ``minus[i, m]`` weights staggered samples ``i-L+m`` to give the
    derivative at reference node ``i``.  Samples outside the axis are
    ghost nodes spaced like the edge cell.
    """

    def __init__(self, axis: Axis1D, L: int, use_region_scaling: bool = True):
        self.L = L
        self.axis = axis
        x = axis.nodes
        n = len(x)
        xe = axis.extended(L)
        se = 0.5 * (xe[1:] + xe[:-1])
        plus = np.empty((n - 1, 2 * L))
        minus = np.empty((n, 2 * L))
        self.scaled_plus = np.zeros(n - 1, dtype=bool)
        self.scaled_minus = np.zeros(n, dtype=bool)
        base_cache = {}
        for s in range(n - 1):
            w = self._region_weights(s, "staggered", base_cache) if use_region_scaling else None
            if w is None:
                idx = np.arange(s - L + 1, s + L + 1) + L
                w = derivative_weights(xe[idx] - se[s + L])
            else:
                self.scaled_plus[s] = True
            plus[s] = w
        for i in range(n):
            w = self._region_weights(i, "reference", base_cache) if use_region_scaling else None
            if w is None:
                idx = np.arange(i - L, i + L) + L
                w = derivative_weights(se[idx] - x[i])
            else:
                self.scaled_minus[i] = True
            minus[i] = w
        self.plus = plus
        self.minus = minus
        # transposed copies for sweeps whose output axis is the fastest one
        self.plus_T = np.ascontiguousarray(plus.T)
        self.minus_T = np.ascontiguousarray(minus.T)
        for a in (self.plus, self.minus, self.plus_T, self.minus_T):
            a.setflags(write=False)

    def _region_weights(self, c, target, cache):
        """Scaled weights when every stencil cell lies in one constant-r region."""
        ax, L = self.axis, self.L
        reg = ax.cell_region
        ncell = len(reg)
        # cells touched by the stencil; either way the local size is cell c
        lo, hi = (c - L + 1, c + L - 1) if target == "staggered" else (c - L, c + L - 1)
        if lo < 0 or hi >= ncell or c >= ncell:
            return None
        region = reg[lo:hi + 1]
        if region[0] < 0 or np.any(region != region[0]):
            return None
        r = ax.region_ratio[region[0]]
        key = (r, target)
        if key not in cache:
            cache[key] = derivative_weights(geometric_stencil_offsets(r, L, target))
        return cache[key] / (ax.nodes[c + 1] - ax.nodes[c])

    @property
    def dmax(self) -> float:
        """Largest absolute row sum over both operator directions."""
        if self.plus.size == 0 and self.minus.size == 0:
            raise ValueError("empty operator table")
        return float(max(np.abs(self.plus).sum(axis=1).max(),
                         np.abs(self.minus).sum(axis=1).max()))

    def stencil(self, index: int, target: str) -> NodeStencil:
        L = self.L
        xe = self.axis.extended(L)
        se = 0.5 * (xe[1:] + xe[:-1])
        if target == "staggered":
            idx = np.arange(index - L + 1, index + L + 1) + L
            return NodeStencil(se[index + L], tuple(xe[idx]), L)
        idx = np.arange(index - L, index + L) + L
        return NodeStencil(self.axis.nodes[index], tuple(se[idx]), L)


@dataclass
class StaggeredGrid3D:
    """Tensor product of three axes and their derivative tables."""

    x: Axis1D
    y: Axis1D
    z: Axis1D
    L: int
    airwave: bool = False
    tables: tuple = field(default=None, repr=False)

    @property
    def axes(self):
        return (self.x, self.y, self.z)

    @property
    def shape(self):
        return tuple(a.n for a in self.axes)

    @property
    def n_nodes(self):
        nx, ny, nz = self.shape
        return nx * ny * nz

    @property
    def pml_layers(self):
        return tuple((a.pml_lo, a.pml_hi) for a in self.axes)

    @property
    def interior_shape(self):
        return tuple(a.n - a.pml_lo - a.pml_hi for a in self.axes)

    def component_shape(self, name: str):
        """Array extent of a field component on the staggered layout."""
        nx, ny, nz = self.shape
        stag = {
            "Ex": (1, 0, 0), "Ey": (0, 1, 0), "Ez": (0, 0, 1),
            "Hx": (0, 1, 1), "Hy": (1, 0, 1), "Hz": (1, 1, 0),
        }[name]
        return tuple(n - s for n, s in zip((nx, ny, nz), stag))

    def component_coords(self, name: str):
        """Per-axis coordinate vectors where a component lives."""
        stag = {
            "Ex": (1, 0, 0), "Ey": (0, 1, 0), "Ez": (0, 0, 1),
            "Hx": (0, 1, 1), "Hy": (1, 0, 1), "Hz": (1, 1, 0),
        }[name]
        return tuple(a.staggered if s else a.nodes for a, s in zip(self.axes, stag))

    def stencils(self, axis: int, direction: str):
        """All NodeStencils of one axis, ``direction`` 'forward' or 'backward'."""
        tab = self.tables[axis]
        if direction == "forward":
            return [tab.stencil(s, "staggered") for s in range(self.axes[axis].n - 1)]
        if direction == "backward":
            return [tab.stencil(i, "reference") for i in range(self.axes[axis].n)]
        raise ValueError("direction must be 'forward' or 'backward'")

    def describe(self) -> dict:
        return {
            "shape": list(self.shape),
            "interior_shape": list(self.interior_shape),
            "pml_layers": [list(p) for p in self.pml_layers],
            "half_length": self.L,
            "airwave": self.airwave,
            "min_spacing": [float(a.spacings.min()) for a in self.axes],
            "max_spacing": [float(a.spacings.max()) for a in self.axes],
            "stretch_factors": [list(map(float, a.stretch_factors)) for a in self.axes],
        }


def assemble_grid(ax: Axis1D, ay: Axis1D, az: Axis1D, L: int = 2,
                  airwave: bool = False) -> StaggeredGrid3D:
    """Combine axes and precompute the operator tables.

    With ``airwave`` the top of the z axis (index 0) is the air-water
    interface and must carry no PML cells.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    for name, a in zip("xyz", (ax, ay, az)):
        if a.n < 2 * L:
            raise ValueError(
                f"{name} axis has {a.n} nodes, too short for half-length {L}"
            )
    if airwave and az.pml_lo:
        raise ValueError("airwave boundary requires no PML on the top face")
    tables = tuple(OperatorTable(a, L) for a in (ax, ay, az))
    return StaggeredGrid3D(ax, ay, az, L, airwave, tables)
