"""Finite-difference and interpolation weights from Vandermonde systems.

The weights for the value and derivatives of a function at a point ``x``
sampled at nodes ``x_0..x_n`` are the rows of ``[V^T]^{-1}``, where
``V^T`` is the transposed Vandermonde matrix of the offsets ``x_j - x``.
Row ``i`` times ``i!`` gives the ``i``-th derivative operator.  Rows are
obtained with the Bjorck-Pereyra algorithms, which cost O(n^2) per
right-hand side and never form the matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NodeStencil",
    "WeightRow",
    "UniformStaggeredWeights",
    "solve_vandermonde",
    "solve_vandermonde_transposed",
    "vandermonde_rows",
    "interpolation_weights",
    "uniform_staggered_weights",
    "geometric_stencil_offsets",
    "scaled_region_weights",
]


@dataclass(frozen=True)
class NodeStencil:
    """Target point and the 2L sample nodes that surround it."""

    center: float
    nodes: tuple[float, ...]
    half_length: int

    def __post_init__(self):
        nodes = tuple(float(v) for v in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if self.half_length < 1:
            raise ValueError("half_length must be >= 1")
        if len(nodes) != 2 * self.half_length:
            raise ValueError(
                f"expected {2 * self.half_length} nodes, got {len(nodes)}"
            )
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise ValueError("stencil nodes must be distinct and ascending")

    @classmethod
    def staggered(cls, center, nodes):
        """Build a stencil and check that ``center`` sits in the middle.

        Exactly L nodes must lie strictly below and L strictly above the
        center; that layout keeps the system invertible for every
        derivative row.
        """
        nodes = tuple(nodes)
        half = len(nodes) // 2
        st = cls(center, nodes, half)
        below = sum(1 for v in st.nodes if v < center)
        above = sum(1 for v in st.nodes if v > center)
        if below != half or above != half:
            raise ValueError("staggered stencil needs L nodes on each side")
        return st

    @property
    def offsets(self) -> np.ndarray:
        return np.asarray(self.nodes) - self.center


@dataclass(frozen=True)
class WeightRow:
    """Weights applied to nodal samples; carries units of m^-order."""

    weights: np.ndarray
    derivative_order: int

    def apply(self, samples) -> float:
        return float(np.dot(self.weights, samples))


@dataclass(frozen=True)
class UniformStaggeredWeights:
    """Dimensionless b_l for the uniform staggered first derivative.

    The weight for the node at offset ``+(2l-1) dx/2`` is
    ``b_l / ((2l-1) dx)`` and its mirror image carries the opposite sign.
    """

    b: np.ndarray

    @property
    def half_length(self) -> int:
        return len(self.b)

    def stencil_weights(self, dx: float) -> np.ndarray:
        """Weights at offsets ``-(2L-1)dx/2 .. +(2L-1)dx/2`` in ascending order."""
        odd = 2.0 * np.arange(1, len(self.b) + 1) - 1.0
        right = self.b / (odd * dx)
        return np.concatenate([-right[::-1], right])


def solve_vandermonde(x, b) -> np.ndarray:
    """Solve ``V z = b`` with ``V[i, j] = x[j]**i`` (primal system).

    Bjorck-Pereyra elimination in O(n^2) operations.
    """
    x = np.asarray(x, dtype=float)
    z = np.array(b, dtype=float)
    n = len(x) - 1
    for k in range(n):
        for i in range(n, k, -1):
            z[i] -= x[k] * z[i - 1]
    for k in range(n - 1, -1, -1):
        for i in range(k + 1, n + 1):
            z[i] /= x[i] - x[i - k - 1]
        for i in range(k, n):
            z[i] -= z[i + 1]
    return z


def solve_vandermonde_transposed(x, f) -> np.ndarray:
    """Solve ``V^T a = f`` (dual system, polynomial interpolation).

    Returns the monomial coefficients of the polynomial through
    ``(x[j], f[j])``.
    """
    x = np.asarray(x, dtype=float)
    a = np.array(f, dtype=float)
    n = len(x) - 1
    for k in range(n):
        for i in range(n, k, -1):
            a[i] = (a[i] - a[i - 1]) / (x[i] - x[i - k - 1])
    for k in range(n - 1, -1, -1):
        for i in range(k, n):
            a[i] -= a[i + 1] * x[k]
    return a


def _check_distinct(offsets):
    if len(np.unique(offsets)) != len(offsets):
        raise ValueError("duplicate stencil nodes give a singular Vandermonde system")


def vandermonde_rows(stencil: NodeStencil, max_order: int) -> list[WeightRow]:
    """Derivative rows 0..max_order for a stencil.

    Row ``i`` is ``i!`` times row ``i`` of ``[V^T]^{-1}``; applied to
    ``f(x_j)`` it approximates ``f^{(i)}(center)``.
    """
    offsets = stencil.offsets
    n = len(offsets)
    if max_order < 0 or max_order >= n:
        raise ValueError(f"max_order must be in [0, {n - 1}], got {max_order}")
    _check_distinct(offsets)
    rows = []
    rhs = np.zeros(n)
    for order in range(max_order + 1):
        rhs[:] = 0.0
        rhs[order] = 1.0
        w = solve_vandermonde(offsets, rhs) * math.factorial(order)
        rows.append(WeightRow(w, order))
    return rows


def derivative_weights(offsets, order: int = 1) -> np.ndarray:
    """Weights for ``f^{(order)}`` at offset 0 from arbitrary distinct node offsets."""
    offsets = np.asarray(offsets, dtype=float)
    _check_distinct(offsets)
    rhs = np.zeros(len(offsets))
    rhs[order] = 1.0
    return solve_vandermonde(offsets, rhs) * math.factorial(order)


def interpolation_weights(stencil: NodeStencil) -> WeightRow:
    """Row-0 weights (interpolation to ``stencil.center``).

    A center that coincides with a node yields the 0/1 indicator row
    directly. Points outside the node hull are rejected.
    """
    nodes = np.asarray(stencil.nodes)
    c = stencil.center
    if c < nodes[0] or c > nodes[-1]:
        raise ValueError(f"point {c} lies outside the stencil hull [{nodes[0]}, {nodes[-1]}]")
    hit = np.flatnonzero(nodes == c)
    if hit.size:
        w = np.zeros(len(nodes))
        w[hit[0]] = 1.0
        return WeightRow(w, 0)
    return vandermonde_rows(stencil, 0)[0]


def uniform_staggered_weights(L: int) -> UniformStaggeredWeights:
    """Coefficients b_1..b_L for the order-2L uniform staggered derivative.

    Solves ``sum_l x_l^p b_l = delta_{p0}`` for p < L, with ``x_l = (2l-1)^2``.
    """
    if not 1 <= L <= 8:
        raise ValueError("L must be between 1 and 8")
    x = (2.0 * np.arange(1, L + 1) - 1.0) ** 2
    z = np.zeros(L)
    z[0] = 1.0
    return UniformStaggeredWeights(solve_vandermonde(x, z))


def geometric_stencil_offsets(r: float, L: int, target: str) -> np.ndarray:
    """Node offsets, in units of the local cell size, inside a constant-r region.

    For a grid ``x_i = x_0 + dx (r^i - 1)/(r - 1)`` the staggered nodes
    sit at the cell midpoints.  Around any node ``i`` deep inside the
    region the stencil offsets equal ``dx r^i`` times the pattern
    returned here.

    ``target='staggered'`` gives the reference nodes ``x_{i-L+1}..x_{i+L}``
    seen from the midpoint of cell ``[x_i, x_{i+1}]``; ``target='reference'``
    gives the midpoints of cells ``i-L..i+L-1`` seen from ``x_i``.
    """
    m_ref = np.arange(-L + 1, L + 1)
    m_stag = np.arange(-L, L)
    if r == 1.0:
        if target == "staggered":
            return m_ref - 0.5
        return m_stag + 0.5
    g = lambda m: (r ** m.astype(float) - 1.0) / (r - 1.0)  # noqa: E731
    if target == "staggered":
        return g(m_ref) - 0.5
    if target == "reference":
        return g(m_stag) + 0.5 * r ** m_stag.astype(float)
    raise ValueError("target must be 'staggered' or 'reference'")


def scaled_region_weights(base: WeightRow, r: float, i: int, dx: float) -> WeightRow:
    """Derivative weights at node ``i`` of a constant-r region.

    ``base`` holds the unit-spacing weights ``a_l`` for the region's offset
    pattern; the weights at node ``i`` are ``a_l / (dx r^i)``.
    """
    scale = dx * r ** i
    return WeightRow(np.asarray(base.weights) / scale ** max(base.derivative_order, 0),
                     base.derivative_order)
