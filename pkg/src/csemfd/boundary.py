"""Absorbing layers and the air-water continuation condition.

CPML
----
Every spatial derivative ``d`` evaluated inside a layer is replaced by
``d / kappa + psi`` with the recursive convolution
``psi <- b psi + a d``, where

    b = exp(-(sigma / kappa + alpha) dt)
    a = sigma / (kappa (sigma + kappa alpha)) (b - 1)

Profiles are graded polynomially with the normalized depth into the
layer; ``alpha`` decreases linearly from ``alpha_max`` at the inner
edge to zero at the outer edge.

Airwave
-------
Above the interface the fictitious wave speed is infinite, so the
fields are harmonic and decay upward: a horizontal Fourier mode
``exp(i k . x)`` is multiplied by ``exp(-|k| h)`` at height ``h``.  The
ghost levels used by vertical stencils crossing the interface are
synthesized this way every step: the horizontal E components are
continued from the interface level, and the horizontal H components at
the staggered air levels are built from ``Hz`` on the interface through
the potential relation ``Hx = (i kx / |k|) Hz``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gridgen import Axis1D, StaggeredGrid3D

__all__ = [
    "CpmlConfig",
    "CpmlProfile",
    "CpmlState",
    "AirwavePlan",
    "cpml_coefficients",
    "cpml_update",
    "build_cpml",
    "airwave_continue",
    "build_airwave",
]


@dataclass(frozen=True)
class CpmlConfig:
    grading_order: float = 2.0
    reflection: float = 1e-3
    kappa_max: float = 1.0
    alpha_max: float | None = None  # default pi * f_source


def cpml_coefficients(sigma, kappa, alpha, dt):
    """Recursion coefficients ``(b, a)`` for arrays of profile values."""
    sigma = np.asarray(sigma, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    b = np.exp(-(sigma / kappa + alpha) * dt)
    den = kappa * (sigma + kappa * alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(den > 0, sigma / np.where(den > 0, den, 1.0) * (b - 1.0), 0.0)
    return b, a


def cpml_update(raw, psi, b, a, kappa):
    """One recursion step; returns the adjusted derivative and updates ``psi`` in place."""
    psi *= b
    psi += a * raw
    return raw / kappa + psi


@dataclass
class CpmlProfile:
    """Layer coefficients at the positions of one axis.

    ``pidx[o]`` numbers the layer positions (-1 in the interior) and
    ``b, a, kinv`` are per position (identity values in the interior).
    """

    coords: np.ndarray
    sigma: np.ndarray
    kappa: np.ndarray
    alpha: np.ndarray
    b: np.ndarray
    a: np.ndarray
    pidx: np.ndarray
    layers: int

    @property
    def kinv(self):
        return 1.0 / self.kappa

    @property
    def count(self) -> int:
        return int((self.pidx >= 0).sum())

    @classmethod
    def passthrough(cls, n):
        z = np.zeros(n)
        return cls(z.copy(), z.copy(), np.ones(n), z.copy(), np.ones(n), z.copy(),
                   np.full(n, -1, dtype=np.int64), 0)

    @classmethod
    def build(cls, axis: Axis1D, staggered: bool, dt: float, c_ref: float,
              alpha_max: float, cfg: CpmlConfig = CpmlConfig()):
        x = axis.staggered if staggered else axis.nodes
        lo, hi = axis.interior
        n = len(x)
        depth = np.zeros(n)
        if axis.pml_lo:
            thick = lo - axis.nodes[0]
            depth = np.maximum(depth, (lo - x) / thick)
        if axis.pml_hi:
            thick = axis.nodes[-1] - hi
            depth = np.maximum(depth, (x - hi) / thick)
        depth = np.clip(depth, 0.0, 1.0)
        inside = depth > 0
        order = cfg.grading_order
        sig = np.zeros(n)
        for side, thick in (("lo", lo - axis.nodes[0]), ("hi", axis.nodes[-1] - hi)):
            if thick <= 0:
                continue
            smax = -(order + 1.0) * c_ref * math.log(cfg.reflection) / (2.0 * thick)
            mask = (x < lo) if side == "lo" else (x > hi)
            sig[mask] = smax * depth[mask] ** order
        kap = 1.0 + (cfg.kappa_max - 1.0) * depth ** order
        alp = np.where(inside, alpha_max * (1.0 - depth), 0.0)
        b, a = cpml_coefficients(sig, kap, alp, dt)
        b = np.where(inside, b, 1.0)
        a = np.where(inside, a, 0.0)
        pidx = np.full(n, -1, dtype=np.int64)
        pidx[inside] = np.arange(int(inside.sum()))
        return cls(x, sig, kap, alp, b, a, pidx, axis.pml_lo + axis.pml_hi)


# derivative terms of the curl: (target component, axis, differentiated component)
CURL_TERMS = {
    "Hx": (("y", "Ez", -1.0), ("z", "Ey", +1.0)),
    "Hy": (("z", "Ex", -1.0), ("x", "Ez", +1.0)),
    "Hz": (("x", "Ey", -1.0), ("y", "Ex", +1.0)),
    "Ex": (("y", "Hz", +1.0), ("z", "Hy", -1.0)),
    "Ey": (("z", "Hx", +1.0), ("x", "Hz", -1.0)),
    "Ez": (("x", "Hy", +1.0), ("y", "Hx", -1.0)),
}


@dataclass
class CpmlState:
    """Memory variables for the 12 curl derivative terms, allocated on layer slabs.

    ``profiles[(axis, staggered)]`` gives the coefficients; ``psi[(comp, axis)]``
    the memory array for the derivative along ``axis`` feeding ``comp``.
    """

    profiles: dict
    psi: dict = field(default_factory=dict)

    @classmethod
    def allocate(cls, grid: StaggeredGrid3D, profiles: dict):
        psi = {}
        for comp, terms in CURL_TERMS.items():
            shape = grid.component_shape(comp)
            for ax_name, _, _ in terms:
                a = "xyz".index(ax_name)
                # H components take D+ (staggered output), E components D- (reference output)
                staggered = comp.startswith("H")
                cnt = profiles[(a, staggered)].count
                others = [shape[d] for d in range(3) if d != a]
                psi[(comp, a)] = np.zeros((max(cnt, 0), others[0], others[1]))
        return cls(profiles, psi)

    def reset(self):
        for v in self.psi.values():
            v[...] = 0.0


def build_cpml(grid: StaggeredGrid3D, dt: float, c_ref: float, f_source: float,
               cfg: CpmlConfig = CpmlConfig()) -> CpmlState:
    alpha_max = cfg.alpha_max if cfg.alpha_max is not None else math.pi * f_source
    profiles = {}
    for a, axis in enumerate(grid.axes):
        for staggered in (False, True):
            if axis.pml_lo or axis.pml_hi:
                profiles[(a, staggered)] = CpmlProfile.build(axis, staggered, dt, c_ref,
                                                             alpha_max, cfg)
            else:
                n = axis.n - 1 if staggered else axis.n
                profiles[(a, staggered)] = CpmlProfile.passthrough(n)
    return CpmlState.allocate(grid, profiles)


def _wavenumbers(n, d):
    return 2.0 * np.pi * np.fft.fftfreq(n, d)


def airwave_continue(plane, heights, dx, dy):
    """Continue a horizontal plane upward to each height.

    ``plane`` has shape (nx, ny); returns (nx, ny, len(heights)).  Each
    mode is scaled by ``exp(-|k| h)``; the mean passes unchanged.
    """
    kx = _wavenumbers(plane.shape[0], dx)
    ky = _wavenumbers(plane.shape[1], dy)
    kh = np.hypot(kx[:, None], ky[None, :])
    spec = np.fft.fft2(plane)
    out = np.empty(plane.shape + (len(heights),))
    for g, h in enumerate(heights):
        out[:, :, g] = np.fft.ifft2(spec * np.exp(-kh * h)).real
    return out


def _check_uniform(axis: Axis1D, name):
    d = axis.spacings
    if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        raise ValueError(f"airwave boundary needs a uniform {name} axis (FFT spacing)")
    return float(d[0])


@dataclass
class AirwavePlan:
    """Per-level continuation factors for the ghost region above z index 0.

    E ghosts sit at heights ``g dz`` (g = 1..L-1), H ghosts at staggered
    heights ``(g - 1/2) dz`` (g = 1..L), with ``dz`` the top cell size.
    """

    dx: float
    dy: float
    dz: float
    L: int
    e_factors: dict
    h_factors: dict

    @property
    def e_heights(self):
        return self.dz * np.arange(1, self.L)

    @property
    def h_heights(self):
        return self.dz * (np.arange(1, self.L + 1) - 0.5)

    def e_ghosts(self, plane, comp):
        """Ghost levels of Ex or Ey from its interface plane."""
        fac = self.e_factors[comp]
        spec = np.fft.fft2(plane)
        out = np.empty(plane.shape + (max(self.L - 1, 0),))
        for g in range(self.L - 1):
            out[:, :, g] = np.fft.ifft2(spec * fac[g]).real
        return out

    def h_ghosts(self, hz_plane):
        """Ghost levels of (Hx, Hy) from Hz on the interface.

        ``hz_plane`` is (nx-1, ny-1) at (I, J); Hx ghosts are (nx, ny-1)
        at (i, J) and Hy ghosts (nx-1, ny) at (I, j).  The extra row is
        the periodic image of the first one.
        """
        spec = np.fft.fft2(hz_plane)
        out = []
        for comp in ("Hx", "Hy"):
            fac = self.h_factors[comp]
            nxh, nyh = hz_plane.shape
            shape = (nxh + 1, nyh) if comp == "Hx" else (nxh, nyh + 1)
            g_arr = np.empty(shape + (self.L,))
            for g in range(self.L):
                lvl = np.fft.ifft2(spec * fac[g]).real
                if comp == "Hx":
                    g_arr[:-1, :, g] = lvl
                    g_arr[-1, :, g] = lvl[0]
                else:
                    g_arr[:, :-1, g] = lvl
                    g_arr[:, -1, g] = lvl[:, 0]
            out.append(g_arr)
        return out[0], out[1]


def build_airwave(grid: StaggeredGrid3D) -> AirwavePlan:
    if grid.z.pml_lo:
        raise ValueError("airwave boundary requires no PML on the top face")
    dx = _check_uniform(grid.x, "x")
    dy = _check_uniform(grid.y, "y")
    dz = float(grid.z.nodes[1] - grid.z.nodes[0])
    L = grid.L
    nx, ny, _ = grid.shape
    plan = AirwavePlan(dx, dy, dz, L, {}, {})
    # Ex lives at (I, j), Ey at (i, J): both transformed on their own lattice
    for comp, shape in (("Ex", (nx - 1, ny)), ("Ey", (nx, ny - 1))):
        kx = _wavenumbers(shape[0], dx)[:, None]
        ky = _wavenumbers(shape[1], dy)[None, :]
        kh = np.hypot(kx, ky)
        plan.e_factors[comp] = [np.exp(-kh * h) for h in plan.e_heights]
    # Hz at (I, J) -> Hx at x_i = x_I - dx/2, Hy at y_j = y_J - dy/2
    kx = _wavenumbers(nx - 1, dx)[:, None]
    ky = _wavenumbers(ny - 1, dy)[None, :]
    kh = np.hypot(kx, ky)
    safe = np.where(kh > 0, kh, 1.0)
    ratio_x = np.where(kh > 0, 1j * kx / safe, 0.0) * np.exp(-1j * kx * dx / 2)
    ratio_y = np.where(kh > 0, 1j * ky / safe, 0.0) * np.exp(-1j * ky * dy / 2)
    plan.h_factors["Hx"] = [ratio_x * np.exp(-kh * h) for h in plan.h_heights]
    plan.h_factors["Hy"] = [ratio_y * np.exp(-kh * h) for h in plan.h_heights]
    return plan
