"""Reference solutions for validating the time-domain engine.

The whole-space field of an x-directed electric dipole of moment ``p``
in a conductor (time dependence ``exp(-i omega t)``) is

    E = (p / sigma) (k^2 G + grad d/dx G),   G = exp(i k r) / (4 pi r),

with ``k^2 = i omega mu sigma`` and ``Im k > 0``.  The closed form is
checked against quadrature of the Sommerfeld representation
``G = (1/4pi) int_0^inf (lambda / nu) exp(-nu |z|) J0(lambda rho) d lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .medium import MU0

__all__ = ["WholeSpaceParams", "wholespace_E", "wholespace_E_quadrature",
           "amplitude_phase_errors", "skin_depth"]


@dataclass(frozen=True)
class WholeSpaceParams:
    sigma: float
    omega: float
    moment: float = 1.0
    mu: float = MU0
    source: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.omega <= 0:
            raise ValueError("omega must be positive")

    @property
    def k(self) -> complex:
        return np.sqrt(1j * self.omega * self.mu * self.sigma)


def skin_depth(sigma, frequency, mu=MU0):
    return np.sqrt(2.0 / (2 * np.pi * frequency * mu * sigma))


def _offsets(params, receivers):
    rec = np.atleast_2d(np.asarray(receivers, dtype=float))
    d = rec - np.asarray(params.source, dtype=float)[None, :]
    r = np.linalg.norm(d, axis=1)
    if np.any(r == 0):
        raise ValueError("receiver coincides with the source")
    return d, r


def wholespace_E(params: WholeSpaceParams, receivers) -> np.ndarray:
    """Complex (Ex, Ey, Ez) per receiver, shape (n, 3)."""
    d, r = _offsets(params, receivers)
    k = params.k
    ikr = 1j * k * r
    kr2 = (k * r) ** 2
    pref = params.moment * np.exp(ikr) / (4 * np.pi * params.sigma * r ** 3)
    a = 3.0 - 3.0 * ikr - kr2
    b = 1.0 - ikr - kr2
    x = d[:, 0]
    out = np.empty((len(r), 3), dtype=complex)
    out[:, 0] = pref * ((x / r) ** 2 * a - b)
    out[:, 1] = pref * (x * d[:, 1] / r ** 2) * a
    out[:, 2] = pref * (x * d[:, 2] / r ** 2) * a
    return out


def _sommerfeld(f, zabs, k):
    lam_max = 60.0 / zabs

    def part(fn):
        re = integrate.quad(lambda s: fn(s).real, 0.0, lam_max, limit=2000,
                            epsabs=0.0, epsrel=1e-12)[0]
        im = integrate.quad(lambda s: fn(s).imag, 0.0, lam_max, limit=2000,
                            epsabs=0.0, epsrel=1e-12)[0]
        return re + 1j * im

    def kern(s):
        nu = np.sqrt(s * s - k * k + 0j)
        return s / nu * np.exp(-nu * zabs) * f(s)

    return part(kern) / (4 * np.pi)


def wholespace_E_quadrature(params: WholeSpaceParams, receiver) -> complex:
    """Ex at one receiver (``z != z_source``) by Sommerfeld quadrature."""
    d, _ = _offsets(params, [receiver])
    x, y, z = d[0]
    if z == 0:
        raise ValueError("quadrature path needs a vertical offset")
    rho = np.hypot(x, y)
    k = params.k
    g = _sommerfeld(lambda s: special.j0(s * rho), abs(z), k)
    if rho == 0:
        gxx = _sommerfeld(lambda s: -0.5 * s * s, abs(z), k)
    else:
        gxx = _sommerfeld(
            lambda s: -s * s * (x * x / rho ** 2) * special.j0(s * rho)
            + s * special.j1(s * rho) * (2 * x * x / rho ** 3 - 1.0 / rho),
            abs(z), k)
    return params.moment / params.sigma * (k * k * g + gxx)


def amplitude_phase_errors(fd_values, ref_values):
    """Per-receiver amplitude ratio and phase difference in degrees.

    Returns ``(ratio, dphase, valid)``; receivers with a zero reference
    value are marked invalid and get NaN.  Phases are wrapped to (-180, 180].
    """
    fd = np.asarray(fd_values, dtype=complex)
    ref = np.asarray(ref_values, dtype=complex)
    if fd.shape != ref.shape:
        raise ValueError("fd and reference receiver lists differ")
    valid = ref != 0
    safe = np.where(valid, ref, 1.0)
    ratio = np.where(valid, np.abs(fd) / np.abs(safe), np.nan)
    dphase = np.degrees(np.angle(fd) - np.angle(safe))
    dphase = np.where(dphase > 180.0, dphase - 360.0, dphase)
    dphase = np.where(dphase <= -180.0, dphase + 360.0, dphase)
    dphase = np.where(valid, dphase, np.nan)
    return ratio, dphase, valid
