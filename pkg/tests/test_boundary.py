import math

import numpy as np
import pytest

from csemfd.boundary import (
    CpmlConfig,
    CpmlProfile,
    airwave_continue,
    build_airwave,
    build_cpml,
    cpml_coefficients,
    cpml_update,
)
from csemfd.gridgen import UniformSegment, StretchedSegment, assemble_grid, build_axis, uniform_axis
from csemfd.kernel import FieldState, Receiver, Simulation, SourceSpec, apply_curl_E, apply_curl_H
from csemfd.medium import ResistivityModel, to_fictitious


# --- recursion ----------------------------------------------------------------


def test_identity_profile():
    b, a = cpml_coefficients(0.0, 1.0, 0.0, 0.01)
    assert b == 1.0 and a == 0.0
    psi = np.zeros(4)
    raw = np.array([1.0, -2.0, 3.0, 0.5])
    for _ in range(5):
        out = cpml_update(raw, psi, b, a, 1.0)
    assert np.all(psi == 0) and np.array_equal(out, raw)


def test_fixed_point_of_recursion():
    b, a = cpml_coefficients(50.0, 1.0, 3.0, 1e-3)
    assert 0 < b < 1
    psi = np.zeros(1)
    d = np.array([2.5])
    for _ in range(20000):
        cpml_update(d, psi, b, a, 1.0)
    assert abs(psi[0] - a * d[0] / (1 - b)) < 1e-12 * abs(a * d[0] / (1 - b))


def test_pure_stretching():
    b, a = cpml_coefficients(0.0, 2.0, 0.0, 0.1)
    psi = np.zeros(3)
    raw = np.array([4.0, 2.0, -6.0])
    assert np.array_equal(cpml_update(raw, psi, b, a, 2.0), raw / 2)


def test_profile_shape():
    ax = build_axis([UniformSegment(50.0, 20)], pml_layers=12)
    for stag in (False, True):
        p = CpmlProfile.build(ax, stag, 1e-3, 2000.0, math.pi * 2.0, CpmlConfig(kappa_max=3.0))
        x = p.coords
        lo, hi = ax.interior
        inner = (x >= lo) & (x <= hi)
        assert np.all(p.sigma[inner] == 0) and np.all(p.pidx[inner] == -1)
        assert np.all(p.b[inner] == 1) and np.all(p.a[inner] == 0)
        assert np.all((p.b > 0) & (p.b <= 1))
        assert np.all(p.kappa >= 1) and np.all(p.alpha >= 0)
        right = x > hi
        assert np.all(np.diff(p.sigma[right]) > 0)
        assert np.all(np.diff(p.kappa[right]) > 0)
        left = x < lo
        assert np.all(np.diff(p.sigma[left]) < 0)
        assert p.count == int((~inner).sum())


def test_sigma_max_matches_reflection_target():
    ax = build_axis([UniformSegment(10.0, 8)], pml_layers=(0, 10))
    cfg = CpmlConfig(grading_order=2, reflection=1e-3)
    p = CpmlProfile.build(ax, False, 1e-4, 1000.0, 0.0, cfg)
    thick = 100.0
    smax = -3 * 1000.0 * math.log(1e-3) / (2 * thick)
    assert abs(p.sigma[-1] - smax) < 1e-9 * smax
    # theoretical normal-incidence reflection of the continuous profile
    refl = math.exp(-2 * np.trapezoid(p.sigma[ax.n - 11:], p.coords[ax.n - 11:]) / 1000.0)
    assert abs(refl - 1e-3) < 2e-4


def test_cpml_state_allocation():
    ax = uniform_axis(10.0, 10, 4)
    g = assemble_grid(ax, ax, uniform_axis(10.0, 10, (0, 4)), L=2)
    st = build_cpml(g, 1e-4, 1000.0, 1.0)
    assert len(st.psi) == 12
    assert st.psi[("Hx", 2)].shape == (4, g.shape[0], g.shape[1] - 1)
    assert st.psi[("Ey", 0)].shape == (8, g.shape[1] - 1, g.shape[2])
    st.psi[("Ez", 1)][:] = 3.0
    st.reset()
    assert all(np.all(v == 0) for v in st.psi.values())


# --- airwave ------------------------------------------------------------------


def test_single_mode_decay():
    n, d = 32, 50.0
    x = np.arange(n) * d
    k = 2 * np.pi * 3 / (n * d)
    plane = np.cos(k * x)[:, None] * np.ones(n)[None, :]
    out = airwave_continue(plane, [d, 2 * d], d, d)
    assert np.allclose(out[:, :, 0], plane * math.exp(-k * d), atol=1e-14)
    assert np.allclose(out[:, :, 1], plane * math.exp(-2 * k * d), atol=1e-14)


def test_constant_passes_unchanged():
    plane = np.full((10, 12), 2.5)
    out = airwave_continue(plane, [1.0, 5.0, 20.0], 3.0, 3.0)
    assert np.allclose(out, 2.5, rtol=1e-14)


def test_continuation_linear():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((16, 20))
    b = rng.standard_normal((16, 20))
    h = [7.0, 14.0]
    lhs = airwave_continue(2 * a - 3 * b, h, 10.0, 10.0)
    rhs = 2 * airwave_continue(a, h, 10.0, 10.0) - 3 * airwave_continue(b, h, 10.0, 10.0)
    assert np.allclose(lhs, rhs, atol=1e-13)


def airwave_grid(nx=21, ny=17, L=3, dx=40.0, dy=50.0, dz=30.0):
    ax = uniform_axis(dx, nx - 1)
    ay = uniform_axis(dy, ny - 1)
    az = uniform_axis(dz, 8, (0, 2))
    return assemble_grid(ax, ay, az, L=L, airwave=True)


def test_plan_factors_bounded():
    plan = build_airwave(airwave_grid())
    for facs in plan.e_factors.values():
        for f in facs:
            assert np.all(f <= 1) and f[0, 0] == 1.0
            assert np.count_nonzero(f == 1.0) == 1


def test_e_ghosts_exact_for_laplace_mode():
    g = airwave_grid()
    plan = build_airwave(g)
    x = g.x.staggered
    y = g.y.nodes
    kx = 2 * np.pi * 2 / (len(x) * plan.dx)
    ky = 2 * np.pi * 1 / (len(y) * plan.dy)
    k = math.hypot(kx, ky)
    plane = np.cos(kx * x[:, None] + ky * y[None, :])
    ghosts = plan.e_ghosts(plane, "Ex")
    assert ghosts.shape == (len(x), len(y), g.L - 1)
    for lvl, h in enumerate(plan.e_heights):
        exact = plane * math.exp(-k * h)
        assert np.abs(ghosts[:, :, lvl] - exact).max() < 1e-12


def test_h_ghosts_exact_for_potential_field():
    g = airwave_grid()
    plan = build_airwave(g)
    xI, yJ = g.x.staggered, g.y.staggered
    xi, yj = g.x.nodes, g.y.nodes
    px, py = len(xI) * plan.dx, len(yJ) * plan.dy
    rng = np.random.default_rng(9)
    modes = [(int(rng.integers(-4, 5)), int(rng.integers(-3, 4)), complex(*rng.standard_normal(2)))
             for _ in range(5)]
    modes = [m for m in modes if m[0] or m[1]]

    def field(kind, xs, ys, h):
        out = np.zeros((len(xs), len(ys)))
        for mx, my, amp in modes:
            kx, ky = 2 * np.pi * mx / px, 2 * np.pi * my / py
            k = math.hypot(kx, ky)
            phase = np.exp(1j * (kx * xs[:, None] + ky * ys[None, :])) * math.exp(-k * h)
            fac = {"Hz": k, "Hx": 1j * kx, "Hy": 1j * ky}[kind]
            out += (amp * fac * phase).real
        return out

    hx, hy = plan.h_ghosts(field("Hz", xI, yJ, 0.0))
    scale = np.abs(field("Hz", xI, yJ, 0.0)).max()
    for lvl, h in enumerate(plan.h_heights):
        assert np.abs(hx[:, :, lvl] - field("Hx", xi, yJ, h)).max() < 1e-12 * scale
        assert np.abs(hy[:, :, lvl] - field("Hy", xI, yj, h)).max() < 1e-12 * scale


def test_airwave_rejections():
    stretched = build_axis([UniformSegment(10.0, 5), StretchedSegment(200.0, 8)])
    ok = uniform_axis(10.0, 12)
    az = uniform_axis(10.0, 8, (0, 2))
    with pytest.raises(ValueError):
        build_airwave(assemble_grid(stretched, ok, az, L=2, airwave=True))
    g = assemble_grid(ok, ok, uniform_axis(10.0, 8, 2), L=2)
    with pytest.raises(ValueError):
        build_airwave(g)


# --- passthrough --------------------------------------------------------------


def test_no_boundaries_reproduces_bare_kernel():
    ax = uniform_axis(100.0, 15)
    g = assemble_grid(ax, ax, ax, L=2)
    fm = to_fictitious(ResistivityModel.homogeneous(g.interior_shape, 1.0), g, 2 * np.pi)
    rng = np.random.default_rng(1)
    init = FieldState.zeros(g)
    for _, arr in init.items():
        arr[:] = rng.standard_normal(arr.shape)
    runs = []
    for cfg in (None, CpmlConfig()):
        src = SourceSpec((750.0, 750.0, 750.0), waveform=lambda t: 0.0 * t, support=0.0)
        sim = Simulation(g, fm, [1.0], src, [Receiver((500.0, 500.0, 500.0))], cpml=cfg)
        f = init.copy()
        for _ in range(10):
            sim.step(f)
        runs.append(f)
    for c, arr in runs[0].items():
        assert np.array_equal(arr, runs[1][c])
    # explicit leapfrog with the bare curls
    f = init.copy()
    for _ in range(10):
        ce = apply_curl_E(f, g)
        for c in ("Hx", "Hy", "Hz"):
            f[c][:] -= sim.dt / fm.mu * ce[c]
        ch = apply_curl_H(f, g)
        for c in ("Ex", "Ey", "Ez"):
            f[c][:] += sim.cE[c] * ch[c]
    for c, arr in runs[0].items():
        assert np.abs(arr - f[c]).max() <= 1e-12 * np.abs(f[c]).max()
