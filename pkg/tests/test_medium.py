import numpy as np
import pytest

from csemfd.gridgen import UniformSegment, assemble_grid, build_axis, uniform_axis
from csemfd.medium import (
    DEEP_WATER_LAYERS,
    MU0,
    ResistivityModel,
    layered_model,
    model_emit,
    model_ingest,
    to_fictitious,
)


def small_grid(n=6, pml=0, airwave=False):
    ax = uniform_axis(10.0, n - 1, pml)
    az = uniform_axis(10.0, n - 1, (0, pml) if airwave else pml)
    return assemble_grid(ax, ax, az, L=1, airwave=airwave)


def test_unit_conductivity_permittivity():
    g = small_grid()
    m = ResistivityModel.homogeneous(g.interior_shape, 1.0)
    fm = to_fictitious(m, g, 2 * np.pi)
    for e in (fm.eps_xx, fm.eps_yy, fm.eps_zz):
        assert np.allclose(e, 1 / (4 * np.pi), rtol=1e-15)
    assert fm.eps_xx.shape == g.component_shape("Ex")
    assert fm.eps_zz.shape == g.component_shape("Ez")
    assert abs(fm.c_max - 1 / np.sqrt(MU0 / (4 * np.pi))) < 1e-9 * fm.c_max


def test_isotropic_components_agree():
    g = small_grid()
    rng = np.random.default_rng(0)
    rho = np.broadcast_to(rng.uniform(0.5, 5, g.shape[2]), g.interior_shape).copy()
    m = ResistivityModel(rho, rho)
    assert m.isotropic
    fm = to_fictitious(m, g, 1.0)
    # along x and y the model is constant, so both see the node value
    assert np.allclose(fm.eps_xx[:, 0, :], fm.eps_yy[0, :, :], rtol=1e-15)


def test_vti_ratio():
    g = small_grid()
    m = ResistivityModel.homogeneous(g.interior_shape, 2.0, anisotropy=1.5)
    fm = to_fictitious(m, g, 3.0)
    assert np.allclose(fm.eps_zz[0, 0], fm.eps_xx[0, 0, 0] / 1.5, rtol=1e-14)


def test_harmonic_averaging_across_interface():
    g = small_grid()
    rho = np.ones(g.interior_shape)
    rho[:, :, 3:] = 4.0
    fm = to_fictitious(ResistivityModel(rho, rho), g, 0.5)
    s = fm.eps_zz[0, 0] * 2 * 0.5
    assert np.allclose(s[:2], 1.0) and np.allclose(s[3:], 0.25)
    assert abs(s[2] - 2 * 1 * 0.25 / 1.25) < 1e-15


def test_pml_copies_edge_values():
    g = small_grid(pml=3)
    rho = np.ones(g.interior_shape)
    rho[:, :, -1] = 9.0
    fm = to_fictitious(ResistivityModel(rho, rho), g, 1.0)
    assert np.allclose(fm.eps_xx[:, :, -4:], fm.eps_xx[:, :, -4:-3])


def test_airwave_halves_top_horizontal_plane():
    g = small_grid(airwave=True, pml=2)
    m = ResistivityModel.homogeneous(g.interior_shape, 1.0)
    fm = to_fictitious(m, g, 1.0)
    assert np.allclose(fm.eps_xx[:, :, 0], 0.5 * fm.eps_xx[:, :, 1])
    assert np.allclose(fm.eps_yy[:, :, 0], 0.5 * fm.eps_yy[:, :, 1])
    assert np.allclose(fm.eps_zz[:, :, 0], fm.eps_zz[:, :, 1])


def test_to_fictitious_rejections():
    g = small_grid()
    with pytest.raises(ValueError):
        to_fictitious(ResistivityModel.homogeneous((3, 3, 3), 1.0), g, 1.0)
    with pytest.raises(ValueError):
        to_fictitious(ResistivityModel.homogeneous(g.interior_shape, 1.0), g, 0.0)
    with pytest.raises(ValueError):
        ResistivityModel.homogeneous((2, 2, 2), -1.0)
    bad = np.ones((2, 2, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        ResistivityModel(bad, np.ones((2, 2, 2)))


def test_c_max_monotone_in_resistivity():
    g = small_grid()
    rng = np.random.default_rng(5)
    rho = rng.uniform(0.3, 10, g.interior_shape)
    base = to_fictitious(ResistivityModel(rho, rho), g, 1.0).c_max
    for _ in range(20):
        r2 = rho.copy()
        idx = tuple(rng.integers(0, n) for n in g.interior_shape)
        r2[idx] *= rng.uniform(1.0, 100.0)
        assert to_fictitious(ResistivityModel(r2, r2), g, 1.0).c_max >= base


def test_air_excluded_from_c_max():
    g = small_grid()
    out = []
    for air_rho in (1e10, 1e12, 1e16):
        rho = np.ones(g.interior_shape)
        rho[:, :, :2] = air_rho
        fm = to_fictitious(ResistivityModel(rho, rho), g, 1.0)
        assert np.all(fm.eps_zz[:, :, 0] == 0)
        out.append(fm.c_max)
    assert np.isfinite(out[0]) and out[0] == out[1] == out[2]


# --- file format --------------------------------------------------------------


def write_model(tmp_path, dims, values, fields="rho_h rho_v"):
    h = tmp_path / "m.hdr"
    d = tmp_path / "m.bin"
    h.write_text(f"dims {dims[0]} {dims[1]} {dims[2]}\norder z-fastest\nfields {fields}\n"
                 "precision float32\nendian little\n")
    np.asarray(values, dtype="<f4").tofile(d)
    return h, d


def test_ingest_uniform(tmp_path):
    h, d = write_model(tmp_path, (2, 2, 2), np.ones(16))
    m = model_ingest(h, d)
    assert m.dims == (2, 2, 2)
    assert np.all(m.rho_h == 1) and np.all(m.rho_v == 1)


def test_ingest_order_is_z_fastest(tmp_path):
    vals = np.arange(1, 2 * 3 * 4 + 1, dtype=float)
    h, d = write_model(tmp_path, (2, 3, 4), vals, fields="rho")
    m = model_ingest(h, d)
    assert m.rho_h[0, 0, 1] == 2.0 and m.rho_h[0, 1, 0] == 5.0 and m.rho_h[1, 0, 0] == 13.0


def test_ingest_rejections(tmp_path):
    h, d = write_model(tmp_path, (10, 10, 10), np.ones(999), fields="rho")
    with pytest.raises(ValueError):
        model_ingest(h, d)
    v = np.ones(16)
    v[3] = np.nan
    h, d = write_model(tmp_path, (2, 2, 2), v)
    with pytest.raises(ValueError):
        model_ingest(h, d)
    v[3] = -2.0
    h, d = write_model(tmp_path, (2, 2, 2), v)
    with pytest.raises(ValueError):
        model_ingest(h, d)
    h.write_text("dims 2 2\n")
    with pytest.raises(ValueError):
        model_ingest(h, d)


def test_emit_ingest_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    rh = rng.uniform(0.1, 100, (3, 4, 5)).astype(np.float32)
    rv = (rh * 1.5).astype(np.float32)
    m = ResistivityModel(rh, rv)
    model_emit(m, tmp_path / "a.hdr", tmp_path / "a.bin")
    back = model_ingest(tmp_path / "a.hdr", tmp_path / "a.bin")
    assert back.rho_h.tobytes() == rh.tobytes()
    assert back.rho_v.tobytes() == rv.tobytes()
    model_emit(back, tmp_path / "b.hdr", tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


# --- layered generator --------------------------------------------------------


def test_deep_water_generator_matches_hand_built():
    z = np.arange(0.0, 2600.0, 20.0)
    x = y = np.array([0.0, 100.0])
    m = layered_model(x, y, z, DEEP_WATER_LAYERS)
    rh = np.empty_like(z)
    lam = np.empty_like(z)
    for k, zz in enumerate(z):
        if zz < 1020:
            rh[k], lam[k] = 0.3, 1.0
        elif zz < 1900:
            rh[k], lam[k] = 1.0, 1.5
        elif zz < 2020:
            rh[k], lam[k] = 50.0, 1.5
        else:
            rh[k], lam[k] = 2.5, 1.5
    assert np.array_equal(m.rho_h[1, 0], rh)
    assert np.allclose(m.rho_v[0, 1], rh * lam, rtol=1e-15)
    # 120 m of resistor sampled every 20 m
    assert np.count_nonzero(m.rho_h[0, 0] == 50.0) == 6


def test_layered_air():
    z = np.array([-20.0, 0.0, 20.0])
    m = layered_model([0.0], [0.0], z, DEEP_WATER_LAYERS, air_above=0.0)
    assert m.rho_h[0, 0].tolist() == [1e12, 0.3, 0.3]
    assert m.air[0, 0].tolist() == [True, False, False]
    with pytest.raises(ValueError):
        layered_model([0.0], [0.0], z, [(0.0, 1.0, 1.0), (0.0, 2.0, 1.0)])


def test_model_on_stretched_grid_shapes():
    ax = uniform_axis(100.0, 7)
    az = build_axis([UniformSegment(50.0, 4), UniformSegment(80.0, 3)], pml_layers=2)
    g = assemble_grid(ax, ax, az, L=2)
    lo = az.pml_lo
    z = az.nodes[lo:az.n - az.pml_hi]
    m = layered_model(ax.nodes, ax.nodes, z, DEEP_WATER_LAYERS)
    fm = to_fictitious(m, g, 2 * np.pi)
    assert fm.eps_zz.shape == g.component_shape("Ez")
