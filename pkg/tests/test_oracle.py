import numpy as np
import pytest

from csemfd.oracle import (
    WholeSpaceParams,
    amplitude_phase_errors,
    skin_depth,
    wholespace_E,
    wholespace_E_quadrature,
)

P = WholeSpaceParams(sigma=1.0, omega=2 * np.pi * 1.0)
DELTA = skin_depth(1.0, 1.0)


def test_skin_depth_value():
    assert abs(DELTA - 503.29) < 0.01


@pytest.mark.parametrize("n_skin", [0.5, 1.0, 2.0, 3.5, 5.0])
def test_closed_form_matches_quadrature(n_skin):
    r = n_skin * DELTA
    for direction in ((0.6, 0.0, 0.8), (0.0, 0.6, 0.8), (0.48, 0.36, 0.8)):
        rec = tuple(r * c for c in direction)
        ref = wholespace_E_quadrature(P, rec)
        val = wholespace_E(P, [rec])[0, 0]
        assert abs(val - ref) < 1e-8 * abs(ref)


def test_static_phase_limit():
    phases = [abs(np.angle(wholespace_E(P, [(f * DELTA, 0.0, 0.0)])[0, 0]))
              for f in (1.0, 0.1, 0.01, 0.001)]
    assert np.all(np.diff(phases) < 0)
    assert phases[-1] < 1e-5


def test_decay_faster_than_inverse_cube():
    e1 = abs(wholespace_E(P, [(DELTA, 0, 0)])[0, 0])
    e5 = abs(wholespace_E(P, [(5 * DELTA, 0, 0)])[0, 0])
    assert e5 / e1 < 0.5 * (1 / 5) ** 3


def test_moment_linearity_and_source_shift():
    rec = [(700.0, 200.0, -300.0), (50.0, 0.0, 10.0)]
    two = WholeSpaceParams(1.0, 2 * np.pi, moment=2.0)
    assert np.allclose(wholespace_E(two, rec), 2 * wholespace_E(P, rec), rtol=1e-15)
    shifted = WholeSpaceParams(1.0, 2 * np.pi, source=(100.0, -50.0, 20.0))
    moved = [(x + 100.0, y - 50.0, z + 20.0) for x, y, z in rec]
    assert np.allclose(wholespace_E(shifted, moved), wholespace_E(P, rec), rtol=1e-12)


def test_symmetry_of_components():
    e = wholespace_E(P, [(300.0, 400.0, 0.0), (300.0, -400.0, 0.0)])
    assert np.allclose(e[0, 0], e[1, 0]) and np.allclose(e[0, 1], -e[1, 1])
    assert np.all(e[:, 2] == 0)


def test_rejections():
    with pytest.raises(ValueError):
        wholespace_E(P, [(0.0, 0.0, 0.0)])
    with pytest.raises(ValueError):
        WholeSpaceParams(sigma=0.0, omega=1.0)
    with pytest.raises(ValueError):
        wholespace_E_quadrature(P, (100.0, 0.0, 0.0))


def test_error_metrics_examples():
    ref = np.array([1 + 2j, -3 + 0.5j, 0.2 - 1j])
    ratio, dph, ok = amplitude_phase_errors(ref, ref)
    assert np.allclose(ratio, 1) and np.allclose(dph, 0) and ok.all()
    ratio, dph, _ = amplitude_phase_errors(1j * ref, ref)
    assert np.allclose(ratio, 1) and np.allclose(dph, 90)
    ratio, dph, _ = amplitude_phase_errors(1.05 * ref * np.exp(-1j * np.radians(2)), ref)
    assert np.allclose(ratio, 1.05) and np.allclose(dph, -2)


def test_error_metrics_wrap_and_invalid():
    ratio, dph, ok = amplitude_phase_errors([-1.0, 1.0], [1.0, 0.0])
    assert dph[0] == 180.0
    assert not ok[1] and np.isnan(ratio[1]) and np.isnan(dph[1])
    with pytest.raises(ValueError):
        amplitude_phase_errors([1.0], [1.0, 2.0])
