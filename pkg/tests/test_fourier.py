import numpy as np
import pytest

from idu import qsim
from idu.analysis import fourier
from idu.analysis.fourier import GridTooLarge


def random_points(rng, k, dims):
    return rng.uniform(0, 2 * np.pi, (k, dims))


def test_cosine_coefficients():
    spec = fourier.fourier_probe(fourier.cosine_circuit(), [], bound=1)
    assert spec.coefficient([1]) == pytest.approx(0.5, abs=1e-12)
    assert spec.coefficient([-1]) == pytest.approx(0.5, abs=1e-12)
    assert abs(spec.coefficient([0])) < 1e-12
    x = np.linspace(0, 2 * np.pi, 7)[:, None]
    assert np.abs(spec.reconstruct(x) - np.cos(x[:, 0])).max() < 1e-12


def test_cosine_with_larger_bound():
    spec = fourier.fourier_probe(fourier.cosine_circuit(), [], bound=3)
    assert spec.max_outside([1]) < 1e-12
    assert spec.energy_outside([1]) < 1e-20


def test_idu_toy_confined_to_unit_spectrum():
    rng = np.random.default_rng(0)
    c = fourier.toy_idu(2, 2)
    assert c.num_features == 4 and fourier.predicted_bounds(c) == [1, 1, 1, 1]
    th = rng.uniform(0, np.pi, c.num_params)
    spec = fourier.fourier_probe(c, th, bound=2, rows=2, cols=2)
    assert spec.grid.shape == (5,) * 4
    assert spec.energy_outside(1) < 1e-10
    assert spec.max_outside(1) < 1e-10
    assert spec.hermitian_error() < 1e-12
    x = random_points(rng, 20, 4)
    f = qsim.expectations(c, x, th)[:, 0]
    assert np.abs(spec.reconstruct(x) - f).max() < 1e-8


def test_idu_toy_uses_its_spectrum():
    # with random parameters the predicted frequencies are actually populated
    rng = np.random.default_rng(1)
    c = fourier.toy_idu(2, 2)
    spec = fourier.fourier_probe(c, rng.uniform(0, np.pi, c.num_params), bound=1, rows=2, cols=2)
    assert np.count_nonzero(np.abs(spec.grid) > 1e-6) > 10


@pytest.mark.parametrize("reps", [1, 2, 3])
def test_dru_toy_spectrum(reps):
    rng = np.random.default_rng(reps)
    c = fourier.toy_dru(1, reps)
    assert fourier.predicted_bounds(c) == [reps]
    th = rng.uniform(0, np.pi, c.num_params)
    spec = fourier.fourier_probe(c, th, bound=reps + 2)
    assert spec.energy_outside(reps) < 1e-10
    assert spec.hermitian_error() < 1e-12
    # the top frequency is reached, not just allowed
    assert abs(spec.coefficient([reps])) > 1e-6


def test_coefficient_map_keys():
    spec = fourier.fourier_probe(fourier.toy_idu(2, 2), np.zeros(8), bound=1, rows=2, cols=2)
    coeffs = spec.coefficients
    assert len(coeffs) == 81
    assert ((0, 0), (0, 0)) in coeffs and ((-1, 1), (1, -1)) in coeffs


def test_grid_limits():
    c = fourier.toy_idu(2, 4)  # 8 features
    with pytest.raises(GridTooLarge, match="exceeds"):
        fourier.fourier_probe(c, np.zeros(c.num_params), bound=1)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        fourier.fourier_probe(fourier.toy_idu(2, 2), np.zeros(8), bound=1, rows=3, cols=2)


def test_report():
    spec = fourier.fourier_probe(fourier.cosine_circuit(), [], bound=1)
    text = fourier.format_report(spec, bounds=[1], recon_error=0.0)
    lines = text.splitlines()
    assert lines[0] == "omega re im"
    assert lines[1].startswith("[1] 5.0") or lines[1].startswith("[-1] 5.0")
    assert lines[-1].startswith("# hermitian_error")
    assert "energy_outside" in lines[-1] and "reconstruction_error" in lines[-1]
