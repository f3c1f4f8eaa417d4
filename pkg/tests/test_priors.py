import numpy as np
import pytest
from scipy import integrate, stats

from tensors.errors import UnsupportedInputError
from tensors.priors import (
    COVARIANCE_FLOOR,
    PriorSpec,
    default_simulation_covariances,
    estimate_covariance_diags,
    generate_synthetic,
    precision_diags,
    sample_prior_factor,
    sample_prior_factor_entry,
)
from tensors.tensor_ops import MaskedTensor, cp_reconstruct


def _target_cdf_bins(cov_ii, mu, edges):
    density = lambda x: np.exp(-x * x / (2 * cov_ii) - mu * abs(x))
    grid = np.linspace(edges[0], edges[-1], 24001)
    values = np.array([density(x) for x in grid])
    total = integrate.trapezoid(values, grid)
    probs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (grid >= lo) & (grid <= hi)
        probs.append(integrate.trapezoid(values[sel], grid[sel]) / total)
    probs = np.asarray(probs)
    return probs / probs.sum()


def test_sampler_matches_target_density():
    rng = np.random.default_rng(3)
    cov_ii, mu = 1.0, 0.1
    samples = np.array([sample_prior_factor_entry(cov_ii, mu, rng) for _ in range(100_000)])
    edges = np.linspace(-4.0, 4.0, 17)
    inside = samples[(samples > edges[0]) & (samples < edges[-1])]
    observed, _ = np.histogram(inside, bins=edges)
    expected = _target_cdf_bins(cov_ii, mu, edges) * observed.sum()
    _, p_value = stats.chisquare(observed, expected)
    assert p_value > 1e-3


def test_vectorised_sampler_matches_target_density():
    rng = np.random.default_rng(4)
    cov_ii, mu = 1.0, 0.1
    samples = sample_prior_factor(np.full(100_000, cov_ii), mu, 1, rng).ravel()
    edges = np.linspace(-4.0, 4.0, 17)
    inside = samples[(samples > edges[0]) & (samples < edges[-1])]
    observed, _ = np.histogram(inside, bins=edges)
    expected = _target_cdf_bins(cov_ii, mu, edges) * observed.sum()
    _, p_value = stats.chisquare(observed, expected)
    assert p_value > 1e-3


def test_sampler_without_l1_is_gaussian():
    rng = np.random.default_rng(5)
    draws = np.array([sample_prior_factor_entry(2.0, 0.0, rng) for _ in range(100_000)])
    assert np.var(draws) == pytest.approx(2.0, rel=0.05)


def test_strong_l1_concentrates_mass_at_zero():
    rng = np.random.default_rng(6)
    plain = np.array([sample_prior_factor_entry(1.0, 0.0, rng) for _ in range(2000)])
    sparse = np.array([sample_prior_factor_entry(1.0, 100.0, rng) for _ in range(2000)])
    assert np.mean(np.abs(sparse)) < np.mean(np.abs(plain))
    assert np.mean(np.abs(sparse)) < 0.05


def test_scalar_sampler_is_reproducible_and_symmetric():
    a = [sample_prior_factor_entry(2.0, 0.1, np.random.default_rng(1)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    rng = np.random.default_rng(8)
    draws = np.array([sample_prior_factor_entry(1.0, 0.1, rng) for _ in range(4000)])
    assert abs(draws.mean()) < 0.1
    with pytest.raises(ValueError):
        sample_prior_factor_entry(0.0, 0.1, rng)


@pytest.mark.parametrize("seed", range(50))
def test_covariance_estimate_balances_traces(seed):
    rng = np.random.default_rng(seed)
    n_modes = 3 + seed % 2
    x = rng.standard_normal(tuple(int(s) for s in rng.integers(2, 7, size=n_modes)))
    theta, diags = estimate_covariance_diags(x, rank=int(rng.integers(1, 5)))
    traces = [d.sum() for d in diags]
    np.testing.assert_allclose(traces, theta, rtol=1e-10)
    assert all(np.all(d >= COVARIANCE_FLOOR) for d in diags)


def test_covariance_estimate_floors_empty_slices(rng):
    x = rng.standard_normal((4, 4, 4))
    x[2] = 0.0
    _, diags = estimate_covariance_diags(MaskedTensor.fully_observed(x), rank=2)
    assert diags[0][2] == COVARIANCE_FLOOR
    with pytest.raises(ValueError):
        estimate_covariance_diags(np.zeros((2, 2, 2)), rank=1)


def test_precision_is_reciprocal():
    out = precision_diags([np.array([2.0, 4.0]), np.array([0.5])])
    np.testing.assert_allclose(out[0], [0.5, 0.25])
    np.testing.assert_allclose(out[1], [2.0])


def test_simulation_covariances_have_dominant_first_entry(rng):
    diags = default_simulation_covariances((6, 6, 6), rng)
    assert 101 <= diags[0][0] <= 131 and np.all(diags[0][1:] <= 31)
    assert 1001 <= diags[1][0] <= 1021 and np.all(diags[1][1:] <= 21)
    assert diags[2][0] > 10000 > diags[2][1:].max()
    with pytest.raises(UnsupportedInputError):
        default_simulation_covariances((4, 4), rng)


def test_generate_synthetic_gate_and_clean(rng):
    spec = PriorSpec(tuple(np.full(5, 9.0) for _ in range(3)), mu=0.1, gate=0.5)
    inst = generate_synthetic((5, 5, 5), 3, spec, rng)
    for a in inst.truth.factors:
        nonzero = a[a != 0]
        assert np.all(np.abs(nonzero) >= 0.5)
    np.testing.assert_array_equal(inst.clean, cp_reconstruct(inst.truth))
    np.testing.assert_array_equal(inst.observed.values, inst.clean)
    assert inst.observed.is_fully_observed
    assert inst.noise_sigma == 0.0


def test_generate_synthetic_noise_level_and_missing(rng):
    spec = PriorSpec(tuple(np.full(20, 4.0) for _ in range(3)), snr_db=20.0, missing_fraction=0.25)
    inst = generate_synthetic((20, 20, 20), 4, spec, rng)
    expected_sigma = np.sqrt(np.var(inst.clean) / 100.0)
    assert inst.noise_sigma == pytest.approx(expected_sigma)
    np.testing.assert_allclose(inst.observed.values - inst.clean, inst.noise)
    assert np.std(inst.noise) == pytest.approx(expected_sigma, rel=0.05)
    assert 1.0 - inst.observed.n_observed / 8000 == pytest.approx(0.25, abs=0.03)


def test_prior_spec_validation():
    with pytest.raises(ValueError):
        PriorSpec((np.array([1.0, -1.0]),))
    with pytest.raises(ValueError):
        PriorSpec((np.ones(2),), missing_fraction=1.0)
    with pytest.raises(ValueError):
        PriorSpec((np.ones(2),), mu=-0.1)
