import logging

import numpy as np
import pytest
from scipy import optimize

from conftest import exact_problem
from solvers.column_update import (
    column_terms,
    column_update,
    soft_threshold,
    stochastic_column_target,
    threshold_scale,
    threshold_solve,
)
from tensors.tensor_ops import kron_vectors, mode_unfold


def _row_objective(x, w, delta, h, t, lam, alpha):
    r = delta * w - delta * h * x
    return 0.5 * r @ r + 0.5 * lam * (1 - alpha) * t * x * x + lam * alpha * abs(x)


def _scalar_minimiser(w, delta, h, t, lam, alpha):
    a = float(np.sum(delta * h * h)) + lam * (1 - alpha) * t
    b = float(np.sum(delta * w * h))
    if a < 1e-14:
        return 0.0
    candidates = [0.0]
    if b - lam * alpha > 0:
        candidates.append((b - lam * alpha) / a)
    if b + lam * alpha < 0:
        candidates.append((b + lam * alpha) / a)
    return min(candidates, key=lambda x: _row_objective(x, w, delta, h, t, lam, alpha))


def _random_case(rng):
    rows = int(rng.integers(1, 7))
    cols = int(rng.integers(1, 13))
    W = rng.standard_normal((rows, cols))
    D = (rng.uniform(size=(rows, cols)) >= rng.uniform(0.0, 0.5)).astype(float)
    h = rng.standard_normal(cols)
    T = rng.uniform(0.5, 2.0, size=rows)
    lam = float(rng.choice([0.0, 0.1, 1.0]))
    alpha = float(rng.choice([0.0, 0.3, 1.0]))
    return W, D, h, T, lam, alpha


def test_soft_threshold_scalars_and_arrays():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    assert isinstance(soft_threshold(0.5, 1.0), float)
    np.testing.assert_array_equal(soft_threshold(np.array([-2.0, 0.2, 5.0]), 1.0), [-1.0, 0.0, 4.0])
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_column_update_matches_scalar_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        W, D, h, T, lam, alpha = _random_case(rng)
        x = column_update(W, D, h, T, lam, alpha)
        for i in range(W.shape[0]):
            expected = _scalar_minimiser(W[i], D[i], h, T[i], lam, alpha)
            assert x[i] == pytest.approx(expected, abs=1e-8)


def test_column_update_is_a_local_minimum():
    rng = np.random.default_rng(7)
    for _ in range(50):
        W, D, h, T, lam, alpha = _random_case(rng)
        x = column_update(W, D, h, T, lam, alpha)
        for i in range(W.shape[0]):
            f0 = _row_objective(x[i], W[i], D[i], h, T[i], lam, alpha)
            for step in (1e-4, -1e-4):
                assert f0 <= _row_objective(x[i] + step, W[i], D[i], h, T[i], lam, alpha) + 1e-12


def test_column_update_agrees_with_bounded_search():
    rng = np.random.default_rng(11)
    W, D, h, T, _, _ = _random_case(rng)
    D[:] = 1.0
    x = column_update(W, D, h, T, 0.1, 0.3)
    for i in range(W.shape[0]):
        res = optimize.minimize_scalar(
            _row_objective, bounds=(-50, 50), method="bounded", args=(W[i], D[i], h, T[i], 0.1, 0.3),
            options={"xatol": 1e-10},
        )
        assert x[i] == pytest.approx(res.x, abs=1e-6)


def test_first_order_conditions_hold():
    rng = np.random.default_rng(99)
    for _ in range(100):
        W, D, h, T, lam, alpha = _random_case(rng)
        u, d = column_terms(W, D, h, T, lam, alpha)
        x, undetermined = threshold_solve(u, d, lam * alpha)
        for i in np.flatnonzero(~undetermined):
            if x[i] != 0:
                assert d[i] * x[i] - u[i] + lam * alpha * np.sign(x[i]) == pytest.approx(0.0, abs=1e-8)
            else:
                assert abs(u[i]) <= lam * alpha + 1e-8


def test_fully_masked_row_without_ridge_is_zero(caplog):
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    D = np.array([[0.0, 0.0], [1.0, 1.0]])
    h = np.array([1.0, 1.0])
    u, d = column_terms(W, D, h, np.ones(2), 0.0, 0.5)
    with caplog.at_level(logging.WARNING, logger="solvers.column_update"):
        x, undetermined = threshold_solve(u, d, 0.0)
    assert any(r.levelno == logging.WARNING and "1 undetermined" in r.getMessage() for r in caplog.records)
    assert undetermined.tolist() == [True, False]
    assert x[0] == 0.0
    assert x[1] == pytest.approx(3.5)


def test_column_terms_shape_checks():
    with pytest.raises(ValueError):
        column_terms(np.zeros((2, 3)), np.zeros((2, 2)), np.zeros(3), np.ones(2), 1.0, 0.5)
    with pytest.raises(ValueError):
        column_terms(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros(2), np.ones(2), 1.0, 0.5)
    with pytest.raises(ValueError):
        column_terms(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros(3), np.ones(3), 1.0, 0.5)


def test_stochastic_target_full_batch_equals_exact_update(rng):
    W = rng.standard_normal((5, 12))
    D = np.ones_like(W)
    h = rng.standard_normal(12)
    T = rng.uniform(0.5, 2.0, size=5)
    own = 2.5
    target = stochastic_column_target(W, D, h, T, 0.3, 0.4, own * float(h @ h), own, tau_variant="derivation")
    np.testing.assert_allclose(target, column_update(W, D, h, T, 0.3, 0.4), rtol=1e-12, atol=1e-14)


def test_stochastic_target_variants_agree_for_pure_l1(rng):
    W = rng.standard_normal((4, 6))
    D = np.ones_like(W)
    h = rng.standard_normal(6)
    T = np.ones(4)
    args = (W, D, h, T, 0.5, 1.0, 3.0 * float(h @ h), 3.0)
    np.testing.assert_array_equal(
        stochastic_column_target(*args, tau_variant="algorithm"),
        stochastic_column_target(*args, tau_variant="derivation"),
    )
    with pytest.raises(ValueError):
        stochastic_column_target(*args, tau_variant="other")


def test_subset_threshold_tracks_full_data_threshold():
    rng = np.random.default_rng(17)
    truth, z = exact_problem(rng, (20, 20, 20), 1)
    a0, a1, a2 = (a[:, 0] for a in truth.factors)
    lam, alpha = 0.2, 0.5
    T = np.ones(20)

    h = kron_vectors([a1, a2])
    W = mode_unfold(z, 0)
    _, d = column_terms(W, np.ones_like(W), h, T, lam, alpha)
    full = np.median(lam * alpha / d)

    s1, s2 = (np.sort(rng.choice(20, size=10, replace=False)) for _ in range(2))
    W_s = mode_unfold(z.values[np.ix_(np.arange(20), s1, s2)], 0)
    h_s = kron_vectors([a1[s1], a2[s2]])
    _, d_s = column_terms(W_s, np.ones_like(W_s), h_s, T, lam, alpha)
    own = float(a0 @ a0)
    tau = threshold_scale(d_s, T, lam, alpha, own * float(h @ h), own)
    subset = np.median(lam * alpha * tau / d_s)
    assert 0.5 <= subset / full <= 2.0
