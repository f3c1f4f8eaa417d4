"""Synthetic recovery experiments at reduced size (slow)."""
import time

import numpy as np
import pytest

from solvers.adamax import adamax_solve
from solvers.bcd import bcd_solve
from solvers.choose_best_solution import select_solution
from solvers.config import ElasticNetConfig, StochasticConfig
from solvers.initializers import init_random
from solvers.patterns import count_true_zeros, extract_pattern
from solvers.solution_path import PathConfig, decade_lambda_grid, solution_path
from tensors.metrics import evaluate, relative_error
from tensors.priors import (
    PriorSpec,
    default_simulation_covariances,
    estimate_covariance_diags,
    generate_synthetic,
    precision_diags,
)

pytestmark = pytest.mark.slow


def _instance(shape, rank, seed, snr_db=None, missing=0.0):
    rng = np.random.default_rng(seed)
    covs = default_simulation_covariances(shape, rng)
    spec = PriorSpec(tuple(covs), mu=0.1, gate=0.5, snr_db=snr_db, missing_fraction=missing)
    return generate_synthetic(shape, rank, spec, rng), rng


def _path(inst, rng, working_rank, alpha, grid, **kwargs):
    z = inst.observed
    _, diags = estimate_covariance_diags(z, working_rank)
    pcfg = PathConfig(alpha=alpha, inv_cov_diags=tuple(precision_diags(diags)), lambda_grid=grid, **kwargs)
    return solution_path(z, init_random(z.shape, working_rank, rng), pcfg, rng)


def test_small_noiseless_path_shape():
    inst, rng = _instance((6, 6, 6), 2, 8)
    tnz = extract_pattern(inst.truth).nzs
    path = _path(inst, rng, 3, 0.2, decade_lambda_grid())
    ranks = [e.detected_rank for e in path]
    at_two = [i for i, r in enumerate(ranks) if r == 2]
    assert at_two, ranks
    assert at_two == list(range(at_two[0], at_two[-1] + 1))
    assert ranks[-1] == 0
    assert path[-1].raw_rel_err == pytest.approx(1.0, abs=1e-6)
    exact = []
    for entry in path:
        nzs, nzt = count_true_zeros(entry.pattern, inst.truth)
        if entry.detected_rank == 2 and nzs == nzt == tnz and entry.best_rel_err < 1e-4:
            exact.append(entry)
    assert exact


def test_noisy_recovery_scores():
    scores, excess = [], []
    for seed in range(10):
        inst, rng = _instance((20, 20, 20), 6, 100 + seed, snr_db=20.0)
        path = _path(inst, rng, 8, 0.8, decade_lambda_grid(-4, 8))
        chosen = select_solution(path, inst.truth)
        report = evaluate(inst.observed, chosen.best_factors, truth=inst.truth, clean=inst.clean)
        scores.append(report.score)
        excess.append(report.excess_err)
    assert np.mean(scores) >= 0.90
    assert abs(np.mean(excess)) <= 5e-3


def test_missing_data_recovery():
    detected, scores = 0, []
    for seed in range(5):
        inst, rng = _instance((30, 30, 30), 5, 200 + seed, snr_db=20.0, missing=0.25)
        path = _path(inst, rng, 7, 0.8, decade_lambda_grid(-4, 8))
        chosen = select_solution(path, inst.truth)
        detected += int(chosen.detected_rank == inst.truth.rank)
        scores.append(evaluate(inst.observed, chosen.best_factors, truth=inst.truth).score)
    assert detected >= 4
    assert np.mean(scores) >= 0.95


def test_stochastic_solver_matches_full_solver_per_iteration():
    inst, rng = _instance((40, 40, 40), 4, 300, snr_db=20.0)
    z = inst.observed
    _, diags = estimate_covariance_diags(z, 4)
    cfg = ElasticNetConfig(1e-4, 0.8, tuple(precision_diags(diags)), max_iters=300)
    init = init_random(z.shape, 4, rng)

    start = time.perf_counter()
    full, full_report = bcd_solve(z, init, cfg)
    full_per_iter = (time.perf_counter() - start) / max(full_report.iterations, 1)

    scfg = StochasticConfig((20, 20, 20), step_size=20.0, max_iters=300)
    start = time.perf_counter()
    stochastic, stochastic_report = adamax_solve(z, init, cfg, scfg, rng)
    stochastic_per_iter = (time.perf_counter() - start) / max(stochastic_report.iterations, 1)

    assert relative_error(z, stochastic) <= 2.0 * relative_error(z, full)
    assert stochastic_per_iter < full_per_iter
