"""Block coordinate descent for the masked elastic-net CP problem.

Provides ``bcd_solve`` which cycles over components ``r`` (outer) and
modes ``n`` (inner), replacing each factor column by the exact minimiser
of its subproblem while a residual tensor ``U = (Z - X) ⊛ Δ`` is kept in
sync. ``sparse_bcd.sparse_constrained_solve`` reuses the same sweep with
frozen zeros.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from solvers.column_update import column_terms, threshold_solve
from solvers.config import ElasticNetConfig, SolveReport
from tensors.errors import NumericalFailure
from tensors.tensor_ops import (
    FactorSet,
    MaskedTensor,
    kron_vectors,
    masked_residual,
    mode_unfold,
    objective,
    outer_product,
)

logger = logging.getLogger(__name__)


def run_sweeps(
    z: MaskedTensor,
    init: FactorSet,
    cfg: ElasticNetConfig,
    free: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[FactorSet, SolveReport]:
    """Run coordinate descent sweeps; ``free`` marks updatable entries per mode.

    Entries where ``free[n]`` is False are zeroed on entry and stay exactly 0.
    """
    init.check_shape(z.shape)
    cfg.check_shape(z.shape)
    factors = init.to_arrays()
    if free is not None:
        if len(free) != len(factors):
            raise ValueError(f"{len(free)} pattern masks for {len(factors)} modes")
        free = [np.asarray(s, dtype=bool) for s in free]
        for n, (a, s) in enumerate(zip(factors, free)):
            if s.shape != a.shape:
                raise ValueError(f"pattern mask {n} has shape {s.shape}, expected {a.shape}")
            factors[n] = np.where(s, a, 0.0)

    n_modes = len(factors)
    rank = init.rank
    mask = z.mask
    mask_unfolded = [mode_unfold(mask, n) for n in range(n_modes)]

    current = FactorSet(tuple(factors))
    residual = masked_residual(z, current)
    obj = objective(z, current, cfg)
    report = SolveReport(iterations=0, final_objective=obj, objective_trace=[obj])
    if cfg.record_column_objectives:
        report.column_objectives.append(obj)

    for iteration in range(1, cfg.max_iters + 1):
        sweep_start = current
        for r in range(rank):
            columns = [a[:, r] for a in factors]
            work = residual + outer_product(columns) * mask
            for n in range(n_modes):
                h = kron_vectors([factors[m][:, r] for m in range(n_modes) if m != n])
                u, d = column_terms(
                    mode_unfold(work, n), mask_unfolded[n], h, cfg.inv_cov_diags[n], cfg.lam, cfg.alpha
                )
                x, undetermined = threshold_solve(u, d, cfg.lam * cfg.alpha)
                report.undetermined_rows += int(undetermined.sum())
                if free is not None:
                    x = np.where(free[n][:, r], x, 0.0)
                if not np.all(np.isfinite(x)):
                    raise NumericalFailure(iteration, r, n, last_finite=sweep_start)
                factors[n][:, r] = x
                if cfg.record_column_objectives:
                    report.column_objectives.append(objective(z, FactorSet(tuple(factors)), cfg))
            residual = work - outer_product([a[:, r] for a in factors]) * mask

        current = FactorSet(tuple(factors))
        previous = obj
        obj = objective(z, current, cfg)
        report.iterations = iteration
        report.objective_trace.append(obj)
        logger.debug("sweep %d objective %.12g", iteration, obj)
        if abs(previous - obj) <= cfg.tol * max(abs(previous), np.finfo(float).tiny):
            report.converged = True
            break

    report.final_objective = obj
    return current, report


def bcd_solve(z: MaskedTensor, init: FactorSet, cfg: ElasticNetConfig) -> Tuple[FactorSet, SolveReport]:
    """Solve the masked elastic-net CP problem from ``init``.

    Stops when the relative objective change over one sweep is below
    ``cfg.tol`` or after ``cfg.max_iters`` sweeps; ``max_iters = 0``
    returns ``init`` unchanged.
    """
    return run_sweeps(z, init, cfg)
