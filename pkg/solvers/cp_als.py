"""CP-ALS baseline for fully observed tensors.

Provides `cp_als_solve` which runs plain alternating least squares:
``A(n) = Z(n) · KhatriRao(others) · pinv(⊛ of the others' Gram matrices)``,
with the columns renormalised into a weight vector after every update.
It has no missing-value handling; a mask with zeros is rejected.
"""
from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from solvers.config import DEFAULT_MAX_ITERS, DEFAULT_TOL, SolveReport
from tensors.errors import UnsupportedInputError
from tensors.tensor_ops import FactorSet, MaskedTensor, cp_reconstruct, khatri_rao, mode_unfold

logger = logging.getLogger(__name__)

PINV_RCOND = 1e-12


def _least_squares_objective(values: np.ndarray, f: FactorSet) -> float:
    residual = values - cp_reconstruct(f)
    return 0.5 * float(np.sum(residual * residual))


def cp_als_solve(
    z: MaskedTensor,
    init: FactorSet,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> Tuple[FactorSet, SolveReport]:
    """Fit ``init`` to ``z`` by alternating least squares.

    Stops when the relative change of ``½||Z - X||²`` over a sweep is at
    most ``tol``. The weights are folded back into mode 0 on return.
    """
    if not z.is_fully_observed:
        raise UnsupportedInputError("CP-ALS cannot handle missing entries; use a coordinate descent solver")
    init.check_shape(z.shape)
    if max_iters < 0:
        raise ValueError(f"max_iters must be nonnegative, got {max_iters}")

    values = z.values
    factors = init.to_arrays()
    n_modes = len(factors)
    weights = np.ones(init.rank)
    unfolded = [mode_unfold(values, n) for n in range(n_modes)]

    obj = _least_squares_objective(values, init)
    report = SolveReport(iterations=0, final_objective=obj, objective_trace=[obj])
    current = init

    for iteration in range(1, max_iters + 1):
        for n in range(n_modes):
            others = [factors[m] for m in reversed(range(n_modes)) if m != n]
            gram = np.ones((init.rank, init.rank))
            for a in others:
                gram *= a.T @ a
            updated = unfolded[n] @ khatri_rao(others) @ np.linalg.pinv(gram, rcond=PINV_RCOND)
            weights = np.linalg.norm(updated, axis=0)
            factors[n] = updated / np.where(weights > 0, weights, 1.0)

        current = FactorSet((factors[0] * weights,) + tuple(factors[1:]))
        previous = obj
        obj = _least_squares_objective(values, current)
        report.iterations = iteration
        report.objective_trace.append(obj)
        logger.debug("ALS sweep %d objective %.12g", iteration, obj)
        if abs(previous - obj) <= tol * max(previous, np.finfo(float).tiny):
            report.converged = True
            break

    report.final_objective = obj
    return current, report
