"""Adamax stochastic block coordinate descent for large tensors.

Each outer iteration samples ``s_n`` indices per mode. For mode ``n`` the
solver only touches the slab that is complete along ``n`` and restricted
to the sampled indices elsewhere, computes the subset column target with a
corrected threshold, and moves the column towards it with an Adamax step
(the pseudo-gradient is ``column - target``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from solvers.column_update import stochastic_column_target
from solvers.config import AdamaxState, ElasticNetConfig, SolveReport, StochasticConfig
from tensors.errors import NumericalFailure
from tensors.tensor_ops import (
    FactorSet,
    MaskedTensor,
    column_norms,
    cp_reconstruct,
    kron_vectors,
    masked_residual,
    mode_unfold,
    outer_product,
    penalty,
)

logger = logging.getLogger(__name__)


@dataclass
class _Slab:
    index: Tuple[np.ndarray, ...]
    mask: np.ndarray
    mask_unfolded: np.ndarray
    residual: np.ndarray


def adamax_step(
    column: np.ndarray,
    target: np.ndarray,
    moment: np.ndarray,
    inf_norm: float,
    t: int,
    step_size: float,
    beta1: float,
    beta2: float,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """One Adamax move of ``column`` towards ``target``.

    Returns the new column, first moment and infinity norm. When the
    infinity norm is still 0 the column is returned unchanged. Coordinates
    where ``target == 0`` are set to exactly 0.
    """
    g = column - target
    moment = beta1 * moment + (1.0 - beta1) * g
    inf_norm = max(beta2 * inf_norm, float(np.linalg.norm(g)))
    if inf_norm == 0.0:
        return column.copy(), moment, inf_norm
    updated = column - (step_size / (1.0 - beta1 ** t)) * moment / inf_norm
    updated[target == 0] = 0.0
    return updated, moment, inf_norm


def _observed_fit(z: MaskedTensor, f: FactorSet, cfg: ElasticNetConfig, z_norm: float) -> Tuple[float, float]:
    residual = masked_residual(z, f)
    sq = float(np.sum(residual * residual))
    rel_err = np.sqrt(sq) / z_norm if z_norm > 0 else 0.0
    return 0.5 * sq + penalty(f, cfg.lam, cfg.alpha, cfg.inv_cov_diags), rel_err


def _build_slabs(
    z: MaskedTensor, factors: List[np.ndarray], subsets: List[np.ndarray]
) -> List[_Slab]:
    slabs = []
    for n, a in enumerate(factors):
        index = tuple(np.arange(a.shape[0]) if m == n else subsets[m] for m in range(len(factors)))
        grid = np.ix_(*index)
        mask = z.mask[grid]
        recon = cp_reconstruct(FactorSet(tuple(f[idx] for f, idx in zip(factors, index))))
        slabs.append(_Slab(index, mask, mode_unfold(mask, n), (z.values[grid] - recon) * mask))
    return slabs


def adamax_solve(
    z: MaskedTensor,
    init: FactorSet,
    cfg: ElasticNetConfig,
    scfg: StochasticConfig,
    rng: np.random.Generator,
) -> Tuple[FactorSet, SolveReport]:
    """Stochastic counterpart of ``bcd_solve`` for large tensors.

    The relative error on the observed entries is evaluated once per outer
    iteration; the step size is multiplied by ``scfg.step_decay_factor``
    when it rises (at most ``scfg.max_step_decays`` times). Stops when the
    relative change of that error is below ``scfg.tol``.
    """
    init.check_shape(z.shape)
    cfg.check_shape(z.shape)
    scfg.check_shape(z.shape)
    factors = init.to_arrays()
    n_modes = len(factors)
    rank = init.rank
    state = AdamaxState.zeros(z.shape, rank, scfg.step_size)
    z_norm = float(np.linalg.norm(z.observed))

    current = FactorSet(tuple(factors))
    obj, rel_err = _observed_fit(z, current, cfg, z_norm)
    report = SolveReport(iterations=0, final_objective=obj, objective_trace=[obj], rel_err_trace=[rel_err])
    state.last_rel_err = rel_err

    for iteration in range(1, scfg.max_iters + 1):
        sweep_start = current
        state.t += 1
        norms_sq = column_norms(current) ** 2
        state.h_normsquare = scfg.beta1 * state.h_normsquare + (1.0 - scfg.beta1) * np.prod(norms_sq, axis=0)
        subsets = [
            np.sort(rng.choice(size, size=s, replace=False)) for size, s in zip(z.shape, scfg.batch_sizes)
        ]
        slabs = _build_slabs(z, factors, subsets)

        for r in range(rank):
            works = [
                slab.residual + outer_product([f[idx, r] for f, idx in zip(factors, slab.index)]) * slab.mask
                for slab in slabs
            ]
            for n in range(n_modes):
                h_s = kron_vectors([factors[m][subsets[m], r] for m in range(n_modes) if m != n])
                column = factors[n][:, r]
                target = stochastic_column_target(
                    mode_unfold(works[n], n),
                    slabs[n].mask_unfolded,
                    h_s,
                    cfg.inv_cov_diags[n],
                    cfg.lam,
                    cfg.alpha,
                    float(state.h_normsquare[r]),
                    float(column @ column),
                    scfg.tau_variant,
                )
                updated, moment, inf_norm = adamax_step(
                    column,
                    target,
                    state.moments[n][:, r],
                    float(state.inf_norms[n, r]),
                    state.t,
                    state.step_size,
                    scfg.beta1,
                    scfg.beta2,
                )
                if not np.all(np.isfinite(updated)):
                    raise NumericalFailure(iteration, r, n, last_finite=sweep_start)
                state.moments[n][:, r] = moment
                state.inf_norms[n, r] = inf_norm
                factors[n][:, r] = updated
            for slab, work in zip(slabs, works):
                slab.residual = work - outer_product([f[idx, r] for f, idx in zip(factors, slab.index)]) * slab.mask

        current = FactorSet(tuple(factors))
        obj, rel_err = _observed_fit(z, current, cfg, z_norm)
        report.iterations = iteration
        report.objective_trace.append(obj)
        report.rel_err_trace.append(rel_err)
        previous = state.last_rel_err
        if rel_err > previous and state.decays < scfg.max_step_decays:
            state.step_size *= scfg.step_decay_factor
            state.decays += 1
            logger.info("iteration %d: relative error rose to %.3e, step size now %.3g", iteration, rel_err, state.step_size)
        state.last_rel_err = rel_err
        logger.debug("iteration %d objective %.12g rel_err %.3e", iteration, obj, rel_err)
        if abs(previous - rel_err) <= scfg.tol * max(previous, np.finfo(float).tiny):
            report.converged = True
            break

    report.final_objective = obj
    return current, report
