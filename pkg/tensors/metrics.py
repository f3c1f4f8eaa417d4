"""Evaluation helpers: component-matching score and recovery errors.

Provides `rank_one_score`, `factor_score`, `relative_error` and `evaluate`
which bundles everything into an `EvalReport`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from solvers.patterns import DEFAULT_EPSILON, count_true_zeros, extract_pattern
from tensors.tensor_ops import FactorSet, MaskedTensor, cp_reconstruct, masked_residual, normalize_factors


@dataclass(frozen=True)
class EvalReport:
    """Scores of one solution; truth-dependent fields are None without truth."""

    rel_err_observed: float
    rel_err_full: float
    rank: int
    nzs: int
    score: Optional[float] = None
    excess_err: Optional[float] = None
    nzt: Optional[int] = None
    tnz: Optional[int] = None


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def relative_error(z: MaskedTensor, f: FactorSet) -> float:
    """``||(Z - X) ⊛ Δ|| / ||Z ⊛ Δ||`` on the observed entries (0 when Z ⊛ Δ is zero)."""
    return _ratio(float(np.linalg.norm(masked_residual(z, f))), float(np.linalg.norm(z.observed)))


def rank_one_score(x_vectors: Sequence[np.ndarray], y_vectors: Sequence[np.ndarray]) -> float:
    """Product over modes of the cosines between ``x[n]`` and ``y[n]``.

    A zero-norm vector makes that mode's cosine (and so the score) 0.
    """
    if len(x_vectors) != len(y_vectors):
        raise ValueError(f"{len(x_vectors)} modes against {len(y_vectors)}")
    score = 1.0
    for a, p in zip(x_vectors, y_vectors):
        a = np.asarray(a, dtype=float)
        p = np.asarray(p, dtype=float)
        if a.shape != p.shape:
            raise ValueError(f"vector lengths {a.shape} and {p.shape} differ")
        norms = np.linalg.norm(a) * np.linalg.norm(p)
        score *= float(a @ p) / norms if norms > 0 else 0.0
    return score


def factor_score(x: FactorSet, y: FactorSet) -> float:
    """Mean rank-one score over gamma-sorted pairs; 0 when either rank is 0."""
    if x.ndim != y.ndim:
        raise ValueError(f"factor sets have {x.ndim} and {y.ndim} modes")
    k = min(x.rank, y.rank)
    if k == 0:
        return 0.0
    nx = normalize_factors(x)
    ny = normalize_factors(y)
    scores = [
        rank_one_score([u[:, r] for u in nx.units], [u[:, r] for u in ny.units]) for r in range(k)
    ]
    return float(np.mean(scores))


def evaluate(
    z: MaskedTensor,
    solution: FactorSet,
    truth: Optional[FactorSet] = None,
    clean: Optional[np.ndarray] = None,
    epsilon: float = DEFAULT_EPSILON,
) -> EvalReport:
    """Fill an `EvalReport` for ``solution``.

    ``excess_err`` needs ``clean``: the realised noise is ``Z - clean`` and
    the excess is ``rel_err_full - ||Z - clean|| / ||Z||``.
    """
    solution.check_shape(z.shape)
    extracted = extract_pattern(solution, epsilon)
    z_norm = float(np.linalg.norm(z.values))
    rel_err_full = _ratio(float(np.linalg.norm(z.values - cp_reconstruct(solution))), z_norm)

    score = nzt = tnz = excess = None
    nzs = extracted.nzs
    if truth is not None:
        truth.check_shape(z.shape)
        score = factor_score(solution, truth)
        nzs, nzt = count_true_zeros(extracted.pattern, truth, epsilon)
        tnz = extract_pattern(truth, epsilon).nzs
    if clean is not None:
        clean = np.asarray(clean, dtype=float)
        if clean.shape != z.shape:
            raise ValueError(f"clean tensor shape {clean.shape} does not match {z.shape}")
        excess = rel_err_full - _ratio(float(np.linalg.norm(z.values - clean)), z_norm)

    return EvalReport(
        rel_err_observed=relative_error(z, solution),
        rel_err_full=rel_err_full,
        rank=extracted.rank,
        nzs=nzs,
        score=score,
        excess_err=excess,
        nzt=nzt,
        tnz=tnz,
    )
