"""Pick one entry from a solution path.

Provides `select_solution`. With known true factors it takes the smallest
detected rank that is not below the true rank and, at that rank, prefers
the latest entry whose zeros all sit on true zeros, then the latest entry
that has fewer zeros than the truth. Without truth (or when neither rule
applies) it keeps the entries whose error is within ``band`` of the best
one and returns the sparsest of them.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence

from solvers.patterns import DEFAULT_EPSILON, count_true_zeros, extract_pattern
from solvers.solution_path import PathEntry
from tensors.tensor_ops import FactorSet

logger = logging.getLogger(__name__)

NO_TRUTH_BAND = 0.05


def _error(entry: PathEntry, use_refined: bool) -> float:
    return entry.best_rel_err if use_refined else entry.raw_rel_err


def _sparsest_within_band(entries: Sequence[PathEntry], band: float, use_refined: bool) -> PathEntry:
    best = min(_error(e, use_refined) for e in entries)
    close = [e for e in entries if _error(e, use_refined) <= (1.0 + band) * best]
    # max zeros first, then min error; ties keep the earliest entry
    return min(close, key=lambda e: (-e.nzs, _error(e, use_refined)))


def select_solution(
    path: Sequence[PathEntry],
    truth: Optional[FactorSet] = None,
    epsilon: float = DEFAULT_EPSILON,
    band: float = NO_TRUTH_BAND,
    use_refined: bool = True,
) -> PathEntry:
    """Return the selected entry of ``path``.

    ``use_refined=False`` compares raw errors only (the unrefined path).
    """
    if not path:
        raise ValueError("path must contain at least one entry")
    if band < 0:
        raise ValueError(f"band must be nonnegative, got {band}")
    if truth is None:
        return _sparsest_within_band(path, band, use_refined)

    truth_info = extract_pattern(truth, epsilon)
    ranks = [e.detected_rank for e in path if e.detected_rank >= truth_info.rank]
    if not ranks:
        logger.info("no entry reaches the true rank %d; using the error band rule", truth_info.rank)
        return _sparsest_within_band(path, band, use_refined)

    target = min(ranks)
    group = [e for e in path if e.detected_rank == target]
    counts = [count_true_zeros(e.pattern, truth, epsilon) for e in group]

    exact = [e for e, (nzs, nzt) in zip(group, counts) if nzt == nzs and nzs <= truth_info.nzs]
    if exact:
        return exact[-1]
    sparser = [e for e, (nzs, _) in zip(group, counts) if nzs < truth_info.nzs]
    if sparser:
        return sparser[-1]
    logger.info("rank %d entries miss the true zeros; using the error band rule", target)
    return _sparsest_within_band(group, band, use_refined)
