"""Sparsity patterns: which factor entries are free and which are frozen at zero.

``extract_pattern`` turns a solver output into the gamma-sorted, rank
truncated factors plus their zero structure; ``count_true_zeros`` compares
a pattern against known true factors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from tensors.tensor_ops import FactorSet, column_norms

DEFAULT_EPSILON = 1e-9


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """Binary masks ``S(n)`` of shape ``(I_n, R1)``; True = free entry."""

    masks: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        masks = tuple(np.array(s, dtype=bool, copy=True) for s in self.masks)
        if len({s.shape[1] for s in masks}) > 1:
            raise ValueError("pattern masks must share their column count")
        for s in masks:
            s.setflags(write=False)
        object.__setattr__(self, "masks", masks)

    @classmethod
    def all_free(cls, f: FactorSet) -> "SparsityPattern":
        return cls(tuple(np.ones(a.shape, dtype=bool) for a in f.factors))

    @classmethod
    def from_factors(cls, f: FactorSet, epsilon: float = DEFAULT_EPSILON) -> "SparsityPattern":
        return cls(tuple(np.abs(a) > epsilon for a in f.factors))

    @property
    def rank(self) -> int:
        return self.masks[0].shape[1]

    @property
    def zero_count(self) -> int:
        return int(sum(int(np.sum(~s)) for s in self.masks))

    @property
    def size(self) -> int:
        return int(sum(s.size for s in self.masks))

    def matches(self, other: "SparsityPattern | None") -> bool:
        """Same rank and identical masks."""
        if other is None or len(other.masks) != len(self.masks):
            return False
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.masks, other.masks))


class ExtractedPattern(NamedTuple):
    truncated: FactorSet
    pattern: SparsityPattern
    rank: int
    nzs: int


def extract_pattern(f: FactorSet, epsilon: float = DEFAULT_EPSILON) -> ExtractedPattern:
    """Sort components by gamma, drop dead ones and read off the zero pattern.

    Gamma is computed after treating entries with ``|x| <= epsilon`` as
    zero. A component is dead when any of its mode norms is 0 or its
    gamma is ``<= epsilon``. The truncated factors keep their original
    values; the pattern marks ``|B(n)(i, r)| > epsilon`` as free.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    thresholded = FactorSet(tuple(np.where(np.abs(a) > epsilon, a, 0.0) for a in f.factors))
    norms = column_norms(thresholded)
    gammas = np.prod(norms, axis=0) if f.rank else np.zeros(0)
    alive = np.all(norms > 0, axis=0) & (gammas > epsilon)
    gammas = np.where(alive, gammas, 0.0)
    order = np.argsort(-gammas, kind="stable")
    keep = order[: int(alive.sum())]
    truncated = f.select_columns(keep)
    pattern = SparsityPattern.from_factors(truncated, epsilon)
    return ExtractedPattern(truncated, pattern, truncated.rank, pattern.zero_count)


def count_true_zeros(
    pattern: SparsityPattern, truth: FactorSet, epsilon: float = DEFAULT_EPSILON
) -> Tuple[int, int]:
    """Return ``(nzs, nzt)``: zeros in ``pattern`` and zeros shared with the truth.

    The truth is gamma-sorted and thresholded the same way; columns are
    paired by sorted index and unmatched columns contribute no shared zeros.
    """
    truth_pattern = extract_pattern(truth, epsilon).pattern
    if len(truth_pattern.masks) != len(pattern.masks):
        raise ValueError(f"pattern has {len(pattern.masks)} modes, truth has {len(truth_pattern.masks)}")
    k = min(pattern.rank, truth_pattern.rank)
    nzt = 0
    for s, t in zip(pattern.masks, truth_pattern.masks):
        if s.shape[0] != t.shape[0]:
            raise ValueError(f"pattern rows {s.shape[0]} do not match truth rows {t.shape[0]}")
        nzt += int(np.sum(~s[:, :k] & ~t[:, :k]))
    return pattern.zero_count, nzt
