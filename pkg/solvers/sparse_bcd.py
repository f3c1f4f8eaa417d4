"""Sparse-constrained block coordinate descent.

Same sweep as ``bcd.bcd_solve`` but only entries marked free in the
pattern are updated; the rest are forced to zero and stay exactly zero.
"""
from __future__ import annotations

from typing import Tuple

from solvers.bcd import run_sweeps
from solvers.config import ElasticNetConfig, SolveReport
from solvers.patterns import SparsityPattern
from tensors.tensor_ops import FactorSet, MaskedTensor


def sparse_constrained_solve(
    z: MaskedTensor, init: FactorSet, pattern: SparsityPattern, cfg: ElasticNetConfig
) -> Tuple[FactorSet, SolveReport]:
    """Refine ``init`` under the zero constraints of ``pattern``.

    An all-free pattern reproduces ``bcd_solve`` bit for bit.
    """
    if pattern.rank != init.rank:
        raise ValueError(f"pattern rank {pattern.rank} does not match factor rank {init.rank}")
    return run_sweeps(z, init, cfg, free=pattern.masks)
