"""Starting points for the solvers: Gaussian random factors or leading singular vectors."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.utils.extmath import svd_flip

from tensors.tensor_ops import FactorSet, MaskedTensor, mode_unfold

INIT_MODES = ("random", "nvecs")


def init_random(shape: Sequence[int], rank: int, rng: np.random.Generator) -> FactorSet:
    """I.i.d. standard normal factors of size ``I_n x rank``."""
    if rank < 0:
        raise ValueError(f"rank must be nonnegative, got {rank}")
    return FactorSet(tuple(rng.standard_normal((int(s), rank)) for s in shape))


def init_nvecs(z: MaskedTensor, rank: int) -> FactorSet:
    """Top ``rank`` left singular vectors of every mode unfolding of ``Z ⊛ Δ``.

    Signs are made deterministic with ``svd_flip``.
    """
    factors = []
    for n in range(z.ndim):
        unfolded = mode_unfold(z, n)
        if rank > min(unfolded.shape):
            raise ValueError(
                f"rank {rank} exceeds the mode-{n} unfolding size {unfolded.shape} for nvecs"
            )
        u, _, vt = np.linalg.svd(unfolded, full_matrices=False)
        u, _ = svd_flip(u[:, :rank], vt[:rank])
        factors.append(u)
    return FactorSet(tuple(factors))


def initial_factors(z: MaskedTensor, rank: int, mode: str, rng: np.random.Generator) -> FactorSet:
    """Dispatch on ``mode`` (``"random"`` or ``"nvecs"``)."""
    if mode == "random":
        return init_random(z.shape, rank, rng)
    if mode == "nvecs":
        return init_nvecs(z, rank)
    raise ValueError(f"unknown init mode {mode!r}; expected one of {INIT_MODES}")
