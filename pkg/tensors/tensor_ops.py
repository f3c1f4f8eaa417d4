"""Dense tensor helpers shared by every solver and command.

This module holds the value types (``MaskedTensor``, ``FactorSet``,
``NormalizedDecomposition``) and the multilinear kernels the solvers are
built from: mode unfolding, CP reconstruction, the column Kronecker
product and the masked objective.

Conventions
- Modes are 0-based.
- The canonical linearisation is first-index-fastest (Fortran order), and
  ``mode_unfold`` orders columns the same way with the unfolded mode
  skipped. With that choice ``kron_columns`` is
  ``a(N) kron ... kron a(1)`` (skipping ``n``) and
  ``mode_unfold(outer, n) == outer(a(n), h)`` holds exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Tuple, Union

import numpy as np


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MaskedTensor:
    """Dense N-way values plus a binary observation mask (1 = observed).

    Unobserved entries of ``values`` may hold any finite number; every
    consumer multiplies by ``mask`` first.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        mask = _frozen(self.mask)
        if values.ndim < 2:
            raise ValueError(f"a tensor needs at least 2 modes, got {values.ndim}")
        if values.shape != mask.shape:
            raise ValueError(f"mask shape {mask.shape} does not match values shape {values.shape}")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("mask entries must be exactly 0 or 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def fully_observed(cls, values: np.ndarray) -> "MaskedTensor":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones_like(values))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def observed(self) -> np.ndarray:
        """``Z ⊛ Δ``: the values with unobserved entries zeroed."""
        return self.values * self.mask

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def is_fully_observed(self) -> bool:
        return bool(np.all(self.mask == 1))


@dataclass(frozen=True, eq=False)
class FactorSet:
    """Ordered factor matrices ``A(n)`` of shape ``(I_n, R)`` sharing R."""

    factors: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        factors = tuple(np.array(a, dtype=float, copy=True) for a in self.factors)
        if len(factors) < 2:
            raise ValueError(f"a factor set needs at least 2 modes, got {len(factors)}")
        for n, a in enumerate(factors):
            if a.ndim != 2:
                raise ValueError(f"factor {n} must be a matrix, got ndim={a.ndim}")
        ranks = {a.shape[1] for a in factors}
        if len(ranks) != 1:
            raise ValueError(f"factor column counts differ: {[a.shape[1] for a in factors]}")
        for a in factors:
            a.setflags(write=False)
        object.__setattr__(self, "factors", factors)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(a.shape[0] for a in self.factors)

    @property
    def ndim(self) -> int:
        return len(self.factors)

    def __getitem__(self, n: int) -> np.ndarray:
        return self.factors[n]

    def __len__(self) -> int:
        return len(self.factors)

    def to_arrays(self) -> list[np.ndarray]:
        """Return writable copies of the factor matrices."""
        return [a.copy() for a in self.factors]

    def select_columns(self, columns: Sequence[int]) -> "FactorSet":
        idx = np.asarray(columns, dtype=int)
        return FactorSet(tuple(a[:, idx] for a in self.factors))

    def check_shape(self, shape: Sequence[int]) -> None:
        if tuple(shape) != self.shape:
            raise ValueError(f"factor row counts {self.shape} do not match tensor shape {tuple(shape)}")


@dataclass(frozen=True, eq=False)
class NormalizedDecomposition:
    """Unit-column factors plus character values, sorted by gamma descending."""

    units: Tuple[np.ndarray, ...]
    gammas: np.ndarray
    order: np.ndarray

    def to_factor_set(self) -> FactorSet:
        """Rebuild factors with equal power ``gamma ** (1/N)`` in every mode."""
        n_modes = len(self.units)
        scale = self.gammas ** (1.0 / n_modes)
        return FactorSet(tuple(u * scale for u in self.units))

    def reconstruct(self) -> np.ndarray:
        scaled = (self.units[0] * self.gammas,) + tuple(self.units[1:])
        return cp_reconstruct(FactorSet(scaled))


TensorLike = Union[MaskedTensor, np.ndarray]


def _dense(t: TensorLike) -> np.ndarray:
    if isinstance(t, MaskedTensor):
        return t.observed
    return np.asarray(t, dtype=float)


def _check_mode(n: int, n_modes: int) -> None:
    if not isinstance(n, (int, np.integer)) or not 0 <= n < n_modes:
        raise ValueError(f"mode index {n!r} out of range for a {n_modes}-way tensor")


def mode_unfold(t: TensorLike, n: int) -> np.ndarray:
    """Return the mode-``n`` unfolding, shape ``(I_n, prod of the other I_m)``.

    A ``MaskedTensor`` is unfolded after masking. Columns follow the
    canonical linearisation of the remaining modes (lowest mode fastest).
    """
    x = _dense(t)
    _check_mode(n, x.ndim)
    return np.reshape(np.moveaxis(x, n, 0), (x.shape[n], -1), order="F")


def mode_fold(matrix: np.ndarray, n: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of ``mode_unfold`` for a tensor of the given ``shape``."""
    shape = tuple(int(s) for s in shape)
    _check_mode(n, len(shape))
    moved = (shape[n],) + shape[:n] + shape[n + 1:]
    return np.moveaxis(np.reshape(matrix, moved, order="F"), 0, n)


def kron_vectors(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Return ``v[-1] kron ... kron v[0]`` so that ``v[0]`` varies fastest."""
    if not vectors:
        return np.ones(1)
    return reduce(np.kron, reversed([np.asarray(v, dtype=float) for v in vectors]))


def kron_columns(f: FactorSet, r: int, skip: int) -> np.ndarray:
    """Kronecker product of column ``r`` of every factor except mode ``skip``.

    Ordered so that ``mode_unfold(a(1)_r ∘ … ∘ a(N)_r, skip)`` equals
    ``outer(a(skip)_r, h)``.
    """
    _check_mode(skip, f.ndim)
    if not 0 <= r < f.rank:
        raise ValueError(f"column index {r} out of range for rank {f.rank}")
    return kron_vectors([a[:, r] for m, a in enumerate(f.factors) if m != skip])


def khatri_rao(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product; the first matrix's row index varies slowest."""
    n_columns = matrices[0].shape[1]
    start = ord("a")
    common = "z"
    target = "".join(chr(start + i) for i in range(len(matrices)))
    source = ",".join(i + common for i in target)
    return np.einsum(source + "->" + target + common, *matrices).reshape((-1, n_columns))


def outer_product(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Rank-1 tensor ``v[0] ∘ v[1] ∘ … ∘ v[N-1]``."""
    return reduce(np.multiply.outer, [np.asarray(v, dtype=float) for v in vectors])


def cp_reconstruct(f: FactorSet) -> np.ndarray:
    """Return ``X`` with ``X[i1..iN] = sum_r prod_n A(n)[i_n, r]``; R = 0 gives zeros."""
    shape = f.shape
    if f.rank == 0:
        return np.zeros(shape)
    others = khatri_rao([f.factors[m] for m in reversed(range(1, f.ndim))])
    return mode_fold(f.factors[0] @ others.T, 0, shape)


def column_norms(f: FactorSet) -> np.ndarray:
    """``(N, R)`` array of the l2 norms of every factor column."""
    if f.rank == 0:
        return np.zeros((f.ndim, 0))
    return np.vstack([np.linalg.norm(a, axis=0) for a in f.factors])


def normalize_factors(f: FactorSet) -> NormalizedDecomposition:
    """Split every component into unit columns and its character value.

    Components with a zero-norm column in any mode get gamma = 0 and zero
    unit columns. The result is sorted by gamma descending with a stable
    permutation, recorded in ``order``.
    """
    norms = column_norms(f)
    alive = np.all(norms > 0, axis=0)
    gammas = np.where(alive, np.prod(norms, axis=0), 0.0)
    safe = np.where(norms > 0, norms, 1.0)
    units = [np.where(alive, a / safe[n], 0.0) for n, a in enumerate(f.factors)]
    order = np.argsort(-gammas, kind="stable")
    return NormalizedDecomposition(
        units=tuple(u[:, order] for u in units),
        gammas=gammas[order],
        order=order,
    )


def masked_residual(z: MaskedTensor, f: FactorSet) -> np.ndarray:
    """``(Z - X) ⊛ Δ``, zero at unobserved entries."""
    f.check_shape(z.shape)
    return (z.values - cp_reconstruct(f)) * z.mask


def penalty(f: FactorSet, lam: float, alpha: float, inv_cov_diags: Sequence[np.ndarray]) -> float:
    """Elastic-net term ``λ Σ_r Σ_n [(1-α)/2 aᵀ T a + α ||a||₁]``."""
    if len(inv_cov_diags) != f.ndim:
        raise ValueError(f"expected {f.ndim} inverse covariance diagonals, got {len(inv_cov_diags)}")
    quad = sum(float(np.sum(np.asarray(t)[:, None] * a * a)) for a, t in zip(f.factors, inv_cov_diags))
    l1 = sum(float(np.abs(a).sum()) for a in f.factors)
    return lam * (0.5 * (1.0 - alpha) * quad + alpha * l1)


def objective(z: MaskedTensor, f: FactorSet, cfg) -> float:
    """Masked elastic-net objective for the settings in ``cfg``.

    ``cfg`` is anything exposing ``lam``, ``alpha`` and ``inv_cov_diags``
    (normally ``solvers.config.ElasticNetConfig``).
    """
    if len(cfg.inv_cov_diags) != z.ndim:
        raise ValueError(f"config has {len(cfg.inv_cov_diags)} modes, tensor has {z.ndim}")
    residual = masked_residual(z, f)
    return 0.5 * float(np.sum(residual * residual)) + penalty(f, cfg.lam, cfg.alpha, cfg.inv_cov_diags)
