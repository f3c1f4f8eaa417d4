"""Closed-form column update shared by every coordinate descent solver.

For an unfolded working tensor ``W`` (rows = the mode being updated), its
mask ``D`` and the Kronecker vector ``h`` of the other modes' columns, the
subproblem separates by row. Row ``i`` minimises

    ½ ||δᵢ ⊛ wᵢ - (δᵢ ⊛ h) xᵢ||² + λ(1-α)/2 Tᵢ xᵢ² + λα |xᵢ|

whose solution is ``soft_threshold(uᵢ, λα) / dᵢ`` with
``uᵢ = (h ⊛ δᵢ)ᵀ(wᵢ ⊛ δᵢ)`` and ``dᵢ = ||h ⊛ δᵢ||² + λ(1-α)Tᵢ``.
"""
from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

D_FLOOR = 1e-14


def soft_threshold(t, v):
    """``sign(t) * max(|t| - v, 0)``; works on scalars and arrays."""
    if np.any(np.asarray(v) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(t) * np.maximum(np.abs(t) - v, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def column_terms(
    W: np.ndarray, D: np.ndarray, h: np.ndarray, T: np.ndarray, lam: float, alpha: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(u, d)`` for the row-separable subproblem.

    ``D`` is binary, so ``δᵢ ⊛ δᵢ = δᵢ`` and both terms are matrix-vector
    products.
    """
    W = np.asarray(W, dtype=float)
    D = np.asarray(D, dtype=float)
    h = np.asarray(h, dtype=float)
    if W.shape != D.shape:
        raise ValueError(f"W shape {W.shape} does not match mask shape {D.shape}")
    if h.shape != (W.shape[1],):
        raise ValueError(f"h has length {h.shape}, expected {W.shape[1]}")
    if np.shape(T) != (W.shape[0],):
        raise ValueError(f"T has shape {np.shape(T)}, expected ({W.shape[0]},)")
    u = (D * W) @ h
    d = D @ (h * h) + lam * (1.0 - alpha) * np.asarray(T, dtype=float)
    return u, d


def threshold_solve(u: np.ndarray, d: np.ndarray, threshold: float) -> Tuple[np.ndarray, np.ndarray]:
    """``soft_threshold(u, threshold) / d`` with rows where ``d < D_FLOOR`` set to 0.

    Returns the solution and the boolean mask of undetermined rows.
    """
    undetermined = d < D_FLOOR
    shrunk = soft_threshold(np.asarray(u, dtype=float), threshold)
    x = np.divide(shrunk, d, out=np.zeros_like(shrunk), where=~undetermined)
    if undetermined.any():
        logger.warning("%d undetermined rows set to 0", int(undetermined.sum()))
    return x, undetermined


def column_update(
    W: np.ndarray, D: np.ndarray, h: np.ndarray, T: np.ndarray, lam: float, alpha: float
) -> np.ndarray:
    """Exact minimiser of the column subproblem for one factor column."""
    u, d = column_terms(W, D, h, T, lam, alpha)
    x, _ = threshold_solve(u, d, lam * alpha)
    return x


def threshold_scale(
    d_s: np.ndarray,
    T: np.ndarray,
    lam: float,
    alpha: float,
    h_norm_product: float,
    own_norm_sq: float,
    tau_variant: str = "algorithm",
) -> float:
    """The factor ``tau`` that rescales the subset threshold ``λα`` to ``λα tau``."""
    reg = lam * (1.0 - alpha) * np.asarray(T, dtype=float)
    if tau_variant == "algorithm":
        reg = reg * alpha
    elif tau_variant != "derivation":
        raise ValueError(f"unknown tau variant {tau_variant!r}")
    denom = reg if own_norm_sq < D_FLOOR else h_norm_product / own_norm_sq + reg
    valid = denom >= D_FLOOR
    return float(np.mean(d_s[valid] / denom[valid])) if valid.any() else 1.0


def stochastic_column_target(
    W_s: np.ndarray,
    D_s: np.ndarray,
    h_s: np.ndarray,
    T: np.ndarray,
    lam: float,
    alpha: float,
    h_norm_product: float,
    own_norm_sq: float,
    tau_variant: str = "algorithm",
) -> np.ndarray:
    """Column target from a subsample of the other modes' indices.

    The subset solution ``u_s / d_s`` already approximates ``u / d``; only
    the threshold needs rescaling. ``tau = mean(d_s / (h_norm_product /
    own_norm_sq + reg))`` estimates ``d_s / d`` so that ``λα tau / d_s``
    approximates the full-data ``λα / d``. ``reg`` is ``λ(1-α)α T`` for
    ``tau_variant="algorithm"`` and ``λ(1-α) T`` for ``"derivation"``.
    """
    u_s, d_s = column_terms(W_s, D_s, h_s, T, lam, alpha)
    tau = threshold_scale(d_s, T, lam, alpha, h_norm_product, own_norm_sq, tau_variant)
    x, _ = threshold_solve(u_s, d_s, lam * alpha * tau)
    return x
