"""Solver settings and the report every solver returns."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

DEFAULT_MAX_ITERS = 200
DEFAULT_REFINE_MAX_ITERS = 100
DEFAULT_TOL = 1e-10

TAU_VARIANTS = ("algorithm", "derivation")


@dataclass(frozen=True, eq=False)
class ElasticNetConfig:
    """Weights of the masked elastic-net problem.

    - lam: regularisation weight (lambda >= 0)
    - alpha: l1 fraction in [0, 1]
    - inv_cov_diags: per-mode ``T_n = diag(R_n^-1)``, all entries > 0
    - max_iters / tol: outer sweeps and relative objective change to stop at
    - record_column_objectives: evaluate the objective after every column
      update (slow; used to check monotone descent)
    """

    lam: float
    alpha: float
    inv_cov_diags: Tuple[np.ndarray, ...]
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    record_column_objectives: bool = False

    def __post_init__(self) -> None:
        diags = tuple(np.asarray(t, dtype=float) for t in self.inv_cov_diags)
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        for n, t in enumerate(diags):
            if t.ndim != 1 or not np.all(t > 0):
                raise ValueError(f"inverse covariance diagonal of mode {n} must be a positive vector")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.tol < 0:
            raise ValueError(f"tol must be nonnegative, got {self.tol}")
        object.__setattr__(self, "inv_cov_diags", diags)

    @classmethod
    def unit(cls, shape: Sequence[int], lam: float, alpha: float, **kwargs) -> "ElasticNetConfig":
        """Config with identity covariances for a tensor of ``shape``."""
        return cls(lam, alpha, tuple(np.ones(int(s)) for s in shape), **kwargs)

    def check_shape(self, shape: Sequence[int]) -> None:
        sizes = tuple(t.shape[0] for t in self.inv_cov_diags)
        if sizes != tuple(shape):
            raise ValueError(f"inverse covariance sizes {sizes} do not match tensor shape {tuple(shape)}")


@dataclass
class SolveReport:
    """What a solver did: sweeps run, objective history, convergence flag."""

    iterations: int
    final_objective: float
    objective_trace: List[float] = field(default_factory=list)
    converged: bool = False
    column_objectives: List[float] = field(default_factory=list)
    rel_err_trace: List[float] = field(default_factory=list)
    undetermined_rows: int = 0


@dataclass(frozen=True)
class StochasticConfig:
    """Settings of the Adamax stochastic block coordinate descent.

    - batch_sizes: rows sampled per mode, ``1 <= s_n <= I_n``
    - beta1 / beta2: decay of the first moment and the infinity norm
    - step_size: initial step ``alpha_alg``
    - step_decay_factor: multiplier applied when the tracked relative error rises
    - max_step_decays: how many rise events may shrink the step
    - tau_variant: ``"algorithm"`` uses ``λ(1-α)α T`` in the threshold
      correction, ``"derivation"`` uses ``λ(1-α) T``
    """

    batch_sizes: Tuple[int, ...]
    beta1: float = 0.9
    beta2: float = 0.9999
    step_size: float = 0.1
    step_decay_factor: float = 0.2
    max_step_decays: int = 1
    max_iters: int = 300
    tol: float = 1e-8
    tau_variant: str = "algorithm"

    def __post_init__(self) -> None:
        object.__setattr__(self, "batch_sizes", tuple(int(s) for s in self.batch_sizes))
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {value}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not 0.0 < self.step_decay_factor <= 1.0:
            raise ValueError(f"step_decay_factor must lie in (0, 1], got {self.step_decay_factor}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters}")
        if self.tau_variant not in TAU_VARIANTS:
            raise ValueError(f"tau_variant must be one of {TAU_VARIANTS}, got {self.tau_variant!r}")

    @classmethod
    def full_batch(cls, shape: Sequence[int], **kwargs) -> "StochasticConfig":
        return cls(tuple(int(s) for s in shape), **kwargs)

    def check_shape(self, shape: Sequence[int]) -> None:
        if len(self.batch_sizes) != len(shape):
            raise ValueError(f"{len(self.batch_sizes)} batch sizes for a {len(shape)}-way tensor")
        for n, (s, size) in enumerate(zip(self.batch_sizes, shape)):
            if not 1 <= s <= size:
                raise ValueError(f"batch size {s} of mode {n} must lie in [1, {size}]")


@dataclass
class AdamaxState:
    """State carried across outer iterations of the stochastic solver."""

    moments: List[np.ndarray]
    inf_norms: np.ndarray
    h_normsquare: np.ndarray
    t: int = 0
    step_size: float = 0.1
    decays: int = 0
    last_rel_err: Optional[float] = None

    @classmethod
    def zeros(cls, shape: Sequence[int], rank: int, step_size: float) -> "AdamaxState":
        return cls(
            moments=[np.zeros((int(s), rank)) for s in shape],
            inf_norms=np.zeros((len(shape), rank)),
            h_normsquare=np.zeros(rank),
            step_size=step_size,
        )
