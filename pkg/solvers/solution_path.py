"""Regularisation path with warm starts, rank truncation and refinement.

`solution_path` walks an increasing lambda grid. Each solve starts from the
previous (truncated) solution; after it the components are gamma-sorted,
dead ones dropped and the zero pattern read off. Whenever that pattern
differs from the previous one, the factors are refined with the
sparse-constrained solver at the small weight ``lambda_s``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from solvers.adamax import adamax_solve
from solvers.bcd import bcd_solve
from solvers.config import (
    DEFAULT_MAX_ITERS,
    DEFAULT_REFINE_MAX_ITERS,
    DEFAULT_TOL,
    ElasticNetConfig,
    StochasticConfig,
)
from solvers.patterns import DEFAULT_EPSILON, SparsityPattern, extract_pattern
from solvers.sparse_bcd import sparse_constrained_solve
from tensors.errors import NumericalFailure
from tensors.metrics import relative_error
from tensors.tensor_ops import FactorSet, MaskedTensor

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_S = 1e-8
PATH_SOLVERS = ("bcd", "adamax")


def decade_lambda_grid(lo_exp: int = -10, hi_exp: int = 10) -> Tuple[float, ...]:
    """``1e{lo_exp}, 1e{lo_exp+1}, ..., 1e{hi_exp}``."""
    if hi_exp < lo_exp:
        raise ValueError(f"empty grid: {lo_exp} > {hi_exp}")
    return tuple(float(f"1e{k}") for k in range(lo_exp, hi_exp + 1))


def fine_lambda_grid(lo_exp: int, hi_exp: int) -> Tuple[float, ...]:
    """Mantissas 1..9 in every decade from ``1e{lo_exp}`` up to ``1e{hi_exp}``."""
    if hi_exp < lo_exp:
        raise ValueError(f"empty grid: {lo_exp} > {hi_exp}")
    grid = [float(f"{m}e{k}") for k in range(lo_exp, hi_exp) for m in range(1, 10)]
    grid.append(float(f"1e{hi_exp}"))
    return tuple(grid)


@dataclass(frozen=True, eq=False)
class PathConfig:
    """Settings of one solution path.

    - alpha / inv_cov_diags: elastic-net weights shared by every solve
    - lambda_grid: strictly increasing positive weights
    - lambda_s: weight used by the sparse-constrained refinement
    - epsilon: entries with ``|x| <= epsilon`` count as zero
    - max_iters / refine_max_iters / tol: per-solve stopping rules
    - solver: ``"bcd"`` or ``"adamax"`` for the raw solves
    - stochastic: Adamax settings (full batch when None)
    """

    alpha: float
    inv_cov_diags: Tuple[np.ndarray, ...]
    lambda_grid: Tuple[float, ...] = field(default_factory=decade_lambda_grid)
    lambda_s: float = DEFAULT_LAMBDA_S
    epsilon: float = DEFAULT_EPSILON
    max_iters: int = DEFAULT_MAX_ITERS
    refine_max_iters: int = DEFAULT_REFINE_MAX_ITERS
    tol: float = DEFAULT_TOL
    solver: str = "bcd"
    stochastic: Optional[StochasticConfig] = None

    def __post_init__(self) -> None:
        grid = tuple(float(v) for v in self.lambda_grid)
        if not grid:
            raise ValueError("lambda grid must not be empty")
        if grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be positive and strictly increasing")
        if self.lambda_s < 0:
            raise ValueError(f"lambda_s must be nonnegative, got {self.lambda_s}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.solver not in PATH_SOLVERS:
            raise ValueError(f"solver must be one of {PATH_SOLVERS}, got {self.solver!r}")
        object.__setattr__(self, "lambda_grid", grid)
        # validates alpha and the diagonals once up front
        self.solve_config(grid[0])

    def solve_config(self, lam: float) -> ElasticNetConfig:
        return ElasticNetConfig(lam, self.alpha, self.inv_cov_diags, max_iters=self.max_iters, tol=self.tol)

    def refine_config(self) -> ElasticNetConfig:
        return ElasticNetConfig(
            self.lambda_s, self.alpha, self.inv_cov_diags, max_iters=self.refine_max_iters, tol=self.tol
        )


@dataclass(frozen=True, eq=False)
class PathEntry:
    """One grid point of the path (a raw row plus an optional refinement row)."""

    lam: float
    detected_rank: int
    nzs: int
    raw_factors: FactorSet
    raw_rel_err: float
    iterations_raw: int
    pattern: SparsityPattern
    refined_factors: Optional[FactorSet] = None
    refine_lam: Optional[float] = None
    refined_rel_err: Optional[float] = None
    iterations_refined: Optional[int] = None
    failure: Optional[str] = None

    @property
    def refined(self) -> bool:
        return self.refined_factors is not None

    @property
    def best_factors(self) -> FactorSet:
        return self.refined_factors if self.refined_factors is not None else self.raw_factors

    @property
    def best_rel_err(self) -> float:
        return self.refined_rel_err if self.refined_rel_err is not None else self.raw_rel_err


def _raw_solve(
    z: MaskedTensor, start: FactorSet, cfg: ElasticNetConfig, pcfg: PathConfig, rng: np.random.Generator
):
    if pcfg.solver == "adamax":
        scfg = pcfg.stochastic or StochasticConfig.full_batch(z.shape)
        return adamax_solve(z, start, cfg, scfg, rng)
    return bcd_solve(z, start, cfg)


def solution_path(
    z: MaskedTensor,
    init: FactorSet,
    pcfg: PathConfig,
    rng: Optional[np.random.Generator] = None,
) -> List[PathEntry]:
    """Run the warm-started path over ``pcfg.lambda_grid``.

    A solver failure is recorded on the entry and the path continues from
    the last finite iterate. ``rng`` is only used by the Adamax solver.
    """
    init.check_shape(z.shape)
    if rng is None:
        rng = np.random.default_rng()
    refine_cfg = pcfg.refine_config()
    entries: List[PathEntry] = []
    current = init
    previous_pattern: Optional[SparsityPattern] = None

    for lam in pcfg.lambda_grid:
        failures: List[str] = []
        try:
            raw, report = _raw_solve(z, current, pcfg.solve_config(lam), pcfg, rng)
            iterations = report.iterations
        except NumericalFailure as exc:
            logger.warning("lambda %.0e: %s", lam, exc)
            failures.append(str(exc))
            raw = exc.last_finite if exc.last_finite is not None else current
            iterations = exc.iteration

        extracted = extract_pattern(raw, pcfg.epsilon)
        refined = refined_rel_err = refined_iters = None
        if extracted.rank > 0 and not extracted.pattern.matches(previous_pattern):
            try:
                refined, refine_report = sparse_constrained_solve(
                    z, extracted.truncated, extracted.pattern, refine_cfg
                )
                refined_iters = refine_report.iterations
            except NumericalFailure as exc:
                logger.warning("lambda %.0e refinement: %s", lam, exc)
                failures.append(str(exc))
                refined = exc.last_finite
                refined_iters = exc.iteration
            if refined is not None:
                refined_rel_err = relative_error(z, refined)

        entry = PathEntry(
            lam=lam,
            detected_rank=extracted.rank,
            nzs=extracted.nzs,
            raw_factors=extracted.truncated,
            raw_rel_err=relative_error(z, extracted.truncated),
            iterations_raw=iterations,
            pattern=extracted.pattern,
            refined_factors=refined,
            refine_lam=pcfg.lambda_s if refined is not None else None,
            refined_rel_err=refined_rel_err,
            iterations_refined=refined_iters,
            failure="; ".join(failures) or None,
        )
        entries.append(entry)
        logger.info(
            "lambda %.0e: rank %d, %d zeros, rel_err %.1e%s",
            lam,
            entry.detected_rank,
            entry.nzs,
            entry.best_rel_err,
            " (refined)" if entry.refined else "",
        )
        previous_pattern = extracted.pattern
        current = extracted.truncated

    return entries
