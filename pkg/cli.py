"""Command line for sparse low-rank tensor decomposition.

Usage examples:
  python cli.py synth --shape 6 6 6 --rank 2 --seed 7 -o out/
  python cli.py path --tensor out/tensor.txt --rank 3 --alpha 0.2 --truth out/truth -o run/
  python cli.py decompose --tensor out/tensor.txt --rank 3 --lam 1e2 --alpha 0.2 -o single/
  python cli.py als --tensor out/tensor.txt --rank 2 --init nvecs -o als/
  python cli.py score run/selected out/truth

Every run writes its results plus a key=value ``summary.txt`` under the
output directory. Exit code 0 on success, 2 on bad arguments or input
files, 1 when a solver produced non-finite values.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Tuple

import joblib
import numpy as np
from termcolor import colored

from solvers.adamax import adamax_solve
from solvers.bcd import bcd_solve
from solvers.choose_best_solution import select_solution
from solvers.config import DEFAULT_MAX_ITERS, DEFAULT_REFINE_MAX_ITERS, DEFAULT_TOL, ElasticNetConfig, StochasticConfig
from solvers.cp_als import cp_als_solve
from solvers.initializers import INIT_MODES, initial_factors
from solvers.patterns import DEFAULT_EPSILON, SparsityPattern
from solvers.solution_path import (
    DEFAULT_LAMBDA_S,
    PATH_SOLVERS,
    PathConfig,
    decade_lambda_grid,
    fine_lambda_grid,
    solution_path,
)
from solvers.sparse_bcd import sparse_constrained_solve
from tensors.errors import NumericalFailure, UnsupportedInputError
from tensors.metrics import evaluate, factor_score
from tensors.priors import (
    PriorSpec,
    default_simulation_covariances,
    estimate_covariance_diags,
    generate_synthetic,
    precision_diags,
)
from tensors.reports import path_table_frame, render_path_table, write_summary
from tensors.tensor_io import read_factors, read_tensor, write_factors, write_tensor
from tensors.tensor_ops import FactorSet, MaskedTensor

logger = logging.getLogger(__name__)

SOLVERS = ("bcd", "sparse", "adamax", "als")
COV_MODES = ("estimated", "unit")
SYNTH_COV_MODES = ("simulation", "unit")

TENSOR_FILE = "tensor.txt"
CLEAN_FILE = "clean.txt"
TRUTH_DIR = "truth"
FACTORS_DIR = "factors"
SELECTED_DIR = "selected"
SUMMARY_FILE = "summary.txt"
PATH_CSV = "path.csv"
PATH_ENTRIES = "path_entries.joblib"


@dataclass(frozen=True)
class RunConfig:
    """Validated inputs of a ``decompose``, ``path`` or ``als`` run."""

    command: str
    output: str
    tensor: str
    rank: int
    mask: Optional[str] = None
    alpha: float = 0.2
    lam: float = 1.0
    lambda_grid: Tuple[float, ...] = ()
    lambda_s: float = DEFAULT_LAMBDA_S
    epsilon: float = DEFAULT_EPSILON
    max_iters: Optional[int] = None
    refine_max_iters: int = DEFAULT_REFINE_MAX_ITERS
    tol: Optional[float] = None
    init: str = "random"
    seed: Optional[int] = None
    solver: str = "bcd"
    batch_sizes: Optional[Tuple[int, ...]] = None
    step_size: float = 0.1
    cov: str = "estimated"
    truth: Optional[str] = None
    clean: Optional[str] = None
    pattern_from: Optional[str] = None
    raw_only: bool = False

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError(f"--rank must be >= 1, got {self.rank}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"--alpha must lie in [0, 1], got {self.alpha}")
        if self.lam < 0:
            raise ValueError(f"--lam must be nonnegative, got {self.lam}")
        if self.solver not in SOLVERS:
            raise ValueError(f"--solver must be one of {SOLVERS}")
        if self.command == "path" and self.solver not in PATH_SOLVERS:
            raise ValueError(f"path runs support --solver {' or '.join(PATH_SOLVERS)}")
        if self.init not in INIT_MODES:
            raise ValueError(f"--init must be one of {INIT_MODES}")
        if self.cov not in COV_MODES:
            raise ValueError(f"--cov must be one of {COV_MODES}")
        if self.solver == "sparse" and self.pattern_from is None:
            raise ValueError("--solver sparse needs --pattern-from <factor dir>")
        if self.max_iters is not None and self.max_iters < 0:
            raise ValueError(f"--max-iters must be nonnegative, got {self.max_iters}")
        if self.tol is not None and self.tol < 0:
            raise ValueError(f"--tol must be nonnegative, got {self.tol}")
        if self.epsilon <= 0:
            raise ValueError(f"--epsilon must be positive, got {self.epsilon}")

    @classmethod
    def from_namespace(cls, args: argparse.Namespace) -> "RunConfig":
        values = {f.name: getattr(args, f.name) for f in fields(cls) if hasattr(args, f.name)}
        if args.command == "path":
            if args.lambda_grid:
                values["lambda_grid"] = tuple(args.lambda_grid)
            elif args.grid == "fine":
                values["lambda_grid"] = fine_lambda_grid(args.lo_exp, args.hi_exp)
            else:
                values["lambda_grid"] = decade_lambda_grid(args.lo_exp, args.hi_exp)
        if args.command == "als":
            values["solver"] = "als"
        if values.get("batch_sizes") is not None:
            values["batch_sizes"] = tuple(values["batch_sizes"])
        return cls(**values)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _load_tensor(cfg: RunConfig) -> MaskedTensor:
    print(colored(f"Loading tensor from {cfg.tensor}", "cyan"))
    z = read_tensor(cfg.tensor, cfg.mask)
    if cfg.solver == "als" and not z.is_fully_observed:
        raise UnsupportedInputError("als needs a fully observed tensor; the mask has zeros")
    return z


def _inverse_covariances(z: MaskedTensor, cfg: RunConfig):
    if cfg.cov == "unit":
        return tuple(np.ones(s) for s in z.shape)
    theta, diags = estimate_covariance_diags(z, cfg.rank)
    logger.info("estimated covariance scale theta=%.4g", theta)
    return tuple(precision_diags(diags))


def _optional_truth(cfg: RunConfig) -> Tuple[Optional[FactorSet], Optional[np.ndarray]]:
    truth = read_factors(cfg.truth) if cfg.truth else None
    clean = read_tensor(cfg.clean).values if cfg.clean else None
    return truth, clean


def _summarise(z, solution, cfg, truth, clean, iterations, started, rel_err=None) -> dict:
    report = evaluate(z, solution, truth=truth, clean=clean, epsilon=cfg.epsilon)
    return {
        "rel_err": report.rel_err_observed if rel_err is None else rel_err,
        "rank": report.rank,
        "nzs": report.nzs,
        "nzt": report.nzt,
        "score": report.score,
        "iterations": iterations,
        "wall_seconds": time.perf_counter() - started,
    }


def _finish(cfg: RunConfig, summary: dict) -> None:
    write_summary(os.path.join(cfg.output, SUMMARY_FILE), summary)
    score = "-" if summary["score"] is None else f"{summary['score']:.4f}"
    print(
        colored(
            f"rank={summary['rank']} nzs={summary['nzs']} rel_err={summary['rel_err']:.3e} "
            f"score={score} iterations={summary['iterations']}",
            "green",
        )
    )


def _synth_one(directory: str, shape: Tuple[int, ...], rank: int, cov: str, seed: Optional[int], **spec_kwargs) -> dict:
    rng = np.random.default_rng(seed)
    if cov == "simulation":
        cov_diags = default_simulation_covariances(shape, rng)
    else:
        cov_diags = [np.ones(s) for s in shape]
    instance = generate_synthetic(shape, rank, PriorSpec(tuple(cov_diags), **spec_kwargs), rng)
    os.makedirs(directory, exist_ok=True)
    write_tensor(os.path.join(directory, TENSOR_FILE), instance.observed)
    write_tensor(os.path.join(directory, CLEAN_FILE), MaskedTensor.fully_observed(instance.clean))
    write_factors(os.path.join(directory, TRUTH_DIR), instance.truth)
    zeros = sum(int(np.sum(a == 0)) for a in instance.truth.factors)
    write_summary(os.path.join(directory, SUMMARY_FILE), {"rank": rank, "nzs": zeros})
    return {"directory": directory, "zeros": zeros, "sigma": instance.noise_sigma}


def cmd_synth(args: argparse.Namespace) -> int:
    shape = tuple(args.shape)
    if args.rank < 1:
        raise ValueError(f"--rank must be >= 1, got {args.rank}")
    if args.replicates < 1:
        raise ValueError(f"--replicates must be >= 1, got {args.replicates}")
    spec_kwargs = dict(mu=args.mu, gate=args.gate, snr_db=args.snr_db, missing_fraction=args.missing)
    print(colored(f"Generating {args.replicates} synthetic instance(s) of shape {shape}, rank {args.rank}", "green"))

    if args.replicates == 1:
        jobs = [(args.output, args.seed)]
    else:
        base = 0 if args.seed is None else args.seed
        jobs = [(os.path.join(args.output, f"rep_{k:03d}"), base + k) for k in range(args.replicates)]
    results = joblib.Parallel(n_jobs=args.jobs)(
        joblib.delayed(_synth_one)(directory, shape, args.rank, args.cov, seed, **spec_kwargs)
        for directory, seed in jobs
    )
    for res in results:
        print(f"{res['directory']}: {res['zeros']} true zeros, noise sigma {res['sigma']:.3g}")
    return 0


def _solve_once(z: MaskedTensor, cfg: RunConfig):
    rng = cfg.rng()
    if cfg.solver == "sparse":
        start = read_factors(cfg.pattern_from)
        if start.rank != cfg.rank:
            raise ValueError(f"--pattern-from factors have rank {start.rank}, --rank is {cfg.rank}")
        pattern = SparsityPattern.from_factors(start, cfg.epsilon)
    else:
        start = initial_factors(z, cfg.rank, cfg.init, rng)
    tol = DEFAULT_TOL if cfg.tol is None else cfg.tol
    max_iters = DEFAULT_MAX_ITERS if cfg.max_iters is None else cfg.max_iters

    if cfg.solver == "als":
        return cp_als_solve(z, start, max_iters=max_iters, tol=tol)
    enet = ElasticNetConfig(cfg.lam, cfg.alpha, _inverse_covariances(z, cfg), max_iters=max_iters, tol=tol)
    if cfg.solver == "sparse":
        return sparse_constrained_solve(z, start, pattern, enet)
    if cfg.solver == "adamax":
        scfg = _stochastic_config(z, cfg)
        return adamax_solve(z, start, enet, scfg, rng)
    return bcd_solve(z, start, enet)


def _stochastic_config(z: MaskedTensor, cfg: RunConfig) -> StochasticConfig:
    kwargs = {"step_size": cfg.step_size}
    if cfg.max_iters is not None:
        kwargs["max_iters"] = cfg.max_iters
    if cfg.tol is not None:
        kwargs["tol"] = cfg.tol
    return StochasticConfig(cfg.batch_sizes or z.shape, **kwargs)


def cmd_decompose(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_namespace(args)
    started = time.perf_counter()
    z = _load_tensor(cfg)
    truth, clean = _optional_truth(cfg)
    print(colored(f"Running {cfg.solver} with rank {cfg.rank}...", "green"))
    solution, report = _solve_once(z, cfg)
    if not report.converged:
        print(colored(f"Stopped after {report.iterations} iterations without meeting the tolerance", "yellow"))
    write_factors(os.path.join(cfg.output, FACTORS_DIR), solution)
    _finish(cfg, _summarise(z, solution, cfg, truth, clean, report.iterations, started))
    return 0


def cmd_path(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_namespace(args)
    started = time.perf_counter()
    z = _load_tensor(cfg)
    truth, clean = _optional_truth(cfg)
    rng = cfg.rng()
    init = initial_factors(z, cfg.rank, cfg.init, rng)
    pcfg = PathConfig(
        alpha=cfg.alpha,
        inv_cov_diags=_inverse_covariances(z, cfg),
        lambda_grid=cfg.lambda_grid,
        lambda_s=cfg.lambda_s,
        epsilon=cfg.epsilon,
        max_iters=DEFAULT_MAX_ITERS if cfg.max_iters is None else cfg.max_iters,
        refine_max_iters=cfg.refine_max_iters,
        tol=DEFAULT_TOL if cfg.tol is None else cfg.tol,
        solver=cfg.solver,
        stochastic=_stochastic_config(z, cfg) if cfg.solver == "adamax" else None,
    )
    print(colored(f"Solution path over {len(pcfg.lambda_grid)} lambda values (alpha={cfg.alpha})...", "green"))
    entries = solution_path(z, init, pcfg, rng)
    for entry in entries:
        if entry.failure:
            print(colored(f"lambda {entry.lam:.0e}: {entry.failure}", "yellow"), file=sys.stderr)

    print("\nSolution path:")
    print(render_path_table(entries, truth, cfg.epsilon))
    os.makedirs(cfg.output, exist_ok=True)
    path_table_frame(entries, truth, cfg.epsilon).to_csv(os.path.join(cfg.output, PATH_CSV), index=False)
    joblib.dump(entries, os.path.join(cfg.output, PATH_ENTRIES))

    use_refined = not cfg.raw_only
    selected = select_solution(entries, truth, cfg.epsilon, use_refined=use_refined)
    factors = selected.best_factors if use_refined else selected.raw_factors
    rel_err = selected.best_rel_err if use_refined else selected.raw_rel_err
    write_factors(os.path.join(cfg.output, SELECTED_DIR), factors)
    print(colored(f"\nSelected lambda={selected.lam:.0e} rank={selected.detected_rank} nzs={selected.nzs}", "green"))
    iterations = sum(e.iterations_raw + (e.iterations_refined or 0) for e in entries)
    _finish(cfg, _summarise(z, factors, cfg, truth, clean, iterations, started, rel_err=rel_err))
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    score = factor_score(read_factors(args.first), read_factors(args.second))
    print(f"score={round(score, 12)}")
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        write_summary(os.path.join(args.output, SUMMARY_FILE), {"score": score})
    return 0


def _add_solve_arguments(p: argparse.ArgumentParser, with_penalty: bool = True) -> None:
    p.add_argument("--tensor", required=True, help="Tensor file (header 'tensor v1 N I1 .. IN')")
    p.add_argument("--mask", help="Mask file (default: <tensor>.mask when present)")
    p.add_argument("--rank", type=int, required=True, help="Working rank R")
    p.add_argument("--init", choices=INIT_MODES, default="random", help="Starting factors")
    p.add_argument("--seed", type=int, help="Seed for every random choice of the run")
    p.add_argument("--max-iters", type=int, help="Outer iteration cap")
    p.add_argument("--tol", type=float, help="Relative change to stop at")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="Zero threshold")
    p.add_argument("--truth", help="Directory with the true factors (enables NZT and score)")
    p.add_argument("--clean", help="Clean tensor file (enables the excess error)")
    p.add_argument("-o", "--output", required=True, help="Output directory")
    if with_penalty:
        p.add_argument("--alpha", type=float, default=0.2, help="l1 fraction of the elastic net")
        p.add_argument("--cov", choices=COV_MODES, default="estimated", help="Covariance diagonals")
        p.add_argument("--batch-sizes", type=int, nargs="+", help="Adamax rows sampled per mode")
        p.add_argument("--step-size", type=float, default=0.1, help="Adamax initial step size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Sparse low-rank tensor decomposition CLI")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate synthetic tensors from the sparse prior")
    p.add_argument("--shape", type=int, nargs="+", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--mu", type=float, default=0.1, help="l1 prior weight")
    p.add_argument("--gate", type=float, default=0.5, help="Entries below this magnitude become 0")
    p.add_argument("--snr-db", type=float, help="Noise level in dB (default: no noise)")
    p.add_argument("--missing", type=float, default=0.0, help="Fraction of entries to drop")
    p.add_argument("--cov", choices=SYNTH_COV_MODES, default="simulation", help="3-way uniform scheme or unit")
    p.add_argument("--replicates", type=int, default=1, help="Instances to write as rep_000/ ...")
    p.add_argument("--jobs", type=int, default=1, help="Parallel workers for replicates")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="One solve at a single lambda")
    _add_solve_arguments(p)
    p.add_argument("--lam", type=float, default=1.0, help="Regularisation weight")
    p.add_argument("--solver", choices=SOLVERS, default="bcd")
    p.add_argument("--pattern-from", help="Factor directory whose zeros the sparse solver keeps")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("path", help="Warm-started solution path with refinement and selection")
    _add_solve_arguments(p)
    p.add_argument("--solver", choices=PATH_SOLVERS, default="bcd")
    p.add_argument("--grid", choices=("decade", "fine"), default="decade")
    p.add_argument("--lo-exp", type=int, default=-10)
    p.add_argument("--hi-exp", type=int, default=10)
    p.add_argument("--lambda-grid", type=float, nargs="+", help="Explicit increasing lambda values")
    p.add_argument("--lambda-s", type=float, default=DEFAULT_LAMBDA_S, help="Refinement weight")
    p.add_argument("--refine-max-iters", type=int, default=DEFAULT_REFINE_MAX_ITERS)
    p.add_argument("--raw-only", action="store_true", help="Select among unrefined solutions")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("score", help="Compare two factor directories")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("-o", "--output", help="Also write a summary here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("als", help="CP-ALS baseline (fully observed tensors only)")
    _add_solve_arguments(p, with_penalty=False)
    p.set_defaults(func=cmd_decompose)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        rc = args.func(args)
    except NumericalFailure as exc:
        print(colored(f"Numerical failure: {exc}", "red"), file=sys.stderr)
        rc = 1
    except (ValueError, OSError) as exc:
        print(colored(f"Error: {exc}", "red"), file=sys.stderr)
        rc = 2

    if rc == 0:
        print(colored("✅ Done.", "green"))
    else:
        print(colored(f"❌ Exited with code {rc}", "red"), file=sys.stderr)
    return rc


cli_main = main


if __name__ == "__main__":
    raise SystemExit(main())
