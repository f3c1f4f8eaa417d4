"""Path tables and the key=value run summary.

`render_path_table` prints one row per solve in the layout
``lambda R NZS NZT IS1 rel_err iters`` (IS1 = 1 for the raw solve, 0 for
the sparse-constrained refinement that follows it). `path_table_frame`
returns the same rows as a pandas DataFrame for CSV export.
"""
from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Sequence, Union

import pandas as pd

from solvers.patterns import DEFAULT_EPSILON, count_true_zeros
from solvers.solution_path import PathEntry
from tensors.tensor_ops import FactorSet

TABLE_COLUMNS = ("lambda", "R", "NZS", "NZT", "IS1", "rel_err", "iters")

SUMMARY_KEYS = ("rel_err", "rank", "nzs", "nzt", "score", "iterations", "wall_seconds")
SUMMARY_INT_KEYS = {"rank", "nzs", "nzt", "iterations"}
MISSING = "na"

SummaryValue = Union[int, float, None]


def path_table_rows(
    path: Sequence[PathEntry], truth: Optional[FactorSet] = None, epsilon: float = DEFAULT_EPSILON
) -> List[Dict[str, object]]:
    rows = []
    for entry in path:
        nzt = count_true_zeros(entry.pattern, truth, epsilon)[1] if truth is not None else None
        row = {
            "lambda": entry.lam,
            "R": entry.detected_rank,
            "NZS": entry.nzs,
            "NZT": nzt,
            "IS1": 1,
            "rel_err": entry.raw_rel_err,
            "iters": entry.iterations_raw,
        }
        rows.append(row)
        if entry.refined:
            rows.append(
                dict(row, **{"lambda": entry.refine_lam, "IS1": 0, "rel_err": entry.refined_rel_err,
                             "iters": entry.iterations_refined})
            )
    return rows


def path_table_frame(
    path: Sequence[PathEntry], truth: Optional[FactorSet] = None, epsilon: float = DEFAULT_EPSILON
) -> pd.DataFrame:
    return pd.DataFrame(path_table_rows(path, truth, epsilon), columns=list(TABLE_COLUMNS))


def render_path_table(
    path: Sequence[PathEntry], truth: Optional[FactorSet] = None, epsilon: float = DEFAULT_EPSILON
) -> str:
    """Fixed-width text table; NZT shows ``-`` without truth."""
    lines = [
        f"{'lambda':>8} {'R':>3} {'NZS':>5} {'NZT':>5} {'IS1':>4} {'rel_err':>9} {'iters':>6}",
        "-" * 46,
    ]
    for row in path_table_rows(path, truth, epsilon):
        nzt = "-" if row["NZT"] is None else str(row["NZT"])
        lines.append(
            f"{row['lambda']:>8.0e} {row['R']:>3d} {row['NZS']:>5d} {nzt:>5} "
            f"{row['IS1']:>4d} {row['rel_err']:>9.1e} {row['iters']:>6d}"
        )
    return "\n".join(lines)


def write_summary(path: str, values: Mapping[str, SummaryValue]) -> None:
    """Write every summary key as ``key=value``; missing keys become ``na``."""
    unknown = set(values) - set(SUMMARY_KEYS)
    if unknown:
        raise ValueError(f"unknown summary keys: {sorted(unknown)}")
    with open(path, "w", encoding="utf-8") as fh:
        for key in SUMMARY_KEYS:
            value = values.get(key)
            if value is None:
                text = MISSING
            elif key in SUMMARY_INT_KEYS:
                text = str(int(value))
            else:
                text = repr(float(value))
            fh.write(f"{key}={text}\n")


def read_summary(path: str) -> Dict[str, SummaryValue]:
    out: Dict[str, SummaryValue] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            key, sep, text = line.partition("=")
            if not sep or key not in SUMMARY_KEYS:
                raise ValueError(f"{path}:{lineno}: not a summary line: {line!r}")
            if text == MISSING:
                out[key] = None
            elif key in SUMMARY_INT_KEYS:
                out[key] = int(text)
            else:
                out[key] = float(text)
    return out
