"""Text formats for tensors, masks and factor sets.

Tensor file: a header line ``tensor v1 N I1 ... IN`` followed by the
``prod(I_n)`` values in canonical order (mode 1 fastest), whitespace
separated. The mask lives next to it as ``<path>.mask`` with the same
layout and 0/1 values; no mask file means every entry is observed.

Factor directory: ``manifest.txt`` (``factors v1``, ``modes N``,
``rank R``, ``shape I1 ... IN``) plus ``mode_1.txt`` ... ``mode_N.txt``,
one matrix row per line.
"""
from __future__ import annotations

import os
from typing import List, Optional, Tuple

import numpy as np

from tensors.errors import TensorFormatError
from tensors.tensor_ops import FactorSet, MaskedTensor

TENSOR_MAGIC = "tensor"
FACTORS_MAGIC = "factors"
FORMAT_VERSION = "v1"
MASK_SUFFIX = ".mask"
MANIFEST_NAME = "manifest.txt"
VALUE_FMT = "%.17g"


def mask_path_for(path: str) -> str:
    return path + MASK_SUFFIX


def factor_file_name(n: int) -> str:
    """1-based file name of the mode-``n`` factor (``n`` is 0-based)."""
    return f"mode_{n + 1}.txt"


def _parse_header(line: str, path: str) -> Tuple[int, ...]:
    tokens = line.split()
    if len(tokens) < 3 or tokens[0] != TENSOR_MAGIC or tokens[1] != FORMAT_VERSION:
        raise TensorFormatError(f"expected '{TENSOR_MAGIC} {FORMAT_VERSION} N I1 ... IN' header", path, 1)
    try:
        numbers = [int(t) for t in tokens[2:]]
    except ValueError:
        raise TensorFormatError("header sizes must be integers", path, 1) from None
    n_modes, shape = numbers[0], tuple(numbers[1:])
    if len(shape) != n_modes or any(s < 1 for s in shape):
        raise TensorFormatError(f"header declares {n_modes} modes but lists sizes {shape}", path, 1)
    if n_modes < 2:
        raise TensorFormatError(f"a tensor needs at least 2 modes, header declares {n_modes}", path, 1)
    return shape


def _read_array(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Return the tensor and, in the same layout, the line number of every value."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise TensorFormatError("empty file", path, 1)
    shape = _parse_header(lines[0], path)
    expected = int(np.prod(shape))
    values: List[float] = []
    origins: List[int] = []
    last_line = 1
    for lineno, line in enumerate(lines[1:], start=2):
        for token in line.split():
            try:
                value = float(token)
            except ValueError:
                raise TensorFormatError(f"invalid value {token!r}", path, lineno) from None
            if not np.isfinite(value):
                raise TensorFormatError(f"non-finite value {token!r}", path, lineno)
            values.append(value)
            origins.append(lineno)
            last_line = lineno
            if len(values) > expected:
                raise TensorFormatError(f"more than the {expected} values declared in the header", path, lineno)
    if len(values) != expected:
        raise TensorFormatError(f"header declares {expected} values, found {len(values)}", path, last_line)
    return (
        np.reshape(np.asarray(values), shape, order="F"),
        np.reshape(np.asarray(origins), shape, order="F"),
    )


def _write_array(path: str, array: np.ndarray, fmt: str) -> None:
    header = " ".join([TENSOR_MAGIC, FORMAT_VERSION, str(array.ndim)] + [str(s) for s in array.shape])
    np.savetxt(path, np.ravel(array, order="F"), fmt=fmt, header=header, comments="")


def read_mask(path: str, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    mask, origins = _read_array(path)
    bad = ~np.isin(mask, (0.0, 1.0))
    if bad.any():
        raise TensorFormatError("mask values must be 0 or 1", path, int(origins[bad].min()))
    if shape is not None and mask.shape != tuple(shape):
        raise TensorFormatError(f"mask shape {mask.shape} does not match tensor shape {tuple(shape)}", path, 1)
    return mask


def read_tensor(path: str, mask_path: Optional[str] = None) -> MaskedTensor:
    """Load a tensor and its mask (``<path>.mask`` unless ``mask_path`` is given)."""
    values, _ = _read_array(path)
    if mask_path is None:
        candidate = mask_path_for(path)
        mask_path = candidate if os.path.exists(candidate) else None
    if mask_path is None:
        return MaskedTensor.fully_observed(values)
    return MaskedTensor(values, read_mask(mask_path, values.shape))


def write_tensor(path: str, t: MaskedTensor) -> None:
    """Write values and, when some entries are unobserved, the sibling mask.

    A stale sibling mask is removed when ``t`` is fully observed.
    """
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    _write_array(path, t.values, VALUE_FMT)
    mask_path = mask_path_for(path)
    if not t.is_fully_observed:
        _write_array(mask_path, t.mask, "%d")
    elif os.path.exists(mask_path):
        os.remove(mask_path)


def write_factors(directory: str, f: FactorSet) -> None:
    os.makedirs(directory, exist_ok=True)
    manifest = [
        f"{FACTORS_MAGIC} {FORMAT_VERSION}",
        f"modes {f.ndim}",
        f"rank {f.rank}",
        "shape " + " ".join(str(s) for s in f.shape),
    ]
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest) + "\n")
    for n, a in enumerate(f.factors):
        target = os.path.join(directory, factor_file_name(n))
        if f.rank == 0:
            open(target, "w", encoding="utf-8").close()
        else:
            np.savetxt(target, a, fmt=VALUE_FMT)


def _read_manifest(path: str) -> Tuple[int, Tuple[int, ...]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh.read().splitlines()]
    if len(lines) < 4 or lines[0] != [FACTORS_MAGIC, FORMAT_VERSION]:
        raise TensorFormatError(f"expected '{FACTORS_MAGIC} {FORMAT_VERSION}' manifest", path, 1)
    fields = {}
    for lineno, tokens in enumerate(lines[1:4], start=2):
        if not tokens:
            raise TensorFormatError("empty manifest line", path, lineno)
        try:
            fields[tokens[0]] = (lineno, [int(t) for t in tokens[1:]])
        except ValueError:
            raise TensorFormatError(f"non-integer entry in {tokens[0]!r} line", path, lineno) from None
    for key in ("modes", "rank", "shape"):
        if key not in fields:
            raise TensorFormatError(f"manifest has no {key!r} line", path)
    n_modes = fields["modes"][1]
    rank = fields["rank"][1]
    lineno, shape = fields["shape"]
    if len(n_modes) != 1 or len(rank) != 1 or rank[0] < 0:
        raise TensorFormatError("'modes' and 'rank' take one nonnegative integer", path)
    if len(shape) != n_modes[0]:
        raise TensorFormatError(f"shape lists {len(shape)} sizes for {n_modes[0]} modes", path, lineno)
    return rank[0], tuple(shape)


def read_factors(directory: str) -> FactorSet:
    manifest = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(manifest):
        raise TensorFormatError("missing factor manifest", manifest)
    rank, shape = _read_manifest(manifest)
    factors = []
    for n, size in enumerate(shape):
        target = os.path.join(directory, factor_file_name(n))
        if not os.path.exists(target):
            raise TensorFormatError(f"missing factor file for mode {n + 1}", target)
        if rank == 0:
            factors.append(np.zeros((size, 0)))
            continue
        try:
            a = np.loadtxt(target, ndmin=2)
        except ValueError as exc:
            raise TensorFormatError(f"cannot parse mode {n + 1} factor: {exc}", target) from None
        if a.shape != (size, rank):
            raise TensorFormatError(f"mode {n + 1} factor has shape {a.shape}, manifest says {(size, rank)}", target)
        factors.append(a)
    return FactorSet(tuple(factors))
