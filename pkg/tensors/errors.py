"""Exceptions raised by the tensor helpers and solvers.

Everything derives from the builtin ``ValueError`` / ``RuntimeError`` so
callers that only care about the broad category can keep catching those.
"""
from __future__ import annotations

from typing import Optional


class TensorFormatError(ValueError):
    """A tensor, mask or factor file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None) -> None:
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class UnsupportedInputError(ValueError):
    """The input is valid data but the requested operation cannot handle it."""


class NumericalFailure(RuntimeError):
    """A solver produced non-finite values.

    ``last_finite`` holds the factors as they were at the start of the
    failing sweep so that callers (the solution path) can continue.
    """

    def __init__(self, iteration: int, component: int, mode: int, last_finite=None) -> None:
        self.iteration = iteration
        self.component = component
        self.mode = mode
        self.last_finite = last_finite
        super().__init__(
            f"non-finite values at iteration {iteration}, component {component}, mode {mode}"
        )
