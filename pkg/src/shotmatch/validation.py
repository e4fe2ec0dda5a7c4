"""Small input-validation helpers used across modules.

All helpers raise DataError so the CLI can map failures to one exit code.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DataError(f"{name} must be 1-dimensional, got shape {v.shape}")
    return v


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {m.shape}")
    return m


def check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains NaN or Inf")


def check_same_length(u: np.ndarray, v: np.ndarray, what: str = "vectors") -> None:
    if u.shape != v.shape:
        raise DataError(f"{what} have mismatched shapes {u.shape} vs {v.shape}")


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise DataError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
