"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .exceptions import DataError


def as_float_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting anything else."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    return arr

def as_float_matrix(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    return arr


def check_same_length(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if len(a) != len(b):
        raise ValueError(f"{what} must have equal length, got {len(a)} and {len(b)}")


def check_finite(arr: np.ndarray, name: str = "values") -> None:
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contain non-finite entries")


def check_positive(value, name: str) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
