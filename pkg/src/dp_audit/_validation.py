"""Input validation helpers shared by the estimators and the functional API."""

from __future__ import annotations

import math
import numbers

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


def check_alpha(alpha) -> float:
    if not isinstance(alpha, numbers.Real) or not 0.0 < float(alpha) < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha!r}")
    return float(alpha)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_finite(x, name: str = "x") -> float:
    if not isinstance(x, numbers.Real) or not math.isfinite(float(x)):
        raise DomainError(f"{name} must be a finite real number, got {x!r}")
    return float(x)


def check_unit_interval(x, name: str = "x") -> float:
    x = check_finite(x, name)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"{name} must be in [0, 1], got {x}")
    return x


def check_sample(values, name: str) -> np.ndarray:
    """1-d float array, finite, non-empty; returned sorted ascending."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DomainError(f"{name} must contain at least one value")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return np.sort(arr, kind="stable")
