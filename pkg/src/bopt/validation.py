"""Input validation helpers.

Small, explicit checks used at every public boundary. They normalize inputs
to float arrays and raise ``ValueError`` with the offending argument named,
so the numerical code below them can assume clean shapes.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_point",
    "check_points",
    "check_values",
    "check_bounds",
    "check_in_bounds",
]


def check_point(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    """Validate a single point and return it as a 1-d float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a single point, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries: {arr}")
    return arr


def check_points(X, dim: int | None = None, name: str = "points") -> np.ndarray:
    """Validate a stack of points and return it as a (n, d) float array.

    A 1-d input is interpreted as n points in one dimension.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array of points, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_values(y, n: int | None = None, name: str = "values") -> np.ndarray:
    """Validate scalar observations and return them as a 1-d float array."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_bounds(bounds, name: str = "bounds") -> np.ndarray:
    """Validate an axis-aligned box and return it as a (d, 2) float array.

    Each row is (lower, upper) with lower strictly below upper; a violation
    names the offending dimension.
    """
    arr = np.asarray(bounds, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"{name} must have shape (d, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    bad = np.nonzero(arr[:, 0] >= arr[:, 1])[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"{name}[{i}]: lower bound {arr[i, 0]} must be below upper bound {arr[i, 1]}"
        )
    return arr


def check_in_bounds(x, bounds: np.ndarray, name: str = "x") -> np.ndarray:
    """Validate that a point lies inside the box (inclusive)."""
    arr = check_point(x, dim=bounds.shape[0], name=name)
    if np.any(arr < bounds[:, 0]) or np.any(arr > bounds[:, 1]):
        raise ValueError(f"{name} {arr.tolist()} lies outside the bounds")
    return arr
