"""Input validation helpers shared by the estimators and the engine."""

from __future__ import annotations

import numpy as np


def as_float_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def as_float_vector(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_pairs(pairs, n_rows: int, name: str = "pairs") -> np.ndarray:
    """Validate an array of (winner, loser) index pairs against n_rows."""
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n_pairs, 2), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if arr.min() < 0 or arr.max() >= n_rows:
        raise ValueError(f"{name} references rows outside 0..{n_rows - 1}")
    if (arr[:, 0] == arr[:, 1]).any():
        raise ValueError(f"{name} contains a pair (i, i)")
    return arr


def check_image_id(image_id: int, n_images: int) -> int:
    i = int(image_id)
    if not 0 <= i < n_images:
        raise ValueError(f"unknown image id {image_id} (dataset has {n_images} images)")
    return i
