"""Input validation helpers shared across the package."""
from __future__ import annotations

import numpy as np


def check_image_array(data) -> np.ndarray:
    """Coerce image data to a (H, W, 3) float64 array and validate dimensions."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"image data must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1 pixels")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image data contains non-finite values")
    return arr


def check_label_map(labels, *, dense: bool = True) -> np.ndarray:
    """Validate a 2-D per-pixel region-id array; return it as int32.

    With dense=True, every id in 0..k-1 must occur at least once.
    """
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError(f"label map must be 2-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"label map must be integer-typed, got {arr.dtype}")
    arr = arr.astype(np.int32, copy=False)
    if arr.min() < 0:
        raise ValueError("label map contains negative region ids")
    if dense:
        ids = np.unique(arr)
        if ids.size != int(arr.max()) + 1:
            raise ValueError("label map ids are not dense (every id in 0..k-1 must occur)")
    return arr


def check_odd_window(window_size: int, shape: tuple[int, int] | None = None) -> int:
    """Validate a window size: odd, >= 1, and not oversized for the image."""
    w = int(window_size)
    if w < 1 or w % 2 == 0:
        raise ValueError(f"window size must be an odd integer >= 1, got {window_size}")
    if shape is not None and w > 2 * min(shape[0], shape[1]):
        raise ValueError(
            f"window size {w} is too large for a {shape[0]}x{shape[1]} image"
        )
    return w


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} have mismatched shapes: {a.shape} vs {b.shape}")
