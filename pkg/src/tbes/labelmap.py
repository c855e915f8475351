"""Label-map handling: PGM persistence, validation, and grid superpixels.

A label map is a (H, W) int32 array of region ids. Valid maps have dense ids
(every id in 0..k-1 occurs) and 4-connected regions.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from . import _pnm
from .validation import check_label_map

_STRUCT4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

MAX_REGIONS = 65536  # 16-bit PGM id space


def grid_superpixels(shape: tuple[int, int], cell_size: int) -> np.ndarray:
    """Regular-grid partition; trailing row/column cells absorb remainders."""
    height, width = int(shape[0]), int(shape[1])
    cell = int(cell_size)
    if cell < 1:
        raise ValueError("cell size must be >= 1")
    n_rows = max(height // cell, 1)
    n_cols = max(width // cell, 1)
    row_band = np.minimum(np.arange(height) // cell, n_rows - 1)
    col_band = np.minimum(np.arange(width) // cell, n_cols - 1)
    return (row_band[:, None] * n_cols + col_band[None, :]).astype(np.int32)


def densify_labels(labels: np.ndarray) -> np.ndarray:
    """Remap ids to 0..k-1, preserving their numeric order."""
    _, inverse = np.unique(labels, return_inverse=True)
    return inverse.reshape(labels.shape).astype(np.int32)


def split_disconnected(labels: np.ndarray) -> np.ndarray:
    """Give each 4-connected component of every id its own region id."""
    out = np.empty(labels.shape, dtype=np.int32)
    next_id = 0
    for rid in np.unique(labels):
        comp, n = ndimage.label(labels == rid, structure=_STRUCT4)
        for c in range(1, n + 1):
            out[comp == c] = next_id
            next_id += 1
    return out


def check_connected(labels: np.ndarray) -> None:
    """Raise if any region id spans more than one 4-connected component."""
    for rid in np.unique(labels):
        _, n = ndimage.label(labels == rid, structure=_STRUCT4)
        if n != 1:
            raise ValueError(f"region {rid} is not 4-connected ({n} components)")


def load_label_map(path, expect_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Load a PGM label map: ids densified, disconnected labels split."""
    raw = _pnm.read_pgm(path)
    if expect_shape is not None and raw.shape != tuple(expect_shape):
        raise ValueError(
            f"label map {path} has shape {raw.shape}, expected {tuple(expect_shape)}"
        )
    labels = split_disconnected(raw)
    n_regions = int(labels.max()) + 1
    if n_regions > MAX_REGIONS:
        raise ValueError(f"label map {path} has {n_regions} regions (> {MAX_REGIONS})")
    return labels


def save_label_map(path, labels: np.ndarray) -> None:
    """Write a label map as 16-bit binary PGM (pixel value = region id)."""
    arr = check_label_map(labels, dense=False)
    if int(arr.max()) >= MAX_REGIONS:
        raise ValueError(f"too many regions for 16-bit PGM: {int(arr.max()) + 1}")
    _pnm.write_pgm(path, arr, maxval=65535)


def adjacent_region_pairs(labels: np.ndarray) -> set[tuple[int, int]]:
    """All unordered id pairs sharing a horizontal or vertical pixel edge."""
    pairs: set[tuple[int, int]] = set()
    for a, b in ((labels[:-1, :], labels[1:, :]), (labels[:, :-1], labels[:, 1:])):
        diff = a != b
        if not diff.any():
            continue
        lo = np.minimum(a[diff], b[diff]).astype(np.int64)
        hi = np.maximum(a[diff], b[diff]).astype(np.int64)
        for key in np.unique(lo * (int(labels.max()) + 1) + hi):
            pairs.add((int(key // (int(labels.max()) + 1)), int(key % (int(labels.max()) + 1))))
    return pairs
