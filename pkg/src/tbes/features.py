"""Texture features: window stacking, PCA projection, region statistics.

Each pixel contributes the w x w neighborhood around it across all three
channels, stacked into a 3*w^2 vector (mirror padding at image borders).
One PCA basis is fit per window size over all pixels of the image; region
statistics are then estimated only from interior pixels, whose full window
lies inside both the region and the image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import RasterImage
from .validation import check_image_array, check_odd_window

_COV_CHUNK = 65536


@dataclass(frozen=True)
class PcaBasis:
    """Orthonormal projection basis for stacked-window features.

    window_size is None when the basis was fit on a generic matrix whose
    row count is not 3*w^2 for an odd w.
    """

    window_size: int | None
    mean: np.ndarray          # (raw_dim,)
    components: np.ndarray    # (dim, raw_dim), orthonormal rows
    energy_fraction: float

    @property
    def raw_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class FeatureField:
    """Per-pixel projected feature vectors for one window size."""

    window_size: int | None
    values: np.ndarray        # (H, W, dim)

    @property
    def dim(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class RegionStats:
    """Sample mean/covariance of a region's interior features at one window size."""

    region_id: int
    pixel_count: int
    interior_count: int
    mean: np.ndarray          # (dim,)
    covariance: np.ndarray    # (dim, dim), symmetric PSD


def extract_windows(img, window_size: int) -> np.ndarray:
    """Stack the w x w window around every pixel into a (3*w^2, H*W) matrix.

    Columns follow pixel raster order; within a column, values follow window
    raster order with channels innermost. Borders use mirror padding.
    """
    data = img.data if isinstance(img, RasterImage) else check_image_array(img)
    h, width = data.shape[0], data.shape[1]
    w = check_odd_window(window_size, (h, width))
    if w == 1:
        return data.reshape(h * width, 3).T.copy()
    r = (w - 1) // 2
    padded = np.pad(data, ((r, r), (r, r), (0, 0)), mode="symmetric")
    view = np.lib.stride_tricks.sliding_window_view(padded, (w, w), axis=(0, 1))
    # view[i, j, ch, a, b] == padded[i+a, j+b, ch]; reorder to (a, b, ch)
    cols = view.transpose(0, 1, 3, 4, 2).reshape(h * width, 3 * w * w)
    return np.ascontiguousarray(cols.T)


def fit_pca(raw: np.ndarray, n_components: int) -> PcaBasis:
    """Fit a PCA basis to the columns of a raw feature matrix.

    The requested dimension is clamped to the raw dimension. Component signs
    follow a fixed convention (largest-magnitude entry positive) so results
    are reproducible across platforms.
    """
    raw = np.asarray(raw, dtype=np.float64)
    raw_dim, n = raw.shape
    if n < n_components:
        raise ValueError(f"need at least {n_components} samples, got {n}")
    dim = min(int(n_components), raw_dim)
    mean = raw.mean(axis=1)
    cov = np.zeros((raw_dim, raw_dim))
    for start in range(0, n, _COV_CHUNK):
        centered = raw[:, start : start + _COV_CHUNK] - mean[:, None]
        cov += centered @ centered.T
    cov /= n
    evals, evecs = np.linalg.eigh(cov)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    components = evecs[:, :dim].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    clipped = np.clip(evals, 0.0, None)
    total = float(clipped.sum())
    energy = float(clipped[:dim].sum()) / total if total > 0 else 1.0
    side = math.isqrt(max(raw_dim // 3, 1))
    window_size = side if (3 * side * side == raw_dim and side % 2 == 1) else None
    return PcaBasis(window_size, mean, components, energy)


def project(basis: PcaBasis, raw: np.ndarray, shape: tuple[int, int]) -> FeatureField:
    """Project raw window columns onto the basis; returns an (H, W, dim) field."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[0] != basis.raw_dim:
        raise ValueError(
            f"raw dimension {raw.shape[0]} does not match basis dimension {basis.raw_dim}"
        )
    h, w = int(shape[0]), int(shape[1])
    if raw.shape[1] != h * w:
        raise ValueError(f"expected {h * w} columns, got {raw.shape[1]}")
    proj = basis.components @ raw - (basis.components @ basis.mean)[:, None]
    return FeatureField(basis.window_size, np.ascontiguousarray(proj.T.reshape(h, w, basis.dim)))


def interior_mask(mask: np.ndarray, window_size: int) -> np.ndarray:
    """Pixels whose full w x w window lies inside the mask (and the array)."""
    w = check_odd_window(window_size)
    if w == 1:
        return mask.astype(bool).copy()
    shrunk = ndimage.minimum_filter(
        mask.astype(np.uint8), size=w, mode="constant", cval=0
    )
    return shrunk.astype(bool)


def interior_pixels(labels: np.ndarray, region: int, window_size: int) -> np.ndarray:
    """Boolean mask of region pixels whose full window stays inside the region.

    Windows reaching outside the image disqualify the pixel, so statistics
    never see padded data.
    """
    mask = labels == region
    if not mask.any():
        raise ValueError(f"region {region} not present in label map")
    return interior_mask(mask, window_size)


def mean_covariance(vectors: np.ndarray, ridge: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and biased (1/n) covariance with a small PSD ridge."""
    vecs = np.asarray(vectors, dtype=np.float64)
    n, dim = vecs.shape
    mean = vecs.mean(axis=0)
    centered = vecs - mean
    cov = centered.T @ centered / n
    cov = (cov + cov.T) / 2.0 + ridge * np.eye(dim)
    return mean, cov


def region_stats(
    field: FeatureField,
    interior: np.ndarray,
    region_id: int,
    pixel_count: int,
    ridge: float = 1e-9,
) -> RegionStats:
    """Gaussian statistics of a region from its interior feature vectors."""
    vecs = field.values[interior]
    if vecs.shape[0] == 0:
        raise ValueError(f"region {region_id} has an empty interior (degenerate)")
    mean, cov = mean_covariance(vecs, ridge)
    return RegionStats(int(region_id), int(pixel_count), int(vecs.shape[0]), mean, cov)
