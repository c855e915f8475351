"""Lossy coding-length estimates for Gaussian-modeled texture regions.

Bit counts, not bitstreams: how many bits a Gaussian source with the given
mean/covariance needs at quantization error epsilon per dimension, split into
codebook, data, and mean terms. The region variant charges data bits only for
the non-overlapping windows that tile the region (N / w^2 of them).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import RegionStats


@dataclass(frozen=True)
class CodingParams:
    """Distortion epsilon, texture window size, and projected dimension."""

    epsilon: float
    window_size: int
    dim: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValueError("window size must be an odd integer >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def _log2_det_eye_plus(scaled_cov: np.ndarray) -> float:
    """log2 det(I + M) for PSD M, via Cholesky of the shifted matrix."""
    m = np.eye(scaled_cov.shape[0]) + scaled_cov
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive semidefinite") from exc
    return 2.0 * float(np.sum(np.log2(np.diag(chol))))


def coding_length_full(
    mean: np.ndarray, covariance: np.ndarray, n: float, params: CodingParams
) -> float:
    """Bits to code n feature vectors (every pixel) plus codebook and mean."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(covariance, dtype=np.float64)
    if n < 0:
        raise ValueError("sample count must be nonnegative")
    d = params.dim
    if mean.shape[0] != d or cov.shape != (d, d):
        raise ValueError("mean/covariance dimensions do not match params.dim")
    eps2 = params.epsilon**2
    logdet = _log2_det_eye_plus((d / eps2) * cov)
    mean_bits = 0.5 * d * math.log2(1.0 + float(mean @ mean) / eps2)
    return 0.5 * d * logdet + 0.5 * n * logdet + mean_bits


def region_coding_length(stats: RegionStats, params: CodingParams) -> float:
    """Bits to code a region's texture counting only tiling windows.

    The N / w^2 window count uses exact real division; fractional tile counts
    are kept as-is since the tiling picture is itself an approximation for
    non-rectangular regions.
    """
    d = params.dim
    if stats.mean.shape[0] != d:
        raise ValueError("stats dimension does not match params.dim")
    eps2 = params.epsilon**2
    logdet = _log2_det_eye_plus((d / eps2) * stats.covariance)
    mean_bits = 0.5 * d * math.log2(1.0 + float(stats.mean @ stats.mean) / eps2)
    tiles = stats.pixel_count / (params.window_size**2)
    return (0.5 * d + 0.5 * tiles) * logdet + mean_bits
