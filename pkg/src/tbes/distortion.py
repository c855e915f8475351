"""Adaptive distortion selection.

The right distortion level varies per image. We learn it from labeled
examples: sample the segmentation/ground-truth discrepancy over a distortion
grid, fit a convex quadratic per image, then solve for the linear weights
mapping multi-scale contrast features to a distortion level in closed form.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .image import RasterImage, convert_color
from .metrics import gfm, pri, voi
from .segmentation import tbes_segment
from .validation import check_image_array

EPSILON_GRID = tuple(float(e) for e in range(25, 401, 25))
SCALE_FACTORS = (1.0, 0.5, 0.25, 0.125)
CLAMP_RANGE = (25.0, 400.0)
METRIC_CHOICES = ("pri", "voi", "gfm")


@dataclass(frozen=True)
class DiscrepancyFit:
    """Convex quadratic a*eps^2 + b*eps + c fitted to one image's samples."""

    a: float
    b: float
    c: float
    samples: tuple[tuple[float, float], ...]

    @property
    def vertex(self) -> float:
        return -self.b / (2.0 * self.a)


def _luminance(img) -> np.ndarray:
    if isinstance(img, RasterImage):
        if img.colorspace == "lab":
            return img.data[:, :, 0]
        if img.colorspace == "rgb":
            return convert_color(img, "lab").data[:, :, 0]
        raise ValueError(f"expected an RGB or Lab image, got {img.colorspace}")
    arr = check_image_array(img)
    return convert_color(RasterImage(arr, "rgb"), "lab").data[:, :, 0]


def _box_downsample(arr: np.ndarray, block: int) -> np.ndarray:
    """Block-average downsampling; trailing partial blocks average what's there."""
    if block == 1:
        return arr
    h, w = arr.shape
    row_idx = np.arange(0, h, block)
    col_idx = np.arange(0, w, block)
    sums = np.add.reduceat(np.add.reduceat(arr, row_idx, axis=0), col_idx, axis=1)
    row_n = np.diff(np.append(row_idx, h))
    col_n = np.diff(np.append(col_idx, w))
    return sums / np.outer(row_n, col_n)


def contrast_features(img) -> np.ndarray:
    """Standard deviation of luminance at four box-averaged scales."""
    lum = _luminance(img)
    return np.array(
        [float(_box_downsample(lum, round(1.0 / s)).std()) for s in SCALE_FACTORS]
    )


def _discrepancy(metric: str, labels: np.ndarray, truths) -> float:
    if metric == "pri":
        return 1.0 - pri(labels, truths).value
    if metric == "voi":
        return voi(labels, truths).value
    if metric == "gfm":
        return 1.0 - gfm(labels, truths).value
    raise ValueError(f"unknown metric {metric!r} (choose from {METRIC_CHOICES})")


def sample_discrepancy(
    image,
    ground_truths,
    metric: str = "pri",
    epsilons=EPSILON_GRID,
    *,
    superpixels: np.ndarray | None = None,
    w_max: int = 7,
    n_components: int = 8,
    prior=None,
    grid_cell: int = 16,
) -> list[tuple[float, float]]:
    """Segment the image at each distortion level in ascending order and
    measure the discrepancy against the ground truths."""
    truths = list(ground_truths)
    if not truths:
        raise ValueError("need at least one ground-truth label map")
    if metric not in METRIC_CHOICES:
        raise ValueError(f"unknown metric {metric!r} (choose from {METRIC_CHOICES})")
    if superpixels is None:
        from .labelmap import grid_superpixels

        shape = image.shape if isinstance(image, RasterImage) else np.asarray(image).shape[:2]
        superpixels = grid_superpixels(shape, grid_cell)
    samples = []
    for eps in sorted(float(e) for e in epsilons):
        labels, _ = tbes_segment(
            image, superpixels, epsilon=eps, w_max=w_max, n_components=n_components, prior=prior
        )
        samples.append((eps, _discrepancy(metric, labels, truths)))
    return samples


def fit_quadratic(samples) -> DiscrepancyFit:
    """Least-squares convex quadratic through (epsilon, discrepancy) samples.

    Raises ValueError when fewer than 3 samples are given or when the fitted
    curvature is not positive (the image is then excluded from training).
    """
    pts = [(float(e), float(d)) for e, d in samples]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 samples to fit a quadratic, got {len(pts)}")
    eps = np.array([p[0] for p in pts])
    d = np.array([p[1] for p in pts])
    scale = float(np.abs(eps).max()) or 1.0
    es = eps / scale
    design = np.stack([np.ones_like(es), es, es**2], axis=1)
    coef, *_ = np.linalg.lstsq(design, d, rcond=None)
    c, b, a = float(coef[0]), float(coef[1]) / scale, float(coef[2]) / scale**2
    if a <= 0:
        raise ValueError(f"discrepancy fit is not convex (curvature {a:.3g} <= 0)")
    return DiscrepancyFit(a, b, c, tuple(pts))


class DistortionRegressor(BaseEstimator):
    """Linear map from contrast features to a distortion level.

    Fitted weights minimize the summed quadratic discrepancy surrogates
    sum_k a_k (theta.f_k)^2 + b_k (theta.f_k) + c_k, which has a closed-form
    solution; a small ridge keeps the normal matrix invertible when fewer
    than four independent feature directions are available.
    """

    def __init__(self, ridge=1e-8, clamp_low=CLAMP_RANGE[0], clamp_high=CLAMP_RANGE[1]):
        self.ridge = ridge
        self.clamp_low = clamp_low
        self.clamp_high = clamp_high

    def fit(self, X, quadratics):
        """Fit from per-image features X (n, 4) and their quadratic fits.

        `quadratics` is a sequence of DiscrepancyFit or (a, b, c) triples.
        """
        F = np.atleast_2d(np.asarray(X, dtype=np.float64))
        coeffs = np.array(
            [
                (q.a, q.b, q.c) if isinstance(q, DiscrepancyFit) else tuple(q)
                for q in quadratics
            ],
            dtype=np.float64,
        )
        if F.shape[0] == 0 or coeffs.shape[0] == 0:
            raise ValueError("training set is empty")
        if F.shape[0] != coeffs.shape[0]:
            raise ValueError("features and quadratic fits disagree in length")
        if np.any(coeffs[:, 0] <= 0):
            raise ValueError("all quadratic fits must have positive curvature")
        dim = F.shape[1]
        normal = (coeffs[:, 0, None, None] * (F[:, :, None] * F[:, None, :])).sum(axis=0)
        normal += self.ridge * np.eye(dim)
        rhs = (coeffs[:, 1, None] * F).sum(axis=0)
        self.theta_ = -0.5 * np.linalg.solve(normal, rhs)
        self.n_trained_ = int(F.shape[0])
        return self

    def decision_function(self, X) -> np.ndarray:
        """Unclamped linear predictions theta . f."""
        if not hasattr(self, "theta_"):
            raise NotFittedError("DistortionRegressor is not fitted")
        F = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return F @ self.theta_

    def predict(self, X) -> np.ndarray:
        """Distortion levels clamped into [clamp_low, clamp_high]."""
        return np.clip(self.decision_function(X), self.clamp_low, self.clamp_high)


def train_regressor(fits, features, ridge: float = 1e-8) -> DistortionRegressor:
    """Fit a DistortionRegressor from per-image quadratic fits and features."""
    return DistortionRegressor(ridge=ridge).fit(np.asarray(features, dtype=np.float64), fits)


def predict_epsilon(regressor: DistortionRegressor, features) -> float:
    """Clamped distortion prediction for one image's contrast features."""
    return float(regressor.predict(np.asarray(features, dtype=np.float64).reshape(1, -1))[0])


def save_model(regressor: DistortionRegressor, path, metric: str) -> None:
    payload = {
        "theta": [float(t) for t in regressor.theta_],
        "scales": list(SCALE_FACTORS),
        "clamp": [regressor.clamp_low, regressor.clamp_high],
        "metric": metric,
        "trained_on": getattr(regressor, "n_trained_", 0),
    }
    with open(path, "w", encoding="ascii") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def load_model(path) -> tuple[DistortionRegressor, dict]:
    with open(path, encoding="ascii") as f:
        payload = json.load(f)
    theta = np.asarray(payload["theta"], dtype=np.float64)
    if theta.shape != (4,):
        raise ValueError(f"model theta must have 4 entries, got {theta.shape}")
    clamp = payload.get("clamp", list(CLAMP_RANGE))
    reg = DistortionRegressor(clamp_low=float(clamp[0]), clamp_high=float(clamp[1]))
    reg.theta_ = theta
    reg.n_trained_ = int(payload.get("trained_on", 0))
    return reg, payload
