"""Segmentation discrepancy metrics: PRI, VOI, and boundary F-measure.

PRI and VOI are computed from the contingency table of the two labelings
(O(k1*k2), never over all pixel pairs) and averaged over multiple ground
truths. The F-measure matches boundary pixels by distance: precision against
the union of all ground-truth boundaries, recall per ground truth and then
averaged over the ensemble.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .validation import check_label_map, check_same_shape


@dataclass(frozen=True)
class MetricResult:
    name: str
    value: float
    per_ground_truth: list[float] | None = None
    precision: float | None = None
    recall: float | None = None


def _check_inputs(test, truths):
    test = check_label_map(test, dense=False)
    truths = [check_label_map(t, dense=False) for t in truths]
    if not truths:
        raise ValueError("need at least one ground-truth label map")
    for t in truths:
        check_same_shape(test, t, "label maps")
    return test, truths


def _contingency(a: np.ndarray, b: np.ndarray):
    """Sparse contingency of two labelings: joint cells plus marginals."""
    a = a.ravel().astype(np.int64)
    b = b.ravel().astype(np.int64)
    b_span = int(b.max()) + 1
    keys, joint = np.unique(a * b_span + b, return_counts=True)
    rows = keys // b_span
    cols = keys % b_span
    return joint, rows, cols, np.bincount(a), np.bincount(b), a.size


def _pairs(x: np.ndarray) -> float:
    x = x.astype(np.float64)
    return float((x * (x - 1.0) / 2.0).sum())


def _pri_single(test: np.ndarray, truth: np.ndarray) -> float:
    joint, _, _, ca, cb, n = _contingency(test, truth)
    together_both = _pairs(joint)
    total = n * (n - 1.0) / 2.0
    apart_both = total - _pairs(ca) - _pairs(cb) + together_both
    return (together_both + apart_both) / total


def pri(test, truths) -> MetricResult:
    """Probability that a random pixel pair is consistently co-labeled,
    averaged over the ground truths. In [0, 1], higher is better."""
    test, truths = _check_inputs(test, truths)
    per = [_pri_single(test, t) for t in truths]
    return MetricResult("PRI", float(np.mean(per)), per_ground_truth=per)


def _voi_single(test: np.ndarray, truth: np.ndarray) -> float:
    joint, rows, cols, ca, cb, n = _contingency(test, truth)
    h_a = -sum(c / n * math.log2(c / n) for c in ca if c)
    h_b = -sum(c / n * math.log2(c / n) for c in cb if c)
    mi = sum(
        c / n * math.log2(c * n / (ca[i] * cb[j]))
        for c, i, j in zip(joint, rows, cols)
    )
    return max(h_a + h_b - 2.0 * mi, 0.0)


def voi(test, truths) -> MetricResult:
    """Variation of information between partitions, in bits, averaged over
    the ground truths. Nonnegative; 0 iff the partitions coincide."""
    test, truths = _check_inputs(test, truths)
    per = [_voi_single(test, t) for t in truths]
    return MetricResult("VOI", float(np.mean(per)), per_ground_truth=per)


def boundary_map(labels: np.ndarray) -> np.ndarray:
    """Pixels whose 4-neighborhood crosses a region boundary."""
    labels = np.asarray(labels)
    bmap = np.zeros(labels.shape, dtype=bool)
    vert = labels[:-1, :] != labels[1:, :]
    bmap[:-1, :] |= vert
    bmap[1:, :] |= vert
    horz = labels[:, :-1] != labels[:, 1:]
    bmap[:, :-1] |= horz
    bmap[:, 1:] |= horz
    return bmap


def _distance_to(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance from every pixel to the nearest True pixel."""
    if not mask.any():
        return np.full(mask.shape, np.inf)
    return ndimage.distance_transform_edt(~mask)


def gfm(test, truths, tolerance_px: float | None = None) -> MetricResult:
    """Boundary F-measure: harmonic mean of precision and recall under a
    pixel-distance matching tolerance (default 0.0075 x image diagonal)."""
    test, truths = _check_inputs(test, truths)
    if tolerance_px is None:
        tolerance_px = 0.0075 * math.hypot(*test.shape)
    if tolerance_px < 0:
        raise ValueError("tolerance must be nonnegative")
    test_b = boundary_map(test)
    truth_bs = [boundary_map(t) for t in truths]

    dist_to_truth = np.minimum.reduce([_distance_to(tb) for tb in truth_bs])
    precision = float((dist_to_truth[test_b] <= tolerance_px).mean()) if test_b.any() else 1.0

    dist_to_test = _distance_to(test_b)
    recalls = [
        float((dist_to_test[tb] <= tolerance_px).mean()) if tb.any() else 1.0
        for tb in truth_bs
    ]
    recall = float(np.mean(recalls))
    f = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricResult("GFM", f, precision=precision, recall=recall)
