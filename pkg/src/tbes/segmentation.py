"""Agglomerative segmentation by total coding-length minimization.

Starting from superpixels, adjacent regions are merged greedily whenever the
merge reduces the image's total coding length: texture bits (Gaussian model
over interior windows) plus half the boundary bits (each internal boundary is
shared by two regions). Regions too small to hold any full window at the
current size are handled by walking a hierarchy of decreasing window sizes;
every accepted merge resets the walk to the largest size.

Candidate gains at the top window size sit in a max-heap with lazy
invalidation: a pair's gain never changes while both regions exist, so
entries are discarded only when an endpoint has been merged away.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator

from .chain import BSD_CHAIN_CODE_PRIOR, ChainCodePrior, entropy_boundary_length, trace_mask_contours
from .coding import CodingParams, region_coding_length
from .features import FeatureField, RegionStats, extract_windows, fit_pca, interior_mask, mean_covariance, project
from .image import RasterImage, convert_color
from .labelmap import adjacent_region_pairs, check_connected, grid_superpixels
from .validation import check_image_array, check_label_map


@dataclass
class SegmentationReport:
    """Summary of one segmentation run, including the per-merge log."""

    epsilon: float
    w_schedule: list[int]
    merges: int
    regions: int
    bits_texture: float
    bits_boundary: float
    bits_total: float
    stage_log: list[dict] = dataclass_field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "w_schedule": list(self.w_schedule),
            "merges": self.merges,
            "regions": self.regions,
            "bits_texture": self.bits_texture,
            "bits_boundary": self.bits_boundary,
            "bits_total": self.bits_total,
            "stage_log": list(self.stage_log),
        }


@dataclass(frozen=True)
class MergeEvent:
    """Snapshot passed to merge callbacks just before a merge is applied."""

    window_size: int
    region_a: int
    region_b: int
    gain: float
    labels: np.ndarray  # raw (non-dense) region ids at this point


class _Region:
    __slots__ = ("bbox", "count", "boundary", "stats_by_w", "texture_by_w", "interior_by_w")

    def __init__(self, bbox: tuple[int, int, int, int], count: int):
        self.bbox = bbox                    # (r0, r1, c0, c1), half-open
        self.count = count
        self.boundary: float | None = None  # cached entropy boundary bits
        self.stats_by_w: dict[int, RegionStats | None] = {}
        self.texture_by_w: dict[int, float | None] = {}
        self.interior_by_w: dict[int, int] = {}


class RegionAdjacencyGraph:
    """Regions of a label map, their adjacency, and cached coding terms.

    Region ids grow monotonically: every merge retires two ids and mints a
    fresh one, so stale references are detectable by liveness alone.
    """

    def __init__(
        self,
        labels: np.ndarray,
        fields: dict[int, FeatureField],
        prior: ChainCodePrior,
        epsilon: float,
        ridge: float = 1e-9,
    ):
        self._labels = check_label_map(labels).copy()
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self._fields = dict(fields)
        self._prior = prior
        self._ridge = ridge
        self._params = {
            w: CodingParams(float(epsilon), int(w), f.dim) for w, f in self._fields.items()
        }
        self._regions: dict[int, _Region] = {}
        slices = ndimage.find_objects(self._labels + 1)
        counts = np.bincount(self._labels.ravel())
        for rid, sl in enumerate(slices):
            if sl is None:
                continue
            bbox = (sl[0].start, sl[0].stop, sl[1].start, sl[1].stop)
            self._regions[rid] = _Region(bbox, int(counts[rid]))
        self._nbrs: dict[int, set[int]] = {rid: set() for rid in self._regions}
        for i, j in adjacent_region_pairs(self._labels):
            self._nbrs[i].add(j)
            self._nbrs[j].add(i)
        self._next_id = int(self._labels.max()) + 1

    # -- bookkeeping -------------------------------------------------------

    @property
    def epsilon(self) -> float:
        return next(iter(self._params.values())).epsilon

    def window_sizes(self) -> list[int]:
        return sorted(self._fields, reverse=True)

    def alive(self, rid: int) -> bool:
        return rid in self._regions

    def region_ids(self) -> list[int]:
        return sorted(self._regions)

    def region_count(self) -> int:
        return len(self._regions)

    def pixel_count(self, rid: int) -> int:
        return self._region(rid).count

    def neighbors(self, rid: int) -> set[int]:
        self._region(rid)
        return set(self._nbrs[rid])

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for i in sorted(self._regions):
            for j in self._nbrs[i]:
                if i < j:
                    out.append((i, j))
        return sorted(out)

    def raw_labels(self) -> np.ndarray:
        return self._labels.copy()

    def labels_dense(self) -> np.ndarray:
        _, inverse = np.unique(self._labels, return_inverse=True)
        return inverse.reshape(self._labels.shape).astype(np.int32)

    def _region(self, rid: int) -> _Region:
        try:
            return self._regions[rid]
        except KeyError:
            raise ValueError(f"unknown or merged-away region {rid}") from None

    def _mask(self, rid: int) -> tuple[np.ndarray, tuple]:
        reg = self._region(rid)
        r0, r1, c0, c1 = reg.bbox
        sl = (slice(r0, r1), slice(c0, c1))
        return self._labels[sl] == rid, sl

    # -- cached per-region terms -------------------------------------------

    def stats(self, rid: int, w: int) -> RegionStats | None:
        """Interior Gaussian stats at window size w; None if degenerate."""
        reg = self._region(rid)
        if w in reg.stats_by_w:
            return reg.stats_by_w[w]
        mask, sl = self._mask(rid)
        interior = interior_mask(mask, w)
        n_int = int(interior.sum())
        reg.interior_by_w[w] = n_int
        if n_int == 0:
            st = None
        else:
            vecs = self._fields[w].values[sl][interior]
            mean, cov = mean_covariance(vecs, self._ridge)
            st = RegionStats(rid, reg.count, n_int, mean, cov)
        reg.stats_by_w[w] = st
        return st

    def interior_count(self, rid: int, w: int) -> int:
        reg = self._region(rid)
        if w not in reg.interior_by_w:
            self.stats(rid, w)
        return reg.interior_by_w[w]

    def is_degenerate(self, rid: int, w: int) -> bool:
        return self.interior_count(rid, w) == 0

    def is_marginal(self, rid: int, w: int) -> bool:
        """Nonempty interior at w but empty at w+2."""
        if w + 2 not in self._fields:
            return False
        return self.interior_count(rid, w) > 0 and self.interior_count(rid, w + 2) == 0

    def texture_bits(self, rid: int, w: int) -> float | None:
        reg = self._region(rid)
        if w in reg.texture_by_w:
            return reg.texture_by_w[w]
        st = self.stats(rid, w)
        bits = None if st is None else region_coding_length(st, self._params[w])
        reg.texture_by_w[w] = bits
        return bits

    def boundary_bits(self, rid: int) -> float:
        reg = self._region(rid)
        if reg.boundary is None:
            mask, _ = self._mask(rid)
            reg.boundary = sum(
                entropy_boundary_length(seq, self._prior) for seq in trace_mask_contours(mask)
            )
        return reg.boundary

    # -- merging -----------------------------------------------------------

    def _union_slices(self, i: int, j: int) -> tuple:
        a = self._region(i).bbox
        b = self._region(j).bbox
        return (
            slice(min(a[0], b[0]), max(a[1], b[1])),
            slice(min(a[2], b[2]), max(a[3], b[3])),
        )

    def _union_terms(self, i: int, j: int, w: int) -> tuple[float, float] | None:
        """(texture bits, boundary bits) of the would-be merged region."""
        sl = self._union_slices(i, j)
        sub = self._labels[sl]
        mask = (sub == i) | (sub == j)
        interior = interior_mask(mask, w)
        n_int = int(interior.sum())
        if n_int == 0:
            return None
        vecs = self._fields[w].values[sl][interior]
        mean, cov = mean_covariance(vecs, self._ridge)
        count = self._region(i).count + self._region(j).count
        stats = RegionStats(-1, count, n_int, mean, cov)
        texture = region_coding_length(stats, self._params[w])
        boundary = sum(
            entropy_boundary_length(seq, self._prior) for seq in trace_mask_contours(mask)
        )
        return texture, boundary

    def _pair_gain(self, i: int, j: int, w: int) -> float | None:
        """Coding-length reduction from merging, or None if ineligible at w."""
        li = self.texture_bits(i, w)
        lj = self.texture_bits(j, w)
        if li is None or lj is None:
            return None
        union = self._union_terms(i, j, w)
        if union is None:
            return None
        lu, bu = union
        return (li + lj - lu) + 0.5 * (self.boundary_bits(i) + self.boundary_bits(j) - bu)

    def merge_gain(self, i: int, j: int, w: int) -> float:
        """Gain of merging adjacent regions i and j, evaluated at window w."""
        if j not in self._nbrs.get(i, ()):
            self._region(i)
            self._region(j)
            raise ValueError(f"regions {i} and {j} are not adjacent")
        gain = self._pair_gain(i, j, w)
        if gain is None:
            raise ValueError(f"region pair ({i}, {j}) is degenerate at window size {w}")
        return gain

    def merge(self, i: int, j: int) -> int:
        """Merge two adjacent regions; returns the fresh region id."""
        if j not in self._nbrs.get(i, ()):
            raise ValueError(f"regions {i} and {j} are not adjacent")
        ri = self._region(i)
        rj = self._region(j)
        new_id = self._next_id
        self._next_id += 1
        sl = self._union_slices(i, j)
        sub = self._labels[sl]
        sub[(sub == i) | (sub == j)] = new_id
        bbox = (sl[0].start, sl[0].stop, sl[1].start, sl[1].stop)
        self._regions[new_id] = _Region(bbox, ri.count + rj.count)
        merged_nbrs = (self._nbrs[i] | self._nbrs[j]) - {i, j}
        self._nbrs[new_id] = merged_nbrs
        for m in merged_nbrs:
            self._nbrs[m].discard(i)
            self._nbrs[m].discard(j)
            self._nbrs[m].add(new_id)
        del self._regions[i], self._regions[j], self._nbrs[i], self._nbrs[j]
        return new_id

    # -- totals --------------------------------------------------------------

    def total_bits(self, w: int) -> tuple[float, float]:
        """(sum of texture bits, sum of boundary bits) over all regions at w.

        Raises if any region is degenerate at w.
        """
        texture = 0.0
        boundary = 0.0
        for rid in sorted(self._regions):
            tb = self.texture_bits(rid, w)
            if tb is None:
                raise ValueError(f"region {rid} is degenerate at window size {w}")
            texture += tb
            boundary += self.boundary_bits(rid)
        return texture, boundary

    def _texture_bits_fallback(self, rid: int) -> tuple[float, bool]:
        """Texture bits at the largest window size where the region is usable."""
        for w in self.window_sizes():
            tb = self.texture_bits(rid, w)
            if tb is not None:
                return tb, w != self.window_sizes()[0]
        raise AssertionError("region degenerate at w=1; impossible since I_1(R)=R")


def build_feature_fields(
    lab_image: RasterImage, w_max: int = 7, n_components: int = 8
) -> dict[int, FeatureField]:
    """Fit one PCA basis per window size in {w_max, w_max-2, ..., 1} and
    project every pixel's stacked window onto it."""
    if w_max < 1 or w_max % 2 == 0:
        raise ValueError("w_max must be an odd integer >= 1")
    shape = lab_image.shape
    fields: dict[int, FeatureField] = {}
    for w in range(w_max, 0, -2):
        raw = extract_windows(lab_image, w)
        basis = fit_pca(raw, n_components)
        fields[w] = project(basis, raw, shape)
    return fields


def total_coding_length(
    labels: np.ndarray,
    fields: dict[int, FeatureField],
    prior: ChainCodePrior,
    params: CodingParams,
) -> SegmentationReport:
    """Total bits of a fixed segmentation at one window size: texture of every
    region plus half its boundary bits (each internal boundary counted once)."""
    rag = RegionAdjacencyGraph(labels, fields, prior, params.epsilon)
    texture, boundary = rag.total_bits(params.window_size)
    return SegmentationReport(
        epsilon=params.epsilon,
        w_schedule=[params.window_size],
        merges=0,
        regions=rag.region_count(),
        bits_texture=texture,
        bits_boundary=boundary,
        bits_total=texture + 0.5 * boundary,
    )


def _as_lab(image) -> RasterImage:
    if isinstance(image, RasterImage):
        if image.colorspace == "lab":
            return image
        if image.colorspace == "rgb":
            return convert_color(image, "lab")
        raise ValueError(f"segmentation expects an RGB or Lab image, got {image.colorspace}")
    arr = check_image_array(image)
    return convert_color(RasterImage(arr, "rgb"), "lab")


def tbes_segment(
    image,
    superpixels: np.ndarray,
    epsilon: float,
    w_max: int = 7,
    n_components: int = 8,
    prior: ChainCodePrior | None = None,
    on_merge: Callable[[MergeEvent], None] | None = None,
) -> tuple[np.ndarray, SegmentationReport]:
    """Greedy coding-length segmentation over a window-size hierarchy.

    At the top window size the best positive-gain adjacent pair (ties broken
    by smallest id pair) is merged and the search restarts; when no such pair
    exists the window size drops by 2 and only pairs with at least one
    marginally sized region are considered. Terminates once a full walk down
    the hierarchy yields no merge.

    Returns the dense label map and a report whose stage log records every
    merge (window size, pair, gain).
    """
    lab = _as_lab(image)
    labels0 = check_label_map(superpixels)
    if labels0.shape != lab.shape:
        raise ValueError(f"superpixels shape {labels0.shape} != image shape {lab.shape}")
    check_connected(labels0)
    prior = prior if prior is not None else BSD_CHAIN_CODE_PRIOR
    fields = build_feature_fields(lab, w_max, n_components)
    rag = RegionAdjacencyGraph(labels0, fields, prior, epsilon)

    heap: list[tuple[float, int, int]] = []

    def push_pair(i: int, j: int) -> None:
        if i > j:
            i, j = j, i
        gain = rag._pair_gain(i, j, w_max)
        if gain is not None and gain > 0:
            heapq.heappush(heap, (-gain, i, j))

    for i, j in rag.edges():
        push_pair(i, j)

    stage_log: list[dict] = []
    merges = 0
    w = w_max
    while True:
        chosen: tuple[int, int, float] | None = None
        if w == w_max:
            while heap:
                neg_gain, i, j = heap[0]
                if not (rag.alive(i) and rag.alive(j)):
                    heapq.heappop(heap)
                    continue
                heapq.heappop(heap)
                chosen = (i, j, -neg_gain)
                break
        else:
            best: tuple[int, int, float] | None = None
            for i, j in rag.edges():
                if rag.is_degenerate(i, w) or rag.is_degenerate(j, w):
                    continue
                if not (rag.is_marginal(i, w) or rag.is_marginal(j, w)):
                    continue
                gain = rag._pair_gain(i, j, w)
                if gain is None or gain <= 0:
                    continue
                if best is None or gain > best[2]:
                    best = (i, j, gain)
            chosen = best

        if chosen is not None:
            i, j, gain = chosen
            if on_merge is not None:
                on_merge(MergeEvent(w, i, j, gain, rag.raw_labels()))
            new_id = rag.merge(i, j)
            merges += 1
            stage_log.append(
                {
                    "event": "merge",
                    "window": w,
                    "pair": [int(i), int(j)],
                    "new_region": int(new_id),
                    "gain": float(gain),
                    "regions": rag.region_count(),
                }
            )
            for m in sorted(rag.neighbors(new_id)):
                push_pair(m, new_id)
            w = w_max
        elif w > 1:
            w -= 2
            stage_log.append({"event": "stage", "window": w})
        else:
            break

    texture = 0.0
    boundary = 0.0
    n_fallback = 0
    for rid in rag.region_ids():
        bits, fell_back = rag._texture_bits_fallback(rid)
        texture += bits
        boundary += rag.boundary_bits(rid)
        n_fallback += int(fell_back)
    if n_fallback:
        stage_log.append({"event": "final", "degenerate_at_wmax": n_fallback})

    report = SegmentationReport(
        epsilon=float(epsilon),
        w_schedule=rag.window_sizes(),
        merges=merges,
        regions=rag.region_count(),
        bits_texture=texture,
        bits_boundary=boundary,
        bits_total=texture + 0.5 * boundary,
        stage_log=stage_log,
    )
    return rag.labels_dense(), report


class TbesSegmentation(BaseEstimator):
    """Coding-length image segmenter with a scikit-learn style interface.

    Parameters
    ----------
    epsilon : float
        Quantization distortion; larger values give coarser segmentations.
    w_max : int
        Largest (odd) texture window size; the hierarchy walks down to 1.
    n_components : int
        Projected feature dimension per window size (clamped to 3*w^2).
    grid_cell : int
        Cell size of the fallback grid superpixels used when none are given.
    prior : ChainCodePrior or None
        Difference-code prior for boundary bits; None uses the built-in one.
    """

    def __init__(self, epsilon=100.0, w_max=7, n_components=8, grid_cell=16, prior=None):
        self.epsilon = epsilon
        self.w_max = w_max
        self.n_components = n_components
        self.grid_cell = grid_cell
        self.prior = prior

    def fit(self, X, y=None, superpixels=None):
        """Segment an image (RasterImage, or (H, W, 3) RGB array in [0, 1]).

        Sets ``labels_`` (dense per-pixel region ids), ``n_regions_`` and
        ``report_``. When no superpixels are given, a regular grid is used.
        """
        lab = _as_lab(X)
        if superpixels is None:
            superpixels = grid_superpixels(lab.shape, self.grid_cell)
        self.labels_, self.report_ = tbes_segment(
            lab,
            superpixels,
            epsilon=self.epsilon,
            w_max=self.w_max,
            n_components=self.n_components,
            prior=self.prior,
        )
        self.n_regions_ = self.report_.regions
        return self

    def fit_predict(self, X, y=None, superpixels=None):
        return self.fit(X, superpixels=superpixels).labels_
