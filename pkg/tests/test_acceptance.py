"""Acceptance suite: one test per release criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s`. Criteria 8 and the second
half of 9 need a prepared BSD-style dataset and are skipped unless the
TBES_BSD_DIR environment variable points at one (see README for the layout).
"""
import math
import os
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from tbes import (
    BSD_CHAIN_CODE_PRIOR,
    ChainCodeSequence,
    CodingParams,
    DiscrepancyFit,
    coding_length_full,
    entropy_boundary_length,
    estimate_prior,
    grid_superpixels,
    load_image,
    load_label_map,
    pri,
    region_coding_length,
    replay_codes,
    tbes_segment,
    trace_mask_contours,
    train_regressor,
    voi,
)
from tbes.chain import PRIOR_FLOOR
from tbes.features import RegionStats
from tbes.labelmap import adjacent_region_pairs
from tbes.segmentation import build_feature_fields

from conftest import cg_minimize, four_boundary_pixels, random_blob_mask, two_texture_image
from test_metrics import brute_force_pri
from test_segmentation import oracle_pair_gain, oracle_total


def _report(criterion, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {criterion}: {status} {detail}".rstrip())
    assert passed, f"criterion {criterion} failed: {detail}"


def test_criterion_1_coding_length_fixtures():
    start = time.perf_counter()
    p2 = CodingParams(1.0, 1, 2)
    four_bit = coding_length_full(np.zeros(2), 0.5 * np.eye(2), 2, p2)
    mean_bits = coding_length_full(np.array([math.sqrt(3), 0.0]), np.zeros((2, 2)), 0, p2)
    region_params = CodingParams(1.0, 1, 2)
    object.__setattr__(region_params, "window_size", 2)
    region_bits = region_coding_length(
        RegionStats(0, 8, 8, np.zeros(2), 0.5 * np.eye(2)), region_params
    )
    ok = (
        abs(four_bit - 4.0) <= 1e-9 * 4.0
        and abs(mean_bits - 2.0) <= 1e-9 * 2.0
        and abs(region_bits - 4.0) <= 1e-9 * 4.0
    )
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(1, 9))
        a = rng.normal(size=(dim, dim))
        cov = (a @ a.T) * float(rng.uniform(0.01, 50))
        mean = rng.normal(size=dim) * float(rng.uniform(0.1, 20))
        eps = float(rng.uniform(0.1, 300))
        n = int(rng.integers(0, 1000))
        s = float(rng.uniform(0.05, 50))
        base = coding_length_full(mean, cov, n, CodingParams(eps, 1, dim))
        scaled = coding_length_full(
            s * mean, s * s * cov, n, CodingParams(s * eps, 1, dim)
        )
        worst = max(worst, abs(scaled - base) / max(abs(base), 1e-30))
    elapsed = time.perf_counter() - start
    ok = ok and worst <= 1e-9 and elapsed < 1.0
    _report(1, ok, f"(scale-identity worst rel err {worst:.2e}, {elapsed:.2f}s)")


def test_criterion_2_chain_code_roundtrip():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    failures = 0
    for k in range(200):
        h = int(rng.integers(3, 33))
        w = int(rng.integers(3, 33))
        mask = random_blob_mask(rng, h, w, n_rects=int(rng.integers(1, 7)))
        (outer, *_) = trace_mask_contours(mask)
        visited = replay_codes(outer)
        closed = visited[0] == visited[-1]
        exact = set(visited) == set(map(tuple, np.argwhere(four_boundary_pixels(mask))))
        failures += int(not (closed and exact))
    elapsed = time.perf_counter() - start
    _report(2, failures == 0 and elapsed < 5.0, f"(200 masks, {elapsed:.2f}s)")


def test_criterion_3_entropy_boundary_length():
    rng = np.random.default_rng(303)
    exact = True
    for _ in range(100):
        codes = tuple(int(c) for c in rng.integers(0, 8, size=rng.integers(1, 80)))
        seq = ChainCodeSequence((0, 0), codes)
        counts = Counter((codes[t] - codes[t + 1]) % 8 for t in range(len(codes) - 1))
        expected = 3.0
        for i in range(8):
            if counts[i]:
                expected += counts[i] * -math.log2(
                    max(float(BSD_CHAIN_CODE_PRIOR.probabilities[i]), PRIOR_FLOOR)
                )
        exact = exact and entropy_boundary_length(seq, BSD_CHAIN_CODE_PRIOR) == expected
    straight = ChainCodeSequence((0, 0), tuple([0] * 11))  # 10 zero-difference steps
    straight_bits = entropy_boundary_length(straight, BSD_CHAIN_CODE_PRIOR)
    target = 3.0 + 10 * -math.log2(0.585)
    ok = exact and abs(straight_bits - target) <= 1e-6
    _report(3, ok, f"(straight contour {straight_bits:.6f} bits vs {target:.6f})")


def _random_rect_partition(rng, size=56, min_band=8):
    def cuts(n_bands):
        extra = rng.multinomial(size - min_band * n_bands, np.full(n_bands, 1 / n_bands))
        return np.concatenate([[0], np.cumsum(min_band + extra)]).tolist()

    rows = cuts(int(rng.integers(3, 5)))
    cols = cuts(int(rng.integers(4, 6)))
    labels = np.zeros((size, size), dtype=np.int32)
    rid = 0
    data = np.zeros((size, size, 3))
    # few distinct colors so plenty of positive-gain merges exist
    palette = rng.uniform((20, -30, -30), (80, 30, 30), size=(3, 3))
    for r0, r1 in zip(rows, rows[1:]):
        for c0, c1 in zip(cols, cols[1:]):
            labels[r0:r1, c0:c1] = rid
            data[r0:r1, c0:c1] = palette[rng.integers(0, len(palette))]
            rid += 1
    data += rng.normal(0, 1.0, data.shape)
    return labels, data


def test_criterion_4_greedy_matches_exhaustive_enumeration():
    from tbes import RasterImage

    start = time.perf_counter()
    rng = np.random.default_rng(404)
    checked_merges = 0
    for run in range(3):
        labels, data = _random_rect_partition(rng)
        assert labels.max() + 1 <= 20
        img = RasterImage(data, "lab")
        fields = build_feature_fields(img, w_max=7)

        def on_merge(event, fields=fields):
            nonlocal checked_merges
            w = event.window_size
            pairs = sorted(tuple(sorted(p)) for p in adjacent_region_pairs(event.labels))
            best = None
            for i, j in pairs:
                gain = oracle_pair_gain(
                    event.labels, fields, BSD_CHAIN_CODE_PRIOR, 100.0, w, i, j
                )
                if gain is None or gain <= 0:
                    continue
                if best is None or gain > best[2] + 1e-12:
                    best = (i, j, gain)
            assert best is not None, "engine merged where the oracle finds no positive gain"
            assert (event.region_a, event.region_b) == (best[0], best[1])
            before = oracle_total(event.labels, fields, BSD_CHAIN_CODE_PRIOR, 100.0, w)
            merged = np.where(event.labels == event.region_b, event.region_a, event.labels)
            after = oracle_total(merged, fields, BSD_CHAIN_CODE_PRIOR, 100.0, w)
            assert after < before, "total coding length did not strictly decrease"
            checked_merges += 1

        tbes_segment(img, labels, epsilon=100.0, w_max=7, on_merge=on_merge)
    elapsed = time.perf_counter() - start
    _report(4, checked_merges >= 10 and elapsed < 30.0,
            f"({checked_merges} merges verified in {elapsed:.1f}s)")


def test_criterion_5_synthetic_end_to_end():
    img, truth = two_texture_image(size=64, noise=0.01)
    start = time.perf_counter()
    labels, report = tbes_segment(img, grid_superpixels((64, 64), 8), epsilon=100.0)
    elapsed = time.perf_counter() - start
    agreement = max((labels == truth).mean(), (labels == 1 - truth).mean())
    rand_index = pri(labels, [truth]).value
    ok = (
        report.regions == 2
        and agreement >= 0.99
        and rand_index >= 0.98
        and elapsed < 10.0
    )
    _report(5, ok, f"({report.regions} regions, {agreement:.4f} agreement, "
                   f"PRI {rand_index:.4f}, {elapsed:.2f}s)")


def test_criterion_6_metric_oracles():
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(50):
        a = rng.integers(0, 5, size=(8, 8))
        b = rng.integers(0, 4, size=(8, 8))
        worst = max(worst, abs(pri(a, [b]).value - brute_force_pri(a, b)))
    fixture = voi(np.array([[0, 0, 1, 1]]), [np.array([[0, 1, 0, 1]])]).value
    sym_ok = True
    for _ in range(50):
        a = rng.integers(0, 4, size=(6, 6))
        b = rng.integers(0, 5, size=(6, 6))
        vab, vba = voi(a, [b]).value, voi(b, [a]).value
        sym_ok = sym_ok and abs(vab - vba) < 1e-12 and vab >= 0
    ok = worst <= 1e-12 and abs(fixture - 2.0) < 1e-12 and sym_ok
    _report(6, ok, f"(PRI worst diff {worst:.1e}, VOI fixture {fixture})")


def test_criterion_7_regression_closed_form():
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(4, 12))
        F = rng.uniform(0.5, 2.0, size=(n, 4))
        a = rng.uniform(0.5, 2.0, size=n)
        vertex = rng.uniform(50.0, 350.0, size=n)
        b = -2.0 * a * vertex
        c = a * vertex**2 + rng.uniform(0.0, 1.0, size=n)
        ridge = 1e-8
        reg = train_regressor([DiscrepancyFit(*t, ()) for t in zip(a, b, c)], F, ridge=ridge)

        def grad(theta, F=F, a=a, b=b):
            z = F @ theta
            return F.T @ (2 * a * z + b) + 2 * ridge * theta

        numeric = cg_minimize(grad, 4)
        worst = max(worst, float(np.abs(reg.theta_ - numeric).max()))
    # single-image vertex recovery inside the clamp range
    single = train_regressor(
        [DiscrepancyFit(0.5, -150.0, 40.0, ())], np.array([[2.0, 0.0, 0.0, 0.0]])
    )
    vertex_pred = float(single.predict(np.array([[2.0, 0.0, 0.0, 0.0]]))[0])
    ok = worst <= 1e-6 and abs(vertex_pred - 150.0) <= 1e-5
    _report(7, ok, f"(worst theta diff {worst:.2e}, vertex {vertex_pred:.6f})")


def _bsd_dir():
    root = os.environ.get("TBES_BSD_DIR")
    if not root:
        return None
    path = Path(root)
    if not (path / "images").is_dir() or not (path / "truths").is_dir():
        return None
    return path


def test_criterion_8_dataset_benchmark():
    bsd = _bsd_dir()
    if bsd is None:
        print("ACCEPTANCE 8: SKIP (dataset-gated; set TBES_BSD_DIR to a prepared "
              "BSD layout to run)")
        pytest.skip("TBES_BSD_DIR not set")
    epsilon = float(os.environ.get("TBES_BSD_EPSILON", "150"))
    images = sorted((bsd / "images").iterdir())[:10]
    assert len(images) >= 10, "dataset benchmark needs at least 10 images"
    pri_vals, voi_vals = [], []
    for img_path in images:
        image = load_image(img_path)
        truth_paths = sorted((bsd / "truths").glob(img_path.stem + "*.pgm"))
        assert truth_paths, f"no truths for {img_path.name}"
        truths = [load_label_map(p, expect_shape=image.shape) for p in truth_paths]
        sp_path = bsd / "superpixels" / (img_path.stem + ".pgm")
        superpixels = (
            load_label_map(sp_path, expect_shape=image.shape)
            if sp_path.exists()
            else grid_superpixels(image.shape, 16)
        )
        labels, _ = tbes_segment(image, superpixels, epsilon=epsilon)
        pri_vals.append(pri(labels, truths).value)
        voi_vals.append(voi(labels, truths).value)
    mean_pri = float(np.mean(pri_vals))
    mean_voi = float(np.mean(voi_vals))
    soft_ok = mean_pri >= 0.75 and mean_voi <= 2.0
    status = "PASS" if soft_ok else "INVESTIGATE"
    print(f"ACCEPTANCE 8: {status} (PRI {mean_pri:.3f}, VOI {mean_voi:.3f} on "
          f"{len(images)} images; soft target PRI>=0.75, VOI<=2.0)")
    # soft target: a miss flags investigation, it does not fail the build


def test_criterion_9_prior_estimation():
    maps = []
    rng = np.random.default_rng(909)
    for _ in range(4):
        labels = np.zeros((24, 24), dtype=np.int32)
        col_cut = int(rng.integers(6, 18))
        row_cut = int(rng.integers(6, 18))
        labels[:, col_cut:] = 1
        labels[row_cut:, :] += 2
        maps.append(labels)
    prior = estimate_prior(maps)
    synth_ok = prior.probabilities[4] == 0.0 and prior.probabilities[0] > 0.5
    detail = f"(synthetic P[0]={prior.probabilities[0]:.3f}, P[4]={prior.probabilities[4]})"

    bsd = _bsd_dir()
    if bsd is not None:
        truths = [load_label_map(p) for p in sorted((bsd / "truths").glob("*.pgm"))]
        est = estimate_prior(truths)
        diffs = np.abs(est.probabilities - BSD_CHAIN_CODE_PRIOR.probabilities)
        table_ok = bool(np.all(diffs <= 0.05))
        detail += f"; BSD max entry diff {diffs.max():.3f}"
        _report(9, synth_ok and table_ok, detail)
    else:
        detail += "; table comparison SKIPPED (dataset-gated)"
        _report(9, synth_ok, detail)
