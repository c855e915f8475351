"""Command-line interface: segment, train-epsilon, eval, colorspace-study.

All subcommands are deterministic given identical inputs and flags; harness
commands parallelize across images with a bounded worker pool (--jobs,
overridable via the TBES_JOBS environment variable) and emit results in
canonical filename order.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .chain import BSD_CHAIN_CODE_PRIOR, ChainCodePrior
from .coding import CodingParams, coding_length_full
from .distortion import (
    EPSILON_GRID,
    METRIC_CHOICES,
    contrast_features,
    fit_quadratic,
    load_model,
    predict_epsilon,
    sample_discrepancy,
    save_model,
    train_regressor,
)
from .features import extract_windows, fit_pca, interior_mask, mean_covariance, project
from .image import convert_color, load_image
from .labelmap import grid_superpixels, load_label_map, save_label_map
from .metrics import gfm, pri, voi
from .segmentation import tbes_segment

IMAGE_SUFFIXES = (".ppm", ".png")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _resolve_jobs(value) -> int:
    if value is not None:
        return max(int(value), 1)
    env = os.environ.get("TBES_JOBS")
    return max(int(env), 1) if env else 1


def _pmap(func, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _load_prior(path) -> ChainCodePrior:
    if path is None:
        return BSD_CHAIN_CODE_PRIOR
    return ChainCodePrior.from_json(Path(path).read_text(encoding="ascii"))


def _find_images(directory: Path) -> list[Path]:
    files = [p for p in sorted(directory.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES]
    return files


def _find_truths(truths_dir: Path, stem: str) -> list[Path]:
    """Ground-truth PGMs for an image: <stem>.pgm plus <stem>_*.pgm / <stem>-*.pgm."""
    out = []
    for p in sorted(truths_dir.glob("*.pgm")):
        if p.stem == stem or p.stem.startswith(stem + "_") or p.stem.startswith(stem + "-"):
            out.append(p)
    return out


# -- segment ----------------------------------------------------------------


def _cmd_segment(args, parser) -> int:
    if (args.epsilon is None) == (args.model is None):
        parser.error("exactly one of --epsilon or --model is required")
    if args.epsilon is not None and args.epsilon <= 0:
        parser.error("--epsilon must be positive")
    if args.wmax < 1 or args.wmax % 2 == 0:
        parser.error("--wmax must be an odd integer >= 1")
    image = load_image(args.input)
    if args.epsilon is not None:
        epsilon = float(args.epsilon)
    else:
        regressor, _ = load_model(args.model)
        epsilon = predict_epsilon(regressor, contrast_features(image))
    if args.superpixels is not None:
        superpixels = load_label_map(args.superpixels, expect_shape=image.shape)
    else:
        superpixels = grid_superpixels(image.shape, args.grid_cell)
    prior = _load_prior(args.prior)
    labels, report = tbes_segment(
        image, superpixels, epsilon=epsilon, w_max=args.wmax, prior=prior
    )
    in_path = Path(args.input)
    out_path = Path(args.out) if args.out else in_path.with_name(in_path.stem + "_seg.pgm")
    report_path = Path(args.report) if args.report else out_path.with_name(out_path.stem + ".json")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_name(out_path.name + ".tmp")
    save_label_map(tmp, labels)
    os.replace(tmp, out_path)
    _atomic_write_text(report_path, json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"{out_path}: {report.regions} regions, {report.bits_total:.1f} bits (epsilon {epsilon:g})")
    return 0


# -- train-epsilon ------------------------------------------------------------


def _train_one(task: dict):
    image = load_image(task["image"])
    truths = [load_label_map(p, expect_shape=image.shape) for p in task["truths"]]
    features = contrast_features(image)
    samples = sample_discrepancy(
        image,
        truths,
        metric=task["metric"],
        epsilons=task["epsilons"],
        w_max=task["wmax"],
        grid_cell=task["grid_cell"],
        superpixels=load_label_map(task["superpixels"], expect_shape=image.shape)
        if task["superpixels"]
        else None,
    )
    return features, samples


def _cmd_train_epsilon(args, parser) -> int:
    if args.wmax < 1 or args.wmax % 2 == 0:
        parser.error("--wmax must be an odd integer >= 1")
    images_dir = Path(args.images)
    truths_dir = Path(args.truths)
    if not truths_dir.is_dir() or not any(truths_dir.glob("*.pgm")):
        return _fail(f"no ground-truth PGMs found in {truths_dir}")
    tasks = []
    for img_path in _find_images(images_dir):
        truth_paths = _find_truths(truths_dir, img_path.stem)
        if not truth_paths:
            _warn(f"no ground truths for {img_path.name}; skipping")
            continue
        sp_path = None
        if args.superpixels:
            cand = Path(args.superpixels) / (img_path.stem + ".pgm")
            if cand.exists():
                sp_path = cand
            else:
                _warn(f"no superpixels for {img_path.name}; using grid fallback")
        tasks.append(
            {
                "image": img_path,
                "truths": truth_paths,
                "metric": args.metric,
                "epsilons": EPSILON_GRID,
                "wmax": args.wmax,
                "grid_cell": args.grid_cell,
                "superpixels": sp_path,
            }
        )
    if not tasks:
        return _fail("no usable training images")
    results = _pmap(_train_one, tasks, _resolve_jobs(args.jobs))
    fits, feats, rejected = [], [], 0
    for task, (features, samples) in zip(tasks, results):
        try:
            fit = fit_quadratic(samples)
        except ValueError as exc:
            rejected += 1
            _warn(f"{task['image'].name}: {exc}; excluded from training")
            continue
        fits.append(fit)
        feats.append(features)
    if not fits:
        return _fail("every training image was rejected (non-convex discrepancy fits)")
    regressor = train_regressor(fits, np.vstack(feats))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_model(regressor, args.out, metric=args.metric)
    print(
        f"{args.out}: trained on {len(fits)} images"
        + (f" ({rejected} rejected)" if rejected else "")
    )
    return 0


# -- eval ---------------------------------------------------------------------


def _eval_one(task: dict):
    test = load_label_map(task["test"])
    truths = [load_label_map(p, expect_shape=test.shape) for p in task["truths"]]
    start = time.perf_counter()
    row: dict = {"id": task["stem"]}
    per_truth: dict = {}
    if "pri" in task["metrics"]:
        res = pri(test, truths)
        row["PRI"] = res.value
        per_truth["PRI"] = res.per_ground_truth
    if "voi" in task["metrics"]:
        res = voi(test, truths)
        row["VOI"] = res.value
        per_truth["VOI"] = res.per_ground_truth
    if "gfm" in task["metrics"]:
        res = gfm(test, truths, tolerance_px=task["tolerance"])
        row["GFM"] = res.value
    row["seconds"] = time.perf_counter() - start
    row["regions"] = int(test.max()) + 1
    report_path = task["test"].with_name(task["test"].stem + ".json")
    row["epsilon"] = None
    row["bits"] = None
    if report_path.exists():
        try:
            rep = json.loads(report_path.read_text())
            row["epsilon"] = rep.get("epsilon")
            row["bits"] = rep.get("bits_total")
        except (json.JSONDecodeError, OSError):
            pass
    row["per_ground_truth"] = per_truth
    return row


def _aggregate(rows: list[dict], keys) -> dict:
    agg = {}
    for key in keys:
        vals = [r[key] for r in rows if r.get(key) is not None]
        agg[key] = float(np.mean(vals)) if vals else None
    return agg


def _format_table(rows: list[dict], columns: list[str]) -> str:
    table = [columns]
    for r in rows:
        table.append(
            [
                f"{r[c]:.4f}" if isinstance(r.get(c), float) else str(r.get(c, ""))
                for c in columns
            ]
        )
    widths = [max(len(line[i]) for line in table) for i in range(len(columns))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(line, widths)) for line in table)


def _cmd_eval(args, parser) -> int:
    metrics = [m.strip().lower() for m in args.metrics.split(",") if m.strip()]
    for m in metrics:
        if m not in METRIC_CHOICES:
            parser.error(f"unknown metric {m!r} (choose from {', '.join(METRIC_CHOICES)})")
    test_dir = Path(args.test)
    truths_dir = Path(args.truths)
    if not truths_dir.is_dir() or not any(truths_dir.glob("*.pgm")):
        return _fail(f"no ground-truth PGMs found in {truths_dir}")
    tasks = []
    for test_path in sorted(test_dir.glob("*.pgm")):
        truth_paths = _find_truths(truths_dir, test_path.stem)
        if not truth_paths:
            _warn(f"no ground truths for {test_path.name}; skipping")
            continue
        tasks.append(
            {
                "test": test_path,
                "stem": test_path.stem,
                "truths": truth_paths,
                "metrics": metrics,
                "tolerance": args.tolerance_px,
            }
        )
    if not tasks:
        return _fail("no evaluable label maps")
    rows = _pmap(_eval_one, tasks, _resolve_jobs(args.jobs))
    metric_cols = [m.upper() for m in metrics]
    aggregate = _aggregate(rows, metric_cols + ["seconds", "regions", "bits"])
    payload = {
        "images": [{k: v for k, v in r.items() if k != "per_ground_truth"} for r in rows],
        "per_ground_truth": {r["id"]: r["per_ground_truth"] for r in rows},
        "aggregate": aggregate,
    }
    print(json.dumps(payload, indent=2))
    print()
    columns = ["id"] + metric_cols + ["regions", "seconds"]
    table_rows = rows + [dict({"id": "MEAN"}, **aggregate)]
    print(_format_table(table_rows, columns))
    return 0


# -- colorspace-study ----------------------------------------------------------


def _study_one(task: dict):
    """Per-region Gaussian stats of one image in one color space."""
    image = load_image(task["image"])
    space = task["space"]
    converted = convert_color(image, space)
    w = task["window"]
    raw = extract_windows(converted, w)
    basis = fit_pca(raw, task["n_components"])
    field = project(basis, raw, converted.shape)
    per_truth = []
    skipped = 0
    for truth_path in task["truths"]:
        truth = load_label_map(truth_path, expect_shape=converted.shape)
        regions = []
        for rid in np.unique(truth):
            mask = truth == rid
            interior = interior_mask(mask, w)
            if not interior.any():
                skipped += 1
                continue
            mean, cov = mean_covariance(field.values[interior])
            lam_max = float(np.linalg.eigvalsh(cov).max())
            regions.append((mean, cov, int(mask.sum()), lam_max))
        per_truth.append(regions)
    return {"id": task["image"].stem, "per_truth": per_truth, "skipped": skipped}


def _cmd_colorspace_study(args, parser) -> int:
    from .image import color_scale_factor

    images_dir = Path(args.images)
    truths_dir = Path(args.truths)
    image_paths = _find_images(images_dir)
    pairs = []
    for img_path in image_paths:
        truth_paths = _find_truths(truths_dir, img_path.stem)
        if not truth_paths:
            _warn(f"no ground truths for {img_path.name}; skipping")
            continue
        pairs.append((img_path, truth_paths))
    if not pairs:
        return _fail("no images with ground truths found")
    jobs = _resolve_jobs(args.jobs)
    results = {}
    for space in ("lab", "yuv", "rgb", "xyz", "hsv"):
        tasks = [
            {
                "image": img,
                "truths": truths,
                "space": space,
                "window": args.window,
                "n_components": args.n_components,
            }
            for img, truths in pairs
        ]
        stats = _pmap(_study_one, tasks, jobs)
        lam_max = [r[3] for s in stats for regions in s["per_truth"] for r in regions]
        scale = color_scale_factor(lam_max)
        per_image = []
        for s in stats:
            truth_bits = []
            for regions in s["per_truth"]:
                bits = 0.0
                for mean, cov, n_pixels, _ in regions:
                    params = CodingParams(args.epsilon, args.window, mean.shape[0])
                    bits += coding_length_full(scale * mean, scale**2 * cov, n_pixels, params)
                truth_bits.append(bits)
            per_image.append(
                {"id": s["id"], "bits": float(np.mean(truth_bits)), "skipped_regions": s["skipped"]}
            )
        results[space] = {
            "scale_factor": scale,
            "mean_bits": float(np.mean([r["bits"] for r in per_image])),
            "images": per_image,
        }
    ranked = sorted(results, key=lambda s: results[s]["mean_bits"])
    payload = {
        "epsilon": args.epsilon,
        "window": args.window,
        "ranking": ranked,
        "spaces": results,
    }
    print(json.dumps(payload, indent=2))
    print()
    rows = [
        {"space": s, "mean_bits": results[s]["mean_bits"], "scale_factor": results[s]["scale_factor"]}
        for s in ranked
    ]
    print(_format_table(rows, ["space", "mean_bits", "scale_factor"]))
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tbes", description="Coding-length driven image segmentation toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment one image")
    seg.add_argument("--input", required=True, help="input image (PPM P6 or PNG)")
    seg.add_argument("--epsilon", type=float, help="distortion level")
    seg.add_argument("--model", help="distortion model JSON (mutually exclusive with --epsilon)")
    seg.add_argument("--superpixels", help="initial superpixel PGM")
    seg.add_argument("--wmax", type=int, default=7, help="largest texture window (odd)")
    seg.add_argument("--prior", help="boundary difference-code prior JSON")
    seg.add_argument("--out", help="output label PGM path")
    seg.add_argument("--report", help="output report JSON path")
    seg.add_argument("--grid-cell", type=int, default=16, help="grid superpixel cell size")

    train = sub.add_parser("train-epsilon", help="train the distortion regressor")
    train.add_argument("--images", required=True, help="directory of training images")
    train.add_argument("--truths", required=True, help="directory of ground-truth PGMs")
    train.add_argument("--metric", required=True, choices=METRIC_CHOICES)
    train.add_argument("--out", required=True, help="output model JSON path")
    train.add_argument("--wmax", type=int, default=7)
    train.add_argument("--grid-cell", type=int, default=16)
    train.add_argument("--superpixels", help="directory of per-image superpixel PGMs")
    train.add_argument("--jobs", type=int, help="worker processes (default TBES_JOBS or 1)")

    ev = sub.add_parser("eval", help="evaluate segmentations against ground truths")
    ev.add_argument("--test", required=True, help="directory of segmentation PGMs")
    ev.add_argument("--truths", required=True, help="directory of ground-truth PGMs")
    ev.add_argument("--metrics", default="pri,voi,gfm", help="comma-separated metric list")
    ev.add_argument("--tolerance-px", type=float, help="boundary match tolerance in pixels")
    ev.add_argument("--jobs", type=int, help="worker processes (default TBES_JOBS or 1)")

    study = sub.add_parser("colorspace-study", help="rank color spaces by compressibility")
    study.add_argument("--images", required=True)
    study.add_argument("--truths", required=True)
    study.add_argument("--epsilon", type=float, default=100.0)
    study.add_argument("--window", type=int, default=7)
    study.add_argument("--n-components", type=int, default=8)
    study.add_argument("--jobs", type=int, help="worker processes (default TBES_JOBS or 1)")

    return parser


_HANDLERS = {
    "segment": _cmd_segment,
    "train-epsilon": _cmd_train_epsilon,
    "eval": _cmd_eval,
    "colorspace-study": _cmd_colorspace_study,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args, parser)
    except (ValueError, OSError, RuntimeError) as exc:
        return _fail(str(exc))


def entrypoint() -> None:
    sys.exit(main())
