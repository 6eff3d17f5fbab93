"""Command-line front door: augment, preview, stats, bench.

Every command is a deterministic function of (config, seed); bench reports
additionally carry wall-clock rate fields. Augmented patches are written
as PNG (lossless, so reruns are byte-identical) with a versioned
line-oriented manifest of one JSON record per sample.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from trackaug.analysis import (
    DEFAULT_SCALES,
    DEFAULT_SHIFTS,
    run_crop_stats,
    run_jitter_sweep,
    run_mix_stats,
    synthetic_targets,
)
from trackaug.config import ConfigError, load_config, open_pipeline
from trackaug.cropping import LegacyCropConfig, TrainingPair, orc_sample
from trackaug.datasets import DatasetError, rng_for
from trackaug.mixing import TfmixConfig, TokenGrid, TokenMask, tfmix

MANIFEST_HEADER = "trackaug-manifest v1"


def _png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


def _box_list(box) -> list[float]:
    return [float(box.x), float(box.y), float(box.w), float(box.h)]


def _record(pair: TrainingPair, search_png: str, template_png: str) -> dict:
    mix = None
    if pair.mix.applied:
        mix = {
            "distractor_id": pair.mix.distractor_id,
            "occluded_fraction": float(pair.mix.occluded_fraction),
            "fallback": bool(pair.mix.fallback),
            "replaced_count": int(pair.mix.replaced_count),
        }
    return {
        "epoch": pair.epoch,
        "index": pair.index,
        "search_png": search_png,
        "template_png": template_png,
        "search_box": _box_list(pair.search_box),
        "template_box": _box_list(pair.template_box),
        "search_box_image": _box_list(pair.sample.search_box),
        "template_box_image": _box_list(pair.sample.template_box),
        "gamma": float(pair.gamma),
        "kind": pair.kind,
        "retries": int(pair.retries_used),
        "direction": pair.direction,
        "search_to_image": {
            "scale": float(pair.search.to_image.scale),
            "offset": [float(pair.search.to_image.offset.cx), float(pair.search.to_image.offset.cy)],
        },
        "template_to_image": {
            "scale": float(pair.template.to_image.scale),
            "offset": [float(pair.template.to_image.offset.cx), float(pair.template.to_image.offset.cy)],
        },
        "mix": mix,
        "mix_skip_reason": pair.mix.reason,
        "dataset": pair.sample.dataset_id,
        "sequence": pair.sample.sequence_id,
        "frames": list(pair.sample.frame_indices),
        "seed": pair.seed,
    }


_WORKER_PIPELINE = None


def _init_worker(config_path: str, seed_override):
    global _WORKER_PIPELINE
    _WORKER_PIPELINE = open_pipeline(config_path, seed_override=seed_override)


def _produce(coords):
    epoch, index = coords
    pair = _WORKER_PIPELINE.pair(epoch, index)
    search_png = f"e{epoch:04d}_i{index:06d}_search.png"
    template_png = f"e{epoch:04d}_i{index:06d}_template.png"
    record = _record(pair, search_png, template_png)
    return (
        epoch,
        index,
        record,
        _png_bytes(pair.search.pixels),
        _png_bytes(pair.template.pixels),
    )


def _parse_epoch_range(value, total: int) -> range:
    if value is None:
        return range(total)
    text = str(value)
    if ":" in text:
        a, b = text.split(":", 1)
        lo, hi = int(a), int(b)
    else:
        lo, hi = 0, int(text)
    if not (0 <= lo < hi <= total):
        raise ConfigError(f"--epochs {text}: range must satisfy 0 <= start < end <= {total}")
    return range(lo, hi)


def cmd_augment(args) -> int:
    pipeline = open_pipeline(args.config, seed_override=args.seed)
    epochs = _parse_epoch_range(args.epochs, pipeline.epochs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    coords = [(e, i) for e in epochs for i in range(pipeline.samples_per_epoch)]

    results = []
    if args.workers > 1:
        with ProcessPoolExecutor(
            max_workers=args.workers,
            initializer=_init_worker,
            initargs=(str(args.config), args.seed),
        ) as pool:
            results = list(pool.map(_produce, coords, chunksize=8))
    else:
        _init_worker(str(args.config), args.seed)
        results = [_produce(c) for c in coords]

    results.sort(key=lambda r: (r[0], r[1]))
    lines = [MANIFEST_HEADER]
    for epoch, index, record, search_bytes, template_bytes in results:
        (out_dir / record["search_png"]).write_bytes(search_bytes)
        (out_dir / record["template_png"]).write_bytes(template_bytes)
        lines.append(json.dumps(record, sort_keys=True))
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(results)} samples to {out_dir}")
    return 0


def _draw_tile(pair: TrainingPair) -> Image.Image:
    img = Image.fromarray(pair.search.pixels)
    draw = ImageDraw.Draw(img)
    b = pair.search_box
    size = pair.search.out_size
    draw.rectangle(
        [max(0.0, b.x), max(0.0, b.y), min(float(size - 1), b.x + b.w), min(float(size - 1), b.y + b.h)],
        outline=(255, 0, 0),
        width=2,
    )
    label = f"{pair.kind} g={pair.gamma:.2f}"
    if pair.mix.applied:
        label += " mix"
    draw.text((3, 3), label, fill=(255, 255, 0))
    return img


def cmd_preview(args) -> int:
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    pipeline = open_pipeline(args.config, seed_override=args.seed)
    n = min(args.n, pipeline.samples_per_epoch)
    tiles = [_draw_tile(pipeline.pair(0, i)) for i in range(n)]
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    tile = pipeline.policy.search_out_size
    grid = Image.new("RGB", (cols * tile, rows * tile), (20, 20, 20))
    for i, t in enumerate(tiles):
        grid.paste(t, ((i % cols) * tile, (i // cols) * tile))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    grid.save(out, format="PNG")
    print(f"wrote {rows}x{cols} preview grid to {out}")
    return 0


def cmd_stats(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.mode == "crop":
        if args.cropper == "legacy":
            crop_cfg = LegacyCropConfig(gamma_fix=4.0, jitter=cfg.policy.jitter)
        else:
            crop_cfg = cfg.policy
        rep = run_crop_stats(crop_cfg, args.n, cfg.seed)
        text = ["trackaug-stats v1", f"mode: crop", f"cropper: {args.cropper}"] + rep.lines()
        (out_dir / "crop_report.txt").write_text("\n".join(text) + "\n")
        csv = ("n,uninformative_rate,boundary_rate,gamma_variance,scale_support_lo,scale_support_hi\n"
               f"{rep.n_samples},{rep.uninformative_rate:.6f},{rep.boundary_rate:.6f},"
               f"{rep.gamma_variance:.6f},{rep.target_scale_support[0]:.6f},{rep.target_scale_support[1]:.6f}\n")
        (out_dir / "crop_report.csv").write_text(csv)
        print(f"uninformative_rate: {rep.uninformative_rate:.6f}")
    elif args.mode == "sweep":
        if args.cropper == "legacy":
            crop_cfg = LegacyCropConfig(gamma_fix=4.0, jitter=cfg.policy.jitter)
        else:
            crop_cfg = cfg.policy
        rep = run_jitter_sweep(DEFAULT_SHIFTS, DEFAULT_SCALES, crop_cfg, args.n, cfg.seed)
        (out_dir / "sweep.csv").write_text(rep.to_csv())
        print(f"wrote {len(rep.cells)}-cell sweep table")
    else:  # mix
        rep = run_mix_stats(cfg.policy.tfmix, args.n, cfg.seed)
        text = ["trackaug-stats v1", "mode: mix"] + rep.lines()
        (out_dir / "mix_report.txt").write_text("\n".join(text) + "\n")
        r = rep.residuals
        csv = ("n,max_mean_residual,max_std_residual,fallback_rate,max_accepted_occl\n"
               f"{rep.n_samples},{r.max_mean_residual:.3e},{r.max_std_residual:.3e},"
               f"{r.fallback_rate:.6f},{r.max_accepted_occl:.6f}\n")
        (out_dir / "mix_report.csv").write_text(csv)
        print(f"max residuals: mean {r.max_mean_residual:.3e} std {r.max_std_residual:.3e}")
    return 0


def _bench_crops(cfg, n: int) -> float:
    rng = rng_for(cfg.seed, "_bench", 0, 0, "targets").generator()
    targets = synthetic_targets(min(n, 1024), rng)
    start = time.perf_counter()
    for i in range(n):
        crop_rng = rng_for(cfg.seed, "_bench", 0, i, "crop").generator()
        orc_sample(targets[i % len(targets)], cfg.policy, crop_rng)
    return n / (time.perf_counter() - start)


def _bench_pairs(pipeline, coords, workers: int, config_path, seed) -> float:
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(str(config_path), seed),
        ) as pool:
            list(pool.map(_produce, coords, chunksize=4))
    else:
        for e, i in coords:
            pipeline.pair(e, i)
    return len(coords) / (time.perf_counter() - start)


def _bench_tfmix(cfg, n: int) -> float:
    rng = rng_for(cfg.seed, "_bench", 0, 0, "mix").generator()
    grid_n = cfg.policy.search_out_size // cfg.policy.tfmix.patch_size if cfg.policy.tfmix.enabled else 16
    dim = 3 * cfg.policy.tfmix.patch_size ** 2
    search = TokenGrid(values=rng.normal(0, 1, (grid_n, grid_n, dim)), patch_size=cfg.policy.tfmix.patch_size)
    distractor = TokenGrid(values=rng.normal(2, 1, (grid_n, grid_n, dim)), patch_size=cfg.policy.tfmix.patch_size)
    bits = np.zeros((grid_n, grid_n), dtype=bool)
    bits[: max(1, grid_n // 3), : max(1, grid_n // 3)] = True
    mask = TokenMask(bits)
    mix_cfg = cfg.policy.tfmix if cfg.policy.tfmix.enabled else TfmixConfig()
    start = time.perf_counter()
    for i in range(n):
        mix_rng = rng_for(cfg.seed, "_bench", 0, i, "mix").generator()
        tfmix(search, mask, distractor, mask, mix_cfg, mix_rng)
    return n / (time.perf_counter() - start)


def cmd_bench(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    pipeline = open_pipeline(args.config, seed_override=args.seed)
    n = args.n
    coords = [(e, i) for e in range(pipeline.epochs) for i in range(pipeline.samples_per_epoch)]
    pair_coords = [coords[i % len(coords)] for i in range(min(n, 4 * len(coords)))]

    # content digest over a fixed probe set; identical across worker counts
    probe = [pipeline.pair(e, i) for e, i in coords[: min(16, len(coords))]]
    digest = hashlib.sha256()
    for p in probe:
        digest.update(p.search.pixels.tobytes())
        digest.update(p.template.pixels.tobytes())
        digest.update(json.dumps(_record(p, "s", "t"), sort_keys=True).encode())
    content_digest = digest.hexdigest()

    deadline = time.perf_counter() + (args.duration or 0.0)
    batches = 0
    crops_rate = pairs_rate = mix_rate = 0.0
    while True:
        crops_rate = _bench_crops(cfg, n)
        pairs_rate = _bench_pairs(pipeline, pair_coords, args.workers, args.config, args.seed)
        mix_rate = _bench_tfmix(cfg, n)
        batches += 1
        if time.perf_counter() >= deadline:
            break

    report = {
        "ops_per_batch": {"crops": n, "pairs": len(pair_coords), "tfmix": n},
        "batches_run": batches,  # wall-clock dependent when --duration is set
        "workers": args.workers,
        "content_digest": content_digest,
        "crops_per_s": round(crops_rate, 2),        # wall-clock field
        "full_pairs_per_s": round(pairs_rate, 2),   # wall-clock field
        "tfmix_ops_per_s": round(mix_rate, 2),      # wall-clock field
    }
    out = Path(args.out) if args.out else None
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trackaug",
                                     description="Deterministic tracking-data augmentation engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="write augmented patch pairs and a manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--epochs", default=None, help="epoch count N or range A:B")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("preview", help="render a grid of augmented samples")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("stats", help="run distribution-level analyses")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("crop", "sweep", "mix"), required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--cropper", choices=("orc", "legacy"), default="orc")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="measure augmentation throughput")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--duration", type=float, default=None,
                   help="repeat batches until this many seconds elapsed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
