"""Command-line surface: gen / train / eval / predict / ablate.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime numeric
failure (NaN loss). Every artifact directory gets the full run config
written next to it.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .blocks import DcgaNet, variant_from_flags
from .checkpoint import load_checkpoint
from .errors import ConfigurationError, DatasetError, DcgaError, TrainingError
from .metrics import evaluate_batch, roc_csv
from .synth import (SceneConfig, generate_dataset, load_dataset,
                    read_pgm, save_dataset, write_pgm)
from .training import fit, load_net_checkpoint


def _add_scene_flags(p):
    p.add_argument("--size", type=int)
    p.add_argument("--targets-min", type=int)
    p.add_argument("--targets-max", type=int)
    p.add_argument("--sigma-min", type=float)
    p.add_argument("--sigma-max", type=float)
    p.add_argument("--peak-min", type=float)
    p.add_argument("--peak-max", type=float)
    p.add_argument("--clutter-scale", type=float)
    p.add_argument("--clutter-contrast", type=float)


def _scene_from_args(args, seed) -> SceneConfig:
    kw = {"seed": seed}
    for name in ("size", "targets_min", "targets_max", "sigma_min", "sigma_max",
                 "peak_min", "peak_max", "clutter_scale", "clutter_contrast"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    return SceneConfig(**kw)


def cmd_gen(args) -> int:
    scene = _scene_from_args(args, args.seed)
    if args.count < 0:
        raise ConfigurationError(f"--count must be >= 0, got {args.count}")
    samples = generate_dataset(scene, args.count)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        save_dataset(samples, out)
        run = replace(cfgmod.RunConfig.default(), scene=scene)
        (out / "manifest.cfg").write_text(cfgmod.to_text(run) + f"# count={args.count}\n")
    except OSError as exc:
        print(f"error: cannot write dataset to {out}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def _build_net(run: cfgmod.RunConfig) -> DcgaNet:
    dtype = np.float32 if run.dtype == "float32" else np.float64
    return DcgaNet(run.model, dtype=dtype)


def _meta_for(run: cfgmod.RunConfig) -> dict:
    return {
        "schedule": ",".join(str(c) for c in run.model.schedule),
        "config": cfgmod.to_text(run).replace("\n", ";"),
    }


def cmd_train(args) -> int:
    run = cfgmod.load(args.config) if args.config else cfgmod.RunConfig.default()
    if args.epochs is not None:
        run = cfgmod.override(run, train={"epochs": args.epochs})
    if args.seed is not None:
        run = cfgmod.override(run, train={"seed": args.seed},
                              model={"seed": args.seed})
    train_samples = load_dataset(args.data)
    val_samples = load_dataset(args.val) if args.val else []
    net = _build_net(run)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.save(run, out / "run.cfg")
    start_epoch = 0
    if args.resume:
        meta = load_net_checkpoint(args.resume, net)
        start_epoch = int(meta.get("epoch", "0")) + 1
    reports, best = fit(net, train_samples, val_samples, run.train, out_dir=out,
                        meta=_meta_for(run), start_epoch=start_epoch,
                        log_fn=lambda r: print(
                            f"epoch {r.epoch:4d} lr {r.lr:.3e} loss {r.mean_loss:.4f} "
                            f"val_iou {r.val_iou:.4f}"))
    print(f"done; best validation IoU {best:.4f}; artifacts in {out}")
    return 0


def _net_from_checkpoint(path):
    meta, arrays = load_checkpoint(path)
    cfg_text = meta.get("config", "").replace(";", "\n")
    run = cfgmod.from_text(cfg_text) if cfg_text.strip() else cfgmod.RunConfig.default()
    net = _build_net(run)
    net.store.load_state_arrays(arrays)
    return net, run, meta


def cmd_eval(args) -> int:
    net, run, meta = _net_from_checkpoint(args.ckpt)
    samples = load_dataset(args.data)
    ckpt_schedule = meta.get("schedule", "")
    model_schedule = ",".join(str(c) for c in run.model.schedule)
    if ckpt_schedule and ckpt_schedule != model_schedule:
        print(f"error: checkpoint schedule [{ckpt_schedule}] != model [{model_schedule}]",
              file=sys.stderr)
        return 2
    thresholds = None
    if args.roc:
        thresholds = [round(1.0 - 0.05 * i, 2) for i in range(20)]  # 1.00 .. 0.05
    report = evaluate_batch(net, samples, threshold=args.threshold, thresholds=thresholds)
    print(report.as_text())
    out = Path(args.out) if args.out else Path(args.data)
    (out / "metrics.csv").write_text(report.as_csv())
    if args.roc:
        (out / "roc.csv").write_text(roc_csv(report.roc))
    return 0


def _normalize_u8(arr):
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        arr = (arr - lo) / (hi - lo)
    else:
        arr = np.zeros_like(arr)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def cmd_predict(args) -> int:
    ckpt = Path(args.ckpt)
    if not ckpt.is_file():
        print(f"error: checkpoint {ckpt} not found", file=sys.stderr)
        return 2
    net, run, _ = _net_from_checkpoint(ckpt)
    img = read_pgm(args.image).astype(np.float64) / 255.0
    h, w = img.shape
    factor = net.DOWN_FACTOR
    pad_h = (-h) % factor
    pad_w = (-w) % factor
    if (pad_h or pad_w) and not args.pad:
        print(f"error: image {h}x{w} not divisible by {factor}; rerun with --pad",
              file=sys.stderr)
        return 2
    padded = np.pad(img, ((0, pad_h), (0, pad_w)))
    prob, attn = net.predict(padded[None, None])
    prob = prob[0, 0, :h, :w]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    write_pgm(out / f"{stem}_mask.pgm", ((prob >= args.threshold) * 255).astype(np.uint8))
    write_pgm(out / f"{stem}_prob.pgm", prob)
    if args.export_attention:
        for name, amap in attn.items():
            if args.full_attention and amap.shape[1] > 1:
                for c in range(amap.shape[1]):
                    write_pgm(out / f"{stem}_{name}.c{c}.pgm", _normalize_u8(amap[0, c]))
            else:
                write_pgm(out / f"{stem}_{name}.pgm", _normalize_u8(amap[0].mean(axis=0)))
    print(f"wrote prediction for {args.image} to {out}")
    return 0


def _parse_grid(path):
    """Grid file: one variant name per line, optionally `name key=value ...`."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        entries.append((parts[0], parts[1:], lineno))
    if not entries:
        raise ConfigurationError(f"{path}: empty ablation grid")
    names = [e[0] for e in entries]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigurationError(f"{path}: duplicate variant names {dupes}")
    return entries


def cmd_ablate(args) -> int:
    run = cfgmod.load(args.config) if args.config else cfgmod.RunConfig.default()
    if args.epochs is not None:
        run = cfgmod.override(run, train={"epochs": args.epochs})
    entries = _parse_grid(args.grid)
    train_samples = load_dataset(args.data)
    val_samples = load_dataset(args.val) if args.val else train_samples
    rows = []
    for name, overrides, lineno in entries:
        model_cfg = variant_from_flags(name, run.model)
        for ov in overrides:
            key, _, raw = ov.partition("=")
            if not hasattr(model_cfg, key):
                raise ConfigurationError(f"grid line {lineno}: unknown model key {key!r}")
        variant_run = replace(run, model=replace(model_cfg, seed=run.model.seed))
        net = _build_net(variant_run)
        fit(net, train_samples, val_samples, variant_run.train)
        report = evaluate_batch(net, val_samples, threshold=0.5)
        rows.append((name, report))
        print(f"{name:<16s} IoU {report.iou:.4f} nIoU {report.niou:.4f} "
              f"Pd {report.pd:.4f} Fa {report.fa * 1e6:.1f}e-6")
    out = Path(args.out) if args.out else Path(args.data)
    lines = ["variant,iou,niou,pd,fa", ]
    lines += [f"{n},{r.iou:.6f},{r.niou:.6f},{r.pd:.6f},{r.fa:.10g}" for n, r in rows]
    (out / "ablation.csv").write_text("\n".join(lines) + f"\n# seed={run.train.seed}\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="dcganet",
                                     description="Infrared small-target segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_scene_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--val")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--resume")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--roc", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict a mask for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--pad", action="store_true")
    p.add_argument("--export-attention", action="store_true")
    p.add_argument("--full-attention", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="train and score a grid of variants")
    p.add_argument("--data", required=True)
    p.add_argument("--val")
    p.add_argument("--grid", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, DatasetError, DcgaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
