"""Command-line entry points for the stereo pipeline.

Exit codes: 0 success, 2 usage, 3 parameter error, 4 I/O error, 5 pipeline
stage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction

import cv2
import numpy as np

from . import evalio
from .completion import CompletionConfig
from .core import DisparityField, DisparityRange, RangeError
from .evalio import (FileFormatError, evaluate, generate_scene, load_image,
                     load_scene, read_kitti_png, read_pfm, save_scene,
                     write_kitti_png, write_pfm)
from .losses import AdamConfig, TrainingPair, smoothed, train_feature_transform
from .pipeline import PipelineConfig, StageError, run_pipeline

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARAM = 3
EXIT_IO = 4
EXIT_STAGE = 5


def colorize_disparity(fld: DisparityField, d_min: float, d_max: float):
    """Turbo colormap scaled to [d_min, d_max]; invalid pixels black."""
    d = np.where(fld.valid, fld.disparities, d_min)
    t = np.clip((d - d_min) / max(d_max - d_min, 1e-9), 0, 1)
    img = cv2.applyColorMap((t * 255).astype(np.uint8), cv2.COLORMAP_TURBO)
    img[~fld.valid] = 0
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def _add_common(p):
    p.add_argument("--dmin", type=int, default=-64)
    p.add_argument("--dmax", type=int, default=64)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=25.0,
                   help="correlation gain before the disparity softmax")
    p.add_argument("--no-lr-check", action="store_true")
    p.add_argument("--no-subpixel", action="store_true")
    p.add_argument("--features", choices=["census", "file"], default="census")
    p.add_argument("--left-feat", default="")
    p.add_argument("--right-feat", default="")
    p.add_argument("--alpha", default="1/2",
                   help="feature scale for census extraction: 1, 1/2, or 1/4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("STEREOPIPE_THREADS", "1")))
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--iterations", type=int, default=64)


def _parse_alpha(s: str) -> Fraction:
    num, _, den = s.partition("/")
    return Fraction(int(num), int(den) if den else 1)


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        d_min=args.dmin, d_max=args.dmax, tau=args.tau, beta=args.beta,
        lr_check=not args.no_lr_check, subpixel=not args.no_subpixel,
        features=args.features, left_feat=args.left_feat,
        right_feat=args.right_feat, alpha=_parse_alpha(args.alpha),
        completion=CompletionConfig(levels=args.levels,
                                    iterations_per_level=args.iterations),
        seed=args.seed, threads=args.threads)


def cmd_pipeline(args) -> int:
    for path in (args.left, args.right):
        if not os.path.isfile(path):
            print(f"error: missing input image {path}", file=sys.stderr)
            return EXIT_IO
    cfg = _config_from_args(args)
    left = load_image(args.left)
    right = load_image(args.right)
    result = run_pipeline(left, right, cfg)

    os.makedirs(args.out, exist_ok=True)
    out = lambda name: os.path.join(args.out, name)
    write_pfm(result.final, out("disparity.pfm"))
    write_pfm(result.semi_full, out("semi_dense.pfm"))
    if cfg.d_min >= 0:
        write_kitti_png(result.final, out("disparity_16bit.png"))
    color = colorize_disparity(result.final, cfg.d_min, cfg.d_max)
    evalio.save_image(color, out("disparity_color.png"))
    with open(out("disparity_color.txt"), "w") as f:
        f.write(f"colormap=turbo\nd_min={cfg.d_min}\nd_max={cfg.d_max}\n"
                "note=blue maps to d_min, red to d_max; invalid pixels black\n")
    rel8 = (np.clip(result.reliability_full, 0, 1) * 255).astype(np.uint8)
    evalio.save_image(rel8, out("reliability.png"))
    with open(out("config.txt"), "w") as f:
        f.write(cfg.to_text())
    with open(out("timing.json"), "w") as f:
        json.dump({"timings_s": result.timings, "memory": result.memory,
                   "semi_dense_density": result.semi_alpha.density}, f, indent=2)
    print(f"wrote outputs to {args.out} "
          f"(semi-dense density {100 * result.semi_alpha.density:.1f}%)")
    return EXIT_OK


def _sweep_scenes(args):
    if args.scenes:
        dirs = sorted(os.path.join(args.scenes, d) for d in os.listdir(args.scenes)
                      if os.path.isdir(os.path.join(args.scenes, d)))
        return [load_scene(d) for d in dirs]
    rng = DisparityRange(args.dmin, args.dmax)
    return [generate_scene(args.seed + i, args.layout, rng)
            for i in range(args.gen)]


def cmd_sweep_tau(args) -> int:
    scenes = _sweep_scenes(args)
    if not scenes:
        print("error: no scenes", file=sys.stderr)
        return EXIT_PARAM
    taus = [float(t) for t in args.taus.split(",")]
    lr_settings = {"both": [True, False], "on": [True], "off": [False]}[args.lr]
    rows = []
    for lr_check in lr_settings:
        for tau in taus:
            dens, bad1, d1, bad2, epe = [], [], [], [], []
            for sc in scenes:
                cfg = PipelineConfig(
                    d_min=sc.range.d_min, d_max=sc.range.d_max, tau=tau,
                    beta=args.beta, lr_check=lr_check, alpha=_parse_alpha(args.alpha),
                    completion=CompletionConfig(levels=args.levels,
                                                iterations_per_level=args.iterations))
                try:
                    res = run_pipeline(sc.left, sc.right, cfg)
                except StageError as e:
                    if "no known pixels" in str(e):
                        dens.append(0.0)
                        continue
                    raise
                dens.append(res.semi_full.density * 100)
                bad1.append(evalio.metric_bad(res.semi_full, sc.gt_left, 1.0))
                d1.append(evalio.metric_d1(res.final, sc.gt_left))
                bad2.append(evalio.metric_bad(res.final, sc.gt_left))
                epe.append(evalio.metric_epe(res.final, sc.gt_left))
            mean = lambda xs: float(np.mean(xs)) if xs else float("nan")
            rows.append({
                "tau": tau, "lr_check": int(lr_check),
                "semi_density_pct": mean(dens), "semi_bad1_pct": mean(bad1),
                "final_d1_pct": mean(d1), "final_bad2_pct": mean(bad2),
                "final_epe_px": mean(epe),
                "degenerate": int(not d1)})
    with open(args.out, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    read = {"pfm": read_pfm, "kitti": read_kitti_png}[args.format]
    ext = {"pfm": ".pfm", "kitti": ".png"}[args.format]
    preds = sorted(f for f in os.listdir(args.pred) if f.endswith(ext))
    gts = sorted(f for f in os.listdir(args.gt) if f.endswith(ext))
    if preds != gts:
        print("error: pred/gt file lists differ", file=sys.stderr)
        return EXIT_PARAM
    print(f"{'image':24s} {'D1_all(%)':>10s} {'bad2.0(%)':>10s} "
          f"{'EPE(px)':>9s} {'density(%)':>11s}")
    agg = []
    for name in preds:
        pred = read(os.path.join(args.pred, name))
        gt = read(os.path.join(args.gt, name))
        rep = evaluate(pred, gt)
        agg.append(rep)
        print(f"{name:24s} {rep.d1_all:10.3f} {rep.bad2:10.3f} "
              f"{rep.epe:9.3f} {rep.density:11.1f}")
    if agg:
        print(f"{'MEAN':24s} {np.mean([r.d1_all for r in agg]):10.3f} "
              f"{np.mean([r.bad2 for r in agg]):10.3f} "
              f"{np.mean([r.epe for r in agg]):9.3f} "
              f"{np.mean([r.density for r in agg]):11.1f}")
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    rng = DisparityRange(args.dmin, args.dmax)
    scene = generate_scene(args.seed, args.layout, rng,
                           height=args.height, width=args.width)
    save_scene(scene, args.out)
    print(f"wrote scene to {args.out}")
    return EXIT_OK


def cmd_train_feat(args) -> int:
    dirs = sorted(os.path.join(args.scenes, d) for d in os.listdir(args.scenes)
                  if os.path.isdir(os.path.join(args.scenes, d)))
    if not dirs:
        print("error: no scene directories", file=sys.stderr)
        return EXIT_PARAM
    scenes = [load_scene(d) for d in dirs]
    rng = DisparityRange(scenes[0].range.d_min, scenes[0].range.d_max,
                         _parse_alpha(args.alpha))
    pairs = [TrainingPair(sc.left, sc.right, sc.gt_left) for sc in scenes]
    cfg = AdamConfig(lr=args.lr, steps=args.steps, seed=args.seed)
    transform, history = train_feature_transform(
        pairs, rng, cfg, window=(args.window, args.window), beta=args.beta)
    os.makedirs(args.out, exist_ok=True)
    np.savez(os.path.join(args.out, "transform.npz"),
             matrix=transform.matrix, bias=transform.bias)
    sm = smoothed(history)
    with open(os.path.join(args.out, "loss_history.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "total_loss", "smoothed_loss"])
        for i, (v, s) in enumerate(zip(history, sm)):
            writer.writerow([i, v, s])
    print(f"trained {args.steps} steps: loss {history[0]:.4f} -> {history[-1]:.4f} "
          f"(smoothed {sm[0]:.4f} -> {sm[-1]:.4f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stereopipe",
                                 description="Two-stage stereo matching pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run the full pipeline on an image pair")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("sweep-tau", help="reliability-threshold ablation sweep")
    p.add_argument("--scenes", default="",
                   help="directory of scene subdirectories (else synthesize)")
    p.add_argument("--gen", type=int, default=3,
                   help="number of synthetic scenes when --scenes is empty")
    p.add_argument("--layout", default="fronto_layers")
    p.add_argument("--taus", default="0.1,0.3,0.5,0.7,0.9")
    p.add_argument("--lr", choices=["both", "on", "off"], default="both")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_sweep_tau)

    p = sub.add_parser("eval", help="metric table for prediction/gt directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--format", choices=["pfm", "kitti"], default="pfm")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gen-synth", help="generate a synthetic stereo scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layout", default="fronto_layers",
                   choices=["fronto_layers", "slanted", "negative_range"])
    p.add_argument("--dmin", type=int, default=0)
    p.add_argument("--dmax", type=int, default=32)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_synth)

    p = sub.add_parser("train-feat", help="fit the linear feature transform")
    p.add_argument("--scenes", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", default="1")
    p.add_argument("--beta", type=float, default=25.0)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_feat)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE
    except (OSError, FileFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (RangeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
