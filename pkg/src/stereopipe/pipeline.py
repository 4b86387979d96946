"""End-to-end pipeline: features -> matching -> filtering -> upsampling ->
completion, with per-stage timing and memory accounting."""
from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .completion import CompletionConfig, complete_multiscale
from .core import DisparityField, DisparityRange, upsample_disparity
from .features import (FeatureMap, apply_transform, extract_census_gradient,
                       load_feature_tensor)
from .filtering import lr_consistency_filter, reliability_filter
from .matcher import build_cost_volume, map_disparity, softmax_over_disparity


class StageError(RuntimeError):
    """Pipeline failure annotated with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    d_min: int = -64
    d_max: int = 64
    tau: float = 0.3
    lr_check: bool = True
    subpixel: bool = True
    features: str = "census"      # "census" or "file"
    beta: float = 25.0            # correlation gain before the softmax
    left_feat: str = ""
    right_feat: str = ""
    alpha: Fraction = Fraction(1, 2)
    census_window: tuple = (9, 7)
    max_diff: float = 1.0
    completion: CompletionConfig = dc_field(default_factory=CompletionConfig)
    seed: int = 0
    threads: int = 1

    def to_text(self) -> str:
        c = self.completion
        lines = [
            f"d_min={self.d_min}", f"d_max={self.d_max}", f"tau={self.tau}",
            f"beta={self.beta}",
            f"lr_check={int(self.lr_check)}", f"subpixel={int(self.subpixel)}",
            f"features={self.features}", f"left_feat={self.left_feat}",
            f"right_feat={self.right_feat}", f"alpha={self.alpha}",
            f"census_window={self.census_window[0]}x{self.census_window[1]}",
            f"max_diff={self.max_diff}", f"levels={c.levels}",
            f"iterations_per_level={c.iterations_per_level}",
            f"color_sigma={c.color_sigma}", f"spatial_radius={c.spatial_radius}",
            f"reliability_floor={c.reliability_floor}",
            f"seed={self.seed}", f"threads={self.threads}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#") and "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
        wh, _, ww = kv.get("census_window", "9x7").partition("x")
        num, _, den = kv.get("alpha", "1/2").partition("/")
        return cls(
            d_min=int(kv.get("d_min", -64)), d_max=int(kv.get("d_max", 64)),
            tau=float(kv.get("tau", 0.3)), beta=float(kv.get("beta", 25.0)),
            lr_check=bool(int(kv.get("lr_check", 1))),
            subpixel=bool(int(kv.get("subpixel", 1))),
            features=kv.get("features", "census"),
            left_feat=kv.get("left_feat", ""), right_feat=kv.get("right_feat", ""),
            alpha=Fraction(int(num), int(den) if den else 1),
            census_window=(int(wh), int(ww)),
            max_diff=float(kv.get("max_diff", 1.0)),
            completion=CompletionConfig(
                levels=int(kv.get("levels", 5)),
                iterations_per_level=int(kv.get("iterations_per_level", 64)),
                color_sigma=float(kv.get("color_sigma", 12.0)),
                spatial_radius=int(kv.get("spatial_radius", 1)),
                reliability_floor=float(kv.get("reliability_floor", 0.05))),
            seed=int(kv.get("seed", 0)), threads=int(kv.get("threads", 1)))


@dataclass
class PipelineResult:
    final: DisparityField
    semi_full: DisparityField
    semi_alpha: DisparityField
    init_alpha: DisparityField
    reliability_alpha: np.ndarray
    reliability_full: np.ndarray
    multiscale: list
    timings: dict
    memory: dict


def _upsample_plain(a: np.ndarray, factor: int, shape) -> np.ndarray:
    """Bilinear upsample of a plain grid (reliability), cropped to shape."""
    if factor == 1:
        return a[:shape[0], :shape[1]]
    h, w = a.shape
    yi = np.minimum(np.arange(shape[0]) / factor, h - 1)
    xi = np.minimum(np.arange(shape[1]) / factor, w - 1)
    y0 = np.floor(yi).astype(int)
    x0 = np.floor(xi).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (yi - y0)[:, None]
    fx = (xi - x0)[None, :]
    return ((1 - fy) * (1 - fx) * a[np.ix_(y0, x0)] + (1 - fy) * fx * a[np.ix_(y0, x1)]
            + fy * (1 - fx) * a[np.ix_(y1, x0)] + fy * fx * a[np.ix_(y1, x1)])


def _get_features(left_img, right_img, cfg: PipelineConfig):
    if cfg.features == "census":
        fl = extract_census_gradient(left_img, cfg.census_window, cfg.alpha)
        fr = extract_census_gradient(right_img, cfg.census_window, cfg.alpha)
    elif cfg.features == "file":
        fl = load_feature_tensor(cfg.left_feat)
        fr = load_feature_tensor(cfg.right_feat)
    else:
        raise ValueError(f"unknown feature source {cfg.features!r}")
    return fl, fr


def run_pipeline(left_img: np.ndarray, right_img: np.ndarray,
                 cfg: PipelineConfig,
                 transform=None) -> PipelineResult:
    """Full two-stage pipeline on an image pair.

    Stage errors are re-raised as StageError carrying the stage name.
    """
    timings = {}

    def timed(stage, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except Exception as e:  # annotate with the failing stage
            raise StageError(stage, e) from e
        timings[stage] = time.perf_counter() - t0
        return out

    fl, fr = timed("features", lambda: _get_features(left_img, right_img, cfg))
    if transform is not None:
        fl = apply_transform(fl, transform)
        fr = apply_transform(fr, transform)
    rng = DisparityRange(cfg.d_min, cfg.d_max, fl.scale_alpha)

    def match(a: FeatureMap, b: FeatureMap, r: DisparityRange):
        cv = build_cost_volume(a, b, r)
        pv = softmax_over_disparity(cv, cfg.beta)
        return map_disparity(pv, subpixel=cfg.subpixel), cv

    est_l, cv = timed("matcher", lambda: match(fl, fr, rng))
    semi = timed("filter", lambda: reliability_filter(est_l, cfg.tau))
    if cfg.lr_check:
        def lr():
            est_r, _ = match(fr, fl, rng.negated())
            # right-view disparity is the negated swapped-match estimate
            right_field = DisparityField(-est_r.init.disparities, est_r.init.valid)
            return lr_consistency_filter(semi, right_field, cfg.max_diff)
        semi = timed("lr_check", lr)

    factor = int(1 / rng.scale_alpha)
    h, w = np.asarray(left_img).shape[:2]

    def upsample():
        sf = upsample_disparity(semi, factor)
        inf = upsample_disparity(est_l.init, factor)
        rel = _upsample_plain(est_l.reliability, factor, (sf.shape[0], sf.shape[1]))
        # crop the padded upsample back to the image size
        crop = lambda f: DisparityField(f.disparities[:h, :w], f.valid[:h, :w])
        return crop(sf), crop(inf), rel[:h, :w]

    semi_full, init_full, rel_full = timed("upsample", upsample)

    levels = timed("completion", lambda: complete_multiscale(
        semi_full, init_full, rel_full, np.asarray(left_img, np.float64),
        cfg.completion))

    hh, ww, m = cv.scores.shape
    memory = {
        "volume_materialized_bytes": int(hh * ww * m * 8),
        "volume_streaming_bytes": int(ww * m * 8),
    }
    return PipelineResult(
        final=levels[-1], semi_full=semi_full, semi_alpha=semi,
        init_alpha=est_l.init, reliability_alpha=est_l.reliability,
        reliability_full=rel_full, multiscale=levels,
        timings=timings, memory=memory)
