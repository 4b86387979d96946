"""Stage 2: hierarchical reliability- and color-guided diffusion that fills
the invalid pixels of a semi-dense disparity map."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DisparityField


@dataclass
class CompletionConfig:
    levels: int = 5
    iterations_per_level: int = 64
    color_sigma: float = 12.0       # edge-stopping bandwidth, 8-bit color units
    spatial_radius: int = 1
    reliability_floor: float = 0.05

    def __post_init__(self):
        if self.levels < 1 or self.iterations_per_level < 1:
            raise ValueError("levels and iterations must be positive")
        if self.color_sigma <= 0 or self.spatial_radius < 1:
            raise ValueError("color_sigma and spatial_radius must be positive")
        if not 0.0 <= self.reliability_floor < 1.0:
            raise ValueError("reliability_floor must be in [0, 1)")


def _down2_img(img: np.ndarray) -> np.ndarray:
    """2x block average of an (h, w) or (h, w, c) array, edge-padded."""
    h, w = img.shape[:2]
    ph, pw = h % 2, w % 2
    pad = ((0, ph), (0, pw)) + ((0, 0),) * (img.ndim - 2)
    a = np.pad(img.astype(np.float64), pad, mode="edge")
    hh, ww = a.shape[0] // 2, a.shape[1] // 2
    a = a.reshape(hh, 2, ww, 2, *a.shape[2:])
    return a.mean(axis=(1, 3))


def _down2_field(d: np.ndarray, v: np.ndarray):
    """2x downsample of (values, valid): mean of valid, valid if any."""
    h, w = d.shape
    ph, pw = h % 2, w % 2
    dv = np.pad(np.where(v, d, 0.0), ((0, ph), (0, pw)))
    vv = np.pad(v, ((0, ph), (0, pw)))
    hh, ww = dv.shape[0] // 2, dv.shape[1] // 2
    s = dv.reshape(hh, 2, ww, 2).sum(axis=(1, 3))
    c = vv.reshape(hh, 2, ww, 2).sum(axis=(1, 3))
    ok = c > 0
    out = np.divide(s, c, out=np.zeros_like(s), where=ok)
    return out, ok


def _up2(a: np.ndarray, shape) -> np.ndarray:
    """Nearest-neighbor 2x upsample cropped to `shape` (coarse-level seed)."""
    up = np.repeat(np.repeat(a, 2, axis=0), 2, axis=1)
    return up[:shape[0], :shape[1]]


def _shift(a: np.ndarray, di: int, dj: int) -> np.ndarray:
    h, w = a.shape[:2]
    yi = np.clip(np.arange(h) + di, 0, h - 1)
    xi = np.clip(np.arange(w) + dj, 0, w - 1)
    return a[yi[:, None], xi[None, :]]


def _neighbor_offsets(radius: int):
    return [(di, dj)
            for di in range(-radius, radius + 1)
            for dj in range(-radius, radius + 1)
            if (di, dj) != (0, 0)]


def complete_multiscale(semi: DisparityField, init: DisparityField,
                        reliability: np.ndarray, left_image: np.ndarray,
                        cfg: CompletionConfig | None = None):
    """Coarse-to-fine fill of the semi-dense map.

    Unknown pixels are filled by iterated (Jacobi) weighted averaging with
    weights exp(-||c_p - c_q||^2 / 2 sigma^2) * max(reliability_q, floor);
    known pixels never move. Each level's solution seeds the next finer one.
    Returns the per-level dense fields, coarsest first; the last entry is the
    full-resolution result.
    """
    cfg = cfg or CompletionConfig()
    if not semi.valid.any():
        raise ValueError("semi-dense map has no known pixels to propagate")
    img = np.asarray(left_image, dtype=np.float64)
    if img.shape[:2] != semi.shape:
        raise ValueError("image/disparity shape mismatch")
    rel = np.asarray(reliability, dtype=np.float64)

    # pyramids, finest first
    imgs, rels, knowns, values, inits, init_vs = [img], [rel], [semi.valid], \
        [np.where(semi.valid, semi.disparities, 0.0)], \
        [np.where(init.valid, init.disparities, 0.0)], [init.valid]
    for _ in range(cfg.levels - 1):
        imgs.append(_down2_img(imgs[-1]))
        rels.append(_down2_img(rels[-1]))
        d, v = _down2_field(values[-1], knowns[-1])
        values.append(d)
        knowns.append(v)
        di, vi = _down2_field(inits[-1], init_vs[-1])
        inits.append(di)
        init_vs.append(vi)

    offsets = _neighbor_offsets(cfg.spatial_radius)
    kall = semi.disparities[semi.valid]
    global_mean = float(kall.mean())
    kmin, kmax = float(kall.min()), float(kall.max())
    results = []
    est = None
    for lvl in range(cfg.levels - 1, -1, -1):
        known = knowns[lvl]
        kv = values[lvl]
        if est is None:
            # seed from the unfiltered initial estimate, clamped so filled
            # values can never leave the known range
            seed = np.clip(np.where(init_vs[lvl], inits[lvl], global_mean),
                           kmin, kmax)
        else:
            seed = _up2(est, known.shape)
        est = np.where(known, kv, seed)

        im = imgs[lvl]
        rl = rels[lvl]
        weights = []
        shifted_idx = []
        for di, dj in offsets:
            cd = _shift(im, di, dj) - im
            if cd.ndim == 3:
                cd2 = (cd * cd).sum(axis=-1)
            else:
                cd2 = cd * cd
            wgt = np.exp(-cd2 / (2.0 * cfg.color_sigma ** 2)) \
                * np.maximum(_shift(rl, di, dj), cfg.reliability_floor)
            weights.append(wgt)
            shifted_idx.append((di, dj))
        for _ in range(cfg.iterations_per_level):
            num = np.zeros_like(est)
            den = np.zeros_like(est)
            for wgt, (di, dj) in zip(weights, shifted_idx):
                num += wgt * _shift(est, di, dj)
                den += wgt
            est = np.where(known, kv, num / den)
        results.append(DisparityField(est.copy(), np.ones_like(known)))
    return results


def complete(semi: DisparityField, init: DisparityField,
             reliability: np.ndarray, left_image: np.ndarray,
             cfg: CompletionConfig | None = None) -> DisparityField:
    """Dense full-resolution completion (final level of the hierarchy)."""
    return complete_multiscale(semi, init, reliability, left_image, cfg)[-1]
