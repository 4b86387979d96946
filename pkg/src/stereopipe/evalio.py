"""Dataset I/O (PFM, KITTI 16-bit PNG, plain images), evaluation metrics,
and the deterministic synthetic stereo-scene generator."""
from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter

from .core import DisparityField, DisparityRange, round_half_away


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class MetricReport:
    d1_all: float        # percent, KITTI two-arm rule
    bad2: float          # percent of |e| > 2 px
    epe: float           # mean |e| over pixels with a valid prediction
    density: float       # percent of evaluated gt pixels with a prediction
    n_eval: int
    bad2_noc: float | None = None  # over non-occluded pixels when a mask is given
    empty: bool = False

    @classmethod
    def empty_report(cls):
        return cls(0.0, 0.0, 0.0, 0.0, 0, None, True)


def _eval_errors(pred: DisparityField, gt: DisparityField):
    mask = gt.valid
    n = int(mask.sum())
    have = mask & pred.valid
    e = np.abs(np.where(have, pred.disparities, 0.0) - np.where(mask, gt.disparities, 0.0))
    return mask, have, e, n


def metric_d1(pred: DisparityField, gt: DisparityField) -> float:
    """Percent of gt pixels with error > 3 px AND > 5% of |gt|; invalid
    predictions count as errors."""
    mask, have, e, n = _eval_errors(pred, gt)
    if n == 0:
        return 0.0
    bad = (have & (e > 3.0) & (e > 0.05 * np.abs(gt.disparities))) | (mask & ~have)
    return 100.0 * bad.sum() / n


def metric_bad(pred: DisparityField, gt: DisparityField,
               thresh: float = 2.0) -> float:
    """Percent of gt pixels with error strictly above thresh; invalid
    predictions count as errors."""
    mask, have, e, n = _eval_errors(pred, gt)
    if n == 0:
        return 0.0
    bad = (have & (e > thresh)) | (mask & ~have)
    return 100.0 * bad.sum() / n


def metric_epe(pred: DisparityField, gt: DisparityField) -> float:
    """Mean absolute error over pixels where both prediction and gt exist."""
    _, have, e, _ = _eval_errors(pred, gt)
    n = int(have.sum())
    return float(e[have].sum() / n) if n else 0.0


def evaluate(pred: DisparityField, gt: DisparityField,
             occluded: np.ndarray | None = None) -> MetricReport:
    if not gt.valid.any():
        return MetricReport.empty_report()
    n = int(gt.valid.sum())
    density = 100.0 * (gt.valid & pred.valid).sum() / n
    bad2_noc = None
    if occluded is not None:
        noc = DisparityField(np.where(~occluded, gt.disparities, np.nan),
                             gt.valid & ~occluded)
        bad2_noc = metric_bad(pred, noc) if noc.valid.any() else None
    return MetricReport(metric_d1(pred, gt), metric_bad(pred, gt),
                        metric_epe(pred, gt), density, n, bad2_noc)


# ---------------------------------------------------------------------------
# PFM (Middlebury) and KITTI 16-bit PNG


class FileFormatError(ValueError):
    pass


def read_pfm(path) -> DisparityField:
    """Grayscale PFM; rows are stored bottom-to-top, +inf marks invalid."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise FileFormatError(f"{path}: expected 'Pf' header, got {header!r}")
        dims = f.readline().strip().split()
        if len(dims) != 2:
            raise FileFormatError(f"{path}: bad dimension line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        payload = f.read(w * h * 4)
        if len(payload) != w * h * 4:
            raise FileFormatError(f"{path}: truncated payload")
    endian = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(payload, dtype=endian).reshape(h, w)[::-1].astype(np.float64)
    valid = np.isfinite(data)
    return DisparityField(np.where(valid, data, np.nan), valid)


def write_pfm(fld: DisparityField, path) -> None:
    """Little-endian grayscale PFM; invalid pixels become +inf."""
    h, w = fld.shape
    data = np.where(fld.valid, fld.disparities, np.inf).astype("<f4")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_kitti_png(path) -> DisparityField:
    """KITTI disparity PNG: uint16, disparity = value / 256, 0 = invalid."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileFormatError(f"{path}: unreadable PNG")
    if raw.dtype != np.uint16 or raw.ndim != 2:
        raise FileFormatError(f"{path}: expected single-channel 16-bit PNG")
    valid = raw > 0
    d = raw.astype(np.float64) / 256.0
    return DisparityField(np.where(valid, d, np.nan), valid)


def write_kitti_png(fld: DisparityField, path) -> None:
    """Inverse of read_kitti_png; negative disparities are unrepresentable."""
    d = fld.disparities
    if np.any(fld.valid & (d < 0)):
        raise ValueError("KITTI PNG cannot encode negative disparities")
    enc = np.where(fld.valid, round_half_away(d * 256.0), 0.0)
    if np.any(enc > 65535):
        raise ValueError("disparity too large for 16-bit KITTI encoding")
    # a valid zero disparity would collide with the invalid code
    enc = np.where(fld.valid & (enc == 0), 1.0, enc)
    if not cv2.imwrite(str(path), enc.astype(np.uint16)):
        raise IOError(f"cannot write {path}")


def load_image(path) -> np.ndarray:
    """RGB uint8 (h, w, 3) from PNG/PPM/PGM/etc."""
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise FileFormatError(f"{path}: unreadable image")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def save_image(img: np.ndarray, path) -> None:
    img = np.asarray(img)
    if img.ndim == 3:
        img = cv2.cvtColor(img.astype(np.uint8), cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), img):
        raise IOError(f"cannot write {path}")


# ---------------------------------------------------------------------------
# Synthetic scenes


@dataclass
class SceneLayer:
    """Fronto-parallel or linearly slanted layer: d(j) = d0 + slope * j over
    the column support [j0, j1) (full rows)."""

    d0: float
    slope: float
    j0: int
    j1: int
    texture: np.ndarray  # (h, canvas_w, 3)

    def disparity_at(self, j):
        return self.d0 + self.slope * np.asarray(j, dtype=np.float64)


@dataclass
class SyntheticScene:
    left: np.ndarray
    right: np.ndarray
    gt_left: DisparityField
    gt_right: DisparityField
    occ_left: np.ndarray
    occ_right: np.ndarray
    range: DisparityRange
    layout: str
    seed: int


def _texture(rand, h, w, base, contrast=90.0, sigma=1.2) -> np.ndarray:
    noise = gaussian_filter(rand.standard_normal((h, w)), sigma)
    noise = noise / max(noise.std(), 1e-9)
    tex = base[None, None, :] + noise[:, :, None] * contrast
    return np.clip(tex, 0, 255)


def generate_scene(seed: int, layout: str, rng: DisparityRange,
                   height: int = 128, width: int = 256,
                   layers: list[tuple[float, float]] | None = None) -> SyntheticScene:
    """Deterministic textured layered scene with exact ground truth.

    layout: 'fronto_layers' (constant-disparity rectangles over a background),
    'slanted' (linearly slanted background plus fronto rectangles), or
    'negative_range' (layers on both sides of zero disparity).
    `layers` optionally fixes the (background, foreground...) disparities;
    for 'slanted' the first entry's slope is drawn from the seed.
    """
    if layout not in ("fronto_layers", "slanted", "negative_range"):
        raise ValueError(f"unknown layout {layout!r}")
    rand = np.random.default_rng(seed)
    lo, hi = rng.d_min, rng.d_max
    span = hi - lo
    if layers is None:
        if layout == "negative_range":
            if lo >= 0:
                raise ValueError("negative_range layout needs d_min < 0")
            bg = lo + 0.1 * span
            ds = [bg] + sorted(rand.uniform(bg + 0.2 * span, hi - 0.05 * span, 2))
            ds = [float(round(x)) for x in ds]
        else:
            bg = lo + max(2.0, 0.05 * span)
            ds = [bg] + sorted(rand.uniform(bg + 0.25 * span, hi - 0.05 * span, 2))
            ds = [float(round(x)) for x in ds]
        # strictly distinct disparities keep the z-buffer tie-free
        for i in range(1, len(ds)):
            if ds[i] <= ds[i - 1]:
                ds[i] = ds[i - 1] + 1.0
        if ds[-1] > hi:
            raise ValueError("layer disparities exceed the search range")
        layer_spec = [(d, 0.0) for d in ds]
        if layout == "slanted":
            # positive sub-unit slope: no resampling gaps in the right view
            layer_spec[0] = (ds[0], float(rand.uniform(1.0, 8.0)) / width)
    else:
        layer_spec = [(float(d), float(s)) for d, s in layers]
    for d0, slope in layer_spec:
        dvals = d0 + slope * np.array([0.0, width])
        if dvals.min() < lo or dvals.max() > hi:
            raise ValueError(f"layer disparity {d0}+{slope}j outside range [{lo}, {hi}]")

    pad = int(np.ceil(max(abs(lo), abs(hi)))) + 4
    cw = width + 2 * pad
    slayers = []
    placed = []
    bases = rand.uniform(40, 215, size=(len(layer_spec), 3))
    for li, (d0, slope) in enumerate(layer_spec):
        if li == 0:
            j0, j1 = -pad, width + pad
        else:
            # keep foreground rectangles disjoint: a rectangle hidden behind
            # a nearer one would surface in the right view as an occluder the
            # scanline z-buffer over the left view cannot account for
            for _ in range(200):
                rw = int(rand.integers(width // 6, width // 3))
                j0 = int(rand.integers(0, width - rw))
                j1 = j0 + rw
                if all(j1 <= a or j0 >= b for _, _, a, b in placed):
                    break
            else:
                raise ValueError("could not place disjoint foreground layers")
            placed.append((d0, slope, j0, j1))
        slayers.append(SceneLayer(d0, slope, j0, j1, _texture(rand, height, cw, bases[li])))

    # left view: painter's algorithm, nearer (larger d) layers later
    left = np.zeros((height, width, 3))
    gt_l = np.zeros((height, width))
    lid_l = np.full((height, width), -1, dtype=np.int64)
    order = np.argsort([l.d0 for l in slayers], kind="stable")
    for li in order:
        lay = slayers[li]
        a, b = max(lay.j0, 0), min(lay.j1, width)
        if a >= b:
            continue
        cols = np.arange(a, b)
        left[:, a:b] = lay.texture[:, a + pad:b + pad]
        gt_l[:, a:b] = lay.disparity_at(cols)[None, :]
        lid_l[:, a:b] = li

    # right view: paint per-pixel claims sorted by disparity ascending, with
    # claims from outside the left frame painted first (they only fill
    # otherwise-empty border columns and never occlude in-frame pixels)
    right = np.zeros((height, width, 3))
    gt_r = np.full((height, width), np.nan)
    lid_r = np.full((height, width), -1, dtype=np.int64)
    src_l = np.full((height, width), np.iinfo(np.int64).min, dtype=np.int64)
    for in_frame in (False, True):
        claims = []  # (d, layer, jl) per column claim, one set per row pattern
        for li, lay in enumerate(slayers):
            a, b = lay.j0, lay.j1
            cols = np.arange(a, b)
            if in_frame:
                cols = cols[(cols >= 0) & (cols < width)]
            else:
                cols = cols[(cols < 0) | (cols >= width)]
            if len(cols) == 0:
                continue
            dv = lay.disparity_at(cols)
            jr = round_half_away(cols - dv).astype(np.int64)
            ok = (jr >= 0) & (jr < width)
            for c, t, d in zip(cols[ok], jr[ok], dv[ok]):
                claims.append((d, li, int(c), int(t)))
        claims.sort(key=lambda x: x[0])  # ascending disparity: nearest wins
        for d, li, jl, jr in claims:
            lay = slayers[li]
            right[:, jr] = lay.texture[:, jl + pad]
            gt_r[:, jr] = d
            lid_r[:, jr] = li
            src_l[:, jr] = jl

    if np.isnan(gt_r).any():
        raise ValueError("right view has unclaimed columns; widen the background")

    # left occlusion: the scene point is not the winner at its right column
    jj = np.arange(width)[None, :]
    tgt = round_half_away(jj - gt_l).astype(np.int64)
    in_img = (tgt >= 0) & (tgt < width)
    occ_l = in_img & (np.take_along_axis(src_l, np.clip(tgt, 0, width - 1), axis=1)
                      != jj)
    # right occlusion: the winning source column is hidden (or out of frame)
    # in the left view
    srcc = np.clip(src_l, 0, width - 1)
    occ_r = ((src_l < 0) | (src_l >= width)
             | (np.take_along_axis(lid_l, srcc, axis=1) != lid_r))

    return SyntheticScene(
        left=left.astype(np.uint8), right=right.astype(np.uint8),
        gt_left=DisparityField(gt_l, np.ones_like(gt_l, bool)),
        gt_right=DisparityField(gt_r, np.ones_like(gt_r, bool)),
        occ_left=occ_l, occ_right=occ_r, range=rng, layout=layout, seed=seed)


# ---------------------------------------------------------------------------
# Scene serialization: directory of images + PFMs + a small manifest


def save_scene(scene: SyntheticScene, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    save_image(scene.left, os.path.join(out_dir, "left.png"))
    save_image(scene.right, os.path.join(out_dir, "right.png"))
    write_pfm(scene.gt_left, os.path.join(out_dir, "gt_left.pfm"))
    write_pfm(scene.gt_right, os.path.join(out_dir, "gt_right.pfm"))
    save_image(scene.occ_left.astype(np.uint8) * 255,
               os.path.join(out_dir, "occ_left.png"))
    save_image(scene.occ_right.astype(np.uint8) * 255,
               os.path.join(out_dir, "occ_right.png"))
    with open(os.path.join(out_dir, "manifest.txt"), "w") as f:
        f.write(f"seed={scene.seed}\nlayout={scene.layout}\n"
                f"d_min={scene.range.d_min}\nd_max={scene.range.d_max}\n"
                f"alpha={scene.range.scale_alpha}\n")


def load_scene(scene_dir) -> SyntheticScene:
    manifest = {}
    with open(os.path.join(scene_dir, "manifest.txt")) as f:
        for line in f:
            if "=" in line:
                k, v = line.strip().split("=", 1)
                manifest[k] = v
    num, _, den = manifest.get("alpha", "1").partition("/")
    alpha = Fraction(int(num), int(den) if den else 1)
    rng = DisparityRange(int(manifest["d_min"]), int(manifest["d_max"]), alpha)
    grey = cv2.imread(os.path.join(scene_dir, "occ_left.png"),
                      cv2.IMREAD_GRAYSCALE)
    grey_r = cv2.imread(os.path.join(scene_dir, "occ_right.png"),
                        cv2.IMREAD_GRAYSCALE)
    return SyntheticScene(
        left=load_image(os.path.join(scene_dir, "left.png")),
        right=load_image(os.path.join(scene_dir, "right.png")),
        gt_left=read_pfm(os.path.join(scene_dir, "gt_left.pfm")),
        gt_right=read_pfm(os.path.join(scene_dir, "gt_right.pfm")),
        occ_left=grey > 0, occ_right=grey_r > 0,
        range=rng, layout=manifest.get("layout", "unknown"),
        seed=int(manifest.get("seed", 0)))
