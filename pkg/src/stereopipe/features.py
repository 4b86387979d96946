"""Feature maps: hand-crafted census+gradient descriptors, linear transforms,
and the FMAP tensor file bridge to external extractors."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import ALLOWED_ALPHAS, round_half_away

NORM_EPS = 1e-12
FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1
# refuse absurd headers instead of trying to allocate
MAX_DIM = 1 << 20
MAX_ELEMENTS = 1 << 31


class FmapError(ValueError):
    """Malformed FMAP feature-tensor file."""


class FmapBadMagic(FmapError):
    pass


class FmapDimOverflow(FmapError):
    pass


class FmapTruncated(FmapError):
    pass


@dataclass
class FeatureMap:
    """Per-pixel n-channel descriptor grid at scale alpha (channels last)."""

    data: np.ndarray
    scale_alpha: Fraction = Fraction(1)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3:
            raise ValueError("feature data must be (h, w, n)")
        if not np.isfinite(d).all():
            raise ValueError("feature channels must be finite")
        self.data = d
        self.scale_alpha = Fraction(self.scale_alpha)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]


def normalize_features(data: np.ndarray) -> np.ndarray:
    """L2-normalize each pixel vector; near-zero vectors stay zero."""
    n = np.linalg.norm(data, axis=-1, keepdims=True)
    return np.where(n > NORM_EPS, data / np.maximum(n, NORM_EPS), 0.0)


def to_gray(image: np.ndarray) -> np.ndarray:
    """Collapse an (h, w) or (h, w, 3) image to float64 grayscale."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=-1)
    if img.ndim != 2:
        raise ValueError("image must be 2D or 3-channel")
    return img


def average_pool(image: np.ndarray, factor: int) -> np.ndarray:
    """Block-average a 2D image, edge-padding to a multiple of factor."""
    if factor == 1:
        return np.asarray(image, dtype=np.float64)
    h, w = image.shape
    ph = (-h) % factor
    pw = (-w) % factor
    img = np.pad(np.asarray(image, dtype=np.float64), ((0, ph), (0, pw)), mode="edge")
    return img.reshape(img.shape[0] // factor, factor,
                       img.shape[1] // factor, factor).mean(axis=(1, 3))


def _shifted(img: np.ndarray, di: int, dj: int) -> np.ndarray:
    """Image sampled at (i+di, j+dj) with clamped borders."""
    h, w = img.shape
    yi = np.clip(np.arange(h) + di, 0, h - 1)
    xi = np.clip(np.arange(w) + dj, 0, w - 1)
    return img[yi[:, None], xi[None, :]]


def extract_census_gradient(image, window=(9, 7),
                            scale_alpha=Fraction(1, 2)) -> FeatureMap:
    """Census bits (+1/0/-1 per neighbor comparison) plus image gradients,
    L2-normalized per pixel.

    The image is average-pooled to scale alpha before description, so the
    descriptor grid matches the cost-volume resolution. A flat image yields
    all-zero descriptors: ties encode 0 and gradients vanish.
    """
    wh, ww = window
    if wh % 2 == 0 or ww % 2 == 0:
        raise ValueError("census window dims must be odd")
    alpha = Fraction(scale_alpha)
    if alpha not in ALLOWED_ALPHAS:
        raise ValueError(f"alpha must be one of {ALLOWED_ALPHAS}")
    img = to_gray(image)
    img = average_pool(img, int(1 / alpha))
    if wh > img.shape[0] or ww > img.shape[1]:
        raise ValueError("census window larger than (pooled) image")

    chans = []
    for di in range(-(wh // 2), wh // 2 + 1):
        for dj in range(-(ww // 2), ww // 2 + 1):
            if di == 0 and dj == 0:
                continue
            chans.append(np.sign(_shifted(img, di, dj) - img))
    gx = (_shifted(img, 0, 1) - _shifted(img, 0, -1)) / 2.0
    gy = (_shifted(img, 1, 0) - _shifted(img, -1, 0)) / 2.0
    chans.extend([gx, gy])
    data = normalize_features(np.stack(chans, axis=-1))
    return FeatureMap(data, alpha)


@dataclass
class FeatureTransform:
    """Linear per-pixel transform v' = matrix @ v + bias (then renormalized)."""

    matrix: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if m.ndim != 2 or b.ndim != 1 or b.shape[0] != m.shape[0]:
            raise ValueError("matrix must be (n_out, n_in), bias (n_out,)")
        if not (np.isfinite(m).all() and np.isfinite(b).all()):
            raise ValueError("transform entries must be finite")
        self.matrix = m
        self.bias = b

    @classmethod
    def identity(cls, n: int) -> "FeatureTransform":
        return cls(np.eye(n), np.zeros(n))


def apply_transform(fm: FeatureMap, t: FeatureTransform) -> FeatureMap:
    """Apply the linear transform per pixel and renormalize."""
    if t.matrix.shape[1] != fm.channels:
        raise ValueError(f"transform expects n_in={t.matrix.shape[1]}, "
                         f"feature map has n={fm.channels}")
    u = fm.data @ t.matrix.T + t.bias
    return FeatureMap(normalize_features(u), fm.scale_alpha)


def save_feature_tensor(fm: FeatureMap, path) -> None:
    """Write the FMAP binary format (little-endian, float32 channel-innermost)."""
    alpha = fm.scale_alpha
    header = FMAP_MAGIC + struct.pack(
        "<6I", FMAP_VERSION, fm.height, fm.width, fm.channels,
        alpha.numerator, alpha.denominator)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(fm.data, dtype="<f4").tobytes())


def load_feature_tensor(path) -> FeatureMap:
    """Read an FMAP file, validating magic, dims, and payload length."""
    with open(path, "rb") as f:
        head = f.read(4 + 6 * 4)
        if len(head) < 4 or head[:4] != FMAP_MAGIC:
            raise FmapBadMagic(f"{path}: bad magic {head[:4]!r}")
        if len(head) < 4 + 6 * 4:
            raise FmapTruncated(f"{path}: truncated header")
        version, h, w, n, a_num, a_den = struct.unpack("<6I", head[4:])
        if version != FMAP_VERSION:
            raise FmapError(f"{path}: unsupported version {version}")
        if a_den == 0 or Fraction(a_num, a_den) not in ALLOWED_ALPHAS:
            raise FmapError(f"{path}: bad alpha {a_num}/{a_den}")
        if max(h, w, n) > MAX_DIM or h * w * n > MAX_ELEMENTS:
            raise FmapDimOverflow(f"{path}: dims {h}x{w}x{n} overflow")
        payload = f.read(h * w * n * 4)
        if len(payload) != h * w * n * 4:
            raise FmapTruncated(
                f"{path}: expected {h * w * n} floats, got {len(payload) // 4}")
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, n)
    return FeatureMap(data.astype(np.float64), Fraction(a_num, a_den))
