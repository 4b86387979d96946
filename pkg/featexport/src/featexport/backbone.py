"""Small convolutional stereo feature backbone in plain numpy.

conv3x3(1->c) + ReLU, conv3x3(c->c) stride 2 + ReLU, conv3x3(c->c): a
miniature stand-in for the downsampling feature extractors of stereo CNNs.
Weights live in a .npz checkpoint; `create_checkpoint` writes a seeded
randomly-initialized one so exports are reproducible without a training run.
"""
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MODEL_NAME = "mini-stereo-conv"
FEATURE_LAYER = "conv3"


@dataclass
class Backbone:
    """Three-layer conv feature extractor; overall stride 2 (alpha = 1/2)."""

    weights: dict  # w1, b1, w2, b2, w3, b3

    @property
    def channels(self) -> int:
        return self.weights["w3"].shape[3]

    @property
    def scale_alpha(self) -> Fraction:
        return Fraction(1, 2)


def _to_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=-1)
    if img.ndim != 2:
        raise ValueError("image must be 2D or 3-channel")
    return img


def _conv3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray,
             stride: int = 1) -> np.ndarray:
    """Same-size 3x3 convolution with clamped-edge padding, then stride."""
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(0, 1))
    # win: (h, w, cin, 3, 3); w: (3, 3, cin, cout)
    out = np.einsum("hwcij,ijco->hwo", win, w) + b
    return out[::stride, ::stride]


def forward(backbone: Backbone, image: np.ndarray) -> np.ndarray:
    """Raw (un-normalized) feature grid at half resolution, (ceil(h/2),
    ceil(w/2), channels)."""
    p = backbone.weights
    x = (_to_gray(image) / 255.0)[..., None]
    x = np.maximum(_conv3x3(x, p["w1"], p["b1"]), 0.0)
    x = np.maximum(_conv3x3(x, p["w2"], p["b2"], stride=2), 0.0)
    return _conv3x3(x, p["w3"], p["b3"])


def create_checkpoint(path, seed: int = 0, channels: int = 16) -> None:
    """Write a seeded randomly-initialized checkpoint (He-scaled weights)."""
    rand = np.random.default_rng(seed)

    def he(shape):
        fan_in = shape[0] * shape[1] * shape[2]
        return rand.normal(0.0, np.sqrt(2.0 / fan_in), shape)

    np.savez(path,
             w1=he((3, 3, 1, channels)), b1=np.zeros(channels),
             w2=he((3, 3, channels, channels)), b2=np.zeros(channels),
             w3=he((3, 3, channels, channels)), b3=np.zeros(channels))


def load_backbone(path) -> Backbone:
    """Load a checkpoint; raises FileNotFoundError when it is missing."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path) as z:
        weights = {k: z[k] for k in ("w1", "b1", "w2", "b2", "w3", "b3")}
    return Backbone(weights)
