"""Run the backbone on a stereo pair and write FMAP files plus a manifest."""
import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .backbone import FEATURE_LAYER, MODEL_NAME, Backbone, forward
from .fmapio import write_fmap


@dataclass
class ExportManifest:
    model: str
    checkpoint_sha256: str
    layer: str
    alpha: str
    channels: int
    normalization: str
    left_path: str
    right_path: str


def l2_normalize(data: np.ndarray) -> np.ndarray:
    """Unit-normalize each pixel vector (near-zero vectors stay zero)."""
    n = np.linalg.norm(data, axis=-1, keepdims=True)
    return np.where(n > 1e-12, data / np.maximum(n, 1e-12), 0.0)


def checkpoint_hash(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def export_features(left: np.ndarray, right: np.ndarray, backbone: Backbone,
                    out_dir, checkpoint_path=None) -> ExportManifest:
    """Write left.fmap / right.fmap / manifest.json for an image pair.

    Features are L2-normalized per pixel at export so the consumer's
    inner-product matching sees unit-magnitude descriptors.
    """
    if np.asarray(left).shape != np.asarray(right).shape:
        raise ValueError("left/right image shapes differ")
    os.makedirs(out_dir, exist_ok=True)
    left_path = os.path.join(out_dir, "left.fmap")
    right_path = os.path.join(out_dir, "right.fmap")
    fl = l2_normalize(forward(backbone, left))
    fr = l2_normalize(forward(backbone, right))
    write_fmap(fl, backbone.scale_alpha, left_path)
    write_fmap(fr, backbone.scale_alpha, right_path)
    manifest = ExportManifest(
        model=MODEL_NAME,
        checkpoint_sha256=(checkpoint_hash(checkpoint_path)
                           if checkpoint_path else ""),
        layer=FEATURE_LAYER,
        alpha=str(backbone.scale_alpha),
        channels=backbone.channels,
        normalization="l2-per-pixel",
        left_path=left_path,
        right_path=right_path)
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(asdict(manifest), f, indent=2)
    return manifest
