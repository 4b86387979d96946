"""Standalone FMAP feature-tensor writer.

Format (little-endian): magic b"FMAP", u32 version=1, u32 h, u32 w, u32 n,
u32 alpha_num, u32 alpha_den, then h*w*n float32 row-major with the channel
index innermost. Written here independently so the exporter has no code
dependency on the consumer.
"""
import struct
from fractions import Fraction

import numpy as np

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1


def write_fmap(data: np.ndarray, scale_alpha: Fraction, path) -> None:
    """Write an (h, w, n) float array as an FMAP file."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ValueError("feature data must be (h, w, n)")
    if not np.isfinite(data).all():
        raise ValueError("feature channels must be finite")
    alpha = Fraction(scale_alpha)
    h, w, n = data.shape
    header = FMAP_MAGIC + struct.pack("<6I", FMAP_VERSION, h, w, n,
                                      alpha.numerator, alpha.denominator)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
