"""Shared grid types, signed disparity ranges, and resampling helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

# feature maps live at one of these downscale factors
ALLOWED_ALPHAS = (Fraction(1), Fraction(1, 2), Fraction(1, 4))


def round_half_away(x):
    """Round to the nearest integer, halves away from zero (unlike np.round)."""
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


class RangeError(ValueError):
    """Invalid disparity-range construction."""


@dataclass(frozen=True)
class DisparityRange:
    """Signed integer disparity search range [d_min, d_max] at scale alpha.

    Candidates are the integers between alpha*d_min and alpha*d_max, so both
    endpoints must scale to integers.
    """

    d_min: int
    d_max: int
    scale_alpha: Fraction = Fraction(1)

    def __post_init__(self):
        alpha = Fraction(self.scale_alpha)
        object.__setattr__(self, "scale_alpha", alpha)
        if alpha not in ALLOWED_ALPHAS:
            raise RangeError(f"alpha must be one of {ALLOWED_ALPHAS}, got {alpha}")
        if self.d_min > self.d_max:
            raise RangeError(f"d_min={self.d_min} > d_max={self.d_max}")
        for name, v in (("d_min", self.d_min), ("d_max", self.d_max)):
            if (alpha * v).denominator != 1:
                raise RangeError(f"alpha*{name} = {alpha * v} is not an integer")

    @property
    def m(self) -> int:
        """Number of disparity candidates."""
        return int(self.scale_alpha * (self.d_max - self.d_min)) + 1

    def candidates(self) -> np.ndarray:
        """Ascending integer candidates at scale alpha."""
        lo = int(self.scale_alpha * self.d_min)
        hi = int(self.scale_alpha * self.d_max)
        return np.arange(lo, hi + 1, dtype=np.int64)

    def negated(self) -> "DisparityRange":
        return DisparityRange(-self.d_max, -self.d_min, self.scale_alpha)


def enumerate_candidates(rng: DisparityRange) -> np.ndarray:
    """Candidate disparities of `rng`, ascending with unit step."""
    return rng.candidates()


@dataclass
class DisparityField:
    """Real-valued disparity grid with a validity mask.

    Invalid pixels always hold NaN so accidental use propagates loudly.
    """

    disparities: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        d = np.asarray(self.disparities, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("disparities must be a 2D grid")
        if self.valid is None:
            v = np.isfinite(d)
        else:
            v = np.asarray(self.valid, dtype=bool)
            if v.shape != d.shape:
                raise ValueError("valid mask shape mismatch")
            v = v & np.isfinite(d)
        d = np.where(v, d, np.nan)
        self.disparities = d
        self.valid = v

    @property
    def shape(self):
        return self.disparities.shape

    @property
    def density(self) -> float:
        """Fraction of valid pixels."""
        return float(self.valid.mean())

    def copy(self) -> "DisparityField":
        return DisparityField(self.disparities.copy(), self.valid.copy())

    @classmethod
    def full_invalid(cls, shape) -> "DisparityField":
        return cls(np.full(shape, np.nan), np.zeros(shape, bool))


def upsample_disparity(fld: DisparityField, factor: int) -> DisparityField:
    """Bilinear upsample by an integer factor, scaling disparity values by it.

    Output pixel (i, j) samples the source at (i/factor, j/factor); a pixel is
    valid only when every contributing (nonzero-weight) source pixel is valid.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return fld.copy()
    h, w = fld.shape
    oh, ow = h * factor, w * factor
    yi = np.arange(oh, dtype=np.float64) / factor
    xi = np.arange(ow, dtype=np.float64) / factor
    y0 = np.minimum(np.floor(yi).astype(np.int64), h - 1)
    x0 = np.minimum(np.floor(xi).astype(np.int64), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (yi - y0)[:, None]
    fx = (xi - x0)[None, :]

    d = np.where(fld.valid, fld.disparities, 0.0)
    v = fld.valid

    def gather(a, ys, xs):
        return a[ys[:, None], xs[None, :]]

    w00 = (1 - fy) * (1 - fx)
    w01 = (1 - fy) * fx
    w10 = fy * (1 - fx)
    w11 = fy * fx
    out = (w00 * gather(d, y0, x0) + w01 * gather(d, y0, x1)
           + w10 * gather(d, y1, x0) + w11 * gather(d, y1, x1)) * factor
    ok = (((w00 == 0) | gather(v, y0, x0)) & ((w01 == 0) | gather(v, y0, x1))
          & ((w10 == 0) | gather(v, y1, x0)) & ((w11 == 0) | gather(v, y1, x1)))
    return DisparityField(np.where(ok, out, np.nan), ok)


def downsample_average(fld: DisparityField, factor: int) -> DisparityField:
    """Average-pool valid pixels into factor x factor blocks.

    A block is valid when it contains at least one valid source pixel.
    Counterpart of upsample_disparity for round-trip checks and ground-truth
    resampling; disparity values are divided by the factor.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return fld.copy()
    h, w = fld.shape
    ph = (-h) % factor
    pw = (-w) % factor
    d = np.pad(np.where(fld.valid, fld.disparities, 0.0), ((0, ph), (0, pw)))
    v = np.pad(fld.valid, ((0, ph), (0, pw)))
    hh, ww = d.shape[0] // factor, d.shape[1] // factor
    db = d.reshape(hh, factor, ww, factor)
    vb = v.reshape(hh, factor, ww, factor)
    cnt = vb.sum(axis=(1, 3))
    s = db.sum(axis=(1, 3))
    ok = cnt > 0
    out = np.full((hh, ww), np.nan)
    np.divide(s, cnt * factor, out=out, where=ok)
    return DisparityField(out, ok)
