"""Stage 1: full-correlation cost volume, softmax probabilities, and MAP
disparity with sub-pixel offset and reliability."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DisparityField, DisparityRange
from .features import FeatureMap


@dataclass
class CostVolume:
    """Per-pixel correlation scores over the candidate set (higher = better).

    Invalid candidates (right coordinate outside the image) carry -inf and are
    False in `valid`.
    """

    scores: np.ndarray  # (h, w, m)
    valid: np.ndarray   # (h, w, m) bool
    range: DisparityRange

    @property
    def pixel_valid(self) -> np.ndarray:
        return self.valid.any(axis=-1)


@dataclass
class ProbabilityVolume:
    """Softmax of a cost volume along disparity; invalid candidates hold 0."""

    probs: np.ndarray   # (h, w, m)
    valid: np.ndarray   # (h, w, m) bool
    range: DisparityRange

    @property
    def pixel_valid(self) -> np.ndarray:
        return self.valid.any(axis=-1)


@dataclass
class MapEstimate:
    """Initial disparity (candidate units at scale alpha), integer argmax,
    and 3-tap reliability per pixel."""

    init: DisparityField
    argmax: np.ndarray       # (h, w) int, candidate value at the peak
    reliability: np.ndarray  # (h, w) in [0, 1]
    range: DisparityRange


def build_cost_volume(left: FeatureMap, right: FeatureMap,
                      rng: DisparityRange) -> CostVolume:
    """Correlation scores c[i, j, k] = <left[i, j], right[i, j - d_k]>.

    Candidates whose right coordinate falls outside the image are masked.
    Negative candidates (right coordinate to the right of j) are supported.
    """
    if left.data.shape != right.data.shape:
        raise ValueError("left/right feature maps must have equal shape")
    if left.scale_alpha != right.scale_alpha:
        raise ValueError("left/right feature maps must share alpha")
    if rng.scale_alpha != left.scale_alpha:
        raise ValueError("range alpha must match feature-map alpha")
    h, w, _ = left.data.shape
    cands = rng.candidates()
    m = len(cands)
    scores = np.full((h, w, m), -np.inf)
    valid = np.zeros((h, w, m), dtype=bool)
    for k, d in enumerate(cands):
        d = int(d)
        if d >= w or -d >= w:
            continue
        if d >= 0:
            lj, rj = slice(d, w), slice(0, w - d)
        else:
            lj, rj = slice(0, w + d), slice(-d, w)
        scores[:, lj, k] = (left.data[:, lj] * right.data[:, rj]).sum(axis=-1)
        valid[:, lj, k] = True
    if not valid.any():
        raise ValueError("empty candidate set at every pixel")
    return CostVolume(scores, valid, rng)


def softmax_over_disparity(cv: CostVolume, beta: float = 1.0) -> ProbabilityVolume:
    """Max-subtracted softmax along disparity; masked candidates get 0.

    `beta` scales the scores before the softmax. Unit-norm descriptors bound
    correlations to [-1, 1], so a gain above 1 stands in for the unbounded
    magnitudes of learned features; the softmax itself stays shift-invariant.
    """
    s = np.where(cv.valid, cv.scores, -np.inf)
    pixel_valid = cv.valid.any(axis=-1)
    mx = np.where(pixel_valid, s.max(axis=-1), 0.0)[..., None]
    e = np.where(cv.valid, np.exp(beta * np.where(cv.valid, s - mx, 0.0)), 0.0)
    denom = e.sum(axis=-1, keepdims=True)
    probs = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)
    return ProbabilityVolume(probs, cv.valid.copy(), cv.range)


def neighbor_probs(pv: ProbabilityVolume, khat: np.ndarray):
    """Probabilities at (khat-1, khat, khat+1); out-of-range or masked
    neighbors contribute exactly 0."""
    p = pv.probs
    h, w, m = p.shape
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    p0 = p[ii, jj, khat]
    km = khat - 1
    kp = khat + 1
    pm = np.where(km >= 0, p[ii, jj, np.maximum(km, 0)], 0.0)
    pp = np.where(kp <= m - 1, p[ii, jj, np.minimum(kp, m - 1)], 0.0)
    return pm, p0, pp


def map_disparity(pv: ProbabilityVolume, subpixel: bool = True) -> MapEstimate:
    """MAP disparity: argmax candidate (ties to the smallest), the 3-tap
    probability-weighted sub-pixel offset, and reliability = 3-tap mass."""
    cands = pv.range.candidates()
    pixel_valid = pv.pixel_valid
    khat = np.argmax(pv.probs, axis=-1)  # first max = smallest candidate
    pm, p0, pp = neighbor_probs(pv, khat)
    # the tap sum can creep above 1 by a rounding ulp; clamp so the strict
    # r > tau filter behaves at the tau = 1 endpoint
    r = np.minimum(pm + p0 + pp, 1.0)
    o = np.divide(pp - pm, r, out=np.zeros_like(r), where=r > 0)
    dhat = cands[khat]
    init = dhat + o if subpixel else dhat.astype(np.float64)
    init = np.where(pixel_valid, init, np.nan)
    r = np.where(pixel_valid, r, 0.0)
    return MapEstimate(DisparityField(init, pixel_valid), dhat, r, pv.range)


def cost_volume_bruteforce(left: FeatureMap, right: FeatureMap,
                           rng: DisparityRange) -> CostVolume:
    """Independent triple-loop oracle for build_cost_volume."""
    h, w, _ = left.data.shape
    cands = rng.candidates()
    scores = np.full((h, w, len(cands)), -np.inf)
    valid = np.zeros((h, w, len(cands)), dtype=bool)
    for i in range(h):
        for j in range(w):
            for k, d in enumerate(cands):
                jr = j - int(d)
                if 0 <= jr < w:
                    scores[i, j, k] = np.sum(left.data[i, j] * right.data[i, jr])
                    valid[i, j, k] = True
    return CostVolume(scores, valid, rng)
