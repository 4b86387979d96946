"""Semi-dense filtering (left-right consistency, reliability threshold) and
the V / U / T region partition derived from ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DisparityField, round_half_away
from .matcher import MapEstimate


@dataclass
class RegionPartition:
    """Boolean masks: double-visible V, unreliable U, to-refine T (T subset of
    V), plus the raw occlusion mask used to build them."""

    double_visible: np.ndarray
    unreliable: np.ndarray
    to_refine: np.ndarray
    occluded: np.ndarray


def lr_consistency_filter(left_est: DisparityField, right_est: DisparityField,
                          max_diff: float = 1.0) -> DisparityField:
    """Keep left pixels whose disparity agrees with the right map at the
    corresponding column (within max_diff px); drop the rest.

    Both fields use the convention D_left(p_left) = D_right(p_right), so the
    probe is right_est at column round(j - d).
    """
    if left_est.shape != right_est.shape:
        raise ValueError("left/right estimate shapes differ")
    h, w = left_est.shape
    jj = np.arange(w)[None, :]
    d = left_est.disparities
    target = round_half_away(jj - np.where(left_est.valid, d, 0.0)).astype(np.int64)
    in_img = (target >= 0) & (target < w)
    tc = np.clip(target, 0, w - 1)
    r_d = np.take_along_axis(right_est.disparities, tc, axis=1)
    r_v = np.take_along_axis(right_est.valid, tc, axis=1)
    keep = (left_est.valid & in_img & r_v
            & (np.abs(np.where(r_v, r_d, 0.0) - np.where(left_est.valid, d, 0.0))
               <= max_diff))
    return DisparityField(np.where(keep, d, np.nan), keep)


def reliability_filter(est: MapEstimate, tau: float) -> DisparityField:
    """Keep pixels with reliability strictly greater than tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    keep = est.init.valid & (est.reliability > tau)
    return DisparityField(np.where(keep, est.init.disparities, np.nan), keep)


def occlusion_zbuffer(gt: DisparityField) -> np.ndarray:
    """Scanline z-buffer occlusion: a pixel is occluded when another pixel of
    the same row lands on the same (in-image, rounded) right column with a
    strictly larger disparity. Equal-disparity collisions keep both visible."""
    h, w = gt.shape
    occ = np.zeros((h, w), dtype=bool)
    jj = np.arange(w)
    for i in range(h):
        v = gt.valid[i]
        if not v.any():
            continue
        d = gt.disparities[i]
        target = round_half_away(jj - np.where(v, d, 0.0)).astype(np.int64)
        claim = v & (target >= 0) & (target < w)
        best = np.full(w, -np.inf)
        np.maximum.at(best, target[claim], d[claim])
        occ[i, claim] = d[claim] < best[target[claim]]
    return occ


def derive_regions(gt: DisparityField, init: DisparityField) -> RegionPartition:
    """Partition pixels into double-visible V, unreliable U, to-refine T.

    V: valid gt, not occluded, corresponding column inside the image.
    U: occluded or single-visible pixels, plus predictions off by >= 1 px.
    T: V pixels whose prediction is within 1 px of gt (overlaps U at exactly
    1 px error, following the boundary conventions literally).
    """
    if gt.shape != init.shape:
        raise ValueError("gt/init shapes differ")
    h, w = gt.shape
    jj = np.arange(w)[None, :]
    occ = occlusion_zbuffer(gt)
    target = round_half_away(jj - np.where(gt.valid, gt.disparities, 0.0))
    in_img = (target >= 0) & (target < w)
    V = gt.valid & ~occ & in_img
    err = np.abs(np.where(init.valid, init.disparities, 0.0) - gt.disparities)
    diverged = gt.valid & init.valid & (err >= 1.0)
    U = (gt.valid & (occ | ~in_img)) | diverged
    T = V & init.valid & (err <= 1.0)
    return RegionPartition(V, U, T, occ)
