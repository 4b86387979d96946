"""Tests for left-right consistency, reliability filtering, and V/U/T regions."""
import numpy as np
import pytest

from stereopipe.core import DisparityField, DisparityRange
from stereopipe.filtering import (derive_regions, lr_consistency_filter,
                                  occlusion_zbuffer, reliability_filter)
from stereopipe.matcher import MapEstimate


def _field(shape, entries):
    d = np.full(shape, np.nan)
    for (i, j), v in entries.items():
        d[i, j] = v
    return DisparityField(d)


def _estimate(disp, rel):
    f = DisparityField(np.asarray(disp, dtype=np.float64))
    return MapEstimate(f, np.zeros(f.shape, np.int64),
                       np.asarray(rel, dtype=np.float64), DisparityRange(-8, 8))


def test_lr_exact_agreement_kept():
    left = _field((1, 32), {(0, 20): 10.0})
    right = _field((1, 32), {(0, 10): 10.0})
    out = lr_consistency_filter(left, right)
    assert out.valid[0, 20]
    assert out.disparities[0, 20] == 10.0


def test_lr_disagreement_dropped():
    left = _field((1, 32), {(0, 20): 10.0})
    right = _field((1, 32), {(0, 10): 7.0})
    out = lr_consistency_filter(left, right)
    assert not out.valid[0, 20]


def test_lr_negative_disparity_probes_right():
    left = _field((1, 32), {(0, 20): -5.0})
    right = _field((1, 32), {(0, 25): -4.5})
    out = lr_consistency_filter(left, right)
    assert out.valid[0, 20]
    # and a big mismatch at the same probe is dropped
    right2 = _field((1, 32), {(0, 25): -8.0})
    assert not lr_consistency_filter(left, right2).valid[0, 20]


def test_lr_out_of_image_probe_dropped():
    left = _field((1, 8), {(0, 1): 5.0})
    right = DisparityField(np.full((1, 8), 5.0))
    assert not lr_consistency_filter(left, right).valid[0, 1]


def test_reliability_filter_endpoints():
    est = _estimate(np.zeros((2, 3)), np.full((2, 3), 0.7))
    assert reliability_filter(est, 0.0).valid.all()
    assert not reliability_filter(est, 1.0).valid.any()


def test_reliability_filter_strict_threshold():
    est = _estimate([[1.0, 2.0, 3.0]], [[0.2, 0.4, 0.6]])
    out = reliability_filter(est, 0.5)
    np.testing.assert_array_equal(out.valid, [[False, False, True]])
    assert out.disparities[0, 2] == 3.0
    # exactly tau is dropped
    assert not reliability_filter(est, 0.4).valid[0, 1]


def test_reliability_filter_bad_tau():
    est = _estimate(np.zeros((1, 1)), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        reliability_filter(est, 1.5)
    with pytest.raises(ValueError):
        reliability_filter(est, -0.1)


def test_filter_monotone_in_tau_and_subset_of_init():
    rand = np.random.default_rng(0)
    est = _estimate(rand.uniform(-4, 4, (10, 12)), rand.uniform(0, 1, (10, 12)))
    prev = reliability_filter(est, 0.1)
    assert (prev.valid <= est.init.valid).all()
    for tau in (0.3, 0.5, 0.7):
        cur = reliability_filter(est, tau)
        assert (cur.valid <= prev.valid).all()
        same = cur.valid
        np.testing.assert_array_equal(cur.disparities[same],
                                      est.init.disparities[same])
        prev = cur


def test_no_occlusion_for_constant_disparity():
    gt = DisparityField(np.full((4, 20), 6.0))
    assert not occlusion_zbuffer(gt).any()


def test_occlusion_strip_geometry():
    # foreground strip d=10 on cols [20, 30) over background d=2:
    # background pixels land on right cols j-2, the strip claims [10, 20),
    # so background cols 12..19 (8 px left of the strip edge) lose
    w = 40
    d = np.full((2, w), 2.0)
    d[:, 20:30] = 10.0
    occ = occlusion_zbuffer(DisparityField(d))
    expect = np.zeros(w, bool)
    expect[12:20] = True
    np.testing.assert_array_equal(occ[0], expect)


def test_occlusion_collision_smaller_disparity_loses():
    d = np.full((1, 6), np.nan)
    d[0, 2] = 2.0
    d[0, 4] = 4.0  # both land on right col 0; the nearer (d=4) pixel wins
    occ = occlusion_zbuffer(DisparityField(d))
    assert occ[0, 2] and not occ[0, 4]


def test_occlusion_fractional_collision():
    # cols 2 and 3 round to the same right column with nearly equal depth;
    # the strictly smaller disparity loses, the larger stays visible
    d = np.full((1, 6), np.nan)
    d[0, 2] = 2.4   # target round_half_away(-0.4) = 0
    d[0, 3] = 2.6   # target round_half_away(0.4) = 0
    occ = occlusion_zbuffer(DisparityField(d))
    assert occ[0, 2] and not occ[0, 3]
    # constant fields collide nowhere: nothing is occluded
    assert not occlusion_zbuffer(DisparityField(np.full((1, 6), 2.0))).any()


def test_derive_regions_zero_error_case():
    # background d=0, strip d=10 away from borders: all warp targets in-image
    w = 48
    d = np.zeros((3, w))
    d[:, 24:32] = 10.0
    gt = DisparityField(d)
    regions = derive_regions(gt, gt.copy())
    occ = occlusion_zbuffer(gt)
    np.testing.assert_array_equal(regions.unreliable, occ)
    np.testing.assert_array_equal(regions.to_refine, regions.double_visible)
    np.testing.assert_array_equal(regions.double_visible, ~occ)
    assert not (regions.double_visible & regions.occluded).any()


def test_derive_regions_divergence_and_overlap():
    gt = DisparityField(np.zeros((1, 10)))
    init = np.zeros((1, 10))
    init[0, 3] = 2.0   # diverged >= 1 -> U
    init[0, 5] = 1.0   # exactly 1 px -> both U and T
    init[0, 7] = 0.5   # within 1 px -> T only
    regions = derive_regions(gt, DisparityField(init))
    assert regions.unreliable[0, 3] and not regions.to_refine[0, 3]
    assert regions.unreliable[0, 5] and regions.to_refine[0, 5]
    assert not regions.unreliable[0, 7] and regions.to_refine[0, 7]
    assert (regions.to_refine <= regions.double_visible).all()


def test_derive_regions_out_of_image_targets_unreliable():
    gt = DisparityField(np.full((1, 10), 4.0))
    regions = derive_regions(gt, gt.copy())
    # cols 0..3 warp out of the image: single-visible, so in U and not V
    assert regions.unreliable[0, :4].all()
    assert not regions.double_visible[0, :4].any()
    assert regions.double_visible[0, 4:].all()
