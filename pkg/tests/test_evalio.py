"""Tests for metrics, PFM/KITTI I/O, and the synthetic scene generator."""
import numpy as np
import pytest

from stereopipe.core import DisparityField, DisparityRange
from stereopipe.evalio import (FileFormatError, evaluate, generate_scene,
                               load_scene, metric_bad, metric_d1, metric_epe,
                               read_kitti_png, read_pfm, save_scene,
                               write_kitti_png, write_pfm)


def _f(values):
    return DisparityField(np.asarray(values, dtype=np.float64))


def test_metrics_zero_on_exact_match():
    gt = _f([[1.0, 2.0, 3.0, 4.0]])
    assert metric_d1(gt.copy(), gt) == 0.0
    assert metric_bad(gt.copy(), gt) == 0.0
    assert metric_epe(gt.copy(), gt) == 0.0


def test_metric_d1_two_arm_rule():
    gt = _f([[50.0, 50.0, 50.0, 50.0]])
    pred = _f([[55.0, 50.0, 50.0, 50.0]])  # e=5 > 3 and > 2.5
    assert metric_d1(pred, gt) == pytest.approx(25.0, abs=1e-12)
    pred2 = _f([[52.9, 50.0, 50.0, 50.0]])  # e=2.9 fails the 3 px arm
    assert metric_d1(pred2, gt) == pytest.approx(0.0, abs=1e-12)
    # large relative but small absolute error also passes
    gt3 = _f([[2.0, 50.0, 50.0, 50.0]])
    pred3 = _f([[4.5, 50.0, 50.0, 50.0]])  # e=2.5 > 5% but < 3 px
    assert metric_d1(pred3, gt3) == pytest.approx(0.0, abs=1e-12)


def test_metric_bad_and_epe_hand_case():
    gt = _f([[10.0, 10.0, 10.0, 10.0]])
    pred = _f([[10.0, 11.0, 13.0, 14.0]])  # errors 0, 1, 3, 4
    assert metric_bad(pred, gt) == pytest.approx(50.0, abs=1e-12)
    assert metric_epe(pred, gt) == pytest.approx(2.0, abs=1e-12)


def test_metric_bad_strict_at_threshold():
    gt = _f([[10.0]])
    assert metric_bad(_f([[12.0]]), gt) == 0.0   # exactly 2.0 is not bad
    assert metric_bad(_f([[12.0001]]), gt) == pytest.approx(100.0)


def test_invalid_predictions_count_as_errors():
    gt = _f([[5.0, 5.0]])
    pred = DisparityField(np.array([[5.0, np.nan]]))
    assert metric_bad(pred, gt) == pytest.approx(50.0)
    assert metric_d1(pred, gt) == pytest.approx(50.0)
    all_bad = DisparityField(np.full((1, 2), np.nan))
    assert metric_bad(all_bad, gt) == pytest.approx(100.0)
    # epe averages over the pixels that do have a prediction
    assert metric_epe(pred, gt) == 0.0


def test_metrics_permutation_invariant():
    rand = np.random.default_rng(0)
    gt = rand.uniform(0, 40, (1, 64))
    pred = gt + rand.uniform(-4, 4, (1, 64))
    perm = rand.permutation(64)
    assert metric_bad(_f(pred), _f(gt)) == pytest.approx(
        metric_bad(_f(pred[:, perm]), _f(gt[:, perm])))
    assert metric_epe(_f(pred), _f(gt)) == pytest.approx(
        metric_epe(_f(pred[:, perm]), _f(gt[:, perm])))


def test_evaluate_report():
    gt = _f([[1.0, 2.0], [3.0, 4.0]])
    rep = evaluate(gt.copy(), gt)
    assert rep.n_eval == 4 and rep.density == 100.0 and not rep.empty
    empty = evaluate(gt, DisparityField(np.full((2, 2), np.nan)))
    assert empty.empty
    occ = np.array([[True, False], [False, False]])
    rep2 = evaluate(gt.copy(), gt, occluded=occ)
    assert rep2.bad2_noc == 0.0


def test_pfm_roundtrip(tmp_path):
    rand = np.random.default_rng(1)
    d = rand.uniform(-30, 30, (7, 5)).astype(np.float32).astype(np.float64)
    d[2, 3] = np.nan
    fld = DisparityField(d)
    path = tmp_path / "d.pfm"
    write_pfm(fld, path)
    back = read_pfm(path)
    np.testing.assert_array_equal(back.valid, fld.valid)
    np.testing.assert_array_equal(back.disparities[back.valid],
                                  fld.disparities[fld.valid])


def test_pfm_row_order_bottom_to_top(tmp_path):
    import struct
    # 2x2 file with bottom row (1, 2) and top row (3, 4)
    payload = struct.pack("<4f", 1.0, 2.0, 3.0, 4.0)
    path = tmp_path / "rows.pfm"
    path.write_bytes(b"Pf\n2 2\n-1.0\n" + payload)
    fld = read_pfm(path)
    np.testing.assert_array_equal(fld.disparities, [[3.0, 4.0], [1.0, 2.0]])


def test_pfm_bad_header(tmp_path):
    path = tmp_path / "bad.pfm"
    path.write_bytes(b"PF\n2 2\n-1.0\n" + b"\0" * 48)
    with pytest.raises(FileFormatError):
        read_pfm(path)


def test_pfm_truncated(tmp_path):
    path = tmp_path / "short.pfm"
    path.write_bytes(b"Pf\n4 4\n-1.0\n" + b"\0" * 10)
    with pytest.raises(FileFormatError):
        read_pfm(path)


def test_kitti_roundtrip(tmp_path):
    d = np.array([[100.0, 0.25], [np.nan, 31.5]])
    fld = DisparityField(d)
    path = tmp_path / "d.png"
    write_kitti_png(fld, path)
    back = read_kitti_png(path)
    np.testing.assert_array_equal(back.valid, fld.valid)
    np.testing.assert_array_equal(back.disparities[back.valid],
                                  fld.disparities[fld.valid])


def test_kitti_code_rule():
    # 25600 <-> 100.0 px under the /256 convention
    assert 25600 / 256.0 == 100.0


def test_kitti_rejects_negative(tmp_path):
    with pytest.raises(ValueError):
        write_kitti_png(_f([[-3.0]]), tmp_path / "neg.png")


def test_kitti_valid_zero_survives(tmp_path):
    path = tmp_path / "zero.png"
    write_kitti_png(_f([[0.0]]), path)
    back = read_kitti_png(path)
    assert back.valid[0, 0]
    assert back.disparities[0, 0] == pytest.approx(1 / 256)


def test_kitti_rejects_8bit(tmp_path):
    import cv2
    path = tmp_path / "8bit.png"
    cv2.imwrite(str(path), np.zeros((4, 4), np.uint8))
    with pytest.raises(FileFormatError):
        read_kitti_png(path)


def test_scene_single_layer_zero_disparity():
    rng = DisparityRange(-4, 4)
    sc = generate_scene(0, "fronto_layers", rng, height=32, width=64,
                        layers=[(0.0, 0.0)])
    np.testing.assert_array_equal(sc.left, sc.right)
    np.testing.assert_array_equal(sc.gt_left.disparities, 0.0)
    assert not sc.occ_left.any()


def test_scene_two_layers_occlusion_width():
    rng = DisparityRange(0, 16)
    sc = generate_scene(1, "fronto_layers", rng, height=32, width=64,
                        layers=[(2.0, 0.0), (10.0, 0.0)])
    # occluded pixels are background pixels directly left of the foreground
    # rectangle; the band is d_fg - d_bg = 8 px wide in every row
    fg = sc.gt_left.disparities[0] == 10.0
    j0 = int(np.argmax(fg))
    expect = np.zeros(64, bool)
    expect[j0 - 8:j0] = True
    np.testing.assert_array_equal(sc.occ_left[0], expect)
    np.testing.assert_array_equal(sc.occ_left[-1], expect)


def test_scene_negative_disparity_sign_convention():
    rng = DisparityRange(-24, 0)
    sc = generate_scene(2, "negative_range", rng, height=16, width=64,
                        layers=[(-20.0, 0.0)])
    np.testing.assert_array_equal(sc.gt_left.disparities, -20.0)
    # negative disparity: right view content shifts right by 20
    np.testing.assert_array_equal(sc.right[:, 20:], sc.left[:, :44])
    assert not sc.occ_left.any()


def test_scene_deterministic_per_seed():
    rng = DisparityRange(0, 24)
    a = generate_scene(5, "slanted", rng, height=24, width=48)
    b = generate_scene(5, "slanted", rng, height=24, width=48)
    np.testing.assert_array_equal(a.left, b.left)
    np.testing.assert_array_equal(a.right, b.right)
    np.testing.assert_array_equal(a.gt_left.disparities, b.gt_left.disparities)


def test_scene_layer_outside_range_errors():
    with pytest.raises(ValueError):
        generate_scene(0, "fronto_layers", DisparityRange(0, 8),
                       layers=[(2.0, 0.0), (12.0, 0.0)])


def test_scene_save_load_roundtrip(tmp_path):
    rng = DisparityRange(-8, 16)
    sc = generate_scene(3, "negative_range", rng, height=24, width=48)
    save_scene(sc, tmp_path / "scene")
    back = load_scene(tmp_path / "scene")
    np.testing.assert_array_equal(back.left, sc.left)
    np.testing.assert_array_equal(back.right, sc.right)
    np.testing.assert_array_equal(
        back.gt_left.disparities.astype(np.float32),
        sc.gt_left.disparities.astype(np.float32))
    np.testing.assert_array_equal(back.occ_left, sc.occ_left)
    assert (back.range.d_min, back.range.d_max) == (-8, 16)
    assert back.seed == 3 and back.layout == "negative_range"
