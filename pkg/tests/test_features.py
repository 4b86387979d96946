"""Tests for descriptors, linear transforms, and the FMAP tensor format."""
import numpy as np
import pytest
from fractions import Fraction

from stereopipe.features import (FeatureMap, FeatureTransform, FmapBadMagic,
                                 FmapDimOverflow, FmapError, FmapTruncated,
                                 apply_transform, extract_census_gradient,
                                 load_feature_tensor, normalize_features,
                                 save_feature_tensor)


def test_constant_image_zero_descriptors():
    fm = extract_census_gradient(np.full((12, 16), 37.0), (3, 3), Fraction(1))
    np.testing.assert_array_equal(fm.data, 0.0)


def test_window_must_be_odd():
    with pytest.raises(ValueError):
        extract_census_gradient(np.zeros((10, 10)), (4, 3), Fraction(1))
    with pytest.raises(ValueError):
        extract_census_gradient(np.zeros((10, 10)), (3, 2), Fraction(1))


def test_checkerboard_census_pattern():
    board = np.indices((5, 5)).sum(axis=0) % 2 * 1.0
    fm = extract_census_gradient(board, (3, 3), Fraction(1))
    # center pixel: 4-adjacent neighbors differ, diagonals match, gradients 0;
    # channel order is row-major over window offsets, center skipped
    v = fm.data[2, 2]
    signs = v[:8]
    center = board[2, 2]
    expect = []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if (di, dj) != (0, 0):
                expect.append(np.sign(board[2 + di, 2 + dj] - center))
    expect = np.asarray(expect)
    nrm = np.linalg.norm(expect)
    np.testing.assert_allclose(signs, expect / nrm)
    np.testing.assert_allclose(v[8:], 0.0, atol=1e-12)


def test_shift_equivariance():
    rand = np.random.default_rng(3)
    img = rand.uniform(0, 255, (20, 40))
    for s in (3, -5):
        right = np.roll(img, -s, axis=1)
        fl = extract_census_gradient(img, (3, 3), Fraction(1))
        fr = extract_census_gradient(right, (3, 3), Fraction(1))
        # interior columns away from the wrap-around and window border
        lo, hi = max(4, 4 + s), min(36, 36 + s)
        np.testing.assert_allclose(fl.data[2:-2, lo:hi],
                                   fr.data[2:-2, lo - s:hi - s], atol=1e-12)


def test_descriptor_count_9x7():
    fm = extract_census_gradient(np.random.default_rng(0).uniform(0, 255, (20, 20)),
                                 (9, 7), Fraction(1))
    assert fm.channels == 9 * 7 - 1 + 2


def test_half_scale_output_size():
    fm = extract_census_gradient(np.zeros((20, 30)), (3, 3), Fraction(1, 2))
    assert (fm.height, fm.width) == (10, 15)
    assert fm.scale_alpha == Fraction(1, 2)


def test_normalize_idempotent_and_zero_safe():
    rand = np.random.default_rng(1)
    d = rand.standard_normal((4, 5, 6))
    d[0, 0] = 0.0
    n1 = normalize_features(d)
    n2 = normalize_features(n1)
    np.testing.assert_allclose(n1, n2, atol=1e-12)
    np.testing.assert_array_equal(n1[0, 0], 0.0)
    norms = np.linalg.norm(n1, axis=-1)
    np.testing.assert_allclose(norms[norms > 0], 1.0, atol=1e-6)


def test_apply_transform_identity():
    rand = np.random.default_rng(2)
    fm = FeatureMap(normalize_features(rand.standard_normal((3, 4, 5))))
    out = apply_transform(fm, FeatureTransform.identity(5))
    np.testing.assert_allclose(out.data, fm.data, atol=1e-12)


def test_apply_transform_zero():
    fm = FeatureMap(np.ones((2, 2, 3)))
    out = apply_transform(fm, FeatureTransform(np.zeros((3, 3)), np.zeros(3)))
    np.testing.assert_array_equal(out.data, 0.0)


def test_rotation_preserves_dot_products():
    rand = np.random.default_rng(4)
    fm = FeatureMap(normalize_features(rand.standard_normal((4, 4, 2))))
    rot = FeatureTransform(np.array([[0.0, -1.0], [1.0, 0.0]]), np.zeros(2))
    out = apply_transform(fm, rot)
    a = fm.data.reshape(-1, 2)
    b = out.data.reshape(-1, 2)
    np.testing.assert_allclose(a @ a.T, b @ b.T, atol=1e-12)


def test_transform_dim_mismatch():
    fm = FeatureMap(np.ones((2, 2, 3)))
    with pytest.raises(ValueError):
        apply_transform(fm, FeatureTransform.identity(4))


def test_fmap_roundtrip(tmp_path):
    rand = np.random.default_rng(5)
    data = rand.standard_normal((6, 7, 8)).astype(np.float32)
    fm = FeatureMap(data, Fraction(1, 2))
    path = tmp_path / "t.fmap"
    save_feature_tensor(fm, path)
    back = load_feature_tensor(path)
    np.testing.assert_array_equal(back.data.astype(np.float32), data)
    assert back.scale_alpha == Fraction(1, 2)


def test_fmap_bad_magic(tmp_path):
    path = tmp_path / "bad.fmap"
    path.write_bytes(b"XXXX" + b"\0" * 64)
    with pytest.raises(FmapBadMagic):
        load_feature_tensor(path)


def test_fmap_truncated(tmp_path):
    import struct
    path = tmp_path / "short.fmap"
    header = b"FMAP" + struct.pack("<6I", 1, 2, 3, 4, 1, 1)
    path.write_bytes(header + b"\0" * (23 * 4))  # 24 floats expected
    with pytest.raises(FmapTruncated):
        load_feature_tensor(path)


def test_fmap_dim_overflow(tmp_path):
    import struct
    path = tmp_path / "huge.fmap"
    path.write_bytes(b"FMAP" + struct.pack("<6I", 1, 1 << 21, 4, 4, 1, 1))
    with pytest.raises(FmapDimOverflow):
        load_feature_tensor(path)


def test_fmap_bad_version(tmp_path):
    import struct
    path = tmp_path / "v9.fmap"
    path.write_bytes(b"FMAP" + struct.pack("<6I", 9, 1, 1, 1, 1, 1) + b"\0" * 4)
    with pytest.raises(FmapError):
        load_feature_tensor(path)
