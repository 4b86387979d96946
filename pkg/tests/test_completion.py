"""Tests for the hierarchical guided-diffusion completion."""
import numpy as np
import pytest

from stereopipe.completion import (CompletionConfig, complete,
                                   complete_multiscale)
from stereopipe.core import DisparityField


def _rel(shape, value=1.0):
    return np.full(shape, value)


def test_config_validation():
    with pytest.raises(ValueError):
        CompletionConfig(levels=0)
    with pytest.raises(ValueError):
        CompletionConfig(color_sigma=0.0)
    with pytest.raises(ValueError):
        CompletionConfig(reliability_floor=1.0)


def test_dense_input_is_identity():
    rand = np.random.default_rng(0)
    d = rand.uniform(-5, 5, (16, 16))
    fld = DisparityField(d)
    img = rand.uniform(0, 255, (16, 16, 3))
    out = complete(fld, fld, _rel(d.shape), img,
                   CompletionConfig(levels=3, iterations_per_level=8))
    np.testing.assert_array_equal(out.disparities, d)
    # idempotence: completing the dense result again changes nothing
    out2 = complete(out, out, _rel(d.shape), img,
                    CompletionConfig(levels=3, iterations_per_level=8))
    np.testing.assert_array_equal(out2.disparities, out.disparities)


def test_known_pixels_preserved_and_dense():
    rand = np.random.default_rng(1)
    d = rand.uniform(0, 10, (20, 24))
    mask = rand.uniform(size=d.shape) < 0.4
    semi = DisparityField(np.where(mask, d, np.nan))
    img = rand.uniform(0, 255, (20, 24, 3))
    out = complete(semi, semi, _rel(d.shape), img)
    assert out.valid.all()
    np.testing.assert_allclose(out.disparities[mask], d[mask], atol=1e-6)


def test_interior_fill_is_bounded():
    # two known pixels 0 and 10 at the row ends, flat color
    w = 17
    d = np.full((5, w), np.nan)
    d[:, 0] = 0.0
    d[:, -1] = 10.0
    semi = DisparityField(d)
    out = complete(semi, semi, _rel(d.shape), np.full((5, w), 128.0),
                   CompletionConfig(levels=2, iterations_per_level=200))
    assert out.valid.all()
    assert (out.disparities >= 0.0 - 1e-9).all()
    assert (out.disparities <= 10.0 + 1e-9).all()
    # fill increases monotonically from the low end to the high end
    row = out.disparities[2]
    assert (np.diff(row) >= -1e-6).all()


def test_color_edge_blocks_leakage():
    # fg d=10 on the right, bg d=2 on the left, hard color edge between;
    # the unknown band sits on the bg side of the edge and should stay near 2
    h, w = 20, 40
    img = np.zeros((h, w, 3))
    img[:, :24] = [200, 30, 30]
    img[:, 24:] = [30, 30, 200]
    d = np.full((h, w), np.nan)
    d[:, :16] = 2.0
    d[:, 24:] = 10.0
    semi = DisparityField(d)
    rel = _rel((h, w))
    out = complete(semi, semi, rel, img,
                   CompletionConfig(levels=3, iterations_per_level=128))
    band = out.disparities[:, 16:24]
    assert np.abs(band - 2.0).max() < 1.0


def test_zero_known_pixels_errors():
    semi = DisparityField(np.full((8, 8), np.nan))
    with pytest.raises(ValueError):
        complete(semi, semi, _rel((8, 8)), np.zeros((8, 8, 3)))


def test_multiscale_shapes():
    rand = np.random.default_rng(2)
    d = rand.uniform(0, 4, (64, 64))
    mask = rand.uniform(size=d.shape) < 0.5
    semi = DisparityField(np.where(mask, d, np.nan))
    levels = complete_multiscale(semi, semi, _rel(d.shape),
                                 rand.uniform(0, 255, (64, 64, 3)),
                                 CompletionConfig(levels=5,
                                                 iterations_per_level=4))
    assert [f.shape[0] for f in levels] == [4, 8, 16, 32, 64]
    assert all(f.valid.all() for f in levels)


def test_multiscale_constant_converges_everywhere():
    d = np.full((32, 32), np.nan)
    d[::4, ::4] = 7.0
    semi = DisparityField(d)
    levels = complete_multiscale(semi, semi, _rel(d.shape),
                                 np.full((32, 32, 3), 90.0),
                                 CompletionConfig(levels=4,
                                                 iterations_per_level=32))
    for f in levels:
        np.testing.assert_allclose(f.disparities, 7.0, atol=1e-6)


def test_shape_mismatch_errors():
    semi = DisparityField(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        complete(semi, semi, _rel((4, 4)), np.zeros((5, 5, 3)))
