import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image

from covcal.errors import ImageLoadError
from covcal.imaging import (
    GrayImage,
    PreprocessConfig,
    downsample_to_width,
    load_image,
    local_window_stats,
    patch_normalize,
    preprocess,
    quantize,
    save_pgm,
)
from covcal.synthdata import SurfaceSpec, generate_surface

from oracles import window_mean_std

unit_images = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)),
                     elements=st.floats(0.0, 1.0, allow_nan=False))


def test_gray_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        GrayImage(np.array([[0.0, 1.5]]))
    with pytest.raises(ValueError):
        GrayImage(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        GrayImage(np.zeros((0, 3)))


def test_gray_image_is_read_only():
    img = GrayImage(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        img.data[0, 0] = 1.0


def test_load_pgm_scales_bytes(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    img = load_image(p)
    assert img.shape == (2, 2)
    np.testing.assert_array_equal(img.data, [[0.0, 1.0], [128 / 255, 64 / 255]])


def test_load_rgb_png_uses_luminance(tmp_path):
    p = tmp_path / "red.png"
    Image.new("RGB", (1, 1), (255, 0, 0)).save(p)
    assert load_image(p).data[0, 0] == pytest.approx(0.299, abs=1e-12)


def test_load_gray_png(tmp_path):
    p = tmp_path / "g.png"
    Image.fromarray(np.array([[0, 51], [102, 255]], dtype=np.uint8)).save(p)
    np.testing.assert_allclose(load_image(p).data, [[0, 0.2], [0.4, 1.0]])


def test_load_errors(tmp_path):
    with pytest.raises(ImageLoadError):
        load_image(tmp_path / "missing.pgm")
    bad = tmp_path / "x.jpg"
    Image.new("L", (2, 2)).save(bad, format="JPEG")
    with pytest.raises(ImageLoadError):
        load_image(bad)
    junk = tmp_path / "junk.pgm"
    junk.write_bytes(b"P5\n2 2\n255\n\x00")
    with pytest.raises(ImageLoadError):
        load_image(junk)


def test_pgm_round_trip_is_bitwise(tmp_path):
    img = quantize(generate_surface(SurfaceSpec(width=64, height=64, seed=4)))
    save_pgm(img, tmp_path / "s.pgm")
    assert np.array_equal(load_image(tmp_path / "s.pgm").data, img.data)


def test_downsample_shapes_and_identity():
    img = GrayImage(np.random.default_rng(0).random((200, 400)))
    assert downsample_to_width(img, 200).shape == (100, 200)
    small = GrayImage(np.random.default_rng(1).random((100, 200)))
    assert downsample_to_width(small, 200) == small
    const = GrayImage(np.full((4, 4), 0.5))
    np.testing.assert_allclose(downsample_to_width(const, 2).data, np.full((2, 2), 0.5))


def test_downsample_box_average_exact():
    a = np.arange(16, dtype=float).reshape(4, 4) / 15
    out = downsample_to_width(GrayImage(a), 2).data
    expected = a.reshape(2, 2, 2, 2).mean(axis=(1, 3))
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_downsample_min_height_one():
    assert downsample_to_width(GrayImage(np.zeros((1, 10))), 2).shape == (1, 2)


@settings(max_examples=60, deadline=None)
@given(unit_images, st.integers(1, 20))
def test_downsample_stays_in_range(a, width):
    out = downsample_to_width(GrayImage(a), width)
    assert out.width == width
    assert out.data.min() >= 0.0 and out.data.max() <= 1.0


def test_patch_normalize_constant_and_spot():
    np.testing.assert_array_equal(patch_normalize(GrayImage(np.full((7, 7), 0.3)), 2).data, 0.5)
    a = np.zeros((15, 15))
    a[7, 7] = 1.0
    out = patch_normalize(GrayImage(a), 2).data
    assert out[7, 7] > 0.5
    assert out[0, 0] == 0.5 and out[14, 14] == 0.5


def test_patch_normalize_checkerboard_matches_loop_oracle():
    a = (np.indices((5, 5)).sum(axis=0) % 2).astype(float)
    out = patch_normalize(GrayImage(a), 1).data
    mean, std = window_mean_std(a, 2, 2, 1)
    assert out[2, 2] == pytest.approx(min(1.0, max(0.0, 0.5 + (a[2, 2] - mean) / (6 * std))), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(unit_images, st.integers(1, 4))
def test_local_window_stats_match_loop_oracle(a, radius):
    mean, std = local_window_stats(a, radius)
    for y in range(a.shape[0]):
        for x in range(a.shape[1]):
            m, s = window_mean_std(a, y, x, radius)
            assert mean[y, x] == pytest.approx(m, abs=1e-12)
            assert std[y, x] == pytest.approx(s, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(unit_images, st.integers(1, 4))
def test_patch_normalize_stays_in_range(a, radius):
    out = patch_normalize(GrayImage(a), radius).data
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_patch_normalize_cancels_affine_lighting():
    base = generate_surface(SurfaceSpec(width=64, height=64, seed=5)).data
    a = 0.2 + 0.6 * base
    b = 0.7 * a + 0.1
    pa = patch_normalize(GrayImage(a), 3).data
    pb = patch_normalize(GrayImage(b), 3).data
    np.testing.assert_allclose(pa[3:-3, 3:-3], pb[3:-3, 3:-3], atol=1e-9)


@pytest.mark.parametrize("seed,scale,radius", [(1, 8, 2), (2, 4, 4), (3, 16, 8), (4, 2, 1)])
def test_normalized_window_mean_near_half(seed, scale, radius):
    # The map applied with one window's own statistics averages to 0.5 over that
    # window; only clamping beyond three sigma can move it.
    img = generate_surface(SurfaceSpec(width=80, height=80, seed=seed, texture_scale=scale)).data
    w = sliding_window_view(img, (2 * radius + 1, 2 * radius + 1))
    mu = w.mean(axis=(2, 3), keepdims=True)
    sd = w.std(axis=(2, 3), keepdims=True)
    ok = sd[..., 0, 0] >= 1e-9
    z = np.clip(0.5 + (w - mu) / (6 * np.where(sd < 1e-9, 1.0, sd)), 0, 1).mean(axis=(2, 3))
    assert np.abs(z[ok] - 0.5).max() <= 0.02
    # and the module's output at each window centre is that same map
    out = patch_normalize(GrayImage(img), radius).data[radius:-radius, radius:-radius]
    centre = np.clip(0.5 + (img[radius:-radius, radius:-radius] - mu[..., 0, 0]) / (6 * sd[..., 0, 0]), 0, 1)
    np.testing.assert_allclose(out[ok], centre[ok], atol=1e-9)


def test_preprocess_pipeline():
    img = GrayImage(np.random.default_rng(2).random((40, 80)))
    out = preprocess(img, PreprocessConfig(target_width=40, patchnorm_radius=2))
    assert out.shape == (20, 40)
    assert preprocess(img, PreprocessConfig()) == img
    with pytest.raises(ValueError):
        PreprocessConfig(target_width=0)
