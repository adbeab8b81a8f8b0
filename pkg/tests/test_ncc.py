import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covcal.errors import ConstraintError, GeometryError
from covcal.frontends import NCCFrontEnd, Patch, extract_patch, localize, ncc_score_field
from covcal.frontends.ncc import summed_area_table, window_sums
from covcal.imaging import GrayImage, PixelPos
from covcal.synthdata import PerturbSpec, SurfaceSpec, generate_surface, synthetic_pair

from oracles import brute_ncc


def test_extract_patch_examples():
    m = GrayImage(np.random.default_rng(0).random((5, 5)))
    assert np.array_equal(extract_patch(m, PixelPos(2, 2), 2).pixels.data, m.data)
    with pytest.raises(GeometryError):
        extract_patch(m, PixelPos(0, 0), 1)
    ramp = GrayImage(np.arange(100, dtype=float).reshape(10, 10) / 99)
    np.testing.assert_array_equal(extract_patch(ramp, PixelPos(5, 5), 1).pixels.data, ramp.data[4:7, 4:7])


def test_patch_shape_is_checked():
    with pytest.raises(GeometryError):
        Patch(GrayImage(np.zeros((3, 4))), PixelPos(2, 2), 1)


def test_window_sums_match_direct():
    a = np.random.default_rng(1).random((9, 7))
    ws = window_sums(summed_area_table(a), 3)
    for y in range(7):
        for x in range(5):
            assert ws[y, x] == pytest.approx(a[y:y + 3, x:x + 3].sum(), abs=1e-12)


def test_self_match_scores_one():
    m = generate_surface(SurfaceSpec(width=64, height=64, seed=2))
    patch = extract_patch(m, PixelPos(30, 21), 6)
    best, score, field = localize(NCCFrontEnd(), patch, m)
    assert best == PixelPos(30, 21)
    assert score == pytest.approx(1.0, abs=1e-9)
    assert field.shape == (64 - 12, 64 - 12)
    assert field.origin_offset == PixelPos(6, 6)


def test_inverted_window_scores_minus_one():
    rng = np.random.default_rng(3)
    p = rng.random((5, 5))
    m = np.full((9, 9), 0.5)
    m[2:7, 3:8] = 1.0 - p
    field = ncc_score_field(Patch(GrayImage(p), PixelPos(2, 2), 2), GrayImage(m))
    assert field.scores[2, 3] == pytest.approx(-1.0, abs=1e-9)


def test_cross_patch_on_noise_matches_oracle():
    noise = generate_surface(SurfaceSpec(width=64, height=64, seed=42, texture_scale=1.0, octaves=1)).data[:5, :5]
    cross = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=float)
    field = ncc_score_field(Patch(GrayImage(cross), PixelPos(1, 1), 1), GrayImage(noise))
    np.testing.assert_allclose(field.scores, brute_ncc(cross, noise), atol=1e-10, rtol=0)


def test_constant_inputs_score_zero_and_tie_break_to_origin():
    m = GrayImage(np.full((12, 12), 0.4))
    patch = extract_patch(m, PixelPos(6, 6), 2)
    best, score, field = localize(NCCFrontEnd(), patch, m)
    assert np.all(field.scores == 0.0)
    assert best == PixelPos(2, 2) and score == 0.0


def test_flat_map_regions_score_zero():
    rng = np.random.default_rng(4)
    m = rng.random((20, 20))
    m[:10, :10] = 0.25
    p = rng.random((5, 5))
    field = ncc_score_field(Patch(GrayImage(p), PixelPos(2, 2), 2), GrayImage(m))
    assert np.all(field.scores[:6, :6] == 0.0)
    np.testing.assert_allclose(field.scores, brute_ncc(p, m), atol=1e-10, rtol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 24), st.integers(3, 24), st.integers(0, 2))
def test_matches_brute_force(seed, h, w, kind):
    rng = np.random.default_rng(seed)
    if kind == 0:
        m = rng.random((h, w))
    elif kind == 1:  # few grey levels, so some windows are exactly flat
        m = rng.integers(0, 2, (h, w)) * 0.5
    else:
        m = np.clip(0.5 + 1e-3 * rng.standard_normal((h, w)), 0, 1)
    r = int(rng.integers(1, (min(h, w) - 1) // 2 + 1))
    side = 2 * r + 1
    p = m[:side, :side] if rng.random() < 0.5 else rng.random((side, side))
    field = ncc_score_field(Patch(GrayImage(p), PixelPos(r, r), r), GrayImage(m))
    np.testing.assert_allclose(field.scores, brute_ncc(p, m), atol=1e-10, rtol=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 1.5), st.floats(-0.2, 0.2))
def test_affine_map_change_leaves_scores(seed, a, b):
    rng = np.random.default_rng(seed)
    m = 0.3 + 0.3 * rng.random((16, 16))
    m2 = a * m + b
    if m2.min() < 0 or m2.max() > 1:
        return
    p = Patch(GrayImage(rng.random((5, 5))), PixelPos(2, 2), 2)
    f1 = ncc_score_field(p, GrayImage(m)).scores
    f2 = ncc_score_field(p, GrayImage(m2)).scores
    np.testing.assert_allclose(f1, f2, atol=1e-9, rtol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_scores_within_bounds(seed):
    rng = np.random.default_rng(seed)
    m = rng.random((14, 17)) ** rng.uniform(0.1, 10)
    r = int(rng.integers(1, 7))
    p = rng.random((2 * r + 1, 2 * r + 1))
    s = ncc_score_field(Patch(GrayImage(p), PixelPos(r, r), r), GrayImage(m)).scores
    assert s.min() >= -1.0 and s.max() <= 1.0


def test_noisy_query_localises_within_tolerance():
    pair = synthetic_pair(SurfaceSpec(width=96, height=96, seed=8), PerturbSpec(noise_sigma=0.03, seed=8))
    fe = NCCFrontEnd()
    for c in [PixelPos(20, 30), PixelPos(60, 50), PixelPos(40, 75)]:
        best, _, _ = localize(fe, extract_patch(pair.query, c, 8), pair.reference)
        assert max(abs(best.x - c.x), abs(best.y - c.y)) <= 5


def test_matcher_rejects_other_radius_and_big_patch():
    m = GrayImage(np.random.default_rng(5).random((10, 10)))
    matcher = NCCFrontEnd().matcher(m, 2)
    with pytest.raises(ConstraintError):
        matcher(extract_patch(m, PixelPos(5, 5), 3))
    with pytest.raises(ConstraintError):
        NCCFrontEnd().matcher(m, 0)
    with pytest.raises(GeometryError):
        ncc_score_field(Patch(GrayImage(np.zeros((11, 11))), PixelPos(5, 5), 5), m)


def test_repeat_calls_are_bitwise_identical():
    m = generate_surface(SurfaceSpec(width=64, height=64, seed=6))
    p = extract_patch(m, PixelPos(20, 20), 5)
    assert np.array_equal(ncc_score_field(p, m).scores, ncc_score_field(p, m).scores)
