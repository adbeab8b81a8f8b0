import json

import numpy as np
import pytest

from covcal.datasets import AlignedPair, count_admissible, crop_to_overlap, load_pair, plan_samples, save_pair
from covcal.errors import GeometryError, ImageLoadError, ManifestError
from covcal.frontends import extract_patch
from covcal.imaging import GrayImage, PixelPos, quantize, save_pgm


def _pair(h=40, w=40, seed=0):
    rng = np.random.default_rng(seed)
    return AlignedPair(GrayImage(rng.random((h, w))), GrayImage(rng.random((h, w))), name="t")


def _write(tmp_path, manifest, images=None):
    for name, img in (images or {}).items():
        save_pgm(img, tmp_path / name)
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


def test_identical_paths_give_identical_maps(tmp_path):
    img = quantize(GrayImage(np.random.default_rng(1).random((30, 30))))
    path = _write(tmp_path, {"name": "same", "reference": "a.pgm", "query": "a.pgm"}, {"a.pgm": img})
    pair = load_pair(path)
    assert pair.reference == pair.query == img
    assert pair.name == "same" and pair.offset == (0, 0)


def test_offset_crops_to_overlap(tmp_path):
    rng = np.random.default_rng(2)
    ref = quantize(GrayImage(rng.random((100, 100))))
    qry = quantize(GrayImage(rng.random((100, 100))))
    path = _write(tmp_path, {"name": "off", "reference": "r.pgm", "query": "q.pgm", "offset": [5, 0],
                             "notes": {"altitude": 120}},
                  {"r.pgm": ref, "q.pgm": qry})
    pair = load_pair(path)
    assert pair.shape == (100, 95)
    np.testing.assert_array_equal(pair.reference.data, ref.data[:, 5:])
    np.testing.assert_array_equal(pair.query.data, qry.data[:, :95])
    assert pair.provenance["notes"] == {"altitude": 120}


def test_negative_offset_crop():
    a = GrayImage(np.random.default_rng(3).random((10, 12)))
    b = GrayImage(np.random.default_rng(4).random((10, 12)))
    r, q = crop_to_overlap(a, b, -2, 3)
    assert r.shape == q.shape == (7, 10)
    np.testing.assert_array_equal(r.data, a.data[3:, :10])
    np.testing.assert_array_equal(q.data, b.data[:7, 2:])
    with pytest.raises(GeometryError):
        crop_to_overlap(a, b, 20, 0)


def test_manifest_errors(tmp_path):
    img = quantize(GrayImage(np.zeros((20, 20))))
    save_pgm(img, tmp_path / "a.pgm")
    bad = [
        {"name": "x", "reference": "a.pgm"},
        {"name": "x", "reference": "a.pgm", "query": "a.pgm", "extra": 1},
        {"name": "x", "reference": "a.pgm", "query": "a.pgm", "offset": [1]},
        {"name": "x", "reference": "a.pgm", "query": "a.pgm", "offset": [1.5, 0]},
        {"name": "x", "reference": "a.pgm", "query": "a.pgm", "preprocess": {"target_width": 0}},
        {"name": "x", "reference": "a.pgm", "query": "a.pgm", "preprocess": {"blur": 1}},
        [],
    ]
    for m in bad:
        with pytest.raises(ManifestError):
            load_pair(_write(tmp_path, m))
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(ManifestError):
        load_pair(tmp_path / "manifest.json")
    with pytest.raises(ImageLoadError):
        load_pair(_write(tmp_path, {"name": "x", "reference": "a.pgm", "query": "missing.pgm"}))
    with pytest.raises(ImageLoadError):
        load_pair(tmp_path / "nope.json")
    with pytest.raises(GeometryError):
        load_pair(_write(tmp_path, {"name": "x", "reference": "a.pgm", "query": "a.pgm", "offset": [15, 0]}))


def test_preprocess_applied(tmp_path):
    img = quantize(GrayImage(np.random.default_rng(5).random((40, 80))))
    path = _write(tmp_path, {"name": "p", "reference": "a.pgm", "query": "a.pgm",
                             "preprocess": {"target_width": 40, "patchnorm_radius": 2}}, {"a.pgm": img})
    assert load_pair(path).shape == (20, 40)


def test_save_pair_round_trip(tmp_path):
    p = _pair()
    pair = AlignedPair(quantize(p.reference), quantize(p.query), name="rt")
    path = save_pair(pair, tmp_path / "out", notes={"k": 1})
    back = load_pair(path)
    assert back.reference == pair.reference and back.query == pair.query and back.name == "rt"


def test_mismatched_pair_rejected():
    with pytest.raises(GeometryError):
        AlignedPair(GrayImage(np.zeros((4, 4))), GrayImage(np.zeros((4, 5))))


def test_exhaustive_plan_covers_every_centre():
    pair = _pair(20, 24)
    n = count_admissible(pair.shape, 3)
    plan = plan_samples(pair, 3, n, seed=1)
    assert len(set(plan.centers)) == n == 14 * 18
    with pytest.raises(GeometryError):
        plan_samples(pair, 3, n + 1, seed=1)
    with pytest.raises(GeometryError):
        plan_samples(pair, 12, 1, seed=1)


def test_plans_are_deterministic_and_fit():
    pair = _pair(50, 60)
    a = plan_samples(pair, 6, 40, seed=9, purpose="validation")
    b = plan_samples(pair, 6, 40, seed=9, purpose="validation")
    assert a.centers == b.centers
    for c in a.centers:
        extract_patch(pair.reference, c, 6)
        extract_patch(pair.query, c, 6)


def test_calibration_and_validation_disjoint():
    pair = _pair(300, 300)
    cal = plan_samples(pair, 8, 100, seed=17, purpose="calibration")
    val = plan_samples(pair, 8, 100, seed=17, purpose="validation")
    assert len(set(cal.centers)) == len(set(val.centers)) == 100
    assert set(cal.centers).isdisjoint(val.centers)


def test_lattice_plans():
    pair = _pair(100, 100)
    plan = plan_samples(pair, 20, 9, seed=0, step=20)
    assert all((c.x - 20) % 20 == 0 and (c.y - 20) % 20 == 0 for c in plan.centers)
    assert len(set(plan.centers)) == 9
    assert PixelPos(20, 20) in plan.centers
