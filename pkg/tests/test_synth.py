import math
from dataclasses import replace

import numpy as np
import pytest

from amodalsize import synth
from amodalsize.boxes import raster_to_centered
from amodalsize.errors import InputError
from amodalsize.geometry import ground_point_approx, image_height
from amodalsize.size_inference import SizeCluster, SizeModel
from amodalsize.size_inference.camera import CameraSolution


def _scene(objects, theta=0.0, f=500.0, h_c=1.5):
    return synth.SceneSpec("s", f, h_c, theta, 1000.0, 1000.0, tuple(objects))


def test_sample_deterministic():
    assert synth.sample_dataset(5, 30) == synth.sample_dataset(5, 30)
    assert synth.sample_dataset(5, 30) != synth.sample_dataset(6, 30)


def test_sample_prefix_stable():
    # per-image streams: adding images never changes earlier ones
    short = synth.sample_dataset(5, 10)
    long = synth.sample_dataset(5, 20)
    assert [s.objects for s in short] == [s.objects for s in long[:10]]


def test_sample_zero_variance_and_min_objects():
    scenes = synth.sample_dataset(2, 50)
    for s in scenes:
        assert len(s.objects) >= 5
        assert len({o.category for o in s.objects}) >= 2
        for o in s.objects:
            assert o.H == math.exp(synth.DEFAULT_CATEGORIES[o.category][0])


def test_sample_log_normal_moments():
    mean, var = math.log(1.2), 0.04
    lay = synth.LayoutPriors(min_objects=10, max_objects=10, min_categories=1)
    scenes = synth.sample_dataset(9, 1000, {"x": (mean, var)}, layout_priors=lay)
    logs = np.log([o.H for s in scenes for o in s.objects])
    n = logs.size
    assert n == 10_000
    assert abs(logs.mean() - mean) < 3 * math.sqrt(var / n)
    # standard error of the sample variance of a normal
    assert abs(logs.var(ddof=1) - var) < 3 * var * math.sqrt(2 / (n - 1))


def test_sample_rejects_impossible_layout():
    with pytest.raises(InputError):
        synth.sample_dataset(1, 3, layout_priors=synth.LayoutPriors(min_objects=0))
    with pytest.raises(InputError):
        synth.sample_dataset(1, 0)
    with pytest.raises(InputError):
        synth.sample_dataset(1, 2, {"a": (0.0, 0.1)})


def test_render_example():
    (rec,) = synth.render_annotations(_scene([synth.SceneObject("p", 1.5, 5.0, 500.0)]))
    assert rec.amodal.h == pytest.approx(150, abs=1e-12)
    assert rec.amodal.bottom == pytest.approx(650, abs=1e-12)
    assert rec.modal == rec.amodal and not rec.occluded and not rec.truncated


def test_render_unit_height():
    for f, H in [(500.0, 1.0), (800.0, 2.5)]:
        (rec,) = synth.render_annotations(_scene([synth.SceneObject("p", H, f * H, 500.0)], f=f))
        assert rec.amodal.h == pytest.approx(1.0, rel=1e-12)


def test_render_exact_equals_approx_at_zero_tilt():
    scene = synth.sample_dataset(3, 1)[0]
    assert synth.render_annotations(scene, "exact") == synth.render_annotations(scene, "approx")


def test_render_recovers_generating_projection():
    for s in synth.sample_dataset(4, 20, camera_priors=synth.CameraPriors(theta_range=(-0.05, 0.05))):
        for rec in synth.render_annotations(s):
            o = s.objects[rec.instance]
            y_b, h = raster_to_centered(rec.amodal, rec.image_w, rec.image_h)
            assert y_b == pytest.approx(ground_point_approx(s.camera, o.d), abs=1e-9)
            assert h == pytest.approx(image_height(s.f, o.H, o.d), abs=1e-9)


def test_render_drops_far_outside():
    objs = [synth.SceneObject("p", 1.5, 5.0, 500.0), synth.SceneObject("p", 1.5, 5.0, 1e6)]
    recs, dropped = synth.render_annotations(_scene(objs), return_dropped=True)
    assert len(recs) == 1 and dropped == 1


def test_render_divergence_monotone_in_tilt():
    objs = [synth.SceneObject("p", 1.7, d, 500.0) for d in (4.0, 9.0, 20.0)]
    gaps = []
    for theta in np.linspace(0, 0.3, 16):
        s = _scene(objs, theta=theta)
        a = synth.render_annotations(s, "approx")
        e = synth.render_annotations(s, "exact")
        gaps.append(max(abs(x.amodal.bottom - y.amodal.bottom) for x, y in zip(a, e)))
    assert gaps[0] == 0.0
    assert all(b > a for a, b in zip(gaps, gaps[1:]))


def _box_records():
    return synth.render_annotations(_scene([synth.SceneObject("p", 1.5, 5.0, 500.0),
                                            synth.SceneObject("q", 1.0, 8.0, 300.0)]))


def test_occlude_none():
    recs = synth.render_dataset(synth.sample_dataset(1, 10))
    out = synth.occlude(recs, synth.OcclusionSpec(p_occlude=0.0, truncate_at_border=False), 1)
    assert all(r.modal == r.amodal and not r.occluded and not r.truncated for r in out)


def test_occlude_bottom_crop_example():
    (rec,) = synth.render_annotations(_scene([synth.SceneObject("p", 1.0, 5.0, 500.0)]))
    assert rec.amodal.h == pytest.approx(100)
    (out,) = synth.occlude([rec], synth.OcclusionSpec(p_occlude=1.0), 0)
    assert out.modal.h == pytest.approx(60, abs=1e-12)
    assert out.modal.y == rec.amodal.y
    assert out.occluded and out.amodal == rec.amodal


def test_occlude_deterministic_and_invariants():
    recs = synth.render_dataset(synth.sample_dataset(2, 40))
    spec = synth.OcclusionSpec(p_occlude=0.5, crop_fraction_range=(0.1, 0.6),
                               sides=("bottom", "left", "top", "right"))
    a = synth.occlude(recs, spec, 3)
    assert a == synth.occlude(recs, spec, 3)
    assert a != synth.occlude(recs, spec, 4)
    by_key = {(r.image_id, r.instance): r for r in recs}
    for r in a:
        assert r.amodal == by_key[(r.image_id, r.instance)].amodal
        assert r.modal.w > 0 and r.modal.h > 0
        assert 0 <= r.modal.x and r.modal.right <= r.image_w + 1e-9
    assert any(r.truncated for r in a) and any(r.occluded for r in a)


def test_occlusion_spec_validation():
    with pytest.raises(InputError):
        synth.OcclusionSpec(crop_fraction_range=(0.2, 1.0))
    with pytest.raises(InputError):
        synth.OcclusionSpec(sides=("middle",))


def test_jitter_seeded():
    recs = _box_records()
    assert synth.jitter(recs, 2.0, 1) == synth.jitter(recs, 2.0, 1)
    assert synth.jitter(recs, 0.0, 1) == recs
    moved = synth.jitter(recs, 2.0, 1)
    assert all(r.modal == r.amodal for r in moved)
    assert moved[0].amodal != recs[0].amodal


def _truth_model(scenes, scale=1.0, h_c_scale=1.0):
    truth = synth.true_category_log_heights(scenes)
    clusters = [SizeCluster(c, 0, v + math.log(scale)) for c, v in sorted(truth.items())]
    gmm = {c: [(v, 1e-4, 1.0)] for c, v in truth.items()}
    cams = [CameraSolution(s.image_id, s.h_c * h_c_scale, s.horizon()) for s in scenes]
    return SizeModel(clusters, gmm), cams


def test_oracle_compare_exact_truth():
    scenes = synth.sample_dataset(1, 10)
    model, cams = _truth_model(scenes)
    rep = synth.oracle_compare(scenes, model, cams)
    assert rep.max_log_height_error == 0 and rep.max_horizon_error == 0 and rep.max_h_c_error == 0


def test_oracle_compare_gauge_alignment():
    scenes = synth.sample_dataset(1, 10)
    model, cams = _truth_model(scenes, scale=2.0, h_c_scale=2.0)
    rep = synth.oracle_compare(scenes, model, cams)
    assert rep.max_log_height_error < 1e-12
    assert rep.h_c_ratio_median == pytest.approx(2.0)
    assert rep.max_h_c_error == pytest.approx(max(s.h_c for s in scenes))


def test_oracle_compare_rejects_unknown_ids():
    scenes = synth.sample_dataset(1, 3)
    model, cams = _truth_model(scenes)
    with pytest.raises(InputError):
        synth.oracle_compare(scenes, model, cams + [CameraSolution("nope", 1.0, 0.0)])


def test_scene_validation():
    with pytest.raises(InputError):
        _scene([synth.SceneObject("p", 1.0, -1.0, 0.0)])
    with pytest.raises(InputError):
        replace(_scene([]), f=0.0)
