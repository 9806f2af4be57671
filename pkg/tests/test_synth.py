import math

import numpy as np
import pytest

from endomosaic.errors import DataError
from endomosaic.registration import MosaicLayout
from endomosaic.synth import (
    DegradationSpec,
    SceneSpec,
    SweepSpec,
    SweepTruth,
    default_sweep_path,
    evaluate_registration,
    generate_scene,
    generate_sweep,
    spiral_sweep_path,
)


def small_spec(**overrides):
    base = dict(
        canvas_w=640,
        canvas_h=480,
        cell_pitch=20.0,
        guttae_count=10,
        guttae_radius_range=(4.0, 8.0),
        cornea_radius=200.0,
        rng_seed=11,
    )
    base.update(overrides)
    return SceneSpec(**base)


def test_scene_determinism():
    a = generate_scene(small_spec())
    b = generate_scene(small_spec())
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.guttae_mask, b.guttae_mask)
    c = generate_scene(small_spec(rng_seed=12))
    assert not np.array_equal(a.image, c.image)


def test_default_scene_matches_canvas_contract():
    scene = generate_scene(SceneSpec(rng_seed=1))
    assert scene.image.shape == (1080, 1870)
    assert scene.guttae_mask.shape == scene.image.shape


def test_no_guttae_means_empty_mask():
    scene = generate_scene(small_spec(guttae_count=0))
    assert not scene.guttae_mask.any()


def test_guttae_are_black_and_masked():
    scene = generate_scene(small_spec(guttae_count=25))
    on = scene.guttae_mask > 0
    assert on.any()
    assert (scene.image[on] == 0).all()
    assert set(np.unique(scene.guttae_mask)) <= {0, 255}


def test_background_outside_disc_is_zero():
    spec = small_spec()
    scene = generate_scene(spec)
    ys, xs = np.mgrid[0 : spec.canvas_h, 0 : spec.canvas_w]
    outside = (xs - spec.canvas_w / 2) ** 2 + (ys - spec.canvas_h / 2) ** 2 > (
        spec.cornea_radius + 1
    ) ** 2
    assert (scene.image[outside] == 0).all()
    inside_core = (xs - spec.canvas_w / 2) ** 2 + (ys - spec.canvas_h / 2) ** 2 < (
        spec.cornea_radius - 1
    ) ** 2
    # Non-blob tissue pixels never collide with the background value.
    tissue = inside_core & (scene.guttae_mask == 0)
    assert (scene.image[tissue] > 0).all()


def test_guttae_pixel_fraction_near_analytic_expectation():
    # Radii are uniform over (lo, hi) so the expected mask fraction is
    # n * E[a] * E[b] / R^2; with this many blobs the sum concentrates well
    # inside the +/-20% band.
    spec = SceneSpec(
        canvas_w=1024,
        canvas_h=1024,
        cell_pitch=22.0,
        guttae_count=150,
        guttae_radius_range=(4.0, 9.0),
        cornea_radius=450.0,
        rng_seed=3,
    )
    scene = generate_scene(spec)
    mean_r = (4.0 + 9.0) / 2
    expected = spec.guttae_count * mean_r * mean_r / spec.cornea_radius**2
    actual = (scene.guttae_mask > 0).sum() / (math.pi * spec.cornea_radius**2)
    assert abs(actual - expected) <= 0.2 * expected


def test_scene_spec_validation():
    with pytest.raises(DataError):
        generate_scene(small_spec(cornea_radius=400.0))  # does not fit 480-high canvas
    with pytest.raises(DataError):
        generate_scene(small_spec(guttae_radius_range=(0.0, 4.0)))
    with pytest.raises(DataError):
        generate_scene(small_spec(guttae_count=-1))


# --- sweeps -------------------------------------------------------------------


@pytest.fixture(scope="module")
def scene():
    return generate_scene(small_spec())


def test_sweep_step_bound(scene):
    truth = generate_sweep(scene, SweepSpec(crop_w=256, crop_h=256, step=10))
    origins = [truth.truth_offsets[f.id] for f in truth.frames]
    assert len(origins) > 10
    for (ax, ay), (bx, by) in zip(origins, origins[1:]):
        assert max(abs(bx - ax), abs(by - ay)) <= 10


def test_clean_sweep_is_exact_crops(scene):
    truth = generate_sweep(scene, SweepSpec(crop_w=200, crop_h=200, step=15))
    for f in truth.frames:
        x, y = truth.truth_offsets[f.id]
        assert np.array_equal(f.image, scene.image[y : y + 200, x : x + 200])
        assert truth.degradation_log[f.id] == {
            "dropout": False,
            "blur_sigma": None,
            "brightness": 0,
            "noise_sigma": 0.0,
        }


def test_sweep_indices_and_ids(scene):
    truth = generate_sweep(scene, SweepSpec(crop_w=200, crop_h=200, step=25))
    assert [f.index for f in truth.frames] == list(range(len(truth.frames)))
    assert len({f.id for f in truth.frames}) == len(truth.frames)


def test_degradation_log_matches_altered_frames(scene):
    spec = SweepSpec(
        crop_w=200,
        crop_h=200,
        step=20,
        degradations=DegradationSpec(blur_fraction=0.3, blur_sigma_range=(1.0, 2.0)),
        rng_seed=21,
    )
    clean = generate_sweep(scene, SweepSpec(crop_w=200, crop_h=200, step=20))
    noisy = generate_sweep(scene, spec)
    blurred_per_log = {
        fid for fid, entry in noisy.degradation_log.items() if entry["blur_sigma"] is not None
    }
    changed = {
        a.id
        for a, b in zip(clean.frames, noisy.frames)
        if not np.array_equal(a.image, b.image)
    }
    assert blurred_per_log == changed
    assert 0 < len(blurred_per_log) < len(noisy.frames)


def test_sweep_determinism_with_degradations(scene):
    spec = SweepSpec(
        crop_w=200,
        crop_h=200,
        step=20,
        degradations=DegradationSpec(
            blur_fraction=0.5, noise_sigma=4.0, brightness_offset_range=(-10, 10), dropout=0.1
        ),
        rng_seed=33,
    )
    a = generate_sweep(scene, spec)
    b = generate_sweep(scene, spec)
    for fa, fb in zip(a.frames, b.frames):
        assert np.array_equal(fa.image, fb.image)
    assert a.degradation_log == b.degradation_log


def test_sweep_rejects_bad_paths(scene):
    with pytest.raises(DataError):
        generate_sweep(scene, SweepSpec(crop_w=900, crop_h=200, step=10))
    with pytest.raises(DataError):
        generate_sweep(
            scene, SweepSpec(crop_w=200, crop_h=200, step=10, path=[(0, 0), (600, 0)])
        )
    with pytest.raises(DataError):
        generate_sweep(scene, SweepSpec(crop_w=200, crop_h=200, step=0))


def test_paths_stay_in_bounds():
    for w, h, cw, ch in [(640, 480, 200, 200), (1870, 1080, 512, 512)]:
        for path in (default_sweep_path(w, h, cw, ch), spiral_sweep_path(w, h, cw, ch)):
            for x, y in path:
                assert 0 <= x <= w - cw
                assert 0 <= y <= h - ch


# --- evaluation ---------------------------------------------------------------


def toy_truth():
    frames = [
        # Tiny frames are enough; evaluation only reads ids and dimensions.
        type("F", (), {"id": f"f{i}", "index": i, "width": 50, "height": 40})()
        for i in range(3)
    ]
    offsets = {"f0": (0, 0), "f1": (30, 0), "f2": (60, 10)}
    return SweepTruth(frames=frames, truth_offsets=offsets, degradation_log={})


def test_evaluate_perfect_layout():
    truth = toy_truth()
    layout = MosaicLayout(placements=dict(truth.truth_offsets), canvas_w=110, canvas_h=50)
    report = evaluate_registration(layout, truth)
    assert report.mean_abs_err == 0
    assert report.max_err == 0
    assert report.used_fraction == 1.0
    assert report.coverage_fraction == 1.0
    assert all(err == (0, 0) for err in report.errors.values())


def test_evaluate_single_displacement():
    truth = toy_truth()
    placements = dict(truth.truth_offsets)
    placements["f2"] = (63, 14)  # displaced by (3, 4)
    layout = MosaicLayout(placements=placements, canvas_w=120, canvas_h=60)
    report = evaluate_registration(layout, truth)
    assert report.errors["f2"] == (3, 4)
    assert report.max_err == 7
    assert report.mean_abs_err == pytest.approx(7 / 3)


def test_evaluate_common_shift_removed():
    truth = toy_truth()
    placements = {fid: (x + 17, y + 5) for fid, (x, y) in truth.truth_offsets.items()}
    layout = MosaicLayout(placements=placements, canvas_w=130, canvas_h=60)
    report = evaluate_registration(layout, truth)
    assert report.mean_abs_err == 0


def test_evaluate_partial_use():
    truth = toy_truth()
    layout = MosaicLayout(placements={"f0": (0, 0), "f1": (30, 0)}, canvas_w=80, canvas_h=40)
    report = evaluate_registration(layout, truth)
    assert report.used_fraction == pytest.approx(2 / 3)
    assert report.coverage_fraction < 1.0


def test_evaluate_errors():
    truth = toy_truth()
    with pytest.raises(DataError):
        evaluate_registration(MosaicLayout(placements={}, canvas_w=1, canvas_h=1), truth)
    with pytest.raises(DataError):
        evaluate_registration(
            MosaicLayout(placements={"stranger": (0, 0)}, canvas_w=1, canvas_h=1), truth
        )
