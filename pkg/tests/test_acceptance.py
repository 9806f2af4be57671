"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run pytest with -s to see them inline).
The heavyweight fixtures (full-size scene, 60-frame sweep, full pipeline run)
are shared across criteria.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from endomosaic.imaging import Rect, FrameRecord, select_focused_frames, tenengrad_region
from endomosaic.manifests import load_layout, load_provenance
from endomosaic.mosaic import composite, sharpen_grid
from endomosaic.pipeline import PipelineConfig, run_pipeline
from endomosaic.manifests import FrameEntry, SequenceManifest
from endomosaic.registration import chain_register, globalize, reference_stitch_register
from endomosaic.synth import (
    DegradationSpec,
    SceneSpec,
    SweepSpec,
    SweepTruth,
    generate_scene,
    generate_sweep,
    evaluate_registration,
)
from endomosaic.tiles import export_tiles

from conftest import reference_blur, textured
from oracles import tenengrad_brute

SCENE_SEED = 42
SWEEP_SEED = 0
N_FRAMES = 60


def report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def truncate(truth, n):
    frames = truth.frames[:n]
    return SweepTruth(
        frames=frames,
        truth_offsets={f.id: truth.truth_offsets[f.id] for f in frames},
        degradation_log={f.id: truth.degradation_log[f.id] for f in frames},
    )


@pytest.fixture(scope="module")
def scene():
    return generate_scene(SceneSpec(rng_seed=SCENE_SEED))


@pytest.fixture(scope="module")
def clean_sweep(scene):
    truth = generate_sweep(
        scene, SweepSpec(crop_w=512, crop_h=512, step=10, rng_seed=SWEEP_SEED)
    )
    return truncate(truth, N_FRAMES)


@pytest.fixture(scope="module")
def pipeline_run(clean_sweep, tmp_path_factory):
    """Full pipeline over the clean 60-frame sweep, group size 1.

    Window size 1 keeps selection active but non-reducing, which is the only
    configuration under which every sweep frame can be placed (used fraction
    is measured against all sweep frames).
    """
    root = tmp_path_factory.mktemp("acceptance")
    frames_dir = root / "frames"
    frames_dir.mkdir()
    entries = []
    for f in clean_sweep.frames:
        p = frames_dir / f"{f.id}.png"
        Image.fromarray(f.image).save(p)
        entries.append(FrameEntry(id=f.id, index=f.index, path=str(p), width=f.width, height=f.height))
    manifest = SequenceManifest(
        sequence_id="acceptance",
        frames=entries,
        truth_offsets=dict(clean_sweep.truth_offsets),
        degradation_log=dict(clean_sweep.degradation_log),
    )
    out_dir = root / "out"
    config = PipelineConfig(group_size=1)
    t0 = time.time()
    artifacts = run_pipeline(manifest, config, out_dir)
    elapsed = time.time() - t0
    return {"artifacts": artifacts, "elapsed": elapsed, "manifest": manifest}


def test_round_trip_exactness(pipeline_run):
    rep = json.loads(Path(pipeline_run["artifacts"]["report"]).read_text())
    elapsed = pipeline_run["elapsed"]
    ok = rep["mean_abs_err"] == 0 and rep["used_fraction"] == 1.0 and elapsed < 60
    report(
        "round-trip exactness",
        ok,
        f"mean_abs_err={rep['mean_abs_err']} used_fraction={rep['used_fraction']} "
        f"runtime={elapsed:.1f}s (limit 60s)",
    )


def test_robust_registration(scene):
    deg = DegradationSpec(blur_fraction=0.3, blur_sigma_range=(1.0, 2.0), noise_sigma=5.0)
    truth = truncate(
        generate_sweep(
            scene,
            SweepSpec(crop_w=512, crop_h=512, step=10, degradations=deg, rng_seed=SWEEP_SEED),
        ),
        N_FRAMES,
    )
    blurred = {
        fid for fid, entry in truth.degradation_log.items() if entry["blur_sigma"] is not None
    }
    assert blurred, "degradation seed produced no blurred frames"
    selected = select_focused_frames(truth.frames, group_size=5, region_size=64)
    selected_ids = {f.id for f in selected}
    excluded_fraction = len(blurred - selected_ids) / len(blurred)

    result = chain_register(selected)
    layout = globalize(result, {f.id: (f.width, f.height) for f in selected})
    rep = evaluate_registration(layout, truth)
    ok = rep.mean_abs_err <= 1.0 and excluded_fraction >= 0.95
    report(
        "robust registration",
        ok,
        f"mean_abs_err={rep.mean_abs_err:.3f} (tol 1 px), "
        f"blurred excluded={excluded_fraction:.2%} (need >=95%), "
        f"{len(blurred)} blurred frames",
    )


def test_focus_formula_oracle():
    rng = np.random.default_rng(777)
    mismatches = 0
    for _ in range(100):
        img = rng.integers(0, 256, (16, 16)).astype(np.uint8)
        if tenengrad_region(img, Rect(0, 0, 16, 16)) != tenengrad_brute(img, 0, 0, 16, 16):
            mismatches += 1
    report(
        "focus formula oracle",
        mismatches == 0,
        f"{mismatches} mismatches over 100 random 16x16 images (exact integer match required)",
    )


def test_sharpening_argmax(scene):
    # Two layers over the same tissue: a sharp crop and a blurred crop of the
    # region shifted half a frame to the right.
    sharp_img = scene.image[200:456, 400:656].copy()
    blur_img = reference_blur(scene.image[200:456, 528:784].copy(), 2.0)
    frames = [
        FrameRecord(id="sharp", index=0, image=sharp_img),
        FrameRecord(id="blurred", index=1, image=blur_img),
    ]
    from endomosaic.registration import MosaicLayout

    layout = MosaicLayout(
        placements={"sharp": (0, 0), "blurred": (128, 0)}, canvas_w=384, canvas_h=256
    )
    _, prov = composite(frames, layout)
    _, choices = sharpen_grid(frames, layout, prov, cell=64)

    # Independent recomputation of candidates and the winning score per cell.
    by_id = {f.id: f for f in frames}
    bad_choice = bad_score = both_cells = 0
    for c in choices:
        gx, gy = c.cell_x * 64, c.cell_y * 64
        gw, gh = min(64, 384 - gx), min(64, 256 - gy)
        full = [r for r in prov.rects
                if r.x <= gx and r.y <= gy and gx + gw <= r.x + r.w and gy + gh <= r.y + r.h]
        if full:
            candidates = full
        else:
            areas = [
                (max(0, min(r.x + r.w, gx + gw) - max(r.x, gx))
                 * max(0, min(r.y + r.h, gy + gh) - max(r.y, gy)), r)
                for r in prov.rects
            ]
            best_area = max(a for a, _ in areas)
            candidates = [r for a, r in areas if a == best_area]
        scores = []
        for r in candidates:
            x0, y0 = max(r.x, gx), max(r.y, gy)
            x1, y1 = min(r.x + r.w, gx + gw), min(r.y + r.h, gy + gh)
            crop = by_id[r.frame_id].image[y0 - r.y : y1 - r.y, x0 - r.x : x1 - r.x]
            if crop.shape[0] < 3 or crop.shape[1] < 3:
                scores.append(0)
            else:
                scores.append(tenengrad_brute(crop, 0, 0, crop.shape[1], crop.shape[0]))
        if c.score != max(scores):
            bad_score += 1
        if len(full) == 2:
            both_cells += 1
            if c.chosen_frame != "sharp":
                bad_choice += 1
    ok = bad_choice == 0 and bad_score == 0 and both_cells > 0
    report(
        "sharpening argmax",
        ok,
        f"{both_cells} dual-coverage cells, {bad_choice} chose the blurred layer, "
        f"{bad_score} scores differ from the brute-force candidate max",
    )


def test_provenance_fidelity(pipeline_run):
    artifacts = pipeline_run["artifacts"]
    pano = np.asarray(Image.open(artifacts["panorama"]))
    prov = load_provenance(artifacts["provenance"])
    layout, _, _ = load_layout(artifacts["layout"])
    manifest = pipeline_run["manifest"]
    sources = {
        e.id: np.asarray(Image.open(e.path)) for e in manifest.frames
    }
    counts = prov.coverage_count()
    ys, xs = np.nonzero(counts)
    rng = np.random.default_rng(99)
    picks = rng.choice(len(ys), size=1000, replace=False)
    mismatches = 0
    for k in picks:
        x, y = int(xs[k]), int(ys[k])
        covering = prov.frames_at(x, y)
        last = covering[-1]  # overwrite mode: chronologically last frame wins
        px, py = layout.placements[last.frame_id]
        if pano[y, x] != sources[last.frame_id][y - py, x - px]:
            mismatches += 1
    report(
        "provenance fidelity",
        mismatches == 0,
        f"{mismatches} of 1000 sampled covered pixels differ from their reported source",
    )


def test_tile_exporter_contract():
    img = textured(112, 112, seed=1)
    full_mask = np.full((112, 112), 255, dtype=np.uint8)
    sixteen = export_tiles(img, full_mask, cell=64, shift=16)
    empty = export_tiles(img, np.zeros((112, 112), dtype=np.uint8), cell=64, shift=16)
    recrop_ok = all(
        np.array_equal(
            r.image_tile,
            img[r.cell_y * 64 + r.shift_y : r.cell_y * 64 + r.shift_y + 64,
                r.cell_x * 64 + r.shift_x : r.cell_x * 64 + r.shift_x + 64],
        )
        for r in sixteen
    )
    ok = len(sixteen) == 16 and len(empty) == 0 and recrop_ok
    report(
        "tile exporter",
        ok,
        f"all-guttae 112x112 -> {len(sixteen)} tiles (want 16), "
        f"empty mask -> {len(empty)} tiles (want 0), recrops bit-equal: {recrop_ok}",
    )


def test_algorithm_agreement(scene):
    # Short clean sweep with ~96% consecutive overlap.
    truth = truncate(
        generate_sweep(scene, SweepSpec(crop_w=512, crop_h=512, step=20, rng_seed=3)), 15
    )
    dims = {f.id: (f.width, f.height) for f in truth.frames}
    chain_layout = globalize(chain_register(truth.frames), dims)
    ref_layout = globalize(reference_stitch_register(truth.frames), dims)
    same_keys = set(chain_layout.placements) == set(ref_layout.placements)
    max_diff = (
        max(
            abs(chain_layout.placements[fid][0] - ref_layout.placements[fid][0])
            + abs(chain_layout.placements[fid][1] - ref_layout.placements[fid][1])
            for fid in chain_layout.placements
        )
        if same_keys
        else -1
    )
    ok = same_keys and max_diff == 0
    report(
        "algorithm agreement",
        ok,
        f"same frames placed: {same_keys}, max placement difference: {max_diff} px (want 0)",
    )
