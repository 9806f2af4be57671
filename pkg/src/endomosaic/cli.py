"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 registration failure.
Every structured artifact embeds the config snapshot that produced it.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import DataError, RegistrationError
from .imaging import select_focused_frames
from .manifests import (
    FrameEntry,
    SequenceManifest,
    ingest as ingest_dir,
    load_frames,
    load_layout,
    load_manifest,
    load_provenance,
    manifest_truth,
    save_cell_choices,
    save_grayscale,
    save_image_artifact,
    save_layout,
    save_manifest,
    save_provenance,
    load_grayscale,
    write_json,
)
from .mosaic import composite as composite_frames
from .mosaic import provenance_of, query_source, sharpen_grid
from .pipeline import PipelineConfig, layout_frames, register_frames, run_pipeline
from .synth import (
    DegradationSpec,
    SceneSpec,
    SceneTruth,
    SweepSpec,
    default_sweep_path,
    evaluate_registration,
    generate_scene,
    generate_sweep,
    spiral_sweep_path,
)
from .tiles import export_tiles, write_tiles


def _config_from(ctx_params: dict) -> PipelineConfig:
    fields = PipelineConfig().__dict__.keys()
    kwargs = {k: ctx_params[k] for k in fields if k in ctx_params and ctx_params[k] is not None}
    cfg = PipelineConfig(**kwargs)
    cfg.validate()
    return cfg


def _stitch_options(fn):
    for opt in reversed(
        [
            click.option("--algorithm", type=click.Choice(["chain", "reference"]), default="chain", show_default=True),
            click.option("--ratio", type=float, default=0.75, show_default=True),
            click.option("--min-inliers", "min_inliers", type=int, default=10, show_default=True),
            click.option("--inlier-tol", "inlier_tol", type=int, default=2, show_default=True),
            click.option("--max-failures", "max_failures", type=int, default=10, show_default=True),
            click.option("--recent-frames", "recent_frames", type=int, default=3, show_default=True),
            click.option("--nfeatures", type=int, default=0, show_default=True, help="SIFT feature cap (0 = unlimited)"),
        ]
    ):
        fn = opt(fn)
    return fn


@click.group()
def cli() -> None:
    """Sweep-to-panorama pipeline for specular microscope frame sequences."""


@cli.command("ingest")
@click.argument("frames_dir", type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--sequence-id", default=None)
def ingest_cmd(frames_dir: str, output: str, sequence_id: str | None) -> None:
    """Scan a directory of numbered frames into a sequence manifest."""
    manifest = ingest_dir(frames_dir, sequence_id)
    manifest.created_by = {"command": "ingest", "config": {"frames_dir": str(frames_dir)}}
    save_manifest(manifest, output)
    for warning in manifest.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"{len(manifest.frames)} frames -> {output}")


@cli.command("select")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--group-size", "group_size", type=int, default=5, show_default=True)
@click.option("--region-size", "region_size", type=int, default=64, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path())
def select_cmd(manifest_path: str, group_size: int, region_size: int, output: str) -> None:
    """Keep the sharpest frame of each chronological window."""
    manifest = load_manifest(manifest_path)
    frames = load_frames(manifest)
    config = _config_from({"group_size": group_size, "region_size": region_size})
    picked = select_focused_frames(frames, group_size, region_size)
    picked_ids = {f.id for f in picked}
    out = SequenceManifest(
        sequence_id=manifest.sequence_id,
        frames=[e for e in manifest.frames if e.id in picked_ids],
        truth_offsets=manifest.truth_offsets,
        degradation_log=manifest.degradation_log,
        created_by={"command": "select", "config": config.to_dict()},
    )
    save_manifest(out, output)
    click.echo(f"selected {len(picked)} of {len(frames)} frames -> {output}")


@cli.command("stitch")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@_stitch_options
@click.option("-o", "--output", required=True, type=click.Path())
def stitch_cmd(manifest_path: str, output: str, **params) -> None:
    """Register frames into a translation-only layout."""
    manifest = load_manifest(manifest_path)
    frames = load_frames(manifest)
    config = _config_from(params)
    result = register_frames(frames, config)
    layout = layout_frames(result, frames)
    save_layout(layout, result, config.to_dict(), output)
    click.echo(
        f"placed {len(layout.placements)} frames ({len(result.skipped_ids)} skipped), "
        f"canvas {layout.canvas_w}x{layout.canvas_h} -> {output}"
    )


@cli.command("composite")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--layout", "layout_path", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["overwrite", "average"]), default="overwrite", show_default=True)
@click.option("-o", "--out-dir", "out_dir", required=True, type=click.Path())
def composite_cmd(manifest_path: str, layout_path: str, mode: str, out_dir: str) -> None:
    """Paste placed frames onto the canvas; write panorama, mask, provenance."""
    manifest = load_manifest(manifest_path)
    frames = load_frames(manifest)
    layout, _, _ = load_layout(layout_path)
    config = _config_from({"mode": mode})
    pano, prov = composite_frames(frames, layout, mode)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_image_artifact(pano, out / "panorama.png", "composite", config.to_dict())
    save_image_artifact(prov.coverage_mask(), out / "coverage_mask.png", "composite", config.to_dict())
    save_provenance(prov, config.to_dict(), out / "provenance.json")
    click.echo(f"panorama {layout.canvas_w}x{layout.canvas_h} -> {out / 'panorama.png'}")


@cli.command("sharpen")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--layout", "layout_path", required=True, type=click.Path())
@click.option("--cell", type=int, default=64, show_default=True)
@click.option("-o", "--out-dir", "out_dir", required=True, type=click.Path())
def sharpen_cmd(manifest_path: str, layout_path: str, cell: int, out_dir: str) -> None:
    """Rebuild the panorama cell by cell from the sharpest covering frames."""
    manifest = load_manifest(manifest_path)
    frames = load_frames(manifest)
    layout, _, _ = load_layout(layout_path)
    config = _config_from({"cell": cell})
    prov = provenance_of(frames, layout)
    sharp, choices = sharpen_grid(frames, layout, prov, cell)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_image_artifact(sharp, out / "sharpened.png", "sharpen", config.to_dict())
    save_cell_choices(choices, cell, (layout.canvas_w, layout.canvas_h), config.to_dict(), out / "cells.json")
    click.echo(f"{len(choices)} cells sharpened -> {out / 'sharpened.png'}")


@cli.command("query")
@click.option("--provenance", "prov_path", required=True, type=click.Path())
@click.option("--layout", "layout_path", required=True, type=click.Path())
@click.option("--x", type=int, required=True)
@click.option("--y", type=int, required=True)
def query_cmd(prov_path: str, layout_path: str, x: int, y: int) -> None:
    """List the source frames covering a panorama pixel."""
    prov = load_provenance(prov_path)
    layout, _, _ = load_layout(layout_path)
    hits = query_source(x, y, prov, layout)
    click.echo(
        json.dumps(
            [{"frame": fid, "local_x": lx, "local_y": ly} for fid, lx, ly in hits], indent=2
        )
    )


@cli.command("eval")
@click.option("--layout", "layout_path", required=True, type=click.Path())
@click.option("--truth", "truth_path", required=True, type=click.Path(), help="manifest with truth offsets")
@click.option("-o", "--output", default=None, type=click.Path())
def eval_cmd(layout_path: str, truth_path: str, output: str | None) -> None:
    """Score a layout against a ground-truth sweep manifest."""
    layout, _, config = load_layout(layout_path)
    truth = manifest_truth(load_manifest(truth_path))
    report = evaluate_registration(layout, truth)
    payload = {
        "kind": "report",
        "mean_abs_err": report.mean_abs_err,
        "max_err": report.max_err,
        "used_fraction": report.used_fraction,
        "coverage_fraction": report.coverage_fraction,
        "errors": {fid: list(err) for fid, err in report.errors.items()},
        "config": config,
    }
    if output:
        write_json(payload, output)
    click.echo(
        f"mean_abs_err={report.mean_abs_err:.3f} max_err={report.max_err} "
        f"used={report.used_fraction:.3f} coverage={report.coverage_fraction:.3f}"
    )


@cli.command("pipeline")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--group-size", "group_size", type=int, default=5, show_default=True)
@click.option("--region-size", "region_size", type=int, default=64, show_default=True)
@_stitch_options
@click.option("--mode", type=click.Choice(["overwrite", "average"]), default="overwrite", show_default=True)
@click.option("--cell", type=int, default=64, show_default=True)
@click.option("-o", "--out-dir", "out_dir", required=True, type=click.Path())
def pipeline_cmd(manifest_path: str, out_dir: str, **params) -> None:
    """Run select -> stitch -> composite -> sharpen (and eval when truth exists)."""
    manifest = load_manifest(manifest_path)
    config = _config_from(params)
    artifacts = run_pipeline(manifest, config, out_dir)
    for name, path in artifacts.items():
        click.echo(f"{name}: {path}")


@cli.group("synth")
def synth_group() -> None:
    """Synthetic scenes and sweeps with ground truth."""


@synth_group.command("scene")
@click.option("--canvas-w", "canvas_w", type=int, default=1870, show_default=True)
@click.option("--canvas-h", "canvas_h", type=int, default=1080, show_default=True)
@click.option("--cell-pitch", "cell_pitch", type=float, default=24.0, show_default=True)
@click.option("--pitch-jitter", "pitch_jitter", type=float, default=0.35, show_default=True)
@click.option("--membrane-width", "membrane_width", type=float, default=2.0, show_default=True)
@click.option("--membrane-intensity", "membrane_intensity", type=int, default=70, show_default=True)
@click.option("--cell-base-intensity", "cell_base_intensity", type=int, default=150, show_default=True)
@click.option("--cell-intensity-jitter", "cell_intensity_jitter", type=int, default=25, show_default=True)
@click.option("--guttae-count", "guttae_count", type=int, default=40, show_default=True)
@click.option("--guttae-radius-min", "guttae_radius_min", type=float, default=4.0, show_default=True)
@click.option("--guttae-radius-max", "guttae_radius_max", type=float, default=12.0, show_default=True)
@click.option("--cornea-radius", "cornea_radius", type=float, default=500.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out-dir", "out_dir", required=True, type=click.Path())
def synth_scene_cmd(out_dir: str, seed: int, guttae_radius_min: float, guttae_radius_max: float, **params) -> None:
    """Generate a scene image plus its ground-truth blob mask."""
    spec = SceneSpec(
        rng_seed=seed, guttae_radius_range=(guttae_radius_min, guttae_radius_max), **params
    )
    scene = generate_scene(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_grayscale(scene.image, out / "scene.png")
    save_grayscale(scene.guttae_mask, out / "guttae_mask.png")
    spec_dict = dict(spec.__dict__)
    spec_dict["guttae_radius_range"] = list(spec.guttae_radius_range)
    write_json({"kind": "scene", "command": "synth scene", "spec": spec_dict}, out / "scene.json")
    click.echo(f"scene {spec.canvas_w}x{spec.canvas_h} -> {out}")


@synth_group.command("sweep")
@click.option("--scene", "scene_dir", required=True, type=click.Path(), help="directory from `synth scene`")
@click.option("--crop-w", "crop_w", type=int, default=512, show_default=True)
@click.option("--crop-h", "crop_h", type=int, default=512, show_default=True)
@click.option("--step", type=int, default=10, show_default=True)
@click.option("--path-kind", "path_kind", type=click.Choice(["default", "spiral"]), default="default", show_default=True)
@click.option("--max-frames", "max_frames", type=int, default=0, show_default=True, help="truncate the sweep (0 = all)")
@click.option("--blur-fraction", "blur_fraction", type=float, default=0.0, show_default=True)
@click.option("--blur-sigma-min", "blur_sigma_min", type=float, default=1.0, show_default=True)
@click.option("--blur-sigma-max", "blur_sigma_max", type=float, default=2.0, show_default=True)
@click.option("--brightness-min", "brightness_min", type=int, default=0, show_default=True)
@click.option("--brightness-max", "brightness_max", type=int, default=0, show_default=True)
@click.option("--noise-sigma", "noise_sigma", type=float, default=0.0, show_default=True)
@click.option("--dropout", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out-dir", "out_dir", required=True, type=click.Path())
def synth_sweep_cmd(
    scene_dir: str,
    crop_w: int,
    crop_h: int,
    step: int,
    path_kind: str,
    max_frames: int,
    blur_fraction: float,
    blur_sigma_min: float,
    blur_sigma_max: float,
    brightness_min: int,
    brightness_max: int,
    noise_sigma: float,
    dropout: float,
    seed: int,
    out_dir: str,
) -> None:
    """Crop a frame sequence along a sweep path, logging ground truth."""
    scene_path = Path(scene_dir)
    image = load_grayscale(scene_path / "scene.png")
    mask = load_grayscale(scene_path / "guttae_mask.png")
    scene = SceneTruth(image=image, guttae_mask=mask, spec=SceneSpec())
    h, w = image.shape
    path = (
        default_sweep_path(w, h, crop_w, crop_h)
        if path_kind == "default"
        else spiral_sweep_path(w, h, crop_w, crop_h)
    )
    degradations = None
    if blur_fraction > 0 or noise_sigma > 0 or dropout > 0 or (brightness_min, brightness_max) != (0, 0):
        degradations = DegradationSpec(
            blur_fraction=blur_fraction,
            blur_sigma_range=(blur_sigma_min, blur_sigma_max),
            brightness_offset_range=(brightness_min, brightness_max),
            noise_sigma=noise_sigma,
            dropout=dropout,
        )
    sweep = SweepSpec(
        crop_w=crop_w, crop_h=crop_h, step=step, path=path, degradations=degradations, rng_seed=seed
    )
    truth = generate_sweep(scene, sweep)
    frames = truth.frames if max_frames <= 0 else truth.frames[:max_frames]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for f in frames:
        name = f"{f.id}.png"
        save_grayscale(f.image, out / name)
        entries.append(
            FrameEntry(id=f.id, index=f.index, path=str(out / name), width=f.width, height=f.height)
        )
    sweep_config = {
        "command": "synth sweep",
        "crop_w": crop_w,
        "crop_h": crop_h,
        "step": step,
        "path_kind": path_kind,
        "seed": seed,
        "degradations": None if degradations is None else dict(degradations.__dict__),
    }
    if sweep_config["degradations"] is not None:
        sweep_config["degradations"]["blur_sigma_range"] = [blur_sigma_min, blur_sigma_max]
        sweep_config["degradations"]["brightness_offset_range"] = [brightness_min, brightness_max]
    manifest = SequenceManifest(
        sequence_id=out.name,
        frames=entries,
        truth_offsets={f.id: truth.truth_offsets[f.id] for f in frames},
        degradation_log={f.id: truth.degradation_log[f.id] for f in frames},
        created_by=sweep_config,
    )
    save_manifest(manifest, out / "manifest.json")
    click.echo(f"{len(frames)} frames -> {out / 'manifest.json'}")


@cli.command("tiles")
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--mask", "mask_path", required=True, type=click.Path())
@click.option("--cell", type=int, default=64, show_default=True)
@click.option("--shift", type=int, default=16, show_default=True)
@click.option("--shifts-per-axis", "shifts_per_axis", type=int, default=4, show_default=True)
@click.option("--source-id", "source_id", default=None)
@click.option("-o", "--out-dir", "out_dir", required=True, type=click.Path())
def tiles_cmd(
    image_path: str,
    mask_path: str,
    cell: int,
    shift: int,
    shifts_per_axis: int,
    source_id: str | None,
    out_dir: str,
) -> None:
    """Export shifted grid tiles that contain mask-positive pixels."""
    image = load_grayscale(image_path)
    mask = load_grayscale(mask_path)
    sid = source_id or Path(image_path).stem
    records = export_tiles(image, mask, cell, shift, shifts_per_axis, source_id=sid)
    manifest = write_tiles(records, out_dir)
    click.echo(f"{len(records)} tiles -> {manifest}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:  # --help and friends
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(2)
    except RegistrationError as exc:
        click.echo(f"registration error: {exc}", err=True)
        sys.exit(3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
