"""End-to-end pipeline: select -> register -> globalize -> composite -> sharpen.

Each stage writes its artifact and the next stage can be re-run from the
written files alone, so the full pipeline and the individual CLI subcommands
are the same code path.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import DataError, MosaicError
from .imaging import FrameRecord, select_focused_frames
from .manifests import (
    SequenceManifest,
    load_frames,
    manifest_truth,
    save_cell_choices,
    save_image_artifact,
    save_layout,
    save_manifest,
    save_provenance,
    write_json,
)
from .mosaic import composite, sharpen_grid
from .registration import (
    MosaicLayout,
    RegistrationResult,
    chain_register,
    globalize,
    reference_stitch_register,
)
from .synth import evaluate_registration

ALGORITHMS = ("chain", "reference")
COMPOSITE_MODES = ("overwrite", "average")


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline; the snapshot embedded in artifacts."""

    group_size: int = 5
    region_size: int = 64
    algorithm: str = "chain"
    ratio: float = 0.75
    min_inliers: int = 10
    inlier_tol: int = 2
    max_failures: int = 10
    recent_frames: int = 3
    nfeatures: int = 0
    mode: str = "overwrite"
    cell: int = 64
    descriptor: str = "opencv-sift"

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise DataError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.mode not in COMPOSITE_MODES:
            raise DataError(f"mode must be one of {COMPOSITE_MODES}, got {self.mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@contextmanager
def _stage(name: str):
    """Tag errors with the pipeline stage they came from."""
    try:
        yield
    except MosaicError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def register_frames(frames: list[FrameRecord], config: PipelineConfig) -> RegistrationResult:
    config.validate()
    kwargs = dict(
        ratio=config.ratio,
        min_inliers=config.min_inliers,
        inlier_tol=config.inlier_tol,
        nfeatures=config.nfeatures,
    )
    if config.algorithm == "chain":
        return chain_register(frames, config.max_failures, **kwargs)
    return reference_stitch_register(
        frames, config.max_failures, config.recent_frames, **kwargs
    )


def layout_frames(result: RegistrationResult, frames: list[FrameRecord]) -> MosaicLayout:
    dims = {f.id: (f.width, f.height) for f in frames}
    return globalize(result, dims)


def run_pipeline(
    manifest: SequenceManifest, config: PipelineConfig, out_dir: str | Path
) -> dict[str, str]:
    """Run every stage, writing each artifact under ``out_dir``.

    Returns a name -> path map of everything written.  When the manifest
    carries ground-truth offsets an evaluation report is added.
    """
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snapshot = config.to_dict()
    artifacts: dict[str, str] = {}

    with _stage("ingest"):
        frames = load_frames(manifest)
        if not frames:
            raise DataError("manifest contains no frames")

    with _stage("select"):
        selected = select_focused_frames(frames, config.group_size, config.region_size)
    selected_ids = {f.id for f in selected}
    selected_manifest = SequenceManifest(
        sequence_id=manifest.sequence_id,
        frames=[e for e in manifest.frames if e.id in selected_ids],
        truth_offsets=manifest.truth_offsets,
        degradation_log=manifest.degradation_log,
        created_by={"command": "select", "config": snapshot},
    )
    selected_path = out / "selected.json"
    save_manifest(selected_manifest, selected_path)
    artifacts["selected"] = str(selected_path)

    with _stage("stitch"):
        result = register_frames(selected, config)
        layout = layout_frames(result, selected)
    layout_path = out / "layout.json"
    save_layout(layout, result, snapshot, layout_path)
    artifacts["layout"] = str(layout_path)

    with _stage("composite"):
        pano, prov = composite(selected, layout, config.mode)
    pano_path = out / "panorama.png"
    save_image_artifact(pano, pano_path, "composite", snapshot)
    artifacts["panorama"] = str(pano_path)
    mask_path = out / "coverage_mask.png"
    save_image_artifact(prov.coverage_mask(), mask_path, "composite", snapshot)
    artifacts["coverage_mask"] = str(mask_path)
    prov_path = out / "provenance.json"
    save_provenance(prov, snapshot, prov_path)
    artifacts["provenance"] = str(prov_path)

    with _stage("sharpen"):
        sharp, choices = sharpen_grid(selected, layout, prov, config.cell)
    sharp_path = out / "sharpened.png"
    save_image_artifact(sharp, sharp_path, "sharpen", snapshot)
    artifacts["sharpened"] = str(sharp_path)
    cells_path = out / "cells.json"
    save_cell_choices(choices, config.cell, (layout.canvas_w, layout.canvas_h), snapshot, cells_path)
    artifacts["cells"] = str(cells_path)

    if manifest.truth_offsets is not None:
        with _stage("eval"):
            report = evaluate_registration(layout, manifest_truth(manifest))
        report_path = out / "report.json"
        write_json(
            {
                "kind": "report",
                "mean_abs_err": report.mean_abs_err,
                "max_err": report.max_err,
                "used_fraction": report.used_fraction,
                "coverage_fraction": report.coverage_fraction,
                "errors": {fid: list(err) for fid, err in report.errors.items()},
                "config": snapshot,
            },
            report_path,
        )
        artifacts["report"] = str(report_path)

    return artifacts
