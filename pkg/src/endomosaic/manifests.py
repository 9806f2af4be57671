"""Manifest/layout/report serialization and frame-directory ingestion.

Every structured artifact is human-diffable JSON and embeds the config
snapshot that produced it, so a run can be reproduced from its outputs alone.
Images are written as plain grayscale PNGs with a small JSON sidecar carrying
the same snapshot.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError
from .imaging import FrameRecord, as_grayscale, to_grayscale
from .mosaic import CellChoice, PasteRect, ProvenanceIndex
from .registration import MosaicLayout, RegistrationResult, TranslationLink
from .synth import SweepTruth

IMAGE_EXTENSIONS = {".png", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg", ".pgm"}

_NUMBER_RE = re.compile(r"(\d+)")


@dataclass
class FrameEntry:
    id: str
    index: int
    path: str
    width: int
    height: int


@dataclass
class SequenceManifest:
    sequence_id: str
    frames: list[FrameEntry]
    truth_offsets: dict[str, tuple[int, int]] | None = None
    degradation_log: dict[str, dict] | None = None
    created_by: dict | None = None
    warnings: list[str] = field(default_factory=list)


def load_grayscale(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im)
    except Exception as exc:
        raise DataError(f"unreadable image {path}: {exc}") from exc
    return to_grayscale(arr)


def save_grayscale(arr: np.ndarray, path: str | Path) -> None:
    Image.fromarray(as_grayscale(arr)).save(path)


def write_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such file: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON in {p}: {exc}") from exc


def save_image_artifact(
    arr: np.ndarray, path: str | Path, command: str, config: dict | None
) -> None:
    """PNG plus a sidecar JSON with the producing command/config and a digest."""
    path = Path(path)
    save_grayscale(arr, path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    write_json(
        {"artifact": path.name, "command": command, "config": config, "sha256": digest},
        path.with_suffix(path.suffix + ".json"),
    )


# --- sequence manifests -------------------------------------------------------


def ingest(frames_dir: str | Path, sequence_id: str | None = None) -> SequenceManifest:
    """Scan a directory of numbered image files into a manifest.

    Files are ordered by the last number in their stem; duplicate numbers are
    rejected since they make chronological order ambiguous.  Every file must
    decode; mixed dimensions are fine and recorded per frame.
    """
    root = Path(frames_dir)
    if not root.is_dir():
        raise DataError(f"frames directory not found: {root}")
    numbered: list[tuple[int, Path]] = []
    for f in sorted(root.iterdir()):
        if not f.is_file() or f.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        numbers = _NUMBER_RE.findall(f.stem)
        if not numbers:
            raise DataError(f"frame file {f.name} carries no numeric index")
        numbered.append((int(numbers[-1]), f))
    numbered.sort(key=lambda t: t[0])
    seen: set[int] = set()
    entries: list[FrameEntry] = []
    for idx, f in numbered:
        if idx in seen:
            raise DataError(f"non-monotonic frame numbering: index {idx} appears twice")
        seen.add(idx)
        try:
            with Image.open(f) as im:
                im.load()
                w, h = im.size
        except Exception as exc:
            raise DataError(f"unreadable image {f}: {exc}") from exc
        entries.append(FrameEntry(id=f.stem, index=idx, path=str(f), width=w, height=h))
    warnings = [] if entries else ["no image files found"]
    return SequenceManifest(
        sequence_id=sequence_id or root.name, frames=entries, warnings=warnings
    )


def manifest_to_dict(manifest: SequenceManifest) -> dict:
    return {
        "kind": "sequence",
        "sequence_id": manifest.sequence_id,
        "frames": [asdict(f) for f in manifest.frames],
        "truth_offsets": manifest.truth_offsets,
        "degradation_log": manifest.degradation_log,
        "created_by": manifest.created_by,
        "warnings": manifest.warnings,
    }


def save_manifest(manifest: SequenceManifest, path: str | Path) -> None:
    write_json(manifest_to_dict(manifest), path)


def load_manifest(path: str | Path) -> SequenceManifest:
    data = read_json(path)
    if data.get("kind") != "sequence":
        raise DataError(f"{path} is not a sequence manifest")
    frames = [FrameEntry(**f) for f in data["frames"]]
    indices = [f.index for f in frames]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise DataError(f"{path}: frame indices are not strictly increasing")
    truth = data.get("truth_offsets")
    if truth is not None:
        truth = {fid: (int(x), int(y)) for fid, (x, y) in truth.items()}
    return SequenceManifest(
        sequence_id=data["sequence_id"],
        frames=frames,
        truth_offsets=truth,
        degradation_log=data.get("degradation_log"),
        created_by=data.get("created_by"),
        warnings=data.get("warnings", []),
    )


def load_frames(manifest: SequenceManifest) -> list[FrameRecord]:
    frames = []
    for entry in manifest.frames:
        img = load_grayscale(entry.path)
        if img.shape != (entry.height, entry.width):
            raise DataError(
                f"frame {entry.id}: file is {img.shape[1]}x{img.shape[0]} but the "
                f"manifest says {entry.width}x{entry.height}"
            )
        frames.append(FrameRecord(id=entry.id, index=entry.index, image=img, path=entry.path))
    return frames


def manifest_truth(manifest: SequenceManifest) -> SweepTruth:
    """Reconstruct a SweepTruth view (frames + truth offsets) from a manifest."""
    if manifest.truth_offsets is None:
        raise DataError("manifest carries no ground-truth offsets")
    frames = load_frames(manifest)
    return SweepTruth(
        frames=frames,
        truth_offsets=dict(manifest.truth_offsets),
        degradation_log=manifest.degradation_log or {},
    )


# --- layout files ---------------------------------------------------------------


def save_layout(
    layout: MosaicLayout,
    result: RegistrationResult,
    config: dict | None,
    path: str | Path,
) -> None:
    frames = [
        {"id": fid, "x": x, "y": y, "used": True} for fid, (x, y) in layout.placements.items()
    ]
    frames += [{"id": fid, "x": None, "y": None, "used": False} for fid in result.skipped_ids]
    payload = {
        "kind": "layout",
        "canvas": {"w": layout.canvas_w, "h": layout.canvas_h},
        "frames": frames,
        "links": [asdict(link) for link in result.links],
        "used_order": result.used_ids,
        "config": config,
    }
    write_json(payload, path)


def load_layout(path: str | Path) -> tuple[MosaicLayout, RegistrationResult, dict | None]:
    data = read_json(path)
    if data.get("kind") != "layout":
        raise DataError(f"{path} is not a layout file")
    placements = {
        f["id"]: (int(f["x"]), int(f["y"])) for f in data["frames"] if f["used"]
    }
    skipped = [f["id"] for f in data["frames"] if not f["used"]]
    layout = MosaicLayout(
        placements=placements,
        canvas_w=int(data["canvas"]["w"]),
        canvas_h=int(data["canvas"]["h"]),
    )
    links = [TranslationLink(**link) for link in data["links"]]
    result = RegistrationResult(
        links=links, used_ids=list(data["used_order"]), skipped_ids=skipped
    )
    return layout, result, data.get("config")


# --- provenance and cell choices -------------------------------------------------


def save_provenance(prov: ProvenanceIndex, config: dict | None, path: str | Path) -> None:
    payload = {
        "kind": "provenance",
        "canvas": {"w": prov.canvas_w, "h": prov.canvas_h},
        "rects": [asdict(r) for r in prov.rects],
        "config": config,
    }
    write_json(payload, path)


def load_provenance(path: str | Path) -> ProvenanceIndex:
    data = read_json(path)
    if data.get("kind") != "provenance":
        raise DataError(f"{path} is not a provenance file")
    return ProvenanceIndex(
        canvas_w=int(data["canvas"]["w"]),
        canvas_h=int(data["canvas"]["h"]),
        rects=[PasteRect(**r) for r in data["rects"]],
    )


def save_cell_choices(
    choices: list[CellChoice], cell: int, canvas: tuple[int, int], config: dict | None, path: str | Path
) -> None:
    payload = {
        "kind": "cell_choices",
        "cell": cell,
        "canvas": {"w": canvas[0], "h": canvas[1]},
        "choices": [asdict(c) for c in choices],
        "config": config,
    }
    write_json(payload, path)


def load_cell_choices(path: str | Path) -> tuple[list[CellChoice], int, tuple[int, int]]:
    data = read_json(path)
    if data.get("kind") != "cell_choices":
        raise DataError(f"{path} is not a cell-choices file")
    choices = [CellChoice(**c) for c in data["choices"]]
    return choices, int(data["cell"]), (int(data["canvas"]["w"]), int(data["canvas"]["h"]))
