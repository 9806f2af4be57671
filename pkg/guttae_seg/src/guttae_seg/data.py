"""Tile dataset access.

The input contract is the tile manifest CSV produced by the mosaicking
pipeline's tile exporter: columns source_id, cell_x, cell_y, shift_x,
shift_y, image_path, mask_path, guttae_pixels, with paths relative to the
manifest file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

REQUIRED_COLUMNS = [
    "source_id",
    "cell_x",
    "cell_y",
    "shift_x",
    "shift_y",
    "image_path",
    "mask_path",
    "guttae_pixels",
]


@dataclass
class TileSample:
    source_id: str
    cell_x: int
    cell_y: int
    shift_x: int
    shift_y: int
    image_path: Path
    mask_path: Path
    guttae_pixels: int


def read_manifest(path: str | Path) -> list[TileSample]:
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"tile manifest not found: {path}")
    root = path.parent
    samples: list[TileSample] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"tile manifest {path} lacks columns: {missing}")
        for row in reader:
            samples.append(
                TileSample(
                    source_id=row["source_id"],
                    cell_x=int(row["cell_x"]),
                    cell_y=int(row["cell_y"]),
                    shift_x=int(row["shift_x"]),
                    shift_y=int(row["shift_y"]),
                    image_path=root / row["image_path"],
                    mask_path=root / row["mask_path"],
                    guttae_pixels=int(row["guttae_pixels"]),
                )
            )
    return samples


def _load_gray(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"))


def load_arrays(samples: list[TileSample]) -> tuple[np.ndarray, np.ndarray]:
    """Load tiles as float32 arrays in [0, 1]: (images, masks), each (N, 1, H, W)."""
    if not samples:
        raise ValueError("no tiles to load")
    images, masks = [], []
    shape = None
    for s in samples:
        img = _load_gray(s.image_path)
        msk = _load_gray(s.mask_path)
        if img.shape != msk.shape:
            raise ValueError(f"tile {s.image_path.name}: image/mask shapes differ")
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(
                f"tile {s.image_path.name} is {img.shape}, expected {shape}; "
                "all tiles in a training set must share dimensions"
            )
        images.append(img.astype(np.float32) / 255.0)
        masks.append((msk > 127).astype(np.float32))
    return (
        np.stack(images)[:, None, :, :],
        np.stack(masks)[:, None, :, :],
    )


def split_samples(
    samples: list[TileSample], val_sources: list[str] | None = None
) -> tuple[list[TileSample], list[TileSample]]:
    """Split tiles by source id.

    With an explicit ``val_sources`` list the split is exactly that.  When 21
    distinct sources are present, the default is 18 train / 3 validation
    (last three sorted source ids); otherwise everything trains and
    validation metrics fall back to the training set.
    """
    sources = sorted({s.source_id for s in samples})
    if val_sources is None:
        val_set = set(sources[-3:]) if len(sources) == 21 else set()
    else:
        val_set = set(val_sources)
        unknown = val_set - set(sources)
        if unknown:
            raise ValueError(f"validation sources not in manifest: {sorted(unknown)}")
    train = [s for s in samples if s.source_id not in val_set]
    val = [s for s in samples if s.source_id in val_set]
    if not train:
        raise ValueError("split left no training tiles")
    return train, val
