"""Grid tiling with shifted re-crops for building the segmentation dataset.

Each grid cell yields up to ``shifts_per_axis`` squared tiles, offset in
``shift``-pixel increments right and down.  Tiles that would cross the image
border are dropped (padding would fabricate pixels), and tiles whose mask
contains no positive pixels are excluded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError

DEFAULT_TILE_CELL = 64
DEFAULT_TILE_SHIFT = 16
DEFAULT_SHIFTS_PER_AXIS = 4

MANIFEST_COLUMNS = [
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
class TileRecord:
    source_id: str
    cell_x: int
    cell_y: int
    shift_x: int
    shift_y: int
    image_tile: np.ndarray
    mask_tile: np.ndarray
    guttae_pixels: int


def export_tiles(
    image: np.ndarray,
    mask: np.ndarray,
    cell: int = DEFAULT_TILE_CELL,
    shift: int = DEFAULT_TILE_SHIFT,
    shifts_per_axis: int = DEFAULT_SHIFTS_PER_AXIS,
    source_id: str = "source",
    min_guttae_pixels: int = 1,
) -> list[TileRecord]:
    """Enumerate in-bounds, non-empty tiles in deterministic order.

    Cells are anchored at multiples of ``cell``; shifts run over
    ``{0, shift, ..., (shifts_per_axis - 1) * shift}`` on both axes.  Order is
    row-major over cells, then row-major over shifts.
    """
    image = np.asarray(image)
    mask = np.asarray(mask)
    if image.shape != mask.shape:
        raise DataError(f"image {image.shape} and mask {mask.shape} dimensions differ")
    if image.ndim != 2:
        raise DataError("tiles are cut from 2-D grayscale images")
    values = np.unique(mask)
    if not np.isin(values, (0, 255)).all():
        raise DataError("mask must be binary (0 or 255)")
    if cell < 1 or shift < 0 or shifts_per_axis < 1:
        raise DataError("cell must be >= 1, shift >= 0, shifts_per_axis >= 1")
    if min_guttae_pixels < 1:
        raise DataError("min_guttae_pixels must be at least 1")

    h, w = image.shape
    records: list[TileRecord] = []
    for cell_y in range(-(-h // cell)):
        for cell_x in range(-(-w // cell)):
            for sy in range(shifts_per_axis):
                for sx in range(shifts_per_axis):
                    x0 = cell_x * cell + sx * shift
                    y0 = cell_y * cell + sy * shift
                    if x0 + cell > w or y0 + cell > h:
                        continue
                    mask_tile = mask[y0 : y0 + cell, x0 : x0 + cell]
                    positive = int((mask_tile > 0).sum())
                    if positive < min_guttae_pixels:
                        continue
                    records.append(
                        TileRecord(
                            source_id=source_id,
                            cell_x=cell_x,
                            cell_y=cell_y,
                            shift_x=sx * shift,
                            shift_y=sy * shift,
                            image_tile=image[y0 : y0 + cell, x0 : x0 + cell].copy(),
                            mask_tile=mask_tile.copy(),
                            guttae_pixels=positive,
                        )
                    )
    return records


def write_tiles(records: list[TileRecord], out_dir: str | Path) -> Path:
    """Write tile image/mask pairs as PNGs plus the manifest CSV.

    Returns the manifest path.  The manifest's columns are the contract the
    segmentation trainer consumes; paths are relative to the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "tiles.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in records:
            stem = f"{r.source_id}_c{r.cell_x:03d}_{r.cell_y:03d}_s{r.shift_x:02d}_{r.shift_y:02d}"
            image_name = f"{stem}_img.png"
            mask_name = f"{stem}_mask.png"
            Image.fromarray(r.image_tile).save(out / image_name)
            Image.fromarray(r.mask_tile).save(out / mask_name)
            writer.writerow(
                [
                    r.source_id,
                    r.cell_x,
                    r.cell_y,
                    r.shift_x,
                    r.shift_y,
                    image_name,
                    mask_name,
                    r.guttae_pixels,
                ]
            )
    return manifest
