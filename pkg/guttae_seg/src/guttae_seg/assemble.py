"""Reassemble per-cell predicted masks into a panorama-scale mask.

The cell-choices JSON written by the mosaicking pipeline's sharpening stage
(kind "cell_choices") defines the grid: cell size, canvas dimensions, and
which source frame produced each cell, which becomes the per-cell provenance
of the assembled mask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class CellRef:
    cell_x: int
    cell_y: int
    chosen_frame: str


@dataclass
class MaskPanorama:
    image: np.ndarray                               # uint8 {0, 255}
    cell_provenance: dict[tuple[int, int], str]     # grid cell -> source frame


def read_cell_choices(path: str | Path) -> tuple[list[CellRef], int, tuple[int, int]]:
    """Parse a cell-choices file: (cells, cell_size, (canvas_w, canvas_h))."""
    p = Path(path)
    if not p.is_file():
        raise ValueError(f"cell-choices file not found: {p}")
    data = json.loads(p.read_text())
    if data.get("kind") != "cell_choices":
        raise ValueError(f"{p} is not a cell-choices file")
    cells = [
        CellRef(cell_x=int(c["cell_x"]), cell_y=int(c["cell_y"]), chosen_frame=c["chosen_frame"])
        for c in data["choices"]
    ]
    return cells, int(data["cell"]), (int(data["canvas"]["w"]), int(data["canvas"]["h"]))


def assemble_mask(
    cell_masks: dict[tuple[int, int], np.ndarray],
    cells: list[CellRef],
    canvas: tuple[int, int],
    cell: int,
) -> MaskPanorama:
    """Paste one binary mask per chosen cell at its exact canvas position.

    Every listed cell must have a mask; cells no prediction covers stay zero.
    Edge cells may be smaller than ``cell`` (the canvas is not necessarily a
    multiple of the grid); their masks are clipped accordingly.
    """
    canvas_w, canvas_h = canvas
    out = np.zeros((canvas_h, canvas_w), dtype=np.uint8)
    provenance: dict[tuple[int, int], str] = {}
    for ref in cells:
        key = (ref.cell_x, ref.cell_y)
        mask = cell_masks.get(key)
        if mask is None:
            raise ValueError(f"no predicted mask for cell {key}")
        x0, y0 = ref.cell_x * cell, ref.cell_y * cell
        w = min(cell, canvas_w - x0)
        h = min(cell, canvas_h - y0)
        if w <= 0 or h <= 0:
            raise ValueError(f"cell {key} lies outside the {canvas_w}x{canvas_h} canvas")
        patch = np.asarray(mask)
        if patch.shape[0] < h or patch.shape[1] < w:
            raise ValueError(
                f"mask for cell {key} is {patch.shape}, smaller than the {w}x{h} cell"
            )
        out[y0 : y0 + h, x0 : x0 + w] = np.where(patch[:h, :w] > 0, 255, 0)
        provenance[key] = ref.chosen_frame
    return MaskPanorama(image=out, cell_provenance=provenance)
