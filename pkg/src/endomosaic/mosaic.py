"""Deformation-free compositing, provenance indexing, and grid sharpening.

Frames are pasted at integer offsets with no resampling, so every
non-background canvas pixel is bit-identical to a pixel of some source frame.
The provenance index keeps the full paste geometry (which frames cover which
canvas pixels, in chronological order), which is what lets any region of the
panorama be traced back to the original frames it came from.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .imaging import FrameRecord, Rect, tenengrad_region
from .registration import MosaicLayout

BACKGROUND = 0
DEFAULT_CELL = 64


@dataclass(frozen=True)
class PasteRect:
    """Placement rectangle of one source frame on the canvas."""

    frame_id: str
    x: int
    y: int
    w: int
    h: int

    def contains_point(self, px: int, py: int) -> bool:
        return self.x <= px < self.x + self.w and self.y <= py < self.y + self.h

    def contains_rect(self, r: Rect) -> bool:
        return (
            self.x <= r.x
            and self.y <= r.y
            and r.right <= self.x + self.w
            and r.bottom <= self.y + self.h
        )

    def overlap_area(self, r: Rect) -> int:
        ow = min(self.x + self.w, r.right) - max(self.x, r.x)
        oh = min(self.y + self.h, r.bottom) - max(self.y, r.y)
        return ow * oh if ow > 0 and oh > 0 else 0


@dataclass
class ProvenanceIndex:
    """Chronologically ordered paste rectangles over a canvas.

    Coverage of any pixel or cell is answered from the rectangles, so the
    index stays tiny regardless of canvas size.
    """

    canvas_w: int
    canvas_h: int
    rects: list[PasteRect]

    def frames_at(self, x: int, y: int) -> list[PasteRect]:
        if not (0 <= x < self.canvas_w and 0 <= y < self.canvas_h):
            raise DataError(f"({x}, {y}) lies outside the {self.canvas_w}x{self.canvas_h} canvas")
        return [r for r in self.rects if r.contains_point(x, y)]

    def coverage_count(self) -> np.ndarray:
        counts = np.zeros((self.canvas_h, self.canvas_w), dtype=np.int32)
        for r in self.rects:
            counts[r.y : r.y + r.h, r.x : r.x + r.w] += 1
        return counts

    def coverage_mask(self) -> np.ndarray:
        """255 where any frame was pasted, 0 for background."""
        return np.where(self.coverage_count() > 0, 255, 0).astype(np.uint8)


@dataclass(frozen=True)
class CellChoice:
    """Winning source frame for one sharpening-grid cell."""

    cell_x: int
    cell_y: int
    chosen_frame: str
    score: int
    candidates: int


def _ordered_frames(frames: Iterable[FrameRecord], layout: MosaicLayout) -> list[FrameRecord]:
    by_id = {f.id: f for f in frames}
    missing = [fid for fid in layout.placements if fid not in by_id]
    if missing:
        raise DataError(f"layout references frames not provided: {sorted(missing)}")
    placed = [by_id[fid] for fid in layout.placements]
    return sorted(placed, key=lambda f: f.index)


def _paste_rects(frames: Sequence[FrameRecord], layout: MosaicLayout) -> list[PasteRect]:
    rects = []
    for f in frames:
        x, y = layout.placements[f.id]
        r = PasteRect(frame_id=f.id, x=x, y=y, w=f.width, h=f.height)
        if x < 0 or y < 0 or x + f.width > layout.canvas_w or y + f.height > layout.canvas_h:
            raise DataError(
                f"frame {f.id!r} pasted at ({x}, {y}) exceeds the "
                f"{layout.canvas_w}x{layout.canvas_h} canvas"
            )
        rects.append(r)
    return rects


def provenance_of(frames: Iterable[FrameRecord], layout: MosaicLayout) -> ProvenanceIndex:
    """Provenance index implied by a layout (no pixels touched)."""
    ordered = _ordered_frames(frames, layout)
    return ProvenanceIndex(
        canvas_w=layout.canvas_w, canvas_h=layout.canvas_h, rects=_paste_rects(ordered, layout)
    )


def composite(
    frames: Iterable[FrameRecord],
    layout: MosaicLayout,
    mode: str = "overwrite",
) -> tuple[np.ndarray, ProvenanceIndex]:
    """Paste frames onto the canvas at their integer placements.

    ``overwrite`` lets the chronologically later frame win each overlapped
    pixel; ``average`` writes the rounded mean of all covering frames (the
    blend look that motivates sharpening in the first place).  The provenance
    index always records every covering frame regardless of mode.
    """
    if mode not in ("overwrite", "average"):
        raise DataError(f"unknown composite mode {mode!r}")
    ordered = _ordered_frames(frames, layout)
    rects = _paste_rects(ordered, layout)
    canvas = np.full((layout.canvas_h, layout.canvas_w), BACKGROUND, dtype=np.uint8)
    if mode == "overwrite":
        for f, r in zip(ordered, rects):
            canvas[r.y : r.y + r.h, r.x : r.x + r.w] = f.image
    else:
        sums = np.zeros(canvas.shape, dtype=np.int64)
        counts = np.zeros(canvas.shape, dtype=np.int64)
        for f, r in zip(ordered, rects):
            sums[r.y : r.y + r.h, r.x : r.x + r.w] += f.image
            counts[r.y : r.y + r.h, r.x : r.x + r.w] += 1
        covered = counts > 0
        # Rounded (half up) integer mean.
        canvas[covered] = ((2 * sums[covered] + counts[covered]) // (2 * counts[covered])).astype(
            np.uint8
        )
    return canvas, ProvenanceIndex(canvas_w=layout.canvas_w, canvas_h=layout.canvas_h, rects=rects)


def sharpen_grid(
    frames: Iterable[FrameRecord],
    layout: MosaicLayout,
    provenance: ProvenanceIndex,
    cell: int = DEFAULT_CELL,
) -> tuple[np.ndarray, list[CellChoice]]:
    """Rebuild the panorama cell by cell from the sharpest covering source.

    The canvas is divided into a ``cell`` x ``cell`` grid anchored at the
    origin.  For each cell, the frames whose paste rectangle fully contains
    it compete on the Tenengrad score of their own pixels for that cell; the
    winner's crop is pasted verbatim.  Cells no frame fully covers fall back
    to the maximal-overlap frame (only its overlapping part is pasted), so
    mosaic edges are not left blank; cells nothing overlaps stay background.
    Ties always go to the lowest chronological index.
    """
    if cell < 3:
        raise DataError(f"cell must be at least 3, got {cell}")
    ordered = _ordered_frames(frames, layout)
    by_id = {f.id: f for f in ordered}
    rects = _paste_rects(ordered, layout)
    canvas = np.full((layout.canvas_h, layout.canvas_w), BACKGROUND, dtype=np.uint8)
    choices: list[CellChoice] = []

    def crop_score(img: np.ndarray) -> int:
        h, w = img.shape
        if h < 3 or w < 3:
            return 0
        return tenengrad_region(img, Rect(0, 0, w, h))

    ny = -(-layout.canvas_h // cell)
    nx = -(-layout.canvas_w // cell)
    for cy in range(ny):
        for cx in range(nx):
            gx, gy = cx * cell, cy * cell
            gw = min(cell, layout.canvas_w - gx)
            gh = min(cell, layout.canvas_h - gy)
            cell_rect = Rect(gx, gy, gw, gh)
            full = [r for r in rects if r.contains_rect(cell_rect)]
            if full:
                candidates = full
            else:
                overlaps = [(r.overlap_area(cell_rect), r) for r in rects]
                best_area = max((a for a, _ in overlaps), default=0)
                if best_area == 0:
                    continue
                candidates = [r for a, r in overlaps if a == best_area]

            best_rect = None
            best_crop = None
            best_score = -1
            for r in candidates:
                ox0, oy0 = max(r.x, gx), max(r.y, gy)
                ox1, oy1 = min(r.x + r.w, gx + gw), min(r.y + r.h, gy + gh)
                frame = by_id[r.frame_id]
                crop = frame.image[oy0 - r.y : oy1 - r.y, ox0 - r.x : ox1 - r.x]
                score = crop_score(crop)
                if score > best_score:
                    best_rect, best_crop, best_score = r, (ox0, oy0, crop), score
            assert best_rect is not None and best_crop is not None
            px, py, crop = best_crop
            canvas[py : py + crop.shape[0], px : px + crop.shape[1]] = crop
            choices.append(
                CellChoice(
                    cell_x=cx,
                    cell_y=cy,
                    chosen_frame=best_rect.frame_id,
                    score=best_score,
                    candidates=len(candidates),
                )
            )
    return canvas, choices


def query_source(
    x: int,
    y: int,
    provenance: ProvenanceIndex,
    layout: MosaicLayout,
) -> list[tuple[str, int, int]]:
    """All source frames covering canvas pixel (x, y) with their local coords.

    Results are chronological; local coordinates satisfy
    ``local = global - placement``.  Background pixels yield an empty list.
    """
    hits = provenance.frames_at(x, y)
    out = []
    for r in hits:
        px, py = layout.placements[r.frame_id]
        out.append((r.frame_id, x - px, y - py))
    return out
