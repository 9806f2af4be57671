"""Grayscale frames, Sobel gradients, and Tenengrad focus scoring.

Everything here is exact integer arithmetic on 8-bit images: gradients are
signed 32-bit convolution sums, focus scores are plain Python ints.  The same
input always yields bit-identical scores, which is what makes frame selection
reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

DEFAULT_REGION_SIZE = 64
DEFAULT_GROUP_SIZE = 5

# 3x3 horizontal/vertical gradient kernels, applied as cross-correlation
# (+x to the right, +y downward).
SOBEL_KX = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int32)
SOBEL_KY = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.int32)


def as_grayscale(arr: np.ndarray) -> np.ndarray:
    """Validate that ``arr`` is a 2-D uint8 image and return it.

    Raises DataError for anything else; use :func:`to_grayscale` to convert
    color or non-uint8 inputs first.
    """
    a = np.asarray(arr)
    if a.ndim != 2:
        raise DataError(f"expected a 2-D grayscale image, got shape {a.shape}")
    if a.dtype != np.uint8:
        raise DataError(f"expected uint8 pixel data, got {a.dtype}")
    return a


def to_grayscale(arr: np.ndarray) -> np.ndarray:
    """Convert an image array to 2-D uint8 grayscale.

    Color input is reduced with rounded integer BT.601 luma
    (299 R + 587 G + 114 B) / 1000; an alpha channel, if present, is ignored.
    Non-uint8 grayscale input is clipped into [0, 255] and rounded.
    """
    a = np.asarray(arr)
    if a.ndim == 3:
        if a.shape[2] not in (3, 4):
            raise DataError(f"cannot interpret {a.shape[2]}-channel image as color")
        rgb = a[:, :, :3].astype(np.int64)
        luma = (299 * rgb[:, :, 0] + 587 * rgb[:, :, 1] + 114 * rgb[:, :, 2] + 500) // 1000
        return luma.astype(np.uint8)
    if a.ndim != 2:
        raise DataError(f"expected a 2-D or 3-D image array, got shape {a.shape}")
    if a.dtype == np.uint8:
        return a
    return np.clip(np.rint(a.astype(np.float64)), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle, top-left origin, inclusive of (x, y)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise DataError(f"rect origin must be non-negative, got ({self.x}, {self.y})")
        if self.w < 1 or self.h < 1:
            raise DataError(f"rect extent must be at least 1x1, got {self.w}x{self.h}")

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    def fits_within(self, width: int, height: int) -> bool:
        return self.right <= width and self.bottom <= height


@dataclass
class GradientField:
    """Sobel responses over the valid-convolution interior of an image.

    ``gx``/``gy`` have shape (height-2, width-2); entry (r, c) is the
    response centered at source pixel (r+1, c+1).  With 8-bit input each
    entry is bounded by 4*255 in magnitude.
    """

    width: int
    height: int
    gx: np.ndarray
    gy: np.ndarray


@dataclass
class FrameRecord:
    """One grayscale source frame of a sweep."""

    id: str
    index: int
    image: np.ndarray
    path: str | None = None

    @property
    def width(self) -> int:
        return int(self.image.shape[1])

    @property
    def height(self) -> int:
        return int(self.image.shape[0])


def sobel_gradients(img: np.ndarray) -> GradientField:
    """Exact integer Sobel gradients of ``img`` (valid convolution).

    The one-pixel border is excluded rather than padded, so every response is
    computed purely from real pixels.
    """
    a = as_grayscale(img).astype(np.int32)
    h, w = a.shape
    if h < 3 or w < 3:
        raise DataError(f"image must be at least 3x3 for gradients, got {w}x{h}")
    gx = (
        (a[:-2, 2:] + 2 * a[1:-1, 2:] + a[2:, 2:])
        - (a[:-2, :-2] + 2 * a[1:-1, :-2] + a[2:, :-2])
    )
    gy = (
        (a[2:, :-2] + 2 * a[2:, 1:-1] + a[2:, 2:])
        - (a[:-2, :-2] + 2 * a[:-2, 1:-1] + a[:-2, 2:])
    )
    return GradientField(width=w, height=h, gx=gx, gy=gy)


def tenengrad_region(img: np.ndarray, region: Rect) -> int:
    """Sum of squared Sobel gradient magnitudes over a region's interior.

    The score is the sum of gx^2 + gy^2 at every valid-convolution pixel of
    the region (its one-pixel border contributes gradients only as neighbor
    data).  Constant regions score 0; the score only grows with local
    contrast, which is what makes it a focus measure.
    """
    a = as_grayscale(img)
    h, w = a.shape
    if not region.fits_within(w, h):
        raise DataError(
            f"region {region} exceeds image bounds {w}x{h}"
        )
    if region.w < 3 or region.h < 3:
        raise DataError(f"region must be at least 3x3, got {region.w}x{region.h}")
    g = sobel_gradients(a[region.y : region.bottom, region.x : region.right])
    gx = g.gx.astype(np.int64)
    gy = g.gy.astype(np.int64)
    return int((gx * gx + gy * gy).sum())


def image_focus_value(img: np.ndarray, region_size: int = DEFAULT_REGION_SIZE) -> int:
    """Focus value of a whole frame: the best Tenengrad score over a square tiling.

    The frame is tiled into non-overlapping ``region_size`` squares (trailing
    partial strips are dropped) and the maximum region score is returned.
    Taking the max means a frame is judged by its best-textured patch, so a
    frame that is sharp on tissue is not penalized for featureless rim areas.
    """
    if region_size < 3:
        raise DataError(f"region_size must be at least 3, got {region_size}")
    a = as_grayscale(img)
    h, w = a.shape
    tiles_x = w // region_size
    tiles_y = h // region_size
    if tiles_x == 0 or tiles_y == 0:
        raise DataError(
            f"image {w}x{h} is smaller than one {region_size}x{region_size} region"
        )
    g = sobel_gradients(a)
    gx = g.gx.astype(np.int64)
    gy = g.gy.astype(np.int64)
    g2 = gx * gx + gy * gy
    best = 0
    for ty in range(tiles_y):
        for tx in range(tiles_x):
            # Gradient entry (r, c) sits at source pixel (r+1, c+1), so the
            # tile interior is exactly this (region_size-2)^2 slice.
            x0 = tx * region_size
            y0 = ty * region_size
            score = int(g2[y0 : y0 + region_size - 2, x0 : x0 + region_size - 2].sum())
            if score > best:
                best = score
    return best


def select_focused_frames(
    frames: Sequence[FrameRecord] | Iterable[FrameRecord],
    group_size: int = DEFAULT_GROUP_SIZE,
    region_size: int = DEFAULT_REGION_SIZE,
) -> list[FrameRecord]:
    """Pick the sharpest frame from each consecutive window of ``group_size``.

    Frames must be in chronological order.  The last window may be short.
    Within a window, ties go to the lowest chronological index, so selection
    is deterministic.  An empty input yields an empty list.
    """
    if group_size < 1:
        raise DataError(f"group_size must be at least 1, got {group_size}")
    frame_list = list(frames)
    indices = [f.index for f in frame_list]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise DataError("frame indices must be strictly increasing")
    selected: list[FrameRecord] = []
    for start in range(0, len(frame_list), group_size):
        window = frame_list[start : start + group_size]
        best = window[0]
        best_score = image_focus_value(best.image, region_size)
        for frame in window[1:]:
            score = image_focus_value(frame.image, region_size)
            if score > best_score:
                best, best_score = frame, score
        selected.append(best)
    return selected
