"""Procedural endothelium-like scenes and simulated camera sweeps.

A scene is a jittered hexagonal tessellation inside a circular tissue disc:
bright polygonal cells separated by darker membrane lines, with a handful of
dark elliptical blobs (the segmentation targets) recorded in a ground-truth
mask.  A sweep crops the scene along a waypoint path in small integer steps,
optionally degrading individual frames (blur, brightness shift, sensor noise,
dropout), while logging the exact crop origins.  Those logged origins are
what make registration quantitatively checkable: a registration run can be
scored in pixels instead of by eyeballing the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import cv2
import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError
from .imaging import FrameRecord
from .registration import MosaicLayout


@dataclass
class SceneSpec:
    """Parameters of a generated scene; every value has a sane default."""

    canvas_w: int = 1870
    canvas_h: int = 1080
    cell_pitch: float = 24.0          # mean cell diameter in pixels
    pitch_jitter: float = 0.35        # lattice jitter as a fraction of the pitch
    membrane_width: float = 2.0
    membrane_intensity: int = 70
    cell_base_intensity: int = 150
    cell_intensity_jitter: int = 25
    guttae_count: int = 40
    guttae_radius_range: tuple[float, float] = (4.0, 12.0)
    cornea_radius: float = 500.0
    rng_seed: int = 0

    def validate(self) -> None:
        if self.canvas_w < 8 or self.canvas_h < 8:
            raise DataError(f"canvas too small: {self.canvas_w}x{self.canvas_h}")
        if self.cornea_radius <= 0:
            raise DataError("cornea_radius must be positive")
        if 2 * self.cornea_radius > min(self.canvas_w, self.canvas_h):
            raise DataError("cornea circle does not fit inside the canvas")
        if self.cell_pitch < 3:
            raise DataError("cell_pitch must be at least 3 pixels")
        lo, hi = self.guttae_radius_range
        if lo <= 0 or hi < lo:
            raise DataError(f"invalid guttae_radius_range {self.guttae_radius_range}")
        if self.guttae_count < 0:
            raise DataError("guttae_count must be non-negative")


@dataclass
class SceneTruth:
    """Rendered scene plus its ground-truth blob mask."""

    image: np.ndarray
    guttae_mask: np.ndarray
    spec: SceneSpec


@dataclass
class DegradationSpec:
    """Optional per-frame degradations applied during a sweep."""

    blur_fraction: float = 0.0
    blur_sigma_range: tuple[float, float] = (1.0, 2.0)
    brightness_offset_range: tuple[int, int] = (0, 0)
    noise_sigma: float = 0.0
    dropout: float = 0.0


@dataclass
class SweepSpec:
    """Camera-sweep parameters: crop size, step, path, degradations."""

    crop_w: int = 512
    crop_h: int = 512
    step: int = 10
    path: list[tuple[int, int]] | None = None   # crop-origin waypoints; None = default
    degradations: DegradationSpec | None = None
    rng_seed: int = 0


@dataclass
class SweepTruth:
    """Sweep frames with their exact pre-degradation crop origins."""

    frames: list[FrameRecord]
    truth_offsets: dict[str, tuple[int, int]]
    degradation_log: dict[str, dict]


@dataclass
class RegistrationReport:
    """Pixel-level comparison of a layout against sweep ground truth."""

    errors: dict[str, tuple[int, int]]   # per used frame, signed (ex, ey)
    mean_abs_err: float                  # mean of |ex| + |ey| over used frames
    max_err: int                         # max of |ex| + |ey|
    used_fraction: float
    coverage_fraction: float


def _hex_seeds(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    """Jittered hexagonal lattice points covering the tissue disc."""
    pitch = spec.cell_pitch
    row_step = pitch * math.sqrt(3) / 2
    cx, cy = spec.canvas_w / 2, spec.canvas_h / 2
    reach = spec.cornea_radius + pitch
    pts = []
    row = 0
    y = cy - reach
    while y <= cy + reach:
        offset = (pitch / 2) if (row % 2) else 0.0
        x = cx - reach + offset
        while x <= cx + reach:
            pts.append((x, y))
            x += pitch
        y += row_step
        row += 1
    seeds = np.asarray(pts, dtype=np.float64)
    seeds += rng.uniform(-spec.pitch_jitter * pitch, spec.pitch_jitter * pitch, seeds.shape)
    keep = np.hypot(seeds[:, 0] - cx, seeds[:, 1] - cy) <= reach
    return seeds[keep]


def _place_guttae(
    spec: SceneSpec, rng: np.random.Generator
) -> list[tuple[float, float, float, float, float]]:
    """Non-overlapping ellipses (cx, cy, a, b, theta) inside the disc."""
    lo, hi = spec.guttae_radius_range
    cx, cy = spec.canvas_w / 2, spec.canvas_h / 2
    blobs: list[tuple[float, float, float, float, float]] = []
    for _ in range(spec.guttae_count):
        for attempt in range(500):
            a = float(rng.uniform(lo, hi))
            b = float(rng.uniform(lo, hi))
            theta = float(rng.uniform(0, math.pi))
            r_max = max(a, b)
            margin = spec.cornea_radius - r_max - 2
            if margin <= 0:
                raise DataError("guttae radius too large for the tissue disc")
            rad = margin * math.sqrt(float(rng.uniform(0, 1)))
            ang = float(rng.uniform(0, 2 * math.pi))
            gx = cx + rad * math.cos(ang)
            gy = cy + rad * math.sin(ang)
            ok = all(
                math.hypot(gx - ox, gy - oy) > r_max + max(oa, ob) + 2
                for ox, oy, oa, ob, _ in blobs
            )
            if ok:
                blobs.append((gx, gy, a, b, theta))
                break
        else:
            raise DataError(
                "could not place guttae without overlap; lower guttae_count or radii"
            )
    return blobs


def generate_scene(spec: SceneSpec) -> SceneTruth:
    """Render a scene and its blob mask, fully determined by the spec's seed."""
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    w, h = spec.canvas_w, spec.canvas_h
    cx, cy = w / 2, h / 2

    seeds = _hex_seeds(spec, rng)
    # Per-cell intensity; 0 is reserved for background and blobs.
    jitter = spec.cell_intensity_jitter
    cell_colors = np.clip(
        spec.cell_base_intensity + rng.integers(-jitter, jitter + 1, len(seeds)), 1, 255
    ).astype(np.uint8)

    ys, xs = np.mgrid[0:h, 0:w]
    inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= spec.cornea_radius**2
    pix = np.column_stack([xs[inside], ys[inside]]).astype(np.float64)

    tree = cKDTree(seeds)
    dists, idx = tree.query(pix, k=2)
    membrane = (dists[:, 1] - dists[:, 0]) <= spec.membrane_width
    values = cell_colors[idx[:, 0]].copy()
    values[membrane] = max(1, spec.membrane_intensity)

    image = np.zeros((h, w), dtype=np.uint8)
    image[inside] = values

    mask = np.zeros((h, w), dtype=np.uint8)
    for gx, gy, a, b, theta in _place_guttae(spec, rng):
        r = math.ceil(max(a, b)) + 1
        x0, x1 = max(0, int(gx) - r), min(w, int(gx) + r + 1)
        y0, y1 = max(0, int(gy) - r), min(h, int(gy) + r + 1)
        yy, xx = np.mgrid[y0:y1, x0:x1]
        dx = xx - gx
        dy = yy - gy
        u = dx * math.cos(theta) + dy * math.sin(theta)
        v = -dx * math.sin(theta) + dy * math.cos(theta)
        hit = (u / a) ** 2 + (v / b) ** 2 <= 1.0
        image[y0:y1, x0:x1][hit] = 0
        mask[y0:y1, x0:x1][hit] = 255

    return SceneTruth(image=image, guttae_mask=mask, spec=spec)


def default_sweep_path(
    scene_w: int, scene_h: int, crop_w: int, crop_h: int
) -> list[tuple[int, int]]:
    """Center -> top -> counterclockwise rim loop -> straight down to bottom.

    Waypoints are crop origins, guaranteed to stay inside the valid origin
    box of the scene.
    """
    max_x, max_y = scene_w - crop_w, scene_h - crop_h
    if max_x < 0 or max_y < 0:
        raise DataError(f"crop {crop_w}x{crop_h} exceeds scene {scene_w}x{scene_h}")
    cx, cy = max_x // 2, max_y // 2
    r = int(0.9 * min(cx, cy, max_x - cx, max_y - cy))
    path = [(cx, cy), (cx, cy - r)]
    for deg in range(120, 451, 30):
        phi = math.radians(deg)
        path.append((int(round(cx + r * math.cos(phi))), int(round(cy - r * math.sin(phi)))))
    path.append((cx, cy + r))
    return path


def spiral_sweep_path(
    scene_w: int, scene_h: int, crop_w: int, crop_h: int, turns: int = 2
) -> list[tuple[int, int]]:
    """Outward spiral from the center, for stress-testing longer chains."""
    max_x, max_y = scene_w - crop_w, scene_h - crop_h
    if max_x < 0 or max_y < 0:
        raise DataError(f"crop {crop_w}x{crop_h} exceeds scene {scene_w}x{scene_h}")
    cx, cy = max_x // 2, max_y // 2
    r_max = 0.9 * min(cx, cy, max_x - cx, max_y - cy)
    steps = turns * 12
    path = [(cx, cy)]
    for k in range(1, steps + 1):
        r = r_max * k / steps
        phi = 2 * math.pi * k / 12
        path.append((int(round(cx + r * math.cos(phi))), int(round(cy - r * math.sin(phi)))))
    return path


def _sample_path(path: Sequence[tuple[int, int]], step: int) -> list[tuple[int, int]]:
    """Integer origins along a piecewise-linear path, Chebyshev-spaced <= step."""
    def rha(v: float) -> int:
        return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))

    out = [tuple(int(c) for c in path[0])]
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        linf = max(abs(bx - ax), abs(by - ay))
        k = max(1, math.ceil(linf / step))
        for i in range(1, k + 1):
            p = (rha(ax + (bx - ax) * i / k), rha(ay + (by - ay) * i / k))
            if p != out[-1]:
                out.append(p)
    return out


def generate_sweep(scene: SceneTruth, sweep: SweepSpec) -> SweepTruth:
    """Crop frames along the sweep path, logging truth origins and degradations."""
    if sweep.step < 1:
        raise DataError(f"step must be at least 1, got {sweep.step}")
    h, w = scene.image.shape
    max_x, max_y = w - sweep.crop_w, h - sweep.crop_h
    if max_x < 0 or max_y < 0:
        raise DataError(f"crop {sweep.crop_w}x{sweep.crop_h} exceeds scene {w}x{h}")
    path = sweep.path or default_sweep_path(w, h, sweep.crop_w, sweep.crop_h)
    for x, y in path:
        if not (0 <= x <= max_x and 0 <= y <= max_y):
            raise DataError(f"waypoint ({x}, {y}) puts the crop out of bounds")

    origins = _sample_path(path, sweep.step)
    deg = sweep.degradations
    seed_root = np.random.SeedSequence(sweep.rng_seed)
    children = seed_root.spawn(len(origins))

    frames: list[FrameRecord] = []
    offsets: dict[str, tuple[int, int]] = {}
    log: dict[str, dict] = {}
    for i, (x, y) in enumerate(origins):
        fid = f"frame_{i:04d}"
        img = scene.image[y : y + sweep.crop_h, x : x + sweep.crop_w].copy()
        entry: dict = {"dropout": False, "blur_sigma": None, "brightness": 0, "noise_sigma": 0.0}
        if deg is not None:
            rng = np.random.default_rng(children[i])
            if deg.dropout > 0 and rng.random() < deg.dropout:
                img = rng.integers(0, 256, img.shape).astype(np.uint8)
                entry["dropout"] = True
            else:
                if deg.blur_fraction > 0 and rng.random() < deg.blur_fraction:
                    sigma = float(rng.uniform(*deg.blur_sigma_range))
                    img = cv2.GaussianBlur(img, (0, 0), sigma)
                    entry["blur_sigma"] = sigma
                lo, hi = deg.brightness_offset_range
                if (lo, hi) != (0, 0):
                    offset = int(rng.integers(lo, hi + 1))
                    img = np.clip(img.astype(np.int16) + offset, 0, 255).astype(np.uint8)
                    entry["brightness"] = offset
                if deg.noise_sigma > 0:
                    noise = np.rint(rng.normal(0, deg.noise_sigma, img.shape))
                    img = np.clip(img.astype(np.int16) + noise.astype(np.int16), 0, 255).astype(
                        np.uint8
                    )
                    entry["noise_sigma"] = float(deg.noise_sigma)
        frames.append(FrameRecord(id=fid, index=i, image=img))
        offsets[fid] = (x, y)
        log[fid] = entry
    return SweepTruth(frames=frames, truth_offsets=offsets, degradation_log=log)


def _union_area(
    rects: list[tuple[int, int, int, int]],
) -> int:
    """Union area of axis-aligned rects via rasterization on a shifted grid."""
    if not rects:
        return 0
    min_x = min(r[0] for r in rects)
    min_y = min(r[1] for r in rects)
    max_x = max(r[0] + r[2] for r in rects)
    max_y = max(r[1] + r[3] for r in rects)
    grid = np.zeros((max_y - min_y, max_x - min_x), dtype=bool)
    for x, y, rw, rh in rects:
        grid[y - min_y : y - min_y + rh, x - min_x : x - min_x + rw] = True
    return int(grid.sum())


def evaluate_registration(layout: MosaicLayout, truth: SweepTruth) -> RegistrationReport:
    """Score a layout against sweep ground truth.

    The layout is aligned to truth by the first (chronologically) used frame,
    then per-frame signed errors, their aggregates, the fraction of frames
    placed, and the covered-area fraction are reported.
    """
    if not layout.placements:
        raise DataError("cannot evaluate an empty layout")
    known = {f.id for f in truth.frames}
    unknown = set(layout.placements) - known
    if unknown:
        raise DataError(f"layout contains frames absent from truth: {sorted(unknown)}")
    dims = {f.id: (f.width, f.height) for f in truth.frames}
    used = [f.id for f in truth.frames if f.id in layout.placements]

    first = used[0]
    fx, fy = layout.placements[first]
    tx, ty = truth.truth_offsets[first]
    shift = (tx - fx, ty - fy)

    errors: dict[str, tuple[int, int]] = {}
    for fid in used:
        px, py = layout.placements[fid]
        ox, oy = truth.truth_offsets[fid]
        errors[fid] = (px + shift[0] - ox, py + shift[1] - oy)
    l1 = [abs(ex) + abs(ey) for ex, ey in errors.values()]
    truth_rects = [
        (truth.truth_offsets[f.id][0], truth.truth_offsets[f.id][1], f.width, f.height)
        for f in truth.frames
    ]
    placed_rects = [
        (layout.placements[fid][0] + shift[0], layout.placements[fid][1] + shift[1], *dims[fid])
        for fid in used
    ]
    truth_area = _union_area(truth_rects)
    return RegistrationReport(
        errors=errors,
        mean_abs_err=float(sum(l1) / len(l1)),
        max_err=int(max(l1)),
        used_fraction=len(used) / len(truth.frames),
        coverage_fraction=(_union_area(placed_rects) / truth_area) if truth_area else 0.0,
    )
