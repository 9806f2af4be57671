"""Feature-based translation registration and the two frame-chaining strategies.

The alignment model is integer translation only: pasted frames are never
rotated, scaled, or resampled, so every mosaic pixel stays bit-identical to a
source pixel.  Features are OpenCV SIFT keypoints/descriptors; matching is a
ratio test plus a symmetric cross-check; the per-pair translation consensus is
a median vote with a Chebyshev inlier band.

Two chaining strategies are provided:

* :func:`chain_register` walks the sequence keeping the anchor at the latest
  placed frame and advancing the candidate past unmatched frames.
* :func:`reference_stitch_register` matches each candidate against the union
  of the most recently placed frames (a growing-mosaic view) and stops after
  a run of consecutive failures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import cv2
import numpy as np

from .errors import DataError, RegistrationError
from .imaging import FrameRecord, as_grayscale

DEFAULT_RATIO = 0.75
DEFAULT_MIN_INLIERS = 10
DEFAULT_INLIER_TOL = 2
DEFAULT_MAX_FAILURES = 10
DEFAULT_RECENT_FRAMES = 3

DESCRIPTOR_NAME = "opencv-sift"
MIN_FEATURE_IMAGE = 16


@dataclass
class FeatureSet:
    """Keypoint positions (n, 2) float32 and their descriptors (n, d) float32."""

    keypoints: np.ndarray
    descriptors: np.ndarray

    def __len__(self) -> int:
        return int(self.keypoints.shape[0])


@dataclass(frozen=True)
class MatchPair:
    """One descriptor match.

    ``src`` is the keypoint in the image being placed (the candidate) and
    ``dst`` the matching keypoint in the reference it is matched against, so
    ``dst - src`` is the paste offset the pair votes for.
    """

    src: tuple[float, float]
    dst: tuple[float, float]
    distance: float


@dataclass(frozen=True)
class TranslationLink:
    """Accepted offset of a candidate frame relative to an anchor frame."""

    anchor_id: str
    candidate_id: str
    dx: int
    dy: int
    inliers: int
    total_matches: int


@dataclass
class RegistrationResult:
    """Chain of accepted links plus which frames were placed or skipped."""

    links: list[TranslationLink]
    used_ids: list[str]
    skipped_ids: list[str]


@dataclass
class MosaicLayout:
    """Global integer placements normalized so min x = min y = 0."""

    placements: dict[str, tuple[int, int]]
    canvas_w: int
    canvas_h: int


def _empty_features() -> FeatureSet:
    return FeatureSet(
        keypoints=np.zeros((0, 2), dtype=np.float32),
        descriptors=np.zeros((0, 128), dtype=np.float32),
    )


def extract_features(img: np.ndarray, nfeatures: int = 0) -> FeatureSet:
    """SIFT keypoints and descriptors; empty for images with no local structure.

    Images smaller than 16x16 yield an empty set rather than an error.
    Deterministic for a fixed image and ``nfeatures``.
    """
    a = as_grayscale(img)
    if a.shape[0] < MIN_FEATURE_IMAGE or a.shape[1] < MIN_FEATURE_IMAGE:
        return _empty_features()
    sift = cv2.SIFT_create(nfeatures=nfeatures)
    keypoints, descriptors = sift.detectAndCompute(a, None)
    if not keypoints:
        return _empty_features()
    pts = np.array([kp.pt for kp in keypoints], dtype=np.float32)
    return FeatureSet(keypoints=pts, descriptors=np.asarray(descriptors, dtype=np.float32))


def _ratio_matches(
    query: np.ndarray, train: np.ndarray, ratio: float
) -> dict[int, tuple[int, float]]:
    """Best match per query index passing the ratio test: {qi: (ti, dist)}."""
    matcher = cv2.BFMatcher(cv2.NORM_L2)
    k = 2 if train.shape[0] >= 2 else 1
    out: dict[int, tuple[int, float]] = {}
    for cand in matcher.knnMatch(query, train, k=k):
        if not cand:
            continue
        best = cand[0]
        if len(cand) == 1 or best.distance < ratio * cand[1].distance:
            out[best.queryIdx] = (best.trainIdx, float(best.distance))
    return out


def match_features(a: FeatureSet, b: FeatureSet, ratio: float = DEFAULT_RATIO) -> list[MatchPair]:
    """Ratio-tested nearest-neighbor matches from ``a`` to ``b``, cross-checked.

    A pair survives only if a's best neighbor in b and b's best neighbor in a
    agree.  Returns pairs with ``src`` drawn from ``a`` and ``dst`` from ``b``.
    """
    if not 0 < ratio < 1:
        raise DataError(f"ratio must lie in (0, 1), got {ratio}")
    if len(a) == 0 or len(b) == 0:
        return []
    forward = _ratio_matches(a.descriptors, b.descriptors, ratio)
    backward = _ratio_matches(b.descriptors, a.descriptors, ratio)
    pairs: list[MatchPair] = []
    for qi in sorted(forward):
        ti, dist = forward[qi]
        back = backward.get(ti)
        if back is not None and back[0] == qi:
            pairs.append(
                MatchPair(
                    src=(float(a.keypoints[qi, 0]), float(a.keypoints[qi, 1])),
                    dst=(float(b.keypoints[ti, 0]), float(b.keypoints[ti, 1])),
                    distance=dist,
                )
            )
    return pairs


def _round_half_away(v: float) -> int:
    if v >= 0:
        return int(np.floor(v + 0.5))
    return -int(np.floor(-v + 0.5))


def estimate_translation(
    pairs: Sequence[MatchPair],
    inlier_tol: int = DEFAULT_INLIER_TOL,
    min_inliers: int = DEFAULT_MIN_INLIERS,
    anchor_id: str = "",
    candidate_id: str = "",
) -> TranslationLink | None:
    """Median-consensus translation over pair displacements, or None.

    The candidate offset is the component-wise median of ``dst - src``
    (rounded half away from zero); pairs within Chebyshev distance
    ``inlier_tol`` of it are inliers.  The link is accepted only with at
    least ``min_inliers`` support, and its dx/dy are re-estimated as the
    rounded mean over the inliers.
    """
    if inlier_tol < 0:
        raise DataError(f"inlier_tol must be non-negative, got {inlier_tol}")
    if not pairs:
        return None
    deltas = np.array(
        [(p.dst[0] - p.src[0], p.dst[1] - p.src[1]) for p in pairs], dtype=np.float64
    )
    cand_x = _round_half_away(float(np.median(deltas[:, 0])))
    cand_y = _round_half_away(float(np.median(deltas[:, 1])))
    cheb = np.maximum(np.abs(deltas[:, 0] - cand_x), np.abs(deltas[:, 1] - cand_y))
    inlier_mask = cheb <= inlier_tol
    n_inliers = int(inlier_mask.sum())
    if n_inliers < min_inliers:
        return None
    dx = _round_half_away(float(deltas[inlier_mask, 0].mean()))
    dy = _round_half_away(float(deltas[inlier_mask, 1].mean()))
    return TranslationLink(
        anchor_id=anchor_id,
        candidate_id=candidate_id,
        dx=dx,
        dy=dy,
        inliers=n_inliers,
        total_matches=len(pairs),
    )


def _check_sequence(frames: Sequence[FrameRecord]) -> None:
    if len(frames) < 2:
        raise DataError(f"registration needs at least 2 frames, got {len(frames)}")
    indices = [f.index for f in frames]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise DataError("frame indices must be strictly increasing")


class _FeatureCache:
    def __init__(self, frames: Sequence[FrameRecord], nfeatures: int) -> None:
        self.frames = frames
        self.nfeatures = nfeatures
        self._cache: dict[int, FeatureSet] = {}

    def __call__(self, i: int) -> FeatureSet:
        fs = self._cache.get(i)
        if fs is None:
            fs = extract_features(self.frames[i].image, self.nfeatures)
            self._cache[i] = fs
        return fs


def chain_register(
    frames: Sequence[FrameRecord] | Iterable[FrameRecord],
    max_failures: int = DEFAULT_MAX_FAILURES,
    *,
    ratio: float = DEFAULT_RATIO,
    min_inliers: int = DEFAULT_MIN_INLIERS,
    inlier_tol: int = DEFAULT_INLIER_TOL,
    nfeatures: int = 0,
) -> RegistrationResult:
    """Anchor/candidate scan over the sequence.

    The anchor sits at the latest placed frame; the candidate advances past
    frames that fail to match (they end up skipped).  While nothing has been
    placed yet, exhausting the failure budget restarts the scan from the next
    frame, so a garbage opening frame cannot poison the whole run.  Once a
    chain exists, exhausting the budget ends the scan with a partial result:
    a link can only hang off a placed anchor, so re-anchoring on an unplaced
    frame would disconnect the chain.
    """
    frames = list(frames)
    _check_sequence(frames)
    features = _FeatureCache(frames, nfeatures)
    n = len(frames)

    def try_link(anchor_i: int, cand_i: int) -> TranslationLink | None:
        pairs = match_features(features(cand_i), features(anchor_i), ratio)
        return estimate_translation(
            pairs,
            inlier_tol,
            min_inliers,
            anchor_id=frames[anchor_i].id,
            candidate_id=frames[cand_i].id,
        )

    links: list[TranslationLink] = []
    placed: list[int] = []
    anchor, cand, errors = 0, 1, 0
    while cand < n:
        link = try_link(anchor, cand)
        if link is not None:
            if not placed:
                placed.append(anchor)
            links.append(link)
            placed.append(cand)
            anchor, cand, errors = cand, cand + 1, 0
            continue
        errors += 1
        if errors >= max_failures:
            if links:
                break
            anchor, cand, errors = anchor + 1, anchor + 2, 0
        else:
            cand += 1
        if not links and cand >= n and anchor < n - 2:
            # Bootstrap scan ran off the end: restart from the next frame.
            anchor, cand, errors = anchor + 1, anchor + 2, 0

    if not links:
        raise RegistrationError("no frame pair could be registered")
    placed_set = set(placed)
    return RegistrationResult(
        links=links,
        used_ids=[frames[i].id for i in placed],
        skipped_ids=[f.id for i, f in enumerate(frames) if i not in placed_set],
    )


def reference_stitch_register(
    frames: Sequence[FrameRecord] | Iterable[FrameRecord],
    max_failures: int = DEFAULT_MAX_FAILURES,
    recent_frames: int = DEFAULT_RECENT_FRAMES,
    *,
    ratio: float = DEFAULT_RATIO,
    min_inliers: int = DEFAULT_MIN_INLIERS,
    inlier_tol: int = DEFAULT_INLIER_TOL,
    nfeatures: int = 0,
) -> RegistrationResult:
    """Growing-mosaic scan: candidates match against recently placed content.

    Each candidate is matched against the pooled features of the most recent
    ``recent_frames`` placed frames, with keypoints lifted into mosaic
    coordinates, so a candidate that overlaps any recent part of the mosaic
    can be placed even if it misses the immediately previous frame.  Matching
    runs per anchor frame (the same physical feature appears in several
    overlapping anchors, and near-duplicate descriptors in one pool would
    defeat the ratio test); all pairs then vote in one shared consensus.  The
    scan ends once more than ``max_failures`` consecutive candidates fail.
    """
    frames = list(frames)
    _check_sequence(frames)
    if recent_frames < 1:
        raise DataError(f"recent_frames must be at least 1, got {recent_frames}")
    features = _FeatureCache(frames, nfeatures)
    n = len(frames)

    links: list[TranslationLink] = []
    placed: list[tuple[int, tuple[int, int]]] = []  # (frame index, mosaic position)
    seed = 0
    cand = 1
    failures = 0

    def anchors() -> list[tuple[int, tuple[int, int]]]:
        return placed[-recent_frames:] if placed else [(seed, (0, 0))]

    def try_place(cand_i: int) -> tuple[tuple[int, int], TranslationLink] | None:
        active = anchors()
        cand_fs = features(cand_i)
        if len(cand_fs) == 0:
            return None
        all_pairs: list[MatchPair] = []
        owners: list[int] = []
        for i, pos in active:
            fs = features(i)
            if len(fs) == 0:
                continue
            lifted = FeatureSet(
                keypoints=fs.keypoints + np.array(pos, dtype=np.float32),
                descriptors=fs.descriptors,
            )
            pairs = match_features(cand_fs, lifted, ratio)
            all_pairs.extend(pairs)
            owners.extend([i] * len(pairs))
        est = estimate_translation(all_pairs, inlier_tol, min_inliers)
        if est is None:
            return None
        pos = (est.dx, est.dy)  # consensus of dst - src is the mosaic position

        # Attribute the link to the anchor frame contributing the most
        # inliers (ties to the lowest chronological index).
        counts: dict[int, int] = {}
        for p, own in zip(all_pairs, owners):
            delta = (p.dst[0] - p.src[0], p.dst[1] - p.src[1])
            if max(abs(delta[0] - pos[0]), abs(delta[1] - pos[1])) <= inlier_tol:
                counts[own] = counts.get(own, 0) + 1
        if not counts:
            counts = {own: owners.count(own) for own in set(owners)}
        best_anchor = min(counts, key=lambda i: (-counts[i], frames[i].index))
        anchor_pos = dict(active)[best_anchor]
        link = TranslationLink(
            anchor_id=frames[best_anchor].id,
            candidate_id=frames[cand_i].id,
            dx=pos[0] - anchor_pos[0],
            dy=pos[1] - anchor_pos[1],
            inliers=est.inliers,
            total_matches=est.total_matches,
        )
        return pos, link

    while cand < n:
        placed_now = try_place(cand)
        if placed_now is not None:
            pos, link = placed_now
            if not placed:
                placed.append((seed, (0, 0)))
            placed.append((cand, pos))
            links.append(link)
            cand += 1
            failures = 0
            continue
        failures += 1
        if failures > max_failures:
            if links:
                break
            # Nothing placed yet: restart with the next frame as the seed.
            seed, cand, failures = seed + 1, seed + 2, 0
        else:
            cand += 1
        if not links and cand >= n and seed < n - 2:
            seed, cand, failures = seed + 1, seed + 2, 0

    if not links:
        raise RegistrationError("no frame pair could be registered")
    placed_idx = [i for i, _ in placed]
    placed_set = set(placed_idx)
    return RegistrationResult(
        links=links,
        used_ids=[frames[i].id for i in placed_idx],
        skipped_ids=[f.id for i, f in enumerate(frames) if i not in placed_set],
    )


def globalize(
    result: RegistrationResult, frame_dims: Mapping[str, tuple[int, int]]
) -> MosaicLayout:
    """Propagate link offsets into global placements with min x = min y = 0.

    The first placed frame starts at (0, 0); each link adds its (dx, dy) to
    its anchor's position.  Every link's anchor must already have a position
    (the chain property), otherwise the layout is undefined.
    """
    if not result.used_ids:
        raise DataError("cannot globalize an empty registration result")
    positions: dict[str, tuple[int, int]] = {result.used_ids[0]: (0, 0)}
    for link in result.links:
        if link.anchor_id not in positions:
            raise DataError(
                f"disconnected chain: link anchor {link.anchor_id!r} has no position"
            )
        if link.candidate_id in positions:
            raise DataError(f"frame {link.candidate_id!r} placed twice")
        ax, ay = positions[link.anchor_id]
        positions[link.candidate_id] = (ax + link.dx, ay + link.dy)
    for fid in result.used_ids:
        if fid not in positions:
            raise DataError(f"used frame {fid!r} is not reachable from the chain root")
        if fid not in frame_dims:
            raise DataError(f"missing dimensions for frame {fid!r}")

    min_x = min(x for x, _ in positions.values())
    min_y = min(y for _, y in positions.values())
    placements = {fid: (x - min_x, y - min_y) for fid, (x, y) in positions.items()}
    canvas_w = max(x + frame_dims[fid][0] for fid, (x, y) in placements.items())
    canvas_h = max(y + frame_dims[fid][1] for fid, (x, y) in placements.items())
    return MosaicLayout(placements=placements, canvas_w=canvas_w, canvas_h=canvas_h)
