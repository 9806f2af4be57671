import numpy as np
import pytest

from endomosaic.errors import DataError
from endomosaic.imaging import (
    SOBEL_KX,
    SOBEL_KY,
    FrameRecord,
    Rect,
    image_focus_value,
    select_focused_frames,
    sobel_gradients,
    tenengrad_region,
    to_grayscale,
)

from conftest import reference_blur, textured
from oracles import focus_value_brute, sobel_brute, tenengrad_brute


def test_kernel_definitions():
    assert SOBEL_KX.tolist() == [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    assert SOBEL_KY.tolist() == [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]


def test_constant_image_has_zero_gradients():
    img = np.full((8, 9), 128, dtype=np.uint8)
    g = sobel_gradients(img)
    assert g.gx.shape == (6, 7)
    assert not g.gx.any()
    assert not g.gy.any()


def test_column_step_center_gradient():
    # Columns [0, 0, 255]: horizontal step only.  Hand convolution gives
    # gx = 255 + 510 + 255 = 1020 and gy = 0 at the center.
    img = np.array([[0, 0, 255]] * 3, dtype=np.uint8)
    g = sobel_gradients(img)
    assert g.gx[0, 0] == 1020
    assert g.gy[0, 0] == 0
    assert tenengrad_region(img, Rect(0, 0, 3, 3)) == 1040400


def test_gradients_match_bruteforce(rng):
    for seed in range(5):
        img = rng.integers(0, 256, size=(11 + seed, 9 + seed)).astype(np.uint8)
        g = sobel_gradients(img)
        bx, by = sobel_brute(img)
        assert np.array_equal(g.gx, bx)
        assert np.array_equal(g.gy, by)


def test_gradient_linearity(rng):
    # Convolution is linear, so gradients of a+b equal the sum of gradients
    # (no clipping possible with both operands <= 127).
    a = rng.integers(0, 128, size=(16, 16)).astype(np.uint8)
    b = rng.integers(0, 128, size=(16, 16)).astype(np.uint8)
    gs = sobel_gradients((a.astype(np.int32) + b.astype(np.int32)).astype(np.uint8))
    ga = sobel_gradients(a)
    gb = sobel_gradients(b)
    assert np.array_equal(gs.gx, ga.gx + gb.gx)
    assert np.array_equal(gs.gy, ga.gy + gb.gy)


def test_gradient_magnitude_bound(rng):
    img = rng.integers(0, 256, size=(32, 32)).astype(np.uint8)
    g = sobel_gradients(img)
    assert np.abs(g.gx).max() <= 4 * 255
    assert np.abs(g.gy).max() <= 4 * 255


def test_gradients_require_3x3():
    with pytest.raises(DataError):
        sobel_gradients(np.zeros((2, 5), dtype=np.uint8))


def test_tenengrad_matches_bruteforce(rng):
    for _ in range(100):
        img = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
        assert tenengrad_region(img, Rect(0, 0, 16, 16)) == tenengrad_brute(img, 0, 0, 16, 16)


def test_tenengrad_subregions(rng):
    img = rng.integers(0, 256, size=(24, 30)).astype(np.uint8)
    for rect in [Rect(0, 0, 5, 7), Rect(3, 2, 8, 8), Rect(20, 10, 10, 14)]:
        assert tenengrad_region(img, rect) == tenengrad_brute(img, rect.x, rect.y, rect.w, rect.h)


def test_tenengrad_interior_additivity(rng):
    # The region score is a plain sum over interior pixels, so it must equal
    # the per-pixel brute-force accumulation (same partition, no overlap).
    img = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
    gx, gy = sobel_brute(img)
    per_pixel = sum(
        int(gx[r, c]) ** 2 + int(gy[r, c]) ** 2
        for r in range(14)
        for c in range(14)
    )
    assert tenengrad_region(img, Rect(0, 0, 16, 16)) == per_pixel


def test_tenengrad_constant_region_is_zero():
    img = np.full((20, 20), 77, dtype=np.uint8)
    assert tenengrad_region(img, Rect(2, 2, 10, 10)) == 0


def test_tenengrad_rejects_bad_regions():
    img = np.zeros((10, 10), dtype=np.uint8)
    with pytest.raises(DataError):
        tenengrad_region(img, Rect(5, 5, 6, 6))
    with pytest.raises(DataError):
        tenengrad_region(img, Rect(0, 0, 2, 5))


def test_blur_lowers_tenengrad():
    img = textured(64, 64, seed=3)
    blurred = reference_blur(img, 2.0)
    rect = Rect(0, 0, 64, 64)
    assert tenengrad_region(img, rect) >= tenengrad_region(blurred, rect)


def test_focus_value_uniform_is_zero():
    assert image_focus_value(np.full((128, 128), 9, dtype=np.uint8), 64) == 0


def test_focus_value_single_textured_tile():
    img = np.full((128, 128), 100, dtype=np.uint8)
    patch = textured(64, 64, seed=7)
    img[64:128, 0:64] = patch
    v = image_focus_value(img, 64)
    # The textured tile dominates; its region score includes boundary
    # contamination from the constant surround only outside the tile, which
    # the tiling never sees.
    assert v == tenengrad_region(img, Rect(0, 64, 64, 64))
    assert v > 0


def test_focus_value_matches_enumeration(rng):
    for seed in range(3):
        img = textured(130, 97, seed=seed)
        assert image_focus_value(img, 32) == focus_value_brute(img, 32)


def test_focus_value_too_small():
    with pytest.raises(DataError):
        image_focus_value(np.zeros((40, 80), dtype=np.uint8), 64)
    with pytest.raises(DataError):
        image_focus_value(np.zeros((80, 80), dtype=np.uint8), 2)


def test_focus_monotone_under_blur():
    for seed in range(6):
        img = textured(96, 96, seed=seed)
        scores = [image_focus_value(reference_blur(img, s), 32) for s in (0, 1, 2, 4)]
        for a, b in zip(scores, scores[1:]):
            assert b <= a
            if a > 0:
                assert b < a


def _frames(images: list[np.ndarray]) -> list[FrameRecord]:
    return [FrameRecord(id=f"f{i:03d}", index=i, image=img) for i, img in enumerate(images)]


def test_select_window_counts():
    frames = _frames([textured(64, 64, seed=s) for s in range(10)])
    assert len(select_focused_frames(frames, group_size=5, region_size=32)) == 2
    assert len(select_focused_frames(frames, group_size=3, region_size=32)) == 4
    assert select_focused_frames([], group_size=5) == []


def test_select_tie_breaks_to_first():
    img = textured(64, 64, seed=0)
    frames = _frames([img.copy() for _ in range(7)])
    picked = select_focused_frames(frames, group_size=3, region_size=32)
    assert [f.index for f in picked] == [0, 3, 6]


def test_select_prefers_unblurred(rng):
    base = textured(96, 96, seed=11)
    images = []
    sharp_positions = set()
    for w in range(4):
        pos = int(rng.integers(0, 5))
        sharp_positions.add(w * 5 + pos)
        for k in range(5):
            images.append(base.copy() if k == pos else reference_blur(base, 2.0))
    picked = select_focused_frames(_frames(images), group_size=5, region_size=32)
    assert {f.index for f in picked} == sharp_positions


def test_select_recheck_against_oracle(rng):
    frames = _frames([textured(70, 70, seed=100 + s) for s in range(9)])
    picked = select_focused_frames(frames, group_size=4, region_size=32)
    assert len(picked) == 3  # ceil(9 / 4)
    for w, frame in enumerate(picked):
        window = frames[w * 4 : (w + 1) * 4]
        best = max(focus_value_brute(f.image, 32) for f in window)
        assert focus_value_brute(frame.image, 32) == best


def test_select_validates_order_and_group():
    frames = _frames([textured(64, 64, seed=s) for s in range(3)])
    frames[2].index = 1
    with pytest.raises(DataError):
        select_focused_frames(frames)
    with pytest.raises(DataError):
        select_focused_frames([], group_size=0)


def test_to_grayscale_luma():
    rgb = np.zeros((2, 2, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 0, 0)
    rgb[0, 1] = (0, 255, 0)
    rgb[1, 0] = (0, 0, 255)
    rgb[1, 1] = (255, 255, 255)
    g = to_grayscale(rgb)
    # Rounded integer BT.601 weights out of 1000.
    assert g.tolist() == [[76, 150], [29, 255]]


def test_to_grayscale_passthrough_and_errors():
    img = np.arange(9, dtype=np.uint8).reshape(3, 3)
    assert to_grayscale(img) is img
    with pytest.raises(DataError):
        to_grayscale(np.zeros((3, 3, 2), dtype=np.uint8))
