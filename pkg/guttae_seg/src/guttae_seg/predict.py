"""Inference helpers: per-tile probabilities, binarization, Dice."""

from __future__ import annotations

import numpy as np
import torch


def predict_arrays(model: torch.nn.Module, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Per-pixel probabilities for (N, 1, H, W) or (N, H, W) float input in [0, 1].

    Returns (N, H, W) float32 in [0, 1].
    """
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[:, None, :, :]
    if arr.ndim != 4 or arr.shape[1] != 1:
        raise ValueError(f"expected (N, 1, H, W) tiles, got shape {arr.shape}")
    model.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, arr.shape[0], batch_size):
            batch = torch.from_numpy(arr[start : start + batch_size])
            outs.append(model(batch)[:, 0].numpy())
    return np.concatenate(outs) if outs else np.zeros((0,) + arr.shape[2:], np.float32)


def predict_tiles(
    model: torch.nn.Module,
    tiles: np.ndarray,
    tile_size: tuple[int, int],
    threshold: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities and binary masks for uint8 tiles of the trained size.

    ``tiles`` is (N, H, W) uint8; returns (probs, binary) where binary is
    uint8 {0, 255}.  Tiles whose dimensions differ from the training size are
    rejected.
    """
    tiles = np.asarray(tiles)
    if tiles.ndim != 3:
        raise ValueError(f"expected (N, H, W) tiles, got shape {tiles.shape}")
    if tiles.shape[1:] != tuple(tile_size):
        raise ValueError(
            f"tile dimensions {tiles.shape[1:]} do not match the trained size {tuple(tile_size)}"
        )
    probs = predict_arrays(model, tiles.astype(np.float32) / 255.0)
    return probs, binarize(probs, threshold)


def binarize(probs: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Probabilities -> uint8 {0, 255}; raising the threshold never adds pixels."""
    return np.where(probs >= threshold, 255, 0).astype(np.uint8)


def dice_score(pred: np.ndarray, target: np.ndarray) -> float:
    """2|A∩B| / (|A| + |B|); defined as 1.0 when both masks are empty."""
    a = np.asarray(pred).astype(bool)
    b = np.asarray(target).astype(bool)
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return float(2.0 * int((a & b).sum()) / denom)
