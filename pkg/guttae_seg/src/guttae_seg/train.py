"""Training loop and model artifacts.

The artifact bundles weights, the exact training config, and the per-epoch
metric log (loss + Dice); reloading it reproduces identical predictions for
identical inputs (inference runs in eval mode with frozen statistics).
"""

from __future__ import annotations

from pathlib import Path

import torch

from .data import TileSample, load_arrays
from .model import TrainConfig, build_model
from .predict import dice_score, predict_arrays


def train_model(
    train_samples: list[TileSample],
    val_samples: list[TileSample],
    config: TrainConfig,
) -> tuple[torch.nn.Module, dict]:
    """Train on image -> mask regression; returns (model, metrics).

    Metrics carry per-epoch training loss and Dice on the validation tiles
    (training tiles when no validation split exists).  A run whose loss fails
    to decrease is flagged in ``metrics["warnings"]`` rather than rejected,
    so degenerate configs are visible instead of silent.
    """
    config.validate()
    if not train_samples:
        raise ValueError("empty training set")
    torch.manual_seed(config.rng_seed)

    images_np, masks_np = load_arrays(train_samples)
    images = torch.from_numpy(images_np)
    masks = torch.from_numpy(masks_np)
    eval_samples = val_samples if val_samples else train_samples
    eval_images_np, eval_masks_np = load_arrays(eval_samples)

    model = build_model(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = torch.nn.MSELoss()
    gen = torch.Generator().manual_seed(config.rng_seed)

    n = images.shape[0]
    losses: list[float] = []
    dices: list[float] = []
    for _ in range(config.epochs):
        model.train()
        order = torch.randperm(n, generator=gen)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            optimizer.zero_grad()
            pred = model(images[idx])
            loss = loss_fn(pred, masks[idx])
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(idx)
        losses.append(epoch_loss / n)
        probs = predict_arrays(model, eval_images_np)
        dices.append(
            dice_score(probs >= config.threshold, eval_masks_np[:, 0] >= 0.5)
        )

    metrics: dict = {
        "loss": losses,
        "dice": dices,
        "eval_split": "validation" if val_samples else "training",
        "train_tiles": len(train_samples),
        "val_tiles": len(val_samples),
        "warnings": [],
    }
    if len(losses) > 1 and losses[-1] >= losses[0]:
        metrics["warnings"].append("training loss did not decrease")
    return model, metrics


def save_artifact(
    model: torch.nn.Module,
    config: TrainConfig,
    metrics: dict,
    tile_size: tuple[int, int],
    path: str | Path,
) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "config": config.to_dict(),
            "metrics": metrics,
            "tile_size": list(tile_size),
        },
        path,
    )


def load_artifact(path: str | Path) -> tuple[torch.nn.Module, TrainConfig, dict, tuple[int, int]]:
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"model artifact not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    config = TrainConfig(**payload["config"])
    # Never re-download encoder weights just to overwrite them.
    config.pretrained = False
    model = build_model(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    th, tw = payload["tile_size"]
    return model, TrainConfig(**payload["config"]), payload["metrics"], (int(th), int(tw))
