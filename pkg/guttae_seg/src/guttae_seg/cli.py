"""`seg` command line: train, predict, assemble."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from .assemble import assemble_mask, read_cell_choices
from .data import read_manifest, load_arrays, split_samples
from .model import TrainConfig
from .predict import dice_score, predict_tiles
from .train import load_artifact, save_artifact, train_model


@click.group()
def cli() -> None:
    """Guttae segmentation on exported panorama tiles."""


@cli.command("train")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--encoder", type=click.Choice(["resnet50", "small-cnn"]), default="resnet50", show_default=True)
@click.option("--pretrained/--no-pretrained", default=False, show_default=True,
              help="start the encoder from ImageNet weights (needs network access)")
@click.option("--lr", "learning_rate", type=float, default=1e-4, show_default=True)
@click.option("--epochs", type=int, default=300, show_default=True)
@click.option("--batch-size", "batch_size", type=int, default=16, show_default=True)
@click.option("--seed", "rng_seed", type=int, default=0, show_default=True)
@click.option("--val-sources", "val_sources", default=None,
              help="comma-separated source ids held out for validation")
@click.option("-o", "--output", required=True, type=click.Path())
def train_cmd(manifest_path: str, val_sources: str | None, output: str, **params) -> None:
    """Train the segmenter on a tile manifest."""
    samples = read_manifest(manifest_path)
    train_set, val_set = split_samples(
        samples, val_sources.split(",") if val_sources else None
    )
    config = TrainConfig(**params)
    model, metrics = train_model(train_set, val_set, config)
    images, _ = load_arrays(train_set[:1])
    save_artifact(model, config, metrics, images.shape[2:], output)
    metrics_path = Path(output).with_suffix(".metrics.json")
    metrics_path.write_text(json.dumps({"config": config.to_dict(), **metrics}, indent=2) + "\n")
    for warning in metrics["warnings"]:
        click.echo(f"warning: {warning}", err=True)
    click.echo(
        f"trained {config.encoder} for {config.epochs} epochs: "
        f"final loss {metrics['loss'][-1]:.5f}, {metrics['eval_split']} Dice {metrics['dice'][-1]:.3f} "
        f"-> {output}"
    )


def _cell_crop(pano: np.ndarray, x0: int, y0: int, cell: int) -> tuple[np.ndarray, int, int]:
    """Cell-sized crop, edge-padded when the canvas ends mid-cell."""
    h, w = pano.shape
    cw = min(cell, w - x0)
    ch = min(cell, h - y0)
    crop = pano[y0 : y0 + ch, x0 : x0 + cw]
    if (ch, cw) != (cell, cell):
        crop = np.pad(crop, ((0, cell - ch), (0, cell - cw)), mode="edge")
    return crop, cw, ch


@cli.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--tiles", "tiles_path", default=None, type=click.Path(),
              help="tile manifest: predict each tile, score against its mask")
@click.option("--panorama", "panorama_path", default=None, type=click.Path(),
              help="sharpened panorama: predict each grid cell (requires --cells)")
@click.option("--cells", "cells_path", default=None, type=click.Path())
@click.option("--threshold", type=float, default=None, help="override the trained threshold")
@click.option("-o", "--out-dir", "out_dir", required=True, type=click.Path())
def predict_cmd(
    model_path: str,
    tiles_path: str | None,
    panorama_path: str | None,
    cells_path: str | None,
    threshold: float | None,
    out_dir: str,
) -> None:
    """Predict guttae masks for tiles or for the cells of a panorama."""
    if (tiles_path is None) == (panorama_path is None):
        raise click.UsageError("pass exactly one of --tiles or --panorama")
    model, config, _, tile_size = load_artifact(model_path)
    th = config.threshold if threshold is None else threshold
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if tiles_path is not None:
        samples = read_manifest(tiles_path)
        images, masks = load_arrays(samples)
        probs, binary = predict_tiles(
            model, (images[:, 0] * 255).astype(np.uint8), tile_size, th
        )
        rows = []
        for i, s in enumerate(samples):
            name = f"{s.image_path.stem}_pred.png"
            Image.fromarray(binary[i]).save(out / name)
            rows.append(
                [s.source_id, s.cell_x, s.cell_y, s.shift_x, s.shift_y, name,
                 f"{dice_score(binary[i] > 0, masks[i, 0] >= 0.5):.4f}"]
            )
        with (out / "predictions.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source_id", "cell_x", "cell_y", "shift_x", "shift_y", "mask_path", "dice"])
            writer.writerows(rows)
        mean_dice = float(np.mean([float(r[-1]) for r in rows])) if rows else 0.0
        click.echo(f"{len(rows)} tiles predicted (mean Dice {mean_dice:.3f}) -> {out}")
        return

    if cells_path is None:
        raise click.UsageError("--panorama requires --cells")
    with Image.open(panorama_path) as im:
        pano = np.asarray(im.convert("L"))
    cells, cell, _canvas = read_cell_choices(cells_path)
    if (cell, cell) != tuple(tile_size):
        raise ValueError(
            f"grid cell size {cell} does not match the trained tile size {tuple(tile_size)}"
        )
    rows = []
    for ref in cells:
        x0, y0 = ref.cell_x * cell, ref.cell_y * cell
        crop, cw, ch = _cell_crop(pano, x0, y0, cell)
        _, binary = predict_tiles(model, crop[None], tile_size, th)
        name = f"cell_{ref.cell_x:03d}_{ref.cell_y:03d}.png"
        Image.fromarray(binary[0][:ch, :cw]).save(out / name)
        rows.append([ref.cell_x, ref.cell_y, name])
    with (out / "cell_masks.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_x", "cell_y", "mask_path"])
        writer.writerows(rows)
    click.echo(f"{len(rows)} cells predicted -> {out}")


@cli.command("assemble")
@click.option("--cells", "cells_path", required=True, type=click.Path())
@click.option("--masks-dir", "masks_dir", required=True, type=click.Path(),
              help="directory with cell_masks.csv from `seg predict --panorama`")
@click.option("-o", "--output", required=True, type=click.Path())
def assemble_cmd(cells_path: str, masks_dir: str, output: str) -> None:
    """Paste per-cell masks back into a panorama-scale mask."""
    cells, cell, canvas = read_cell_choices(cells_path)
    masks_root = Path(masks_dir)
    index = masks_root / "cell_masks.csv"
    if not index.is_file():
        raise ValueError(f"cell_masks.csv not found in {masks_root}")
    cell_masks: dict[tuple[int, int], np.ndarray] = {}
    with index.open(newline="") as fh:
        for row in csv.DictReader(fh):
            with Image.open(masks_root / row["mask_path"]) as im:
                cell_masks[(int(row["cell_x"]), int(row["cell_y"]))] = np.asarray(im.convert("L"))
    panorama = assemble_mask(cell_masks, cells, canvas, cell)
    Image.fromarray(panorama.image).save(output)
    prov_path = Path(output).with_suffix(".provenance.json")
    prov_path.write_text(
        json.dumps(
            {
                "canvas": {"w": canvas[0], "h": canvas[1]},
                "cell": cell,
                "cells": {f"{x},{y}": fid for (x, y), fid in panorama.cell_provenance.items()},
            },
            indent=2,
        )
        + "\n"
    )
    click.echo(f"assembled {canvas[0]}x{canvas[1]} mask -> {output}")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
