import csv
import sys
from pathlib import Path

import numpy as np
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

COLUMNS = [
    "source_id",
    "cell_x",
    "cell_y",
    "shift_x",
    "shift_y",
    "image_path",
    "mask_path",
    "guttae_pixels",
]


def blob_tile(rng: np.random.Generator, size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Bright textured tile with a dark elliptical blob; mask marks the blob."""
    img = rng.integers(110, 190, (size, size)).astype(np.uint8)
    mask = np.zeros((size, size), dtype=np.uint8)
    cx, cy = rng.uniform(16, size - 16, 2)
    a, b = rng.uniform(5, 12, 2)
    ys, xs = np.mgrid[0:size, 0:size]
    hit = ((xs - cx) / a) ** 2 + ((ys - cy) / b) ** 2 <= 1.0
    img[hit] = 0
    mask[hit] = 255
    return img, mask


def make_tile_dataset(
    out_dir: Path, count: int = 50, size: int = 64, seed: int = 0, sources: int = 1
) -> Path:
    """Write a schema-conformant tile manifest with synthetic blob tiles."""
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifest = out_dir / "tiles.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for i in range(count):
            img, mask = blob_tile(rng, size)
            img_name = f"tile_{i:03d}_img.png"
            mask_name = f"tile_{i:03d}_mask.png"
            Image.fromarray(img).save(out_dir / img_name)
            Image.fromarray(mask).save(out_dir / mask_name)
            writer.writerow(
                [
                    f"src{i % sources:02d}",
                    i % 8,
                    i // 8,
                    0,
                    0,
                    img_name,
                    mask_name,
                    int((mask > 0).sum()),
                ]
            )
    return manifest
