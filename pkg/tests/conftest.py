import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def textured(width: int, height: int, seed: int = 0, smooth: float = 1.5) -> np.ndarray:
    """Random smooth texture with plenty of local structure (uint8)."""
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    base = rng.uniform(0, 255, size=(height, width))
    img = gaussian_filter(base, smooth)
    lo, hi = img.min(), img.max()
    return np.clip((img - lo) / max(hi - lo, 1e-9) * 255, 0, 255).astype(np.uint8)


def reference_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Independent Gaussian blur used as a degradation oracle in tests."""
    from scipy.ndimage import gaussian_filter

    if sigma <= 0:
        return img.copy()
    return np.clip(np.rint(gaussian_filter(img.astype(np.float64), sigma)), 0, 255).astype(
        np.uint8
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
