import numpy as np
import pytest
from PIL import Image

from cleric.codec import CodecConfig
from cleric.weights import make_weights


@pytest.fixture(scope="session")
def tiny_cfg():
    return CodecConfig(hidden=8, latent=20, recursions=1, slices=5)


@pytest.fixture(scope="session")
def tiny_store(tiny_cfg):
    return make_weights(11, tiny_cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def tissue_patch(rng, size, base=(200, 120, 170)):
    """Pink-ish noisy patch that passes the tissue filter."""
    img = np.array(base, np.float32) + rng.normal(0, 25, (size, size, 3)).astype(np.float32)
    return np.clip(img, 0, 255).astype(np.uint8)


def white_patch(size):
    return np.full((size, size, 3), 255, np.uint8)


def write_synthetic_slide(root, rng, grids=((2, 2), (1, 1)), tile=64,
                          white_positions=(((0, 1),), ())):
    """Build a level0..levelN patch pyramid on disk; returns tile arrays."""
    arrays = {}
    for level, (cols, rows) in enumerate(grids):
        ldir = root / f"level{level}"
        ldir.mkdir(parents=True, exist_ok=True)
        whites = set(white_positions[level]) if level < len(white_positions) else set()
        for r in range(rows):
            for c in range(cols):
                patch = white_patch(tile) if (c, r) in whites else tissue_patch(rng, tile)
                arrays[(level, c, r)] = patch
                Image.fromarray(patch).save(ldir / f"tile_{c}_{r}.png")
    return arrays


@pytest.fixture()
def synthetic_slide(tmp_path, rng):
    src = tmp_path / "slide"
    arrays = write_synthetic_slide(src, rng)
    return src, arrays
