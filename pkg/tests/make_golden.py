"""Regenerate the golden format fixtures under tests/data/.

Run from the repo root after an intentional format change:

    python tests/make_golden.py

Committing new fixtures is a format break: bump FORMAT_VERSION first.
"""

from pathlib import Path

import numpy as np

from cleric.codec import CodecConfig
from cleric.store import LevelGrid, TileBitstream, build_container, write_tile, write_weights
from cleric.weights import make_weights

DATA = Path(__file__).parent / "data"


def golden_weights_store():
    cfg = CodecConfig(hidden=4, latent=10, recursions=1, slices=5, quality=0.02)
    return make_weights(2024, cfg)


def golden_tile_blob(codec_id: bytes) -> bytes:
    rng = np.random.default_rng(99)
    tile = TileBitstream(codec_id=codec_id, orig_h=200, orig_w=150,
                         pad_h=256, pad_w=192, quality=0.02,
                         z_payload=rng.bytes(64),
                         y_payloads=[rng.bytes(n) for n in (48, 32, 16, 8, 4)])
    return write_tile(tile)


def golden_container(path, codec_id: bytes):
    rng = np.random.default_rng(100)
    levels = []
    for cols, rows in ((2, 2), (1, 1)):
        tiles = []
        for i in range(cols * rows):
            if (cols, rows) == (2, 2) and i == 3:
                tiles.append(None)
            else:
                t = TileBitstream(codec_id=codec_id, orig_h=64, orig_w=64,
                                  pad_h=64, pad_w=64, quality=0.02,
                                  z_payload=rng.bytes(24), y_payloads=[rng.bytes(12)])
                tiles.append(write_tile(t))
        levels.append(LevelGrid(cols=cols, rows=rows, tile_size=64,
                                width=cols * 64, height=rows * 64, tiles=tiles))
    build_container(levels, path, codec_id=codec_id)


def main():
    DATA.mkdir(exist_ok=True)
    w = golden_weights_store()
    write_weights(w, DATA / "golden.clwt")
    (DATA / "golden.cltb").write_bytes(golden_tile_blob(w.codec_id))
    golden_container(DATA / "golden.clws", w.codec_id)
    for name in ("golden.clwt", "golden.cltb", "golden.clws"):
        print(name, (DATA / name).stat().st_size, "bytes")


if __name__ == "__main__":
    main()
