"""Slide-level pipeline: patch ingestion, tissue filtering, tile
encode/decode, container assembly and metrics reporting.

Tiles are processed by a thread pool (the hot kernels release the GIL) and
merged in deterministic grid order, so outputs are byte-identical however
many workers run.
"""

import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import codec, entropy, store, toolkit

TILE_ALIGN = 64
WHITE = 255


# ---------------------------------------------------------------------------
# tissue filtering


def tissue_filter(patch: np.ndarray, chroma_min: float = 0.06,
                  luma_max: float = 0.92, min_fraction: float = 0.05) -> bool:
    """Keep a patch iff enough pixels look like stained tissue: chroma
    (max-min channel spread) at least chroma_min and Rec.601 luma at most
    luma_max, over at least min_fraction of the pixels."""
    a = np.asarray(patch)
    if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
        raise ValueError("tissue filter expects an 8-bit RGB image")
    f = a.astype(np.float32) / np.float32(255.0)
    chroma = f.max(axis=2) - f.min(axis=2)
    luma = f[:, :, 0] * 0.299 + f[:, :, 1] * 0.587 + f[:, :, 2] * 0.114
    frac = float(np.mean((chroma >= chroma_min) & (luma <= luma_max)))
    return frac >= min_fraction


# ---------------------------------------------------------------------------
# patch sources (directories of level{k}/tile_{col}_{row}.png|ppm)

_TILE_RE = re.compile(r"^tile_(\d+)_(\d+)\.(png|ppm)$")
_LEVEL_RE = re.compile(r"^level(\d+)$")


@dataclass
class SourceLevel:
    index: int
    cols: int
    rows: int
    tile_h: int
    tile_w: int
    paths: dict  # (col, row) -> Path


def load_patch(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def scan_source(root) -> list:
    """Discover pyramid levels; validates that tiles within a level share
    dimensions.  Missing grid positions are treated as empty tiles."""
    root = Path(root)
    levels = {}
    for entry in sorted(root.iterdir()):
        m = _LEVEL_RE.match(entry.name)
        if not m or not entry.is_dir():
            continue
        idx = int(m.group(1))
        paths = {}
        for f in sorted(entry.iterdir()):
            tm = _TILE_RE.match(f.name)
            if tm:
                paths[(int(tm.group(1)), int(tm.group(2)))] = f
        if not paths:
            raise ValueError(f"level directory {entry} holds no tiles")
        first = load_patch(next(iter(paths.values())))
        th, tw = first.shape[:2]
        cols = max(c for c, _ in paths) + 1
        rows = max(r for _, r in paths) + 1
        levels[idx] = SourceLevel(index=idx, cols=cols, rows=rows,
                                  tile_h=th, tile_w=tw, paths=paths)
    if not levels:
        raise ValueError(f"no level0..levelN directories under {root}")
    out = [levels[i] for i in sorted(levels)]
    for lv in out:
        for pos, p in lv.paths.items():
            shape = load_patch(p).shape[:2]
            if shape != (lv.tile_h, lv.tile_w):
                raise ValueError(f"mixed tile dimensions in level{lv.index}: "
                                 f"{p.name} is {shape}, expected {(lv.tile_h, lv.tile_w)}")
    return out


# ---------------------------------------------------------------------------
# single-tile codec


def pad_image(x: np.ndarray, align: int = TILE_ALIGN) -> np.ndarray:
    """Replicate-pad (b,c,h,w) on the bottom/right to multiples of align."""
    h, w = x.shape[2], x.shape[3]
    ph = (-h) % align
    pw = (-w) % align
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="edge")


@dataclass
class TileStats:
    payload_bytes: int = 0
    bits_estimate: float = 0.0
    z_syms: np.ndarray = None
    slice_syms: list = field(default_factory=list)


class TileCodec:
    """Binds a weight store (and its CDF banks) for repeated tile coding."""

    def __init__(self, weights: store.WeightStore):
        self.store = weights
        self.cfg = weights.config
        self.scale = entropy.default_scale_table()
        self.fact_bank = entropy.build_bank(weights.factorized)

    def encode_tile(self, patch: np.ndarray):
        """8-bit RGB (H,W,3) -> (tile bitstream bytes, TileStats)."""
        if patch.ndim != 3 or patch.shape[2] != 3:
            raise ValueError("tile must be HWC RGB")
        h, w = patch.shape[:2]
        x = (patch.astype(np.float32) / np.float32(255.0)).transpose(2, 0, 1)[None]
        x = pad_image(x)
        y = codec.analysis_transform(x, self.store, self.cfg).y
        lat = codec.compress_latents(y, self.store, self.cfg, self.scale)
        cz = len(self.store.factorized)
        z_ids = np.repeat(np.arange(cz, dtype=np.int32), lat.z_syms.size // cz)
        z_payload = entropy.encode_symbols(lat.z_syms, (self.fact_bank, z_ids))
        y_payloads = [entropy.encode_symbols(s, (self.scale.bank, i))
                      for s, i in zip(lat.slice_syms, lat.slice_sigma_idx)]
        tile = store.TileBitstream(codec_id=self.store.codec_id, orig_h=h, orig_w=w,
                                   pad_h=x.shape[2], pad_w=x.shape[3],
                                   quality=self.cfg.quality, z_payload=z_payload,
                                   y_payloads=y_payloads)
        blob = store.write_tile(tile)
        stats = TileStats(payload_bytes=len(blob),
                          bits_estimate=lat.bits_y_estimate + lat.bits_z_estimate,
                          z_syms=lat.z_syms, slice_syms=lat.slice_syms)
        return blob, stats

    def decode_tile(self, blob: bytes):
        """Tile bitstream -> (8-bit RGB (H,W,3), TileStats)."""
        tile = store.read_tile(blob, expect_codec_id=self.store.codec_id)
        cz = len(self.store.factorized)
        lh, lw = tile.pad_h // 16, tile.pad_w // 16
        zh, zw = lh // 4, lw // 4
        z_ids = np.repeat(np.arange(cz, dtype=np.int32), zh * zw)
        z_syms = entropy.decode_symbols(tile.z_payload, (self.fact_bank, z_ids))
        lat = codec.decompress_latents(z_syms, tile.y_payloads, self.store,
                                       self.cfg, self.scale, (lh, lw))
        x = codec.synthesis_transform(lat.y_hat, self.store, self.cfg)
        img = np.rint(x[0, :, : tile.orig_h, : tile.orig_w].transpose(1, 2, 0) * 255.0)
        stats = TileStats(payload_bytes=len(blob), z_syms=lat.z_syms,
                          slice_syms=lat.slice_syms)
        return img.astype(np.uint8), stats


# ---------------------------------------------------------------------------
# slide-level operations


def default_jobs() -> int:
    env = os.environ.get("CLERIC_JOBS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _pool_map(fn, items, jobs):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def encode_slide(source_dir, weights: store.WeightStore, out_path, *,
                 jobs: int = 1, tile_size: int = None,
                 chroma_min: float = 0.06, luma_max: float = 0.92,
                 min_fraction: float = 0.05) -> dict:
    """Encode every tissue tile of a patch pyramid into a container.

    Returns a per-level summary (tile counts, kept/skipped, payload bytes,
    bpp over the level's pixel area).
    """
    tc = TileCodec(weights)
    levels = scan_source(source_dir)
    summary = {"levels": [], "out": str(out_path)}
    grids = []
    t0 = time.time()
    for lv in levels:
        if tile_size is not None and (lv.tile_h != tile_size or lv.tile_w != tile_size):
            raise ValueError(f"level{lv.index} tiles are {lv.tile_h}x{lv.tile_w}, "
                             f"expected --tile-size {tile_size}")
        if lv.tile_h != lv.tile_w or lv.tile_h % TILE_ALIGN:
            raise ValueError(f"tile size {lv.tile_h}x{lv.tile_w} must be a square "
                             f"multiple of {TILE_ALIGN}")
        positions = [(c, r) for r in range(lv.rows) for c in range(lv.cols)]

        def work(pos, lv=lv):
            path = lv.paths.get(pos)
            if path is None:
                return None
            patch = load_patch(path)
            if not tissue_filter(patch, chroma_min, luma_max, min_fraction):
                return None
            return tc.encode_tile(patch)[0]

        tiles = _pool_map(work, positions, jobs)
        kept = sum(t is not None for t in tiles)
        payload = sum(len(t) for t in tiles if t is not None)
        grids.append(store.LevelGrid(cols=lv.cols, rows=lv.rows, tile_size=lv.tile_h,
                                     width=lv.cols * lv.tile_w, height=lv.rows * lv.tile_h,
                                     tiles=tiles))
        summary["levels"].append({
            "level": lv.index, "tiles": len(tiles), "kept": kept,
            "skipped": len(tiles) - kept, "payload_bytes": payload,
            "bpp": toolkit.bpp(payload, lv.cols * lv.tile_w, lv.rows * lv.tile_h),
        })
    store.build_container(grids, out_path, codec_id=weights.codec_id)
    summary["seconds"] = time.time() - t0
    return summary


def _selected(container, levels):
    if levels is None:
        return range(len(container.levels))
    return [lv for lv in levels if 0 <= lv < len(container.levels)]


def decode_slide(container_path, weights: store.WeightStore, out_dir, *,
                 levels=None, tiles=None, jobs: int = 1) -> dict:
    """Decode selected tiles to PNG files; empty tiles emit white patches."""
    tc = TileCodec(weights)
    container = store.PyramidContainer(container_path)
    out_dir = Path(out_dir)
    written = 0
    for li in _selected(container, levels):
        lv = container.levels[li]
        ldir = out_dir / f"level{li}"
        ldir.mkdir(parents=True, exist_ok=True)
        positions = [(c, r) for r in range(lv.rows) for c in range(lv.cols)]
        if tiles is not None:
            positions = [p for p in positions if p in set(tiles)]

        def work(pos, li=li, lv=lv):
            col, row = pos
            raw = container.fetch(li, col, row)
            if raw is None:
                img = np.full((lv.tile_size, lv.tile_size, 3), WHITE, dtype=np.uint8)
            else:
                img, _ = tc.decode_tile(raw)
            return pos, img

        for (col, row), img in _pool_map(work, positions, jobs):
            Image.fromarray(img).save(ldir / f"tile_{col}_{row}.png")
            written += 1
    return {"tiles_written": written, "out": str(out_dir)}


def metrics_slide(source_dir, container_path, weights: store.WeightStore, *,
                  jobs: int = 1, diff_dir=None) -> dict:
    """Per-level and aggregate rate-distortion report against the originals.

    bpp counts every container payload byte over the level's pixel area
    (cross-checked against the index); PSNR / MS-SSIM average over coded
    tiles only.
    """
    tc = TileCodec(weights)
    container = store.PyramidContainer(container_path)
    levels = scan_source(source_dir)
    if len(levels) != len(container.levels):
        raise ValueError(f"source has {len(levels)} levels, container "
                         f"{len(container.levels)}")
    report = {"levels": []}
    if diff_dir is not None:
        Path(diff_dir).mkdir(parents=True, exist_ok=True)
    for lv in levels:
        cl = container.levels[lv.index]
        if (cl.cols, cl.rows) != (lv.cols, lv.rows):
            raise ValueError(f"grid mismatch at level{lv.index}")
        coded = [(c, r) for r in range(lv.rows) for c in range(lv.cols)
                 if not container.is_empty(lv.index, c, r)]

        def work(pos, lv=lv):
            col, row = pos
            original = load_patch(lv.paths[(col, row)]).astype(np.float64) / 255.0
            raw = container.fetch(lv.index, col, row)
            decoded, _ = tc.decode_tile(raw)
            dec = decoded.astype(np.float64) / 255.0
            # 5-scale MS-SSIM needs >= 161 px; smaller tiles report NaN
            if min(original.shape[:2]) >= toolkit.MS_SSIM_MIN_DIM:
                ssim = toolkit.ms_ssim(original, dec)
            else:
                ssim = float("nan")
            d = toolkit.diff_map(original, dec) if diff_dir is not None else None
            return pos, toolkit.psnr(original, dec), ssim, d

        results = _pool_map(work, coded, jobs)
        for (col, row), _, _, dmap in results:
            if dmap is not None:
                Image.fromarray(dmap).save(Path(diff_dir) / f"diff_l{lv.index}_{col}_{row}.png")
        payload = container.payload_bytes(lv.index)
        level_bpp = toolkit.bpp(payload, cl.width, cl.height)
        psnrs = [r[1] for r in results]
        ssims = [r[2] for r in results]
        report["levels"].append({
            "level": lv.index, "coded_tiles": len(coded),
            "skipped": lv.cols * lv.rows - len(coded),
            "payload_bytes": payload, "bpp": level_bpp,
            "psnr": float(np.mean(psnrs)) if psnrs else float("inf"),
            "ms_ssim": float(np.mean(ssims)) if ssims else 1.0,
        })
    total_bytes = sum(l["payload_bytes"] for l in report["levels"])
    total_px = sum(container.levels[l["level"]].width * container.levels[l["level"]].height
                   for l in report["levels"])
    report["aggregate"] = {
        "payload_bytes": total_bytes,
        "bpp": 8.0 * total_bytes / total_px if total_px else 0.0,
    }
    return report
