"""On-demand tile decode service.

Serves container metadata as JSON and decoded tiles as lossless PNG so a
browser viewer can navigate a compressed slide, decoding only what the
viewport needs.  Decoded tiles live in a bounded LRU keyed by
(slide, level, col, row); per-key locks make each decode happen at most
once per cache residency.
"""

import io
import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import HTMLResponse, JSONResponse, Response
from PIL import Image

from .pipeline import TileCodec, WHITE
from .store import PyramidContainer, StoreError
from .weights import load_weights


class TileCache:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data = OrderedDict()
        self._lock = threading.Lock()
        self._inflight = {}

    def get(self, key):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
            return None

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def key_lock(self, key) -> threading.Lock:
        with self._lock:
            lk = self._inflight.get(key)
            if lk is None:
                lk = self._inflight[key] = threading.Lock()
            return lk


class SlideEntry:
    def __init__(self, slide_id: str, container_path: Path, weights_path):
        self.id = slide_id
        self.container_path = container_path
        self.weights_path = weights_path
        self._lock = threading.Lock()
        self._container = None
        self._codec = None

    @property
    def container(self) -> PyramidContainer:
        if self._container is None:
            with self._lock:
                if self._container is None:
                    self._container = PyramidContainer(self.container_path)
        return self._container

    def codec(self) -> TileCodec:
        if self._codec is None:
            with self._lock:
                if self._codec is None:
                    if self.weights_path is None:
                        raise StoreError(f"no weight file for slide {self.id!r}")
                    self._codec = TileCodec(load_weights(self.weights_path))
        return self._codec


class SlideRegistry:
    """Maps slide ids to (container, weights); ids come from *.clws names,
    weights from a sibling *.clwt or the registry-wide default."""

    def __init__(self, slides_dir, default_weights=None):
        self.slides_dir = Path(slides_dir)
        self.entries = {}
        for path in sorted(self.slides_dir.glob("*.clws")):
            sid = path.stem
            sibling = path.with_suffix(".clwt")
            wpath = sibling if sibling.exists() else default_weights
            self.entries[sid] = SlideEntry(sid, path, wpath)

    def get(self, slide_id):
        return self.entries.get(slide_id)


_FALLBACK_PAGE = """<!doctype html>
<html><head><title>cleric tile server</title></head>
<body><h1>cleric tile server</h1>
<p>No viewer assets configured (--static-dir).  API endpoints:</p>
<ul><li>GET /slides</li><li>GET /slides/{id}/meta</li>
<li>GET /slides/{id}/tiles/{level}/{col}/{row}</li></ul></body></html>"""


def _png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    return buf.getvalue()


def build_app(slides_dir, default_weights=None, cache_tiles: int = 256,
              static_dir=None) -> FastAPI:
    registry = SlideRegistry(slides_dir, default_weights)
    cache = TileCache(cache_tiles)
    app = FastAPI(title="cleric tile server")
    app.state.registry = registry
    app.state.cache = cache

    def _slide_or_404(slide_id):
        entry = registry.get(slide_id)
        if entry is None:
            return None, JSONResponse({"error": f"unknown slide {slide_id!r}"}, status_code=404)
        return entry, None

    @app.get("/slides")
    def list_slides():
        out = []
        for sid in sorted(registry.entries):
            c = registry.entries[sid].container
            out.append({
                "id": sid,
                "levels": len(c.levels),
                "tile_size": c.levels[0].tile_size if c.levels else 0,
                "grids": [{"level": i, "cols": lv.cols, "rows": lv.rows,
                           "tile_size": lv.tile_size} for i, lv in enumerate(c.levels)],
            })
        return out

    @app.get("/slides/{slide_id}/meta")
    def slide_meta(slide_id: str):
        entry, err = _slide_or_404(slide_id)
        if err:
            return err
        c = entry.container
        return {
            "id": slide_id,
            "levels": len(c.levels),
            "tile_size": c.levels[0].tile_size if c.levels else 0,
            "level_dims": [{"level": i, "width": lv.width, "height": lv.height,
                            "cols": lv.cols, "rows": lv.rows, "tile_size": lv.tile_size}
                           for i, lv in enumerate(c.levels)],
            "codec_id": c.codec_id.hex(),
        }

    @app.get("/slides/{slide_id}/tiles/{level}/{col}/{row}")
    def tile(slide_id: str, level: int, col: int, row: int):
        entry, err = _slide_or_404(slide_id)
        if err:
            return err
        c = entry.container
        if not (0 <= level < len(c.levels)):
            return JSONResponse({"error": "level out of range"}, status_code=404)
        lv = c.levels[level]
        if not (0 <= col < lv.cols and 0 <= row < lv.rows):
            return JSONResponse({"error": "tile out of range"}, status_code=404)
        key = (slide_id, level, col, row)
        png = cache.get(key)
        if png is None:
            with cache.key_lock(key):
                png = cache.get(key)
                if png is None:
                    raw = c.fetch(level, col, row)
                    if raw is None:
                        img = np.full((lv.tile_size, lv.tile_size, 3), WHITE, dtype=np.uint8)
                    else:
                        try:
                            img, _ = entry.codec().decode_tile(raw)
                        except StoreError as e:
                            return JSONResponse({"error": str(e)}, status_code=503)
                    png = _png_bytes(img)
                    cache.put(key, png)
        return Response(content=png, media_type="image/png")

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="viewer")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return _FALLBACK_PAGE

    return app
