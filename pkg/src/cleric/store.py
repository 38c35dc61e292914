"""Bit-exact persistence: weight files (CLWT), single-tile bitstreams (CLTB)
and the pyramidal slide container (CLWS).

All integers are little-endian and fixed width; lengths precede payloads.
Field-by-field layouts are documented in FORMAT.md and frozen by golden
fixtures in the test suite.
"""

import hashlib
import struct
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .codec import CodecConfig
from .entropy import CdfTable

WEIGHTS_MAGIC = b"CLWT"
TILE_MAGIC = b"CLTB"
CONTAINER_MAGIC = b"CLWS"
FORMAT_VERSION = 1


class StoreError(ValueError):
    pass


class MagicError(StoreError):
    pass


class VersionError(StoreError):
    pass


class TruncatedError(StoreError):
    pass


class HashMismatchError(StoreError):
    pass


class CrcError(StoreError):
    pass


class CodecIdMismatchError(StoreError):
    pass


class MissingParameterError(StoreError):
    def __init__(self, name: str):
        super().__init__(f"missing parameter {name!r}")
        self.name = name


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"need {n} bytes at offset {self.pos}, "
                                 f"have {len(self.data) - self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))


def _pack_config(cfg: CodecConfig) -> bytes:
    flags = (int(cfg.lifting_enabled) | (int(cfg.drb_enabled) << 1)
             | (int(cfg.r2b_enabled) << 2))
    out = struct.pack("<IIIIBf", cfg.hidden, cfg.latent, cfg.recursions,
                      cfg.slices, flags, cfg.quality)
    out += struct.pack("<I", len(cfg.lambda_grid))
    out += struct.pack(f"<{len(cfg.lambda_grid)}f", *cfg.lambda_grid)
    return out


def _unpack_config(r: _Reader) -> CodecConfig:
    hidden, latent, recursions, slices, flags, quality = r.unpack("IIIIBf")
    (n_grid,) = r.unpack("I")
    grid = r.unpack(f"{n_grid}f")
    return CodecConfig(hidden=hidden, latent=latent, recursions=recursions,
                       slices=slices, lifting_enabled=bool(flags & 1),
                       drb_enabled=bool(flags & 2), r2b_enabled=bool(flags & 4),
                       quality=quality, lambda_grid=tuple(grid))


@dataclass
class WeightStore:
    """All named parameters, codec hyperparameters and factorized CDF tables,
    hashed into a codec id that binds bitstreams to this exact model."""

    config: CodecConfig
    tensors: dict
    factorized: list = field(default_factory=list)

    def canonical_bytes(self) -> bytes:
        parts = [WEIGHTS_MAGIC, struct.pack("<I", FORMAT_VERSION), _pack_config(self.config)]
        parts.append(struct.pack("<I", len(self.tensors)))
        for name, arr in self.tensors.items():
            raw = name.encode("utf-8")
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            parts.append(struct.pack("<H", len(raw)))
            parts.append(raw)
            parts.append(struct.pack("<B", arr.ndim))
            parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            parts.append(arr.tobytes())
        parts.append(struct.pack("<I", len(self.factorized)))
        for t in self.factorized:
            parts.append(struct.pack("<ii", t.min_sym, t.max_sym))
            parts.append(np.ascontiguousarray(t.cdf, dtype=np.uint32).tobytes())
        return b"".join(parts)

    @property
    def codec_id(self) -> bytes:
        if not hasattr(self, "_codec_id"):
            self._codec_id = hashlib.sha256(self.canonical_bytes()).digest()
        return self._codec_id

    def tensor(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name]
        except KeyError:
            raise MissingParameterError(name) from None

    def require(self, names) -> None:
        for name in names:
            if name not in self.tensors:
                raise MissingParameterError(name)


def write_weights(store: WeightStore, path) -> None:
    body = store.canonical_bytes()
    with open(path, "wb") as f:
        f.write(body)
        f.write(hashlib.sha256(body).digest())


def read_weights(path, required_names=None) -> WeightStore:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 32:
        raise TruncatedError("weight file shorter than its hash")
    body, stored_hash = data[:-32], data[-32:]
    if body[:4] != WEIGHTS_MAGIC:
        raise MagicError(f"bad magic {body[:4]!r}")
    if hashlib.sha256(body).digest() != stored_hash:
        raise HashMismatchError("weight file hash mismatch")
    r = _Reader(body)
    r.take(4)
    (version,) = r.unpack("I")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported weight format version {version}")
    cfg = _unpack_config(r)
    (n_tensors,) = r.unpack("I")
    tensors = {}
    for _ in range(n_tensors):
        (name_len,) = r.unpack("H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("B")
        shape = r.unpack(f"{ndim}I")
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape)
        if name in tensors:
            raise StoreError(f"duplicate tensor {name!r}")
        tensors[name] = arr.copy()
    (n_tables,) = r.unpack("I")
    factorized = []
    for _ in range(n_tables):
        lo, hi = r.unpack("ii")
        cdf = np.frombuffer(r.take(4 * (hi - lo + 2)), dtype="<u4").copy()
        factorized.append(CdfTable(min_sym=lo, max_sym=hi, cdf=cdf))
    if r.pos != len(body):
        raise StoreError(f"{len(body) - r.pos} trailing bytes in weight file")
    store = WeightStore(config=cfg, tensors=tensors, factorized=factorized)
    if required_names is not None:
        store.require(required_names)
    return store


@dataclass
class TileBitstream:
    """Entropy-coded payloads for one tile plus everything needed to decode
    it: the producing model's codec id, original and padded sizes, the
    quality tag, and per-slice latent payloads."""

    codec_id: bytes
    orig_h: int
    orig_w: int
    pad_h: int
    pad_w: int
    quality: float
    z_payload: bytes
    y_payloads: list

    def __post_init__(self):
        if len(self.codec_id) != 32:
            raise StoreError("codec id must be 32 bytes")
        self.quality = float(np.float32(self.quality))
        for dim, pad in ((self.orig_h, self.pad_h), (self.orig_w, self.pad_w)):
            if pad % 64 or pad < dim or pad - dim >= 64:
                raise StoreError(f"padded size {pad} is not the next multiple of 64 above {dim}")


def write_tile(t: TileBitstream) -> bytes:
    parts = [TILE_MAGIC, t.codec_id,
             struct.pack("<IIIIf", t.orig_h, t.orig_w, t.pad_h, t.pad_w, t.quality),
             struct.pack("<I", len(t.z_payload)), t.z_payload,
             struct.pack("<I", len(t.y_payloads))]
    for p in t.y_payloads:
        parts.append(struct.pack("<I", len(p)))
        parts.append(p)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def read_tile(data: bytes, expect_codec_id: Optional[bytes] = None) -> TileBitstream:
    if len(data) < 8:
        raise TruncatedError("tile bitstream too short")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CrcError("tile bitstream CRC mismatch")
    r = _Reader(body)
    if r.take(4) != TILE_MAGIC:
        raise MagicError("bad tile magic")
    codec_id = r.take(32)
    orig_h, orig_w, pad_h, pad_w, quality = r.unpack("IIIIf")
    (z_len,) = r.unpack("I")
    z_payload = r.take(z_len)
    (n_slices,) = r.unpack("I")
    y_payloads = []
    for _ in range(n_slices):
        (ln,) = r.unpack("I")
        y_payloads.append(r.take(ln))
    if r.pos != len(body):
        raise StoreError("trailing bytes in tile bitstream")
    if expect_codec_id is not None and codec_id != expect_codec_id:
        raise CodecIdMismatchError("tile was produced by a different weight file")
    return TileBitstream(codec_id=codec_id, orig_h=orig_h, orig_w=orig_w,
                         pad_h=pad_h, pad_w=pad_w, quality=quality,
                         z_payload=z_payload, y_payloads=y_payloads)


@dataclass
class LevelGrid:
    """One pyramid level: grid geometry, pixel dimensions and row-major
    tile payloads (None marks an empty/background tile)."""

    cols: int
    rows: int
    tile_size: int
    width: int
    height: int
    tiles: list = None


_LEVEL_FMT = "<IIIII"
_ENTRY_FMT = "<QQB"


def build_container(levels, path, codec_id: bytes = b"\x00" * 32) -> "PyramidContainer":
    """Write a pyramid container; empty tiles are stored as flags only."""
    for lv in levels:
        if len(lv.tiles) != lv.cols * lv.rows:
            raise StoreError(f"level expects {lv.cols * lv.rows} tiles, got {len(lv.tiles)}")
    head = [CONTAINER_MAGIC, struct.pack("<I", FORMAT_VERSION)]
    head.append(codec_id)
    head.append(struct.pack("<I", len(levels)))
    for lv in levels:
        head.append(struct.pack(_LEVEL_FMT, lv.cols, lv.rows, lv.tile_size, lv.width, lv.height))
    header_prefix = b"".join(head)
    index_size = sum(lv.cols * lv.rows for lv in levels) * struct.calcsize(_ENTRY_FMT)
    payload_start = len(header_prefix) + index_size + 4  # + header crc
    index = []
    offset = payload_start
    for lv in levels:
        for t in lv.tiles:
            if t is None:
                index.append(struct.pack(_ENTRY_FMT, 0, 0, 1))
            else:
                index.append(struct.pack(_ENTRY_FMT, offset, len(t), 0))
                offset += len(t)
    header = header_prefix + b"".join(index)
    with open(path, "wb") as f:
        f.write(header)
        f.write(struct.pack("<I", zlib.crc32(header)))
        for lv in levels:
            for t in lv.tiles:
                if t is not None:
                    f.write(t)
    return PyramidContainer(path)


class PyramidContainer:
    """Random-access reader over a container file; fetch is O(1) through the
    in-memory index and performs no payload I/O for empty tiles."""

    def __init__(self, path):
        self.path = path
        with open(path, "rb") as f:
            fixed = f.read(44)
            if len(fixed) < 44:
                raise TruncatedError("container header too short")
            if fixed[:4] != CONTAINER_MAGIC:
                raise MagicError("bad container magic")
            (version,) = struct.unpack("<I", fixed[4:8])
            if version != FORMAT_VERSION:
                raise VersionError(f"unsupported container version {version}")
            self.codec_id = fixed[8:40]
            (n_levels,) = struct.unpack("<I", fixed[40:44])
            lv_size = struct.calcsize(_LEVEL_FMT)
            lv_raw = f.read(n_levels * lv_size)
            self.levels = []
            for i in range(n_levels):
                cols, rows, tile_size, width, height = struct.unpack(
                    _LEVEL_FMT, lv_raw[i * lv_size : (i + 1) * lv_size])
                self.levels.append(LevelGrid(cols=cols, rows=rows, tile_size=tile_size,
                                             width=width, height=height))
            e_size = struct.calcsize(_ENTRY_FMT)
            n_entries = sum(lv.cols * lv.rows for lv in self.levels)
            idx_raw = f.read(n_entries * e_size)
            if len(idx_raw) < n_entries * e_size:
                raise TruncatedError("container index truncated")
            (crc,) = struct.unpack("<I", f.read(4))
            if zlib.crc32(fixed + lv_raw + idx_raw) != crc:
                raise CrcError("container header CRC mismatch")
            self._index = []
            prev_end = 0
            for i in range(n_entries):
                off, length, flags = struct.unpack(_ENTRY_FMT, idx_raw[i * e_size : (i + 1) * e_size])
                if not flags & 1:
                    if off < prev_end:
                        raise StoreError("overlapping container index entries")
                    prev_end = off + length
                self._index.append((off, length, flags))
            self._level_base = np.cumsum([0] + [lv.cols * lv.rows for lv in self.levels]).tolist()

    def _entry(self, level: int, col: int, row: int):
        if not 0 <= level < len(self.levels):
            raise StoreError(f"level {level} out of range")
        lv = self.levels[level]
        if not (0 <= col < lv.cols and 0 <= row < lv.rows):
            raise StoreError(f"tile ({col},{row}) outside {lv.cols}x{lv.rows} grid")
        return self._index[self._level_base[level] + row * lv.cols + col]

    def is_empty(self, level: int, col: int, row: int) -> bool:
        return bool(self._entry(level, col, row)[2] & 1)

    def fetch(self, level: int, col: int, row: int) -> Optional[bytes]:
        off, length, flags = self._entry(level, col, row)
        if flags & 1:
            return None
        with open(self.path, "rb") as f:
            f.seek(off)
            data = f.read(length)
        if len(data) != length:
            raise TruncatedError("container payload truncated")
        return data

    def payload_bytes(self, level: int) -> int:
        base = self._level_base[level]
        lv = self.levels[level]
        return sum(self._index[base + i][1] for i in range(lv.cols * lv.rows))


def fetch_tile(container: PyramidContainer, level: int, col: int, row: int,
               expect_codec_id: Optional[bytes] = None) -> Optional[TileBitstream]:
    raw = container.fetch(level, col, row)
    if raw is None:
        return None
    return read_tile(raw, expect_codec_id=expect_codec_id)
