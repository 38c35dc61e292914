"""Lossless symbol coding over quantized integer CDF tables.

Tables carry 16-bit probability mass (total exactly 2^16, every in-support
symbol >= 1) so the byte-wise range coder is escape-free and the entire
coding path is integer arithmetic, bit-exact across platforms.  The
byte-stream layout is documented in FORMAT.md and frozen by golden tests.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from . import kernels

TOTAL = kernels.RC_TOTAL          # 2^16 probability mass per table
SIGMA_MIN = 0.11
SIGMA_MAX = 256.0
NUM_SCALES = 64
TAIL_MASS = 2.0 ** -20
FLUSH_BYTES = 8                   # documented worst-case coder tail

_Z_TAIL = float(-ndtri(TAIL_MASS / 2.0))


class CodingError(ValueError):
    pass


@dataclass
class CdfTable:
    """Quantized pmf over the integer interval [min_sym, max_sym]."""

    min_sym: int
    max_sym: int
    cdf: np.ndarray  # uint32, length max_sym - min_sym + 2, cdf[0]=0, cdf[-1]=TOTAL

    def __post_init__(self):
        self.cdf = np.ascontiguousarray(self.cdf, dtype=np.uint32)
        self.validate()

    def validate(self):
        n = self.max_sym - self.min_sym + 1
        if n < 1 or self.cdf.shape != (n + 1,):
            raise CodingError(f"cdf length {self.cdf.shape} does not match support "
                              f"[{self.min_sym},{self.max_sym}]")
        if self.cdf[0] != 0 or self.cdf[-1] != TOTAL:
            raise CodingError("cdf must start at 0 and end at 2^16")
        if not np.all(np.diff(self.cdf.astype(np.int64)) >= 1):
            raise CodingError("cdf must be strictly increasing (pmf >= 1 everywhere)")

    @property
    def size(self) -> int:
        return self.max_sym - self.min_sym + 1

    def pmf(self) -> np.ndarray:
        return np.diff(self.cdf.astype(np.int64))


@dataclass
class CdfBank:
    """Concatenated table arrays in the layout the decode kernel wants."""

    mins: np.ndarray     # int32 per table
    sizes: np.ndarray    # int32 per table
    offsets: np.ndarray  # int64 start of each cdf in `cdf`
    cdf: np.ndarray      # uint32 concatenation


def build_bank(tables) -> CdfBank:
    mins = np.array([t.min_sym for t in tables], dtype=np.int32)
    sizes = np.array([t.size for t in tables], dtype=np.int32)
    offsets = np.zeros(len(tables), dtype=np.int64)
    if len(tables) > 1:
        offsets[1:] = np.cumsum([t.size + 1 for t in tables])[:-1]
    cdf = np.concatenate([t.cdf for t in tables]) if tables else np.zeros(0, np.uint32)
    return CdfBank(mins=mins, sizes=sizes, offsets=offsets, cdf=np.ascontiguousarray(cdf))


def _quantize_half(w: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder quantization with a floor of 1 count per bin."""
    raw = w / w.sum() * total
    flo = np.floor(raw)
    q = np.maximum(flo.astype(np.int64), 1)
    order = np.argsort(-(raw - flo), kind="stable")
    d = total - int(q.sum())
    i = 0
    while d != 0:
        j = order[i % len(order)]
        if d > 0:
            q[j] += 1
            d -= 1
        elif q[j] > 1:
            q[j] -= 1
            d += 1
        i += 1
    return q


def quantize_pmf_symmetric(p: np.ndarray, min_sym: int, max_sym: int) -> CdfTable:
    """Turn a symmetric pmf over [-L, L] into a CdfTable.

    Counts are assigned to +/-k pairs so pmf(k) == pmf(-k) holds exactly;
    the center bin consequently has even mass (granularity 2/2^16).
    """
    if min_sym != -max_sym:
        raise CodingError("symmetric quantizer needs a symmetric support")
    el = max_sym
    half = np.concatenate([[0.5 * p[el]], p[el + 1 :]])
    q = _quantize_half(half, TOTAL // 2)
    counts = np.concatenate([q[:0:-1], [2 * q[0]], q[1:]])
    cdf = np.concatenate([[0], np.cumsum(counts)])
    return CdfTable(min_sym=min_sym, max_sym=max_sym, cdf=cdf.astype(np.uint32))


def gaussian_table(sigma: float) -> CdfTable:
    """Zero-mean Gaussian+unit-uniform pmf on the integer grid, quantized.

    Support half-width is the smallest L with tail mass < 2^-20.
    """
    if not (sigma > 0):
        raise CodingError("sigma must be positive")
    el = max(int(np.floor(_Z_TAIL * sigma - 0.5)) + 1, 1)
    k = np.arange(-el, el + 1, dtype=np.float64)
    p = ndtr((k + 0.5) / sigma) - ndtr((k - 0.5) / sigma)
    return quantize_pmf_symmetric(p, -el, el)


@dataclass
class ScaleTable:
    """64 log-spaced sigma values on [0.11, 256] with precomputed tables."""

    sigmas: np.ndarray
    tables: list
    bank: CdfBank

    def index_for(self, sigma: np.ndarray) -> np.ndarray:
        """Nearest table in log-space, clamped to the grid."""
        step = (math.log(SIGMA_MAX) - math.log(SIGMA_MIN)) / (NUM_SCALES - 1)
        raw = (np.log(np.clip(sigma, SIGMA_MIN, SIGMA_MAX)) - math.log(SIGMA_MIN)) / step
        return np.clip(np.rint(raw).astype(np.int64), 0, NUM_SCALES - 1)


@lru_cache(maxsize=1)
def default_scale_table() -> ScaleTable:
    sigmas = np.exp(np.linspace(math.log(SIGMA_MIN), math.log(SIGMA_MAX), NUM_SCALES))
    tables = [gaussian_table(s) for s in sigmas]
    return ScaleTable(sigmas=sigmas, tables=tables, bank=build_bank(tables))


def gaussian_cdf_table(sigma_index: int) -> CdfTable:
    if not 0 <= sigma_index < NUM_SCALES:
        raise CodingError(f"sigma index {sigma_index} out of [0, {NUM_SCALES})")
    return default_scale_table().tables[sigma_index]


def _resolve(tables, n: int):
    """Accept either a per-symbol list of CdfTable or a (bank, ids) pair."""
    if isinstance(tables, tuple) and len(tables) == 2 and isinstance(tables[0], CdfBank):
        bank, ids = tables
        ids = np.ascontiguousarray(ids, dtype=np.int32).reshape(-1)
        if ids.shape[0] != n:
            raise CodingError(f"{n} symbols but {ids.shape[0]} table ids")
        return bank, ids
    tables = list(tables)
    if len(tables) != n:
        raise CodingError(f"{n} symbols but {len(tables)} tables")
    uniq, ids = [], np.empty(n, dtype=np.int32)
    seen = {}
    for i, t in enumerate(tables):
        j = seen.get(id(t))
        if j is None:
            j = seen[id(t)] = len(uniq)
            uniq.append(t)
        ids[i] = j
    return build_bank(uniq), ids


def _check_support(syms: np.ndarray, bank: CdfBank, ids: np.ndarray) -> np.ndarray:
    rel = syms - bank.mins[ids].astype(np.int64)
    bad = (rel < 0) | (rel >= bank.sizes[ids])
    if np.any(bad):
        i = int(np.argmax(bad))
        raise CodingError(f"symbol {syms[i]} at index {i} outside table support")
    return rel


def encode_symbols(symbols, tables) -> bytes:
    """Range-code an integer sequence; tables give each symbol's pmf."""
    syms = np.ascontiguousarray(symbols, dtype=np.int64).reshape(-1)
    bank, ids = _resolve(tables, syms.shape[0])
    rel = _check_support(syms, bank, ids)
    pos = bank.offsets[ids] + rel
    cums = np.ascontiguousarray(bank.cdf[pos])
    freqs = np.ascontiguousarray(bank.cdf[pos + 1] - cums)
    out = np.empty(2 * syms.shape[0] + 64, dtype=np.uint8)
    n = kernels.rc_encode_core(cums, freqs, out)
    return out[:n].tobytes()


def decode_symbols(data: bytes, tables) -> np.ndarray:
    """Exact inverse of encode_symbols given the same table sequence."""
    if isinstance(tables, tuple):
        n = tables[1].size if hasattr(tables[1], "size") else len(tables[1])
    else:
        n = len(tables)
    bank, ids = _resolve(tables, n)
    buf = np.frombuffer(data, dtype=np.uint8)
    rel, consumed = kernels.rc_decode_core(buf, n, ids, bank.cdf, bank.offsets, bank.sizes)
    # a well-formed stream over-reads by at most the coder's phantom tail
    if consumed > len(data) + FLUSH_BYTES:
        raise CodingError(f"truncated stream: needed {consumed} bytes, have {len(data)}")
    return bank.mins[ids].astype(np.int64) + rel


def estimate_rate(symbols, tables) -> float:
    """Ideal code length in bits: sum of -log2(pmf/2^16)."""
    syms = np.ascontiguousarray(symbols, dtype=np.int64).reshape(-1)
    if syms.shape[0] == 0:
        return 0.0
    bank, ids = _resolve(tables, syms.shape[0])
    rel = _check_support(syms, bank, ids)
    pos = bank.offsets[ids] + rel
    freqs = (bank.cdf[pos + 1] - bank.cdf[pos]).astype(np.float64)
    return float(np.sum(kernels.RC_TOTAL_BITS - np.log2(freqs)))


@dataclass
class RdReport:
    """Rate-distortion decomposition: L = bpp_y + bpp_z + lambda * mse."""

    bits_y: float
    bits_z: float
    bpp_y: float
    bpp_z: float
    mse: float
    lam: float
    loss: float


def rd_loss(x: np.ndarray, x_hat: np.ndarray, bits_y: float, bits_z: float, lam: float) -> RdReport:
    """Evaluation-only loss; mse on the 8-bit scale, bpp over H*W pixels."""
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    h, w = x.shape[-2], x.shape[-1]
    mse = float(np.mean((255.0 * (np.asarray(x, np.float64) - np.asarray(x_hat, np.float64))) ** 2))
    bpp_y = bits_y / (h * w)
    bpp_z = bits_z / (h * w)
    return RdReport(bits_y=bits_y, bits_z=bits_z, bpp_y=bpp_y, bpp_z=bpp_z,
                    mse=mse, lam=lam, loss=bpp_y + bpp_z + lam * mse)
