"""Deterministic low-level tensor kernels.

All tensors are NCHW float32 numpy arrays.  Convolutions use replicate
(edge) padding and 32-bit accumulation; GELU is the exact erf formulation.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import kernels

SQRT2 = float(np.sqrt(2.0))


def as_tensor(x) -> np.ndarray:
    """Validate/coerce an NCHW float32 tensor."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    if x.ndim != 4 or min(x.shape) < 1:
        raise ValueError(f"expected nonempty (b,c,h,w) tensor, got shape {x.shape}")
    return x


@dataclass
class ConvSpec:
    """Convolution weights: kernel (out,in,kh,kw), per-channel bias, stride."""

    weight: np.ndarray
    bias: np.ndarray = None
    stride: int = 1

    def __post_init__(self):
        self.weight = np.ascontiguousarray(self.weight, dtype=np.float32)
        if self.weight.ndim != 4:
            raise ValueError(f"kernel must be (out,in,kh,kw), got {self.weight.shape}")
        kh, kw = self.weight.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {kh}x{kw}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.bias is None:
            self.bias = np.zeros(self.weight.shape[0], dtype=np.float32)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float32)
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError("bias length must equal output channels")

    @property
    def out_ch(self) -> int:
        return self.weight.shape[0]

    @property
    def in_ch(self) -> int:
        return self.weight.shape[1]


def conv2d(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Strided convolution with replicate padding; output ceil(H/s) x ceil(W/s)."""
    x = as_tensor(x)
    if x.shape[1] != spec.in_ch:
        raise ValueError(f"channel mismatch: input has {x.shape[1]}, kernel wants {spec.in_ch}")
    out = [kernels.conv2d_core(xi, spec.weight, spec.bias, spec.stride) for xi in x]
    return np.stack(out)


def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Rearrange (b, c*r^2, h, w) -> (b, c, h*r, w*r)."""
    x = as_tensor(x)
    b, c, h, w = x.shape
    if c % (r * r) != 0:
        raise ValueError(f"channels {c} not divisible by r^2={r * r}")
    oc = c // (r * r)
    y = x.reshape(b, oc, r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(y.reshape(b, oc, h * r, w * r))


def pixel_unshuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Inverse of pixel_shuffle (bit-exact rearrangement)."""
    x = as_tensor(x)
    b, c, h, w = x.shape
    if h % r != 0 or w % r != 0:
        raise ValueError("spatial dims not divisible by r")
    y = x.reshape(b, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(y.reshape(b, c * r * r, h // r, w // r))


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU: v * Phi(v) via erf."""
    x = np.asarray(x, dtype=np.float32)
    return (x * 0.5 * (1.0 + erf(x / SQRT2))).astype(np.float32)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(np.float32)


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "gelu":
        return gelu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def avgpool2(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; requires even spatial dims."""
    x = as_tensor(x)
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"avgpool2 needs even dims, got {h}x{w}")
    v = x.reshape(b, c, h // 2, 2, w // 2, 2)
    return ((v[:, :, :, 0, :, 0] + v[:, :, :, 1, :, 0]
             + v[:, :, :, 0, :, 1] + v[:, :, :, 1, :, 1]) * np.float32(0.25))


def bilinear_resize(x: np.ndarray, out_size) -> np.ndarray:
    """Bilinear resize to (h, w), align-corners=false, edge-clamped."""
    x = as_tensor(x)
    oh, ow = out_size
    if (oh, ow) == x.shape[2:]:
        return x.copy()
    return np.stack([kernels.bilinear_resize_core(xi, oh, ow) for xi in x])


def resample(x: np.ndarray, mode: str, out_size=None) -> np.ndarray:
    if mode == "avgpool2":
        return avgpool2(x)
    if mode == "bilinear":
        if out_size is None:
            raise ValueError("bilinear resample needs out_size")
        return bilinear_resize(x, out_size)
    raise ValueError(f"unknown resample mode {mode!r}")


def bilinear_sample(x: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Sample at fractional (row, col) pairs; out-of-bounds coordinates clamp
    to the edge (replicate).  Returns (b, c, n)."""
    x = as_tensor(x)
    coords = np.asarray(coords, dtype=np.float32).reshape(-1, 2)
    rows = np.ascontiguousarray(coords[:, 0])
    cols = np.ascontiguousarray(coords[:, 1])
    return np.stack([kernels.bilinear_sample_core(xi, rows, cols) for xi in x])
