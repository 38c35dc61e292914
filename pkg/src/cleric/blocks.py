"""Neural building blocks: modulated deformable convolution (9-tap 3x3
lattice), strided/upsampling deformable residual blocks, and the
weight-shared recurrent residual block."""

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels
from .numerics import ConvSpec, as_tensor, bilinear_resize, conv2d, gelu, pixel_shuffle, sigmoid


@dataclass
class DcnParams:
    """kernel: (out,in,3,3) tap weights; offset_net predicts 3K channels per
    output position (2K raw offsets then K modulation logits)."""

    kernel: ConvSpec
    offset_net: ConvSpec

    def __post_init__(self):
        if self.offset_net.out_ch != 3 * self.taps:
            raise ValueError(f"offset net must emit {3 * self.taps} channels, "
                             f"got {self.offset_net.out_ch}")
        if self.offset_net.stride != self.kernel.stride:
            raise ValueError("offset net stride must match kernel stride")

    @property
    def taps(self) -> int:
        return self.kernel.weight.shape[2] * self.kernel.weight.shape[3]


def predict_offsets(x: np.ndarray, p: DcnParams):
    """Run the offset net: raw offsets plus sigmoid-squashed modulation."""
    raw = conv2d(x, p.offset_net)
    k = p.taps
    return raw[:, : 2 * k], sigmoid(raw[:, 2 * k :])


def dcnv2(x: np.ndarray, p: DcnParams, offsets: np.ndarray, modulation: np.ndarray) -> np.ndarray:
    """Modulated deformable convolution: each tap samples at its lattice
    position plus a fractional offset (bilinear, edge-clamped) and is scaled
    by its modulation scalar before the weighted accumulation."""
    x = as_tensor(x)
    if x.shape[1] != p.kernel.in_ch:
        raise ValueError(f"channel mismatch: {x.shape[1]} vs {p.kernel.in_ch}")
    k = p.taps
    if offsets.shape[1] != 2 * k or modulation.shape[1] != k:
        raise ValueError("offset/modulation channel count mismatch")
    kh, kw = p.kernel.weight.shape[2:]
    wk = np.ascontiguousarray(p.kernel.weight.reshape(p.kernel.out_ch, p.kernel.in_ch, k))
    out = [kernels.dcnv2_core(xi, wk, p.kernel.bias,
                              np.ascontiguousarray(offsets[i], dtype=np.float32),
                              np.ascontiguousarray(modulation[i], dtype=np.float32),
                              p.kernel.stride, kh, kw)
           for i, xi in enumerate(x)]
    return np.stack(out)


def _deformable(x: np.ndarray, p: DcnParams) -> np.ndarray:
    offsets, modulation = predict_offsets(x, p)
    return dcnv2(x, p, offsets, modulation)


MainPath = Union[DcnParams, ConvSpec]


def _main(x: np.ndarray, main: MainPath) -> np.ndarray:
    if isinstance(main, DcnParams):
        return _deformable(x, main)
    return conv2d(x, main)


@dataclass
class DrbsParams:
    """Stride-2 down block: deformable (or plain conv) main path plus a 1x1
    stride-2 shortcut."""

    main: MainPath
    shortcut: ConvSpec


@dataclass
class DrbuParams:
    """2x up block: main path expands channels x4 then pixel-shuffles; the
    shortcut is a 1x1 convolution followed by bilinear 2x upsampling."""

    main: MainPath
    shortcut: ConvSpec


@dataclass
class R2BParams:
    """Channel-preserving conv pair reused across all t iterations."""

    conv1: ConvSpec
    conv2: ConvSpec
    t: int = 2

    def __post_init__(self):
        if self.conv1.in_ch != self.conv2.out_ch:
            raise ValueError("recursion must preserve channel count")
        if self.t < 0:
            raise ValueError("t must be >= 0")


def drbs(x: np.ndarray, params: DrbsParams) -> np.ndarray:
    """Halve spatial resolution: GELU(main(x) + shortcut(x))."""
    x = as_tensor(x)
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ValueError(f"drbs needs even dims, got {x.shape[2]}x{x.shape[3]}")
    return gelu(_main(x, params.main) + conv2d(x, params.shortcut))


def drbu(x: np.ndarray, params: DrbuParams) -> np.ndarray:
    """Double spatial resolution: GELU(shuffle(main(x)) + up(shortcut(x)))."""
    x = as_tensor(x)
    up = pixel_shuffle(_main(x, params.main), 2)
    skip = bilinear_resize(conv2d(x, params.shortcut), (x.shape[2] * 2, x.shape[3] * 2))
    return gelu(up + skip)


def r2b(x: np.ndarray, p: R2BParams) -> np.ndarray:
    """X_0 = x; X_i = F(X_{i-1}) + X_{i-1} with
    F(X) = GELU(conv2(GELU(conv1(X)))), same weights every iteration."""
    x = as_tensor(x)
    if x.shape[1] != p.conv1.in_ch:
        raise ValueError(f"channel mismatch: {x.shape[1]} vs {p.conv1.in_ch}")
    for _ in range(p.t):
        x = x + gelu(conv2d(gelu(conv2d(x, p.conv1)), p.conv2))
    return x
