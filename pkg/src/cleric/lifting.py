"""Learnable lifting-scheme wavelet: CDF 9/7 predict/update steps plus a
shared convolutional refinement, exactly invertible for any refine weights.

Boundary handling is whole-point symmetric extension of the full signal,
which on the even/odd half-grids reduces to replicating the last even
sample (predict) and the first odd sample (update).
"""

from dataclasses import dataclass

import numpy as np

from .numerics import ConvSpec, as_tensor, avgpool2, conv2d, gelu

# CDF 9/7 lifting factorization constants.  With low = K*s and high = d/K
# the zero-refine transform equals direct FIR analysis by the classical
# 9/7 taps scaled to sqrt(2) DC gain (validated against the FIR oracle in
# the test suite, not trusted as typed constants).
CDF97_ALPHA = -1.586134342059924
CDF97_BETA = -0.052980118572961
CDF97_GAMMA = 0.882911075530934
CDF97_DELTA = 0.443506852043971
CDF97_K = 1.149604398860241

# Output scale of the refinement operator.  Bounding |R| <= 0.25 also caps
# its Jacobian, which keeps float32 rounding from amplifying through the
# inverse recomputation; 1.0 admits weight draws that breach the 1e-4
# reconstruction contract.
REFINE_SCALE = 0.25


@dataclass
class LiftingStage:
    """Fixed CDF 9/7 coefficients plus the shared refinement operator.

    refine1/refine2 form a two-layer convolution (channels -> hidden ->
    channels, GELU between, scaled-tanh output) applied to every
    predict/update increment; one parameter set is shared by all four steps
    and by the row/column passes.  The bounded output keeps step magnitudes
    and error amplification small enough that float32 reconstruction stays
    within tolerance for any weights.
    """

    refine1: ConvSpec
    refine2: ConvSpec
    alpha: float = CDF97_ALPHA
    beta: float = CDF97_BETA
    gamma: float = CDF97_GAMMA
    delta: float = CDF97_DELTA
    k_scale: float = CDF97_K

    def __post_init__(self):
        if self.refine1.in_ch != self.refine2.out_ch:
            raise ValueError("refinement must preserve channel count")
        if self.refine1.out_ch != self.refine2.in_ch:
            raise ValueError("refinement conv widths do not chain")

    @classmethod
    def zero(cls, channels: int = 3, hidden: int = 16) -> "LiftingStage":
        return cls(
            refine1=ConvSpec(np.zeros((hidden, channels, 3, 3), np.float32)),
            refine2=ConvSpec(np.zeros((channels, hidden, 3, 3), np.float32)),
        )


@dataclass
class SubbandSet:
    """The four lifting subbands plus the 2x-downsampled input patch."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    half: np.ndarray = None

    def __post_init__(self):
        shapes = {m.shape for m in (self.ll, self.lh, self.hl, self.hh) if m is not None}
        if self.half is not None:
            shapes.add(self.half.shape)
        if len(shapes) != 1:
            raise ValueError(f"subbands must share one shape, got {sorted(shapes)}")


def split_even_odd(x: np.ndarray, axis: str):
    """Split along rows or columns into even/odd-indexed halves."""
    x = as_tensor(x)
    ax = {"row": 2, "col": 3}[axis]
    if x.shape[ax] % 2:
        raise ValueError(f"{axis} length {x.shape[ax]} is odd")
    if ax == 2:
        return x[:, :, 0::2, :].copy(), x[:, :, 1::2, :].copy()
    return x[:, :, :, 0::2].copy(), x[:, :, :, 1::2].copy()


def merge_even_odd(even: np.ndarray, odd: np.ndarray, axis: str) -> np.ndarray:
    """Interleave even/odd halves back; inverse of split_even_odd, bit-exact."""
    if even.shape != odd.shape:
        raise ValueError("even/odd shape mismatch")
    ax = {"row": 2, "col": 3}[axis]
    b, c, h, w = even.shape
    if ax == 2:
        out = np.empty((b, c, 2 * h, w), dtype=even.dtype)
        out[:, :, 0::2, :] = even
        out[:, :, 1::2, :] = odd
    else:
        out = np.empty((b, c, h, 2 * w), dtype=even.dtype)
        out[:, :, :, 0::2] = even
        out[:, :, :, 1::2] = odd
    return out


def _shift_next(x: np.ndarray) -> np.ndarray:
    """x[n+1] along rows with replicate at the end (symmetric extension)."""
    return np.concatenate([x[:, :, 1:, :], x[:, :, -1:, :]], axis=2)


def _shift_prev(x: np.ndarray) -> np.ndarray:
    """x[n-1] along rows with replicate at the start."""
    return np.concatenate([x[:, :, :1, :], x[:, :, :-1, :]], axis=2)


def _refine(stage: LiftingStage, v: np.ndarray) -> np.ndarray:
    r = np.tanh(conv2d(gelu(conv2d(v, stage.refine1)), stage.refine2))
    return np.float32(REFINE_SCALE) * r


def _steps(stage: LiftingStage):
    a, b, g, d = (np.float32(stage.alpha), np.float32(stage.beta),
                  np.float32(stage.gamma), np.float32(stage.delta))
    return ((a, True), (b, False), (g, True), (d, False))


def lift_forward_1d(even: np.ndarray, odd: np.ndarray, stage: LiftingStage, axis: str = "row"):
    """Two refined predict/update rounds then scaling -> (low, high)."""
    if even.shape != odd.shape:
        raise ValueError("even/odd shape mismatch")
    if axis == "col":
        lo, hi = lift_forward_1d(even.swapaxes(2, 3), odd.swapaxes(2, 3), stage, "row")
        return (np.ascontiguousarray(lo.swapaxes(2, 3)),
                np.ascontiguousarray(hi.swapaxes(2, 3)))
    s, d = even, odd
    # the increment (step + refine) is formed as one value so the inverse
    # can subtract a bit-identical quantity
    for coef, is_predict in _steps(stage):
        if is_predict:
            step = coef * (s + _shift_next(s))
            d = d + (step + _refine(stage, step))
        else:
            step = coef * (_shift_prev(d) + d)
            s = s + (step + _refine(stage, step))
    k = np.float32(stage.k_scale)
    return s * k, d / k


def lift_inverse_1d(low: np.ndarray, high: np.ndarray, stage: LiftingStage, axis: str = "row"):
    """Exact reversal of lift_forward_1d -> (even, odd)."""
    if low.shape != high.shape:
        raise ValueError("low/high shape mismatch")
    if axis == "col":
        e, o = lift_inverse_1d(low.swapaxes(2, 3), high.swapaxes(2, 3), stage, "row")
        return (np.ascontiguousarray(e.swapaxes(2, 3)),
                np.ascontiguousarray(o.swapaxes(2, 3)))
    k = np.float32(stage.k_scale)
    s, d = low / k, high * k
    for coef, is_predict in reversed(_steps(stage)):
        if is_predict:
            step = coef * (s + _shift_next(s))
            d = d - (step + _refine(stage, step))
        else:
            step = coef * (_shift_prev(d) + d)
            s = s - (step + _refine(stage, step))
    return s, d


def forward_dwt2d(x: np.ndarray, stage: LiftingStage) -> SubbandSet:
    """Row-axis lifting then column-axis lifting; also computes the
    avgpool2 half-resolution patch.  Requires even H and W."""
    x = as_tensor(x)
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ValueError(f"spatial dims must be even, got {x.shape[2]}x{x.shape[3]}")
    e, o = split_even_odd(x, "row")
    xl, xh = lift_forward_1d(e, o, stage, "row")
    ll, lh = lift_forward_1d(*split_even_odd(xl, "col"), stage, "col")
    hl, hh = lift_forward_1d(*split_even_odd(xh, "col"), stage, "col")
    return SubbandSet(ll=ll, lh=lh, hl=hl, hh=hh, half=avgpool2(x))


def inverse_dwt2d(s: SubbandSet, stage: LiftingStage) -> np.ndarray:
    """Exact inverse of forward_dwt2d (the half member is ignored)."""
    xl = merge_even_odd(*lift_inverse_1d(s.ll, s.lh, stage, "col"), "col")
    xh = merge_even_odd(*lift_inverse_1d(s.hl, s.hh, stage, "col"), "col")
    e, o = lift_inverse_1d(xl, xh, stage, "row")
    return merge_even_odd(e, o, "row")
