"""Evaluation metrics: PSNR, 5-scale MS-SSIM, bits per pixel, BD-rate and
pixel-difference maps.  Images are float arrays in [0, 1], HWC or HW."""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.interpolate import pchip_interpolate

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MS_SSIM_K1 = 0.01
MS_SSIM_K2 = 0.03
MS_SSIM_WIN = 11
MS_SSIM_SIGMA = 1.5
MS_SSIM_MIN_DIM = 161  # leaves >= one 11-tap window after 4 halvings


def _chw(img) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        return a[None]
    if a.ndim == 3:
        return a.transpose(2, 0, 1)
    raise ValueError(f"expected HW or HWC image, got shape {a.shape}")


def psnr(a, b) -> float:
    """10*log10(255^2 / mse) on the 8-bit scale; +inf for identical images."""
    x, y = _chw(a), _chw(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    mse = float(np.mean((255.0 * (x - y)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _gauss_1d(size: int, sigma: float) -> np.ndarray:
    t = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(t ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _blur_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation along the two trailing axes."""
    v = sliding_window_view(x, g.size, axis=-1) @ g
    return np.moveaxis(sliding_window_view(v, g.size, axis=-2) @ g, -1, -2)


def _half(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    if h % 2 or w % 2:
        x = np.pad(x, ((0, 0), (0, h % 2), (0, w % 2)), mode="edge")
        c, h, w = x.shape
    v = x.reshape(c, h // 2, 2, w // 2, 2)
    return (v[:, :, 0, :, 0] + v[:, :, 1, :, 0] + v[:, :, 0, :, 1] + v[:, :, 1, :, 1]) * 0.25


def ms_ssim(a, b) -> float:
    """Standard 5-scale MS-SSIM, data range 1.0, channel-averaged."""
    x, y = _chw(a), _chw(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape[1], x.shape[2]) < MS_SSIM_MIN_DIM:
        raise ValueError(f"image too small for 5 scales: min dim "
                         f"{min(x.shape[1], x.shape[2])} < {MS_SSIM_MIN_DIM}")
    c1 = MS_SSIM_K1 ** 2
    c2 = MS_SSIM_K2 ** 2
    g = _gauss_1d(MS_SSIM_WIN, MS_SSIM_SIGMA)
    score = 1.0
    for s, weight in enumerate(MS_SSIM_WEIGHTS):
        mu1, mu2 = _blur_valid(x, g), _blur_valid(y, g)
        s11 = _blur_valid(x * x, g) - mu1 * mu1
        s22 = _blur_valid(y * y, g) - mu2 * mu2
        s12 = _blur_valid(x * y, g) - mu1 * mu2
        cs = (2.0 * s12 + c2) / (s11 + s22 + c2)
        if s == len(MS_SSIM_WEIGHTS) - 1:
            ssim = ((2.0 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1)) * cs
            score *= max(float(np.mean(ssim)), 0.0) ** weight
        else:
            score *= max(float(np.mean(cs)), 0.0) ** weight
            x, y = _half(x), _half(y)
    return score


def bpp(payload_bytes: int, width: int, height: int) -> float:
    if width * height <= 0:
        raise ValueError("zero-area image")
    return 8.0 * payload_bytes / (width * height)


@dataclass
class RdPoint:
    bpp: float
    psnr: float
    ms_ssim: float = 1.0

    def __post_init__(self):
        if self.ms_ssim > 1.0:
            raise ValueError("ms_ssim cannot exceed 1")


@dataclass
class RdCurve:
    points: list

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("a curve needs at least 2 points")
        bpps = [p.bpp for p in self.points]
        if any(b2 <= b1 for b1, b2 in zip(bpps, bpps[1:])):
            raise ValueError("points must be sorted by strictly increasing bpp")

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points], dtype=np.float64)

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points], dtype=np.float64)


def bd_rate(reference: RdCurve, test: RdCurve) -> float:
    """Average rate difference (percent, negative = test cheaper) via
    piecewise-cubic interpolation of log-rate over the common PSNR range."""
    if len(reference.points) < 4 or len(test.points) < 4:
        raise ValueError("bd_rate needs at least 4 points per curve")
    rq, rr = reference.qualities, np.log(reference.rates)
    tq, tr = test.qualities, np.log(test.rates)
    lo = max(rq.min(), tq.min())
    hi = min(rq.max(), tq.max())
    if hi <= lo:
        raise ValueError("curves have no overlapping quality range")
    xs = np.linspace(lo, hi, 1000)
    v_ref = pchip_interpolate(np.sort(rq), rr[np.argsort(rq)], xs)
    v_test = pchip_interpolate(np.sort(tq), tr[np.argsort(tq)], xs)
    avg = float(np.trapezoid(v_test - v_ref, xs)) / (hi - lo)
    return (math.exp(avg) - 1.0) * 100.0


def diff_map(a, b) -> np.ndarray:
    """Mean absolute channel difference, min-max scaled to uint8."""
    x, y = _chw(a), _chw(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    d = np.mean(np.abs(x - y), axis=0)
    span = float(d.max() - d.min())
    if span == 0.0:
        return np.zeros(d.shape, dtype=np.uint8)
    return np.rint((d - d.min()) / span * 255.0).astype(np.uint8)


def write_rd_csv(path, rows) -> None:
    """Rows of (label, bpp, psnr, ms_ssim) to CSV."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("label,bpp,psnr,ms_ssim\n")
        for label, point in rows:
            f.write(f"{label},{point.bpp:.6f},{point.psnr:.4f},{point.ms_ssim:.6f}\n")
