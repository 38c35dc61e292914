"""Analysis/synthesis networks and the hyperprior entropy-parameter path.

The encoder runs a learnable lifting decomposition, feeds the low band and
the stacked high bands (each augmented with the 2x-downsampled patch)
through two deformable/recurrent branches, and concatenates their outputs
into the latent.  A single unified trunk decodes back to four subbands and
inverts the lifting.  Latent probabilities come from a hyperprior plus a
channel-sliced autoregressive context.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import entropy
from .blocks import (DcnParams, DrbsParams, DrbuParams, R2BParams, drbs, drbu, r2b)
from .lifting import LiftingStage, SubbandSet, forward_dwt2d, inverse_dwt2d
from .numerics import ConvSpec, as_tensor, conv2d, gelu, pixel_shuffle

DEFAULT_LAMBDA_GRID = (0.005, 0.0075, 0.011, 0.02, 0.0335)
LIFT_REFINE_HIDDEN = 16
DCN_TAPS = 9  # 3x3 deformable lattice


def _f32(v: float) -> float:
    return float(np.float32(v))


@dataclass
class CodecConfig:
    """Architecture hyperparameters and ablation toggles."""

    hidden: int = 192          # branch width
    latent: int = 320          # latent channels
    recursions: int = 2        # recurrent block iterations
    slices: int = 5            # channel-context slice count
    lifting_enabled: bool = True
    drb_enabled: bool = True
    r2b_enabled: bool = True
    quality: float = 0.011     # lambda tag carried into bitstreams
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID

    def __post_init__(self):
        if self.hidden <= 0 or self.latent <= 0:
            raise ValueError("hidden/latent widths must be positive")
        if self.latent % self.slices:
            raise ValueError(f"latent {self.latent} not divisible by {self.slices} slices")
        if self.lifting_enabled and self.latent % 2:
            raise ValueError("dual-branch encoder needs an even latent width")
        if self.recursions < 0:
            raise ValueError("recursions must be >= 0")
        self.quality = _f32(self.quality)
        self.lambda_grid = tuple(_f32(g) for g in self.lambda_grid)

    @property
    def slice_channels(self) -> int:
        return self.latent // self.slices


@dataclass
class ParamDef:
    name: str
    shape: tuple
    init: str        # "uniform" | "zero"
    stride: int = 1


def _conv_def(name, cin, cout, k, stride=1, init="uniform"):
    return [ParamDef(f"{name}.w", (cout, cin, k, k), init, stride),
            ParamDef(f"{name}.b", (cout,), "zero", stride)]


def _down_defs(prefix, cin, cout, cfg):
    defs = _conv_def(f"{prefix}.main", cin, cout, 3, stride=2)
    if cfg.drb_enabled:
        defs += _conv_def(f"{prefix}.offs", cin, 3 * DCN_TAPS, 3, stride=2, init="zero")
    defs += _conv_def(f"{prefix}.skip", cin, cout, 1, stride=2)
    return defs


def _up_defs(prefix, cin, cout, cfg):
    defs = _conv_def(f"{prefix}.main", cin, cout * 4, 3)
    if cfg.drb_enabled:
        defs += _conv_def(f"{prefix}.offs", cin, 3 * DCN_TAPS, 3, init="zero")
    defs += _conv_def(f"{prefix}.skip", cin, cout, 1)
    return defs


def _r2b_defs(prefix, ch, cfg):
    if not cfg.r2b_enabled:
        return []
    return _conv_def(f"{prefix}.conv1", ch, ch, 3) + _conv_def(f"{prefix}.conv2", ch, ch, 3)


def _enc_branch_widths(cfg, cin):
    return [(cin, cfg.hidden), (cfg.hidden, cfg.hidden), (cfg.hidden, cfg.latent // 2)]


def param_registry(cfg: CodecConfig):
    """Every tensor the configured architecture needs, in canonical order."""
    defs = []
    if cfg.lifting_enabled:
        defs += _conv_def("lift.refine1", 3, LIFT_REFINE_HIDDEN, 3, init="zero")
        defs += _conv_def("lift.refine2", LIFT_REFINE_HIDDEN, 3, 3, init="zero")
        for branch, cin in (("low", 6), ("high", 12)):
            for i, (a, b) in enumerate(_enc_branch_widths(cfg, cin)):
                defs += _down_defs(f"enc.{branch}.down{i}", a, b, cfg)
                if i < 2:
                    defs += _r2b_defs(f"enc.{branch}.r2b{i}", b, cfg)
        dec_widths = [(cfg.latent, cfg.hidden), (cfg.hidden, cfg.hidden), (cfg.hidden, 12)]
    else:
        n = cfg.hidden
        widths = [(3, n), (n, n), (n, n), (n, cfg.latent)]
        for i, (a, b) in enumerate(widths):
            defs += _down_defs(f"enc.main.down{i}", a, b, cfg)
            if i < 3:
                defs += _r2b_defs(f"enc.main.r2b{i}", b, cfg)
        dec_widths = [(cfg.latent, n), (n, n), (n, n), (n, 3)]
    for i, (a, b) in enumerate(dec_widths):
        defs += _up_defs(f"dec.up{i}", a, b, cfg)
        if i < len(dec_widths) - 1:
            defs += _r2b_defs(f"dec.r2b{i}", b, cfg)
    n, m = cfg.hidden, cfg.latent
    defs += _conv_def("hyp.enc.c0", m, n, 3)
    defs += _conv_def("hyp.enc.c1", n, n, 3, stride=2)
    defs += _conv_def("hyp.enc.c2", n, n, 3, stride=2)
    defs += _conv_def("hyp.dec.u0", n, n * 4, 3)
    defs += _conv_def("hyp.dec.u1", n, n * 4, 3)
    defs += _conv_def("hyp.dec.c2", n, 2 * m, 3)
    sc = cfg.slice_channels
    for j in range(cfg.slices):
        cin = 2 * m + j * sc
        defs += [ParamDef(f"ctx.s{j}.c0.w", (n, cin, 1, 1), "uniform"),
                 ParamDef(f"ctx.s{j}.c0.b", (n,), "zero"),
                 ParamDef(f"ctx.s{j}.c1.w", (n, n, 1, 1), "uniform"),
                 ParamDef(f"ctx.s{j}.c1.b", (n,), "zero"),
                 ParamDef(f"ctx.s{j}.c2.w", (2 * sc, n, 1, 1), "uniform"),
                 ParamDef(f"ctx.s{j}.c2.b", (2 * sc,), "zero")]
    return defs


def required_names(cfg: CodecConfig):
    return [d.name for d in param_registry(cfg)]


# ---------------------------------------------------------------------------
# weight binding


def _spec(w, name, stride=1) -> ConvSpec:
    return ConvSpec(w.tensor(f"{name}.w"), w.tensor(f"{name}.b"), stride=stride)


class _Bound:
    """Parameter structs built once per (store, config) pair."""

    def __init__(self, w, cfg: CodecConfig):
        self.cfg = cfg
        if cfg.lifting_enabled:
            self.lift = LiftingStage(refine1=_spec(w, "lift.refine1"),
                                     refine2=_spec(w, "lift.refine2"))
        self.enc = {}
        if cfg.lifting_enabled:
            for branch, cin in (("low", 6), ("high", 12)):
                self.enc[branch] = self._chain(w, f"enc.{branch}", 3, cfg)
        else:
            self.enc["main"] = self._chain(w, "enc.main", 4, cfg)
        n_up = 3 if cfg.lifting_enabled else 4
        self.dec = self._up_chain(w, "dec", n_up, cfg)
        self.hyp_enc = [_spec(w, "hyp.enc.c0"), _spec(w, "hyp.enc.c1", 2), _spec(w, "hyp.enc.c2", 2)]
        self.hyp_dec = [_spec(w, "hyp.dec.u0"), _spec(w, "hyp.dec.u1"), _spec(w, "hyp.dec.c2")]
        self.ctx = [[_spec(w, f"ctx.s{j}.c0"), _spec(w, f"ctx.s{j}.c1"), _spec(w, f"ctx.s{j}.c2")]
                    for j in range(cfg.slices)]

    @staticmethod
    def _main_path(w, prefix, stride, cfg):
        main = _spec(w, f"{prefix}.main", stride)
        if cfg.drb_enabled:
            return DcnParams(kernel=main, offset_net=_spec(w, f"{prefix}.offs", stride))
        return main

    def _chain(self, w, prefix, n_down, cfg):
        stages = []
        for i in range(n_down):
            down = DrbsParams(main=self._main_path(w, f"{prefix}.down{i}", 2, cfg),
                              shortcut=_spec(w, f"{prefix}.down{i}.skip", 2))
            stages.append(("down", down))
            if i < n_down - 1 and cfg.r2b_enabled:
                stages.append(("r2b", R2BParams(conv1=_spec(w, f"{prefix}.r2b{i}.conv1"),
                                                conv2=_spec(w, f"{prefix}.r2b{i}.conv2"),
                                                t=cfg.recursions)))
        return stages

    def _up_chain(self, w, prefix, n_up, cfg):
        stages = []
        for i in range(n_up):
            up = DrbuParams(main=self._main_path(w, f"{prefix}.up{i}", 1, cfg),
                            shortcut=_spec(w, f"{prefix}.up{i}.skip"))
            stages.append(("up", up))
            if i < n_up - 1 and cfg.r2b_enabled:
                stages.append(("r2b", R2BParams(conv1=_spec(w, f"{prefix}.r2b{i}.conv1"),
                                                conv2=_spec(w, f"{prefix}.r2b{i}.conv2"),
                                                t=cfg.recursions)))
        return stages


def _bound(w, cfg: CodecConfig) -> _Bound:
    cache = getattr(w, "_codec_bound", None)
    if cache is None or cache.cfg is not cfg:
        cache = _Bound(w, cfg)
        try:
            w._codec_bound = cache
        except AttributeError:
            pass
    return cache


def _run_chain(x, stages):
    for kind, params in stages:
        x = drbs(x, params) if kind == "down" else (
            drbu(x, params) if kind == "up" else r2b(x, params))
    return x


# ---------------------------------------------------------------------------
# transforms


@dataclass
class LatentPack:
    y: np.ndarray
    y_hat: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    z_hat: Optional[np.ndarray] = None


@dataclass
class EntropyParams:
    """Per-element Gaussian parameters for one latent slice."""

    mu: np.ndarray
    sigma: np.ndarray


def analysis_transform(x: np.ndarray, w, cfg: CodecConfig) -> LatentPack:
    """Image (b,3,H,W) in [0,1], H and W divisible by 64 -> latent
    (b, latent, H/16, W/16)."""
    x = as_tensor(x)
    if x.shape[1] != 3:
        raise ValueError(f"expected 3 input channels, got {x.shape[1]}")
    if x.shape[2] % 64 or x.shape[3] % 64:
        raise ValueError(f"spatial dims must be multiples of 64, got {x.shape[2:]}")
    if float(x.min()) < 0.0 or float(x.max()) > 1.0:
        raise ValueError("input values must lie in [0, 1]")
    bound = _bound(w, cfg)
    if cfg.lifting_enabled:
        sub = forward_dwt2d(x, bound.lift)
        xl = np.concatenate([sub.ll, sub.half], axis=1)
        xh = np.concatenate([sub.lh, sub.hl, sub.hh, sub.half], axis=1)
        y = np.concatenate([_run_chain(xl, bound.enc["low"]),
                            _run_chain(xh, bound.enc["high"])], axis=1)
    else:
        y = _run_chain(x, bound.enc["main"])
    return LatentPack(y=y)


def synthesis_transform(y_hat: np.ndarray, w, cfg: CodecConfig) -> np.ndarray:
    """Latent (b, latent, h, w) -> image (b, 3, 16h, 16w) clamped to [0,1]."""
    y_hat = as_tensor(y_hat)
    if y_hat.shape[1] != cfg.latent:
        raise ValueError(f"latent channel mismatch: {y_hat.shape[1]} vs {cfg.latent}")
    bound = _bound(w, cfg)
    out = _run_chain(y_hat, bound.dec)
    if cfg.lifting_enabled:
        sub = SubbandSet(ll=out[:, 0:3], lh=out[:, 3:6], hl=out[:, 6:9], hh=out[:, 9:12])
        out = inverse_dwt2d(sub, bound.lift)
    return np.clip(out, 0.0, 1.0)


def hyper_encode(y: np.ndarray, w, cfg: CodecConfig) -> np.ndarray:
    """Latent -> hyperlatent (b, hidden, h/4, w/4)."""
    y = as_tensor(y)
    if y.shape[2] % 4 or y.shape[3] % 4:
        raise ValueError(f"latent dims must be multiples of 4, got {y.shape[2:]}")
    bound = _bound(w, cfg)
    c0, c1, c2 = bound.hyp_enc
    return conv2d(gelu(conv2d(gelu(conv2d(y, c0)), c1)), c2)


def hyper_decode(z_hat: np.ndarray, w, cfg: CodecConfig) -> np.ndarray:
    """Hyperlatent -> hyper features (b, 2*latent, 4h, 4w)."""
    z_hat = as_tensor(z_hat)
    bound = _bound(w, cfg)
    u0, u1, c2 = bound.hyp_dec
    h = gelu(pixel_shuffle(conv2d(z_hat, u0), 2))
    h = gelu(pixel_shuffle(conv2d(h, u1), 2))
    return conv2d(h, c2)


def slice_params(psi: np.ndarray, decoded_slices, slice_idx: int, w, cfg: CodecConfig) -> EntropyParams:
    """Gaussian parameters for slice `slice_idx` from the hyper features and
    all previously decoded slices (strict channel autoregression)."""
    if slice_idx < 0 or slice_idx >= cfg.slices:
        raise ValueError(f"slice index {slice_idx} out of range")
    if len(decoded_slices) != slice_idx:
        raise ValueError(f"slice {slice_idx} needs exactly {slice_idx} prior slices, "
                         f"got {len(decoded_slices)}")
    bound = _bound(w, cfg)
    feats = np.concatenate([psi, *decoded_slices], axis=1) if decoded_slices else psi
    c0, c1, c2 = bound.ctx[slice_idx]
    h = gelu(conv2d(feats, c0))
    h = gelu(conv2d(h, c1))
    raw = conv2d(h, c2)
    sc = cfg.slice_channels
    sigma = np.exp(np.minimum(raw[:, sc:], np.float32(20.0)))
    sigma = np.clip(sigma, np.float32(entropy.SIGMA_MIN), np.float32(entropy.SIGMA_MAX))
    return EntropyParams(mu=np.ascontiguousarray(raw[:, :sc]), sigma=sigma)


def quantize(v: np.ndarray, mode: str, mu=0.0, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Round-half-away-from-zero around mu, or additive uniform noise."""
    v = np.asarray(v, dtype=np.float32)
    if mode == "round":
        d = v - np.asarray(mu, dtype=np.float32)
        return np.copysign(np.floor(np.abs(d) + np.float32(0.5)), d) + mu
    if mode == "noise":
        if rng is None:
            raise ValueError("noise mode needs a seeded generator")
        return v + rng.uniform(-0.5, 0.5, size=v.shape).astype(np.float32)
    raise ValueError(f"unknown quantize mode {mode!r}")


# ---------------------------------------------------------------------------
# latent coding (symbols <-> tensors); byte-level work lives in pipeline.py


@dataclass
class CodedLatents:
    """Encoder-side record: symbols per payload plus the reconstructions the
    decoder will arrive at."""

    z_syms: np.ndarray            # int64, flattened (c,h,w) order
    slice_syms: list              # int64 arrays, one per slice
    slice_sigma_idx: list         # int32 arrays aligned with slice_syms
    y: np.ndarray
    y_hat: np.ndarray
    z: np.ndarray
    z_hat: np.ndarray
    bits_y_estimate: float = 0.0
    bits_z_estimate: float = 0.0


def _round_syms(v: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(v) + np.float32(0.5)), v).astype(np.int64)


def _clamp_syms(syms: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(syms, mins), maxs)


def compress_latents(y: np.ndarray, w, cfg: CodecConfig,
                     scale: entropy.ScaleTable) -> CodedLatents:
    """Quantize and model the latents exactly as the decoder will: the slice
    loop conditions on reconstructed (not raw) values throughout."""
    z = hyper_encode(y, w, cfg)
    fact = w.factorized
    if len(fact) != z.shape[1]:
        raise ValueError(f"{len(fact)} factorized tables for {z.shape[1]} hyper channels")
    b, cz, hz, wz = z.shape
    if b != 1:
        raise ValueError("latent coding is per-tile (batch 1)")
    mins = np.array([t.min_sym for t in fact], dtype=np.int64)[:, None, None]
    maxs = np.array([t.max_sym for t in fact], dtype=np.int64)[:, None, None]
    z_syms = _clamp_syms(_round_syms(z[0]), mins, maxs)
    z_hat = z_syms.astype(np.float32)[None]
    psi = hyper_decode(z_hat, w, cfg)
    sc = cfg.slice_channels
    decoded = []
    slice_syms, slice_idx = [], []
    for j in range(cfg.slices):
        params = slice_params(psi, decoded, j, w, cfg)
        y_j = y[:, j * sc : (j + 1) * sc]
        idx = scale.index_for(params.sigma[0])
        syms = _round_syms(y_j[0] - params.mu[0])
        syms = _clamp_syms(syms,
                           scale.bank.mins[idx].astype(np.int64),
                           (scale.bank.mins[idx] + scale.bank.sizes[idx] - 1).astype(np.int64))
        y_hat_j = params.mu + syms.astype(np.float32)[None]
        decoded.append(y_hat_j)
        slice_syms.append(syms.reshape(-1))
        slice_idx.append(idx.reshape(-1).astype(np.int32))
    y_hat = np.concatenate(decoded, axis=1)
    z_ids = np.repeat(np.arange(cz, dtype=np.int32), hz * wz)
    fact_bank = _factorized_bank(w)
    bits_z = entropy.estimate_rate(z_syms.reshape(-1), (fact_bank, z_ids))
    bits_y = sum(entropy.estimate_rate(s, (scale.bank, i))
                 for s, i in zip(slice_syms, slice_idx))
    return CodedLatents(z_syms=z_syms.reshape(-1), slice_syms=slice_syms,
                        slice_sigma_idx=slice_idx, y=y, y_hat=y_hat,
                        z=z, z_hat=z_hat, bits_y_estimate=bits_y, bits_z_estimate=bits_z)


def decompress_latents(z_syms: np.ndarray, slice_payloads, w, cfg: CodecConfig,
                       scale: entropy.ScaleTable, latent_hw) -> CodedLatents:
    """Rebuild y_hat from decoded hyper symbols and per-slice byte payloads.

    Slices are consumed strictly in index order; each slice's entropy
    parameters depend only on psi and earlier slices.
    """
    h, wd = latent_hw
    cz = len(w.factorized)
    z_hat = z_syms.reshape(1, cz, h // 4, wd // 4).astype(np.float32)
    psi = hyper_decode(z_hat, w, cfg)
    decoded = []
    slice_syms, slice_idx = [], []
    for j, payload in enumerate(slice_payloads):
        params = slice_params(psi, decoded, j, w, cfg)
        idx = scale.index_for(params.sigma[0]).reshape(-1).astype(np.int32)
        syms = entropy.decode_symbols(payload, (scale.bank, idx))
        y_hat_j = params.mu + syms.reshape(params.mu.shape[1:]).astype(np.float32)[None]
        decoded.append(y_hat_j)
        slice_syms.append(syms)
        slice_idx.append(idx)
    y_hat = np.concatenate(decoded, axis=1)
    return CodedLatents(z_syms=z_syms.reshape(-1), slice_syms=slice_syms,
                        slice_sigma_idx=slice_idx, y=None, y_hat=y_hat,
                        z=None, z_hat=z_hat)


def _factorized_bank(w) -> entropy.CdfBank:
    bank = getattr(w, "_factorized_bank", None)
    if bank is None:
        bank = entropy.build_bank(w.factorized)
        try:
            w._factorized_bank = bank
        except AttributeError:
            pass
    return bank
