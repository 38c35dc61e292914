"""Embedded self-test properties run by `cleric verify`."""

from dataclasses import dataclass

import numpy as np

from . import entropy
from .blocks import DcnParams, dcnv2
from .lifting import LiftingStage, forward_dwt2d, inverse_dwt2d
from .numerics import ConvSpec, conv2d


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def _random_stage(rng) -> LiftingStage:
    return LiftingStage(
        refine1=ConvSpec(rng.uniform(-0.5, 0.5, (16, 3, 3, 3)).astype(np.float32)),
        refine2=ConvSpec(rng.uniform(-0.5, 0.5, (3, 16, 3, 3)).astype(np.float32)),
    )


def check_lifting_invertibility(rng) -> CheckResult:
    worst = 0.0
    for _ in range(4):
        stage = _random_stage(rng)
        x = rng.random((1, 3, 32, 32), dtype=np.float32)
        rec = inverse_dwt2d(forward_dwt2d(x, stage), stage)
        worst = max(worst, float(np.max(np.abs(rec - x))))
    ok = worst < 1e-4
    return CheckResult("lifting-invertibility", ok, f"max abs error {worst:.2e}")


def check_dcnv2_reduction(rng) -> CheckResult:
    worst = 0.0
    for _ in range(8):
        cin, cout = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        stride = int(rng.integers(1, 3))
        kernel = ConvSpec(rng.standard_normal((cout, cin, 3, 3)).astype(np.float32),
                          rng.standard_normal(cout).astype(np.float32), stride=stride)
        offs = ConvSpec(np.zeros((27, cin, 3, 3), np.float32), stride=stride)
        p = DcnParams(kernel=kernel, offset_net=offs)
        x = rng.standard_normal((1, cin, 12, 12)).astype(np.float32)
        h_out = -(-12 // stride)
        zero_off = np.zeros((1, 18, h_out, h_out), np.float32)
        unit_mod = np.ones((1, 9, h_out, h_out), np.float32)
        d = dcnv2(x, p, zero_off, unit_mod) - conv2d(x, kernel)
        worst = max(worst, float(np.max(np.abs(d))))
    ok = worst < 1e-5
    return CheckResult("dcnv2-reduction", ok, f"max abs deviation {worst:.2e}")


def check_coder_roundtrip(store, rng) -> CheckResult:
    try:
        tables = list(store.factorized) + [entropy.gaussian_cdf_table(i) for i in (0, 31, 63)]
        for t in tables:
            t.validate()
        per_table = 200
        refs, syms = [], []
        for t in tables:
            pmf = t.pmf().astype(np.float64)
            draw = rng.choice(np.arange(t.min_sym, t.max_sym + 1), size=per_table,
                              p=pmf / pmf.sum())
            syms.append(draw)
            refs.extend([t] * per_table)
        syms = np.concatenate(syms)
        blob = entropy.encode_symbols(syms, refs)
        back = entropy.decode_symbols(blob, refs)
        if not np.array_equal(back, syms):
            return CheckResult("coder-roundtrip", False, "decoded symbols differ")
        return CheckResult("coder-roundtrip", True, f"{syms.size} symbols, {len(blob)} bytes")
    except entropy.CodingError as e:
        return CheckResult("coder-roundtrip", False, f"invalid table: {e}")


def check_rate_estimate(rng) -> CheckResult:
    t = entropy.gaussian_cdf_table(40)
    pmf = t.pmf().astype(np.float64)
    syms = rng.choice(np.arange(t.min_sym, t.max_sym + 1), size=100_000, p=pmf / pmf.sum())
    refs = (entropy.build_bank([t]), np.zeros(syms.size, np.int32))
    est = entropy.estimate_rate(syms, refs)
    actual = 8 * len(entropy.encode_symbols(syms, refs))
    ok = abs(actual - est) <= 64 + 0.001 * est
    return CheckResult("rate-estimate", ok, f"estimate {est:.0f} bits, actual {actual} bits")


def run_verify(store, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [
        check_lifting_invertibility(rng),
        check_dcnv2_reduction(rng),
        check_coder_roundtrip(store, rng),
        check_rate_estimate(rng),
    ]


def run_verify_path(path, seed: int = 0) -> list:
    """Load-and-verify; a store whose CDF tables fail their invariants is
    reported as the coder property failing rather than a load crash."""
    from .weights import load_weights

    rng = np.random.default_rng(seed)
    results = [check_lifting_invertibility(rng), check_dcnv2_reduction(rng)]
    try:
        store = load_weights(path)
    except entropy.CodingError as e:
        results.append(CheckResult("coder-roundtrip", False, f"invalid CDF table: {e}"))
    else:
        results.append(check_coder_roundtrip(store, rng))
    results.append(check_rate_estimate(rng))
    return results
