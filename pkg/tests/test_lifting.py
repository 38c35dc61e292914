import numpy as np
import pytest

from cleric.lifting import (LiftingStage, SubbandSet, forward_dwt2d, inverse_dwt2d,
                            lift_forward_1d, lift_inverse_1d, merge_even_odd,
                            split_even_odd)
from cleric.numerics import ConvSpec

from oracles import dwt97_analysis_1d, dwt97_analysis_2d


def random_stage(rng, lo=-0.5, hi=0.5) -> LiftingStage:
    return LiftingStage(
        refine1=ConvSpec(rng.uniform(lo, hi, (16, 3, 3, 3)).astype(np.float32),
                         rng.uniform(lo, hi, 16).astype(np.float32)),
        refine2=ConvSpec(rng.uniform(lo, hi, (3, 16, 3, 3)).astype(np.float32),
                         rng.uniform(lo, hi, 3).astype(np.float32)),
    )


def test_split_even_odd_rows():
    x = np.arange(4 * 2, dtype=np.float32).reshape(1, 1, 4, 2)
    even, odd = split_even_odd(x, "row")
    assert np.array_equal(even[0, 0, :, 0], [0.0, 4.0])
    assert np.array_equal(odd[0, 0, :, 0], [2.0, 6.0])


def test_split_two_rows():
    x = np.zeros((1, 1, 2, 4), np.float32)
    even, odd = split_even_odd(x, "row")
    assert even.shape == odd.shape == (1, 1, 1, 4)


def test_split_merge_bijection(rng):
    x = rng.standard_normal((1, 3, 8, 8)).astype(np.float32)
    for axis in ("row", "col"):
        e, o = split_even_odd(x, axis)
        assert np.array_equal(merge_even_odd(e, o, axis), x)


def test_split_odd_length_errors():
    with pytest.raises(ValueError, match="odd"):
        split_even_odd(np.zeros((1, 1, 3, 4), np.float32), "row")


def test_lift_constant_signal():
    stage = LiftingStage.zero()
    c = 0.625
    x = np.full((1, 3, 16, 8), c, np.float32)
    e, o = split_even_odd(x, "row")
    low, high = lift_forward_1d(e, o, stage)
    assert np.max(np.abs(high)) < 1e-5
    # DC gain of the sqrt(2)-normalized analysis lowpass
    assert np.max(np.abs(low - np.sqrt(2.0) * c)) < 1e-5


def test_lift_impulse_matches_fir_oracle():
    stage = LiftingStage.zero()
    for pos in (0, 1, 7, 12, 14, 15):
        x = np.zeros((1, 3, 16, 4), np.float32)
        x[0, :, pos, :] = 1.0
        e, o = split_even_odd(x, "row")
        low, high = lift_forward_1d(e, o, stage)
        want_lo, want_hi = dwt97_analysis_1d(x[0].transpose(0, 2, 1))
        assert np.max(np.abs(low[0].transpose(0, 2, 1) - want_lo)) < 1e-5
        assert np.max(np.abs(high[0].transpose(0, 2, 1) - want_hi)) < 1e-5


def test_lift_random_matches_fir_oracle(rng):
    stage = LiftingStage.zero()
    x = rng.standard_normal((1, 3, 32, 6)).astype(np.float32)
    e, o = split_even_odd(x, "row")
    low, high = lift_forward_1d(e, o, stage)
    want_lo, want_hi = dwt97_analysis_1d(x[0].transpose(0, 2, 1))
    assert np.max(np.abs(low[0].transpose(0, 2, 1) - want_lo)) < 1e-5
    assert np.max(np.abs(high[0].transpose(0, 2, 1) - want_hi)) < 1e-5


def test_lift_inverse_zero_refine(rng):
    stage = LiftingStage.zero()
    e = rng.standard_normal((1, 3, 8, 8)).astype(np.float32)
    o = rng.standard_normal((1, 3, 8, 8)).astype(np.float32)
    low, high = lift_forward_1d(e, o, stage)
    e2, o2 = lift_inverse_1d(low, high, stage)
    assert np.max(np.abs(e2 - e)) < 1e-5
    assert np.max(np.abs(o2 - o)) < 1e-5


def test_lift_inverse_random_refine(rng):
    stage = random_stage(rng)
    e = rng.standard_normal((1, 3, 8, 8)).astype(np.float32)
    o = rng.standard_normal((1, 3, 8, 8)).astype(np.float32)
    for axis in ("row", "col"):
        low, high = lift_forward_1d(e, o, stage, axis)
        e2, o2 = lift_inverse_1d(low, high, stage, axis)
        assert np.max(np.abs(e2 - e)) < 1e-4
        assert np.max(np.abs(o2 - o)) < 1e-4


def test_lift_inverse_zero_bands():
    stage = LiftingStage.zero()
    z = np.zeros((1, 3, 4, 4), np.float32)
    e, o = lift_inverse_1d(z, z, stage)
    assert np.array_equal(e, z) and np.array_equal(o, z)


def test_dwt2d_shapes():
    stage = LiftingStage.zero()
    x = np.random.default_rng(0).random((1, 3, 256, 256), dtype=np.float32)
    s = forward_dwt2d(x, stage)
    for band in (s.ll, s.lh, s.hl, s.hh, s.half):
        assert band.shape == (1, 3, 128, 128)


def test_dwt2d_constant_high_bands_vanish():
    stage = LiftingStage.zero()
    x = np.full((1, 3, 32, 32), 0.4, np.float32)
    s = forward_dwt2d(x, stage)
    for band in (s.lh, s.hl, s.hh):
        assert np.max(np.abs(band)) < 1e-5


def test_dwt2d_matches_fir_oracle(rng):
    stage = LiftingStage.zero()
    x = rng.random((1, 3, 32, 24), dtype=np.float32)
    s = forward_dwt2d(x, stage)
    ll, lh, hl, hh = dwt97_analysis_2d(x[0].astype(np.float64))
    assert np.max(np.abs(s.ll[0] - ll)) < 1e-5
    assert np.max(np.abs(s.lh[0] - lh)) < 1e-5
    assert np.max(np.abs(s.hl[0] - hl)) < 1e-5
    assert np.max(np.abs(s.hh[0] - hh)) < 1e-5


def test_dwt2d_roundtrip_refined(rng):
    stage = random_stage(rng)
    x = rng.random((1, 3, 64, 64), dtype=np.float32)
    rec = inverse_dwt2d(forward_dwt2d(x, stage), stage)
    assert np.max(np.abs(rec - x)) < 1e-4


def test_inverse_dwt2d_zero_subbands():
    stage = LiftingStage.zero()
    z = np.zeros((1, 3, 8, 8), np.float32)
    out = inverse_dwt2d(SubbandSet(ll=z, lh=z, hl=z, hh=z, half=z), stage)
    assert np.array_equal(out, np.zeros((1, 3, 16, 16), np.float32))


def test_inverse_matches_oracle_synthesis(rng):
    # feeding oracle-produced subbands through the inverse must reproduce
    # the image the oracle analyzed
    stage = LiftingStage.zero()
    x = rng.random((1, 3, 16, 16), dtype=np.float32)
    ll, lh, hl, hh = dwt97_analysis_2d(x[0].astype(np.float64))
    s = SubbandSet(ll=ll[None].astype(np.float32), lh=lh[None].astype(np.float32),
                   hl=hl[None].astype(np.float32), hh=hh[None].astype(np.float32),
                   half=np.zeros_like(ll[None], dtype=np.float32))
    rec = inverse_dwt2d(s, stage)
    assert np.max(np.abs(rec - x)) < 1e-4


def test_dwt2d_odd_dims_error():
    with pytest.raises(ValueError, match="even"):
        forward_dwt2d(np.zeros((1, 3, 30, 31), np.float32), LiftingStage.zero())


def test_subband_shape_mismatch():
    z = np.zeros((1, 3, 4, 4), np.float32)
    bad = np.zeros((1, 3, 2, 4), np.float32)
    with pytest.raises(ValueError, match="share"):
        SubbandSet(ll=z, lh=z, hl=z, hh=bad)
