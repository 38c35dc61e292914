import math

import numpy as np
import pytest
from scipy.special import ndtr

from cleric import entropy
from cleric.entropy import (CdfTable, CodingError, build_bank, decode_symbols,
                            default_scale_table, encode_symbols, estimate_rate,
                            gaussian_cdf_table, gaussian_table, rd_loss)

TOTAL = entropy.TOTAL


def uniform4_table():
    return CdfTable(min_sym=0, max_sym=3,
                    cdf=np.array([0, 16384, 32768, 49152, 65536], np.uint32))


def test_table_invariants_enforced():
    with pytest.raises(CodingError):
        CdfTable(0, 1, np.array([0, 0, 65536], np.uint32))       # zero-mass bin
    with pytest.raises(CodingError):
        CdfTable(0, 1, np.array([0, 5, 65535], np.uint32))       # wrong total
    with pytest.raises(CodingError):
        CdfTable(0, 2, np.array([0, 5, 65536], np.uint32))       # wrong length
    with pytest.raises(CodingError):
        CdfTable(0, 1, np.array([1, 5, 65536], np.uint32))       # nonzero start


def test_gaussian_table_sigma1_center_mass():
    t = gaussian_table(1.0)
    want = ndtr(0.5) - ndtr(-0.5)
    center = int(t.pmf()[0 - t.min_sym])
    # symmetric pairing makes the center bin even, so allow 2/2^16
    assert abs(center / TOTAL - want) <= 2.0 / TOTAL


def test_gaussian_table_symmetry():
    for sigma in (0.11, 0.7, 1.0, 9.3, 256.0):
        t = gaussian_table(sigma)
        pmf = t.pmf()
        assert t.min_sym == -t.max_sym
        assert np.array_equal(pmf, pmf[::-1])


def test_gaussian_table_smallest_sigma_concentrated():
    t = gaussian_table(0.11)
    assert int(t.pmf()[(0 - t.min_sym)]) > 0.99 * TOTAL


def test_gaussian_table_tail_support():
    # support must cover everything except < 2^-20 tail mass
    for sigma in (0.5, 2.0, 37.0):
        t = gaussian_table(sigma)
        outside = 2.0 * ndtr(-(t.max_sym + 0.5) / sigma)
        assert outside < 2.0 ** -20
        inside = 2.0 * ndtr(-(t.max_sym - 0.5) / sigma)
        assert inside >= 2.0 ** -20  # one bin narrower would violate the bound


def test_scale_table_layout():
    st = default_scale_table()
    assert st.sigmas.shape == (64,)
    assert math.isclose(st.sigmas[0], 0.11) and math.isclose(st.sigmas[-1], 256.0)
    assert np.all(np.diff(st.sigmas) > 0)
    idx = st.index_for(np.array([0.0, 0.11, 1.0, 256.0, 1e9]))
    assert idx[0] == 0 and idx[1] == 0 and idx[-2] == 63 and idx[-1] == 63
    for i, s in enumerate(st.sigmas):
        assert st.index_for(np.array([s]))[0] == i


def test_gaussian_cdf_table_range():
    with pytest.raises(CodingError):
        gaussian_cdf_table(64)
    t = gaussian_cdf_table(0)
    t.validate()


def test_empty_sequence_flush_only():
    blob = encode_symbols([], [])
    assert len(blob) <= 8
    assert decode_symbols(blob, []).size == 0


def test_uniform4_length(rng):
    t = uniform4_table()
    syms = rng.integers(0, 4, 100_000)
    blob = encode_symbols(syms, (build_bank([t]), np.zeros(syms.size, np.int32)))
    assert 24_999 <= len(blob) <= 25_033
    back = decode_symbols(blob, (build_bank([t]), np.zeros(syms.size, np.int32)))
    assert np.array_equal(back, syms)


def test_roundtrip_with_table_list(rng):
    tables = [gaussian_cdf_table(i) for i in (0, 20, 40, 63)]
    refs, all_syms = [], []
    for t in tables:
        pmf = t.pmf().astype(np.float64)
        s = rng.choice(np.arange(t.min_sym, t.max_sym + 1), size=500, p=pmf / pmf.sum())
        all_syms.append(s)
        refs += [t] * 500
    syms = np.concatenate(all_syms)
    blob = encode_symbols(syms, refs)
    assert np.array_equal(decode_symbols(blob, refs), syms)


def test_roundtrip_full_scale_table(rng):
    st = default_scale_table()
    ids = np.repeat(np.arange(64, dtype=np.int32), 64)
    mins = st.bank.mins[ids].astype(np.int64)
    sizes = st.bank.sizes[ids].astype(np.int64)
    syms = mins + (rng.random(ids.size) * sizes).astype(np.int64)
    blob = encode_symbols(syms, (st.bank, ids))
    assert np.array_equal(decode_symbols(blob, (st.bank, ids)), syms)


def test_out_of_support_is_hard_error():
    t = uniform4_table()
    with pytest.raises(CodingError, match="outside"):
        encode_symbols([4], [t])
    with pytest.raises(CodingError, match="outside"):
        encode_symbols([-1], [t])


def test_estimate_rate_basics():
    half = CdfTable(0, 1, np.array([0, 32768, 65536], np.uint32))
    assert estimate_rate([0], [half]) == 1.0
    assert estimate_rate([], []) == 0.0
    t = uniform4_table()
    assert abs(estimate_rate([0, 1, 2, 3], [t] * 4) - 8.0) < 1e-9


def test_estimate_rate_tracks_actual(rng):
    st = default_scale_table()
    ids = rng.integers(10, 50, 120_000).astype(np.int32)
    mins = st.bank.mins[ids].astype(np.int64)
    sizes = st.bank.sizes[ids].astype(np.int64)
    # skew draws toward the table centers so rates are realistic
    centers = mins + sizes // 2
    spread = np.maximum(sizes // 8, 1)
    syms = np.clip(centers + (rng.standard_normal(ids.size) * spread).astype(np.int64),
                   mins, mins + sizes - 1)
    est = estimate_rate(syms, (st.bank, ids))
    actual = 8 * len(encode_symbols(syms, (st.bank, ids)))
    assert abs(actual - est) <= 64 + 0.001 * est


def test_decoder_is_deterministic(rng):
    t = gaussian_cdf_table(30)
    pmf = t.pmf().astype(np.float64)
    syms = rng.choice(np.arange(t.min_sym, t.max_sym + 1), size=2000, p=pmf / pmf.sum())
    blob = encode_symbols(syms, [t] * 2000)
    a = decode_symbols(blob, [t] * 2000)
    b = decode_symbols(blob, [t] * 2000)
    assert np.array_equal(a, b)


def test_truncated_stream_detected():
    t = uniform4_table()
    syms = np.arange(4).repeat(2500)
    blob = encode_symbols(syms, [t] * syms.size)
    with pytest.raises(CodingError, match="truncat"):
        decode_symbols(blob[: len(blob) // 2], [t] * syms.size)


def test_rd_loss_identities(rng):
    x = rng.random((1, 3, 16, 16)).astype(np.float32)
    r = rd_loss(x, x, 0.0, 0.0, 0.0335)
    assert r.loss == 0.0 and r.mse == 0.0
    x_hat = np.clip(x + 1.0 / 255.0, 0, None).astype(np.float32)
    x = np.clip(x_hat - 1.0 / 255.0, 0, None).astype(np.float32)
    r = rd_loss(x, x_hat, 0.0, 0.0, 0.0335)
    assert abs(r.loss - 0.0335) < 1e-4
    r = rd_loss(x, x, 16.0 * 16.0, 0.0, 0.5)
    assert r.loss == 1.0 and r.bpp_y == 1.0 and r.bpp_z == 0.0


def test_rd_loss_shape_mismatch(rng):
    with pytest.raises(ValueError):
        rd_loss(np.zeros((1, 3, 4, 4)), np.zeros((1, 3, 4, 5)), 0, 0, 0.01)
