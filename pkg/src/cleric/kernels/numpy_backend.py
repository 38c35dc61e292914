"""Vectorized pure-numpy implementations of the hot kernels.

Selected when numba is unavailable or CLERIC_NUMBA=0.  Every routine here
mirrors the contract of its numba twin in `numba_backend`; the two may differ
in float accumulation order but each is deterministic run to run.
"""

import numpy as np

RC_TOTAL_BITS = 16
RC_TOTAL = 1 << RC_TOTAL_BITS
RC_TOP = 1 << 24
RC_MASK32 = 0xFFFFFFFF


def conv2d_core(x, w, bias, stride):
    """3D convolution kernel: x (C_in,H,W) -> (C_out,ceil(H/s),ceil(W/s)).

    Replicate padding of (k-1)/2 on each side; float32 throughout.
    """
    c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    h_out = -(-h // stride)
    w_out = -(-wd // stride)
    if ph or pw:
        xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)), mode="edge")
    else:
        xp = x
    out = np.zeros((c_out, h_out * w_out), dtype=np.float32)
    for ky in range(kh):
        for kx in range(kw):
            sl = xp[:, ky : ky + (h_out - 1) * stride + 1 : stride,
                    kx : kx + (w_out - 1) * stride + 1 : stride]
            out += w[:, :, ky, kx] @ sl.reshape(c_in, -1)
    out += bias[:, None]
    return out.reshape(c_out, h_out, w_out)


def _bilinear_weights(coord, size):
    """Clamped fractional coordinate -> (i0, i1, frac) gather indices."""
    c = np.clip(coord, 0.0, size - 1.0)
    i0 = np.floor(c).astype(np.int64)
    i1 = np.minimum(i0 + 1, size - 1)
    return i0, i1, (c - i0).astype(np.float32)


def dcnv2_core(x, w, bias, offsets, modulation, stride, kh, kw):
    """Deformable convolution kernel.

    x (C_in,H,W); w (C_out,C_in,K) with K=kh*kw taps row-major over the
    lattice; offsets (2K,H_out,W_out) as (d_row,d_col) pairs; modulation
    (K,H_out,W_out) in [0,1].
    """
    c_in, h, wd = x.shape
    c_out = w.shape[0]
    k = kh * kw
    h_out, w_out = modulation.shape[1], modulation.shape[2]
    lat_r = (np.arange(k) // kw - kh // 2).astype(np.float64)
    lat_c = (np.arange(k) % kw - kw // 2).astype(np.float64)
    base_r = (np.arange(h_out) * stride).astype(np.float64)
    base_c = (np.arange(w_out) * stride).astype(np.float64)
    rows = lat_r[:, None, None] + base_r[None, :, None] + offsets[0::2].astype(np.float64)
    cols = lat_c[:, None, None] + base_c[None, None, :] + offsets[1::2].astype(np.float64)
    y0, y1, fy = _bilinear_weights(rows, h)
    x0, x1, fx = _bilinear_weights(cols, wd)
    w00 = (1.0 - fy) * (1.0 - fx)
    w01 = (1.0 - fy) * fx
    w10 = fy * (1.0 - fx)
    w11 = fy * fx
    # gather: (C_in, K, H_out, W_out)
    samples = (x[:, y0, x0] * w00 + x[:, y0, x1] * w01
               + x[:, y1, x0] * w10 + x[:, y1, x1] * w11)
    samples *= modulation[None]
    flat = samples.transpose(1, 0, 2, 3).reshape(k * c_in, -1)
    wf = w.transpose(0, 2, 1).reshape(c_out, k * c_in)
    out = wf @ flat + bias[:, None]
    return out.reshape(c_out, h_out, w_out)


def bilinear_resize_core(x, out_h, out_w):
    """Separable bilinear resize (align-corners=false), edge-clamped."""
    c, h, w = x.shape
    ry = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    rx = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0, y1, fy = _bilinear_weights(ry, h)
    x0, x1, fx = _bilinear_weights(rx, w)
    tmp = x[:, y0, :] * (1.0 - fy)[None, :, None] + x[:, y1, :] * fy[None, :, None]
    out = tmp[:, :, x0] * (1.0 - fx)[None, None, :] + tmp[:, :, x1] * fx[None, None, :]
    return out.astype(np.float32, copy=False)


def bilinear_sample_core(x, rows, cols):
    """Sample x (C,H,W) at fractional (row,col) pairs -> (C,N)."""
    c, h, w = x.shape
    y0, y1, fy = _bilinear_weights(rows.astype(np.float64), h)
    x0, x1, fx = _bilinear_weights(cols.astype(np.float64), w)
    return (x[:, y0, x0] * ((1.0 - fy) * (1.0 - fx))
            + x[:, y0, x1] * ((1.0 - fy) * fx)
            + x[:, y1, x0] * (fy * (1.0 - fx))
            + x[:, y1, x1] * (fy * fx)).astype(np.float32, copy=False)


def rc_encode_core(cums, freqs, out):
    """Range-code (cum,freq) pairs over a 2^16 total into `out` (uint8).

    Returns the number of bytes written.  Carry-aware byte-wise coder:
    32-bit range, cached top byte, 5-byte flush.
    """
    state = [0, 0, 1, 0]  # low, cache, cache_size, pos

    def shift_low():
        low, cache, cache_size, pos = state
        if low < 0xFF000000 or low > RC_MASK32:
            carry = low >> 32
            out[pos] = (cache + carry) & 0xFF
            pos += 1
            for _ in range(cache_size - 1):
                out[pos] = (0xFF + carry) & 0xFF
                pos += 1
            cache = (low >> 24) & 0xFF
            cache_size = 0
        state[:] = (low << 8) & RC_MASK32, cache, cache_size + 1, pos

    rng = RC_MASK32
    for i in range(cums.shape[0]):
        r = rng >> RC_TOTAL_BITS
        state[0] += r * int(cums[i])
        rng = r * int(freqs[i])
        while rng < RC_TOP:
            rng = (rng << 8) & RC_MASK32
            shift_low()
    for _ in range(5):
        shift_low()
    return state[3]


def rc_decode_core(data, n, table_ids, bank_cdf, bank_off, bank_size):
    """Decode n symbols; returns (int32 indices relative to each table's
    base, bytes consumed).

    table_ids[i] selects the per-symbol table; bank_cdf holds the
    concatenated cdf arrays, bank_off/bank_size index into it.  A valid
    stream is consumed to its end plus one phantom byte (the coder's final
    cached byte is never emitted); larger overruns indicate truncation.
    """
    out = np.empty(n, dtype=np.int32)
    nd = data.shape[0]
    pos = 0
    code = 0
    for _ in range(5):
        b = int(data[pos]) if pos < nd else 0
        pos += 1
        code = ((code << 8) | b) & ((1 << 40) - 1)
    code &= RC_MASK32
    rng = RC_MASK32
    for i in range(n):
        off = int(bank_off[table_ids[i]])
        size = int(bank_size[table_ids[i]])
        r = rng >> RC_TOTAL_BITS
        f = code // r
        if f > RC_TOTAL - 1:
            f = RC_TOTAL - 1
        lo, hi = 0, size
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if int(bank_cdf[off + mid]) <= f:
                lo = mid
            else:
                hi = mid
        out[i] = lo
        c = int(bank_cdf[off + lo])
        code -= r * c
        rng = r * (int(bank_cdf[off + lo + 1]) - c)
        while rng < RC_TOP:
            b = int(data[pos]) if pos < nd else 0
            pos += 1
            code = ((code << 8) | b) & RC_MASK32
            rng = (rng << 8) & RC_MASK32
    return out, pos
