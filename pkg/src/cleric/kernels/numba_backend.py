"""Numba-jitted hot kernels with fixed float32 accumulation order.

Contracts match `numpy_backend` exactly; see that module for argument
documentation.  All kernels release the GIL so tile workers can run them
concurrently from a thread pool.
"""

import numpy as np
from numba import njit

RC_TOTAL_BITS = 16
RC_TOTAL = 1 << RC_TOTAL_BITS
RC_TOP = 1 << 24
RC_MASK32 = 0xFFFFFFFF


@njit(cache=True, nogil=True)
def conv2d_core(x, w, bias, stride):
    c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    ph = (kh - 1) // 2
    pw = (kw - 1) // 2
    h_out = (h + stride - 1) // stride
    w_out = (wd + stride - 1) // stride
    xp = np.empty((c_in, h + 2 * ph, wd + 2 * pw), dtype=np.float32)
    for ic in range(c_in):
        for iy in range(h + 2 * ph):
            sy = min(max(iy - ph, 0), h - 1)
            for ix in range(wd + 2 * pw):
                xp[ic, iy, ix] = x[ic, sy, min(max(ix - pw, 0), wd - 1)]
    out = np.empty((c_out, h_out, w_out), dtype=np.float32)
    row = np.empty(w_out, dtype=np.float32)
    for oc in range(c_out):
        for oy in range(h_out):
            for ox in range(w_out):
                row[ox] = bias[oc]
            for ic in range(c_in):
                for ky in range(kh):
                    xr = xp[ic, oy * stride + ky]
                    for kx in range(kw):
                        wv = w[oc, ic, ky, kx]
                        if stride == 1:
                            for ox in range(w_out):
                                row[ox] += wv * xr[ox + kx]
                        else:
                            for ox in range(w_out):
                                row[ox] += wv * xr[ox * stride + kx]
            for ox in range(w_out):
                out[oc, oy, ox] = row[ox]
    return out


@njit(cache=True, nogil=True)
def dcnv2_core(x, w, bias, offsets, modulation, stride, kh, kw):
    c_in, h, wd = x.shape
    c_out = w.shape[0]
    k = kh * kw
    h_out = modulation.shape[1]
    w_out = modulation.shape[2]
    wf = np.ascontiguousarray(w.transpose(0, 2, 1)).reshape(c_out, k * c_in)
    samples = np.empty((w_out, k * c_in), dtype=np.float32)
    out = np.empty((c_out, h_out, w_out), dtype=np.float32)
    for oy in range(h_out):
        for ox in range(w_out):
            for t in range(k):
                ry = oy * stride + (t // kw - kh // 2) + np.float64(offsets[2 * t, oy, ox])
                cx = ox * stride + (t % kw - kw // 2) + np.float64(offsets[2 * t + 1, oy, ox])
                ry = min(max(ry, 0.0), h - 1.0)
                cx = min(max(cx, 0.0), wd - 1.0)
                y0 = int(np.floor(ry))
                x0 = int(np.floor(cx))
                y1 = min(y0 + 1, h - 1)
                x1 = min(x0 + 1, wd - 1)
                fy = ry - y0
                fx = cx - x0
                m = np.float64(modulation[t, oy, ox])
                w00 = np.float32((1.0 - fy) * (1.0 - fx) * m)
                w01 = np.float32((1.0 - fy) * fx * m)
                w10 = np.float32(fy * (1.0 - fx) * m)
                w11 = np.float32(fy * fx * m)
                for ic in range(c_in):
                    samples[ox, t * c_in + ic] = (w00 * x[ic, y0, x0] + w01 * x[ic, y0, x1]
                                                  + w10 * x[ic, y1, x0] + w11 * x[ic, y1, x1])
        for oc in range(c_out):
            for ox in range(w_out):
                acc = bias[oc]
                for j in range(k * c_in):
                    acc += wf[oc, j] * samples[ox, j]
                out[oc, oy, ox] = acc
    return out


@njit(cache=True, nogil=True)
def bilinear_resize_core(x, out_h, out_w):
    c, h, w = x.shape
    out = np.empty((c, out_h, out_w), dtype=np.float32)
    sy = h / out_h
    sx = w / out_w
    for oy in range(out_h):
        ry = min(max((oy + 0.5) * sy - 0.5, 0.0), h - 1.0)
        y0 = int(np.floor(ry))
        y1 = min(y0 + 1, h - 1)
        fy = np.float32(ry - y0)
        for ox in range(out_w):
            rx = min(max((ox + 0.5) * sx - 0.5, 0.0), w - 1.0)
            x0 = int(np.floor(rx))
            x1 = min(x0 + 1, w - 1)
            fx = np.float32(rx - x0)
            for ic in range(c):
                top = x[ic, y0, x0] * (np.float32(1.0) - fx) + x[ic, y0, x1] * fx
                bot = x[ic, y1, x0] * (np.float32(1.0) - fx) + x[ic, y1, x1] * fx
                out[ic, oy, ox] = top * (np.float32(1.0) - fy) + bot * fy
    return out


@njit(cache=True, nogil=True)
def bilinear_sample_core(x, rows, cols):
    c, h, w = x.shape
    n = rows.shape[0]
    out = np.empty((c, n), dtype=np.float32)
    for i in range(n):
        ry = min(max(np.float64(rows[i]), 0.0), h - 1.0)
        cx = min(max(np.float64(cols[i]), 0.0), w - 1.0)
        y0 = int(np.floor(ry))
        x0 = int(np.floor(cx))
        y1 = min(y0 + 1, h - 1)
        x1 = min(x0 + 1, w - 1)
        fy = np.float32(ry - y0)
        fx = np.float32(cx - x0)
        for ic in range(c):
            top = x[ic, y0, x0] * (np.float32(1.0) - fx) + x[ic, y0, x1] * fx
            bot = x[ic, y1, x0] * (np.float32(1.0) - fx) + x[ic, y1, x1] * fx
            out[ic, i] = top * (np.float32(1.0) - fy) + bot * fy
    return out


@njit(cache=True, nogil=True)
def rc_encode_core(cums, freqs, out):
    mask32 = np.uint64(RC_MASK32)
    top = np.uint64(RC_TOP)
    u8 = np.uint64(8)
    low = np.uint64(0)
    rng = mask32
    cache = 0
    cache_size = 1
    pos = 0
    n = cums.shape[0]
    for i in range(n + 5):
        if i < n:
            r = rng >> np.uint64(RC_TOTAL_BITS)
            low += r * np.uint64(cums[i])
            rng = r * np.uint64(freqs[i])
            if rng >= top:
                continue
        while True:
            # shift_low: emit the cached byte once any carry is resolved
            if low < np.uint64(0xFF000000) or low > mask32:
                carry = int(low >> np.uint64(32))
                out[pos] = (cache + carry) & 0xFF
                pos += 1
                for _ in range(cache_size - 1):
                    out[pos] = (0xFF + carry) & 0xFF
                    pos += 1
                cache = int(low >> np.uint64(24)) & 0xFF
                cache_size = 0
            cache_size += 1
            low = (low << u8) & mask32
            if i >= n:
                break
            rng = (rng << u8) & mask32
            if rng >= top:
                break
    return pos


@njit(cache=True, nogil=True)
def rc_decode_core(data, n, table_ids, bank_cdf, bank_off, bank_size):
    out = np.empty(n, dtype=np.int32)
    nd = data.shape[0]
    mask32 = np.uint64(RC_MASK32)
    top = np.uint64(RC_TOP)
    u8 = np.uint64(8)
    pos = 0
    code = np.uint64(0)
    for _ in range(5):
        b = np.uint64(data[pos]) if pos < nd else np.uint64(0)
        pos += 1
        code = (code << u8) | b
    code &= mask32
    rng = mask32
    for i in range(n):
        off = bank_off[table_ids[i]]
        size = bank_size[table_ids[i]]
        r = rng >> np.uint64(RC_TOTAL_BITS)
        f = code // r
        if f > np.uint64(RC_TOTAL - 1):
            f = np.uint64(RC_TOTAL - 1)
        lo = 0
        hi = int(size)
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if np.uint64(bank_cdf[off + mid]) <= f:
                lo = mid
            else:
                hi = mid
        out[i] = lo
        c = np.uint64(bank_cdf[off + lo])
        code -= r * c
        rng = r * (np.uint64(bank_cdf[off + lo + 1]) - c)
        while rng < top:
            b = np.uint64(data[pos]) if pos < nd else np.uint64(0)
            pos += 1
            code = ((code << u8) | b) & mask32
            rng = (rng << u8) & mask32
    return out, pos
