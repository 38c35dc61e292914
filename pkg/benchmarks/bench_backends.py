#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel backends.

The backend is chosen at import time from CLERIC_NUMBA, so each backend
runs in a fresh subprocess.  Usage:

    python benchmarks/bench_backends.py [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOADS = ["conv2d", "dcnv2", "range_coder", "lifting", "tile_encode", "tile_decode"]


def run_workloads(repeats: int) -> dict:
    import time

    import numpy as np

    from cleric import kernels
    from cleric.codec import CodecConfig
    from cleric.lifting import forward_dwt2d, inverse_dwt2d, LiftingStage
    from cleric.numerics import ConvSpec, conv2d
    from cleric.blocks import DcnParams, dcnv2
    from cleric.pipeline import TileCodec
    from cleric.weights import make_weights
    from cleric import entropy

    rng = np.random.default_rng(0)
    results = {"backend": kernels.BACKEND}

    def timeit(name, fn, warmup=1):
        for _ in range(warmup):
            fn()
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        results[name] = best

    x = rng.standard_normal((1, 192, 64, 64)).astype(np.float32)
    spec = ConvSpec(rng.standard_normal((192, 192, 3, 3)).astype(np.float32))
    timeit("conv2d", lambda: conv2d(x, spec))

    xd = rng.standard_normal((1, 192, 32, 32)).astype(np.float32)
    p = DcnParams(kernel=ConvSpec(rng.standard_normal((192, 192, 3, 3)).astype(np.float32)),
                  offset_net=ConvSpec(np.zeros((27, 192, 3, 3), np.float32)))
    offsets = rng.standard_normal((1, 18, 32, 32)).astype(np.float32)
    modulation = rng.random((1, 9, 32, 32)).astype(np.float32)
    timeit("dcnv2", lambda: dcnv2(xd, p, offsets, modulation))

    st = entropy.default_scale_table()
    n = 500_000
    ids = rng.integers(0, 64, n).astype(np.int32)
    mins = st.bank.mins[ids].astype(np.int64)
    sizes = st.bank.sizes[ids].astype(np.int64)
    syms = mins + (rng.random(n) * sizes).astype(np.int64)
    blob = entropy.encode_symbols(syms, (st.bank, ids))

    def roundtrip():
        b = entropy.encode_symbols(syms, (st.bank, ids))
        entropy.decode_symbols(b, (st.bank, ids))

    results["range_coder_bytes"] = len(blob)
    timeit("range_coder", roundtrip)

    img = rng.random((1, 3, 256, 256), dtype=np.float32)
    stage = LiftingStage.zero()
    timeit("lifting", lambda: inverse_dwt2d(forward_dwt2d(img, stage), stage))

    w = make_weights(7, CodecConfig())
    tc = TileCodec(w)
    patch = rng.integers(0, 256, (256, 256, 3), dtype=np.uint8)
    tile_blob = tc.encode_tile(patch)[0]
    timeit("tile_encode", lambda: tc.encode_tile(patch))
    timeit("tile_decode", lambda: tc.decode_tile(tile_blob))
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--_child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args._child:
        print(json.dumps(run_workloads(args.repeats)))
        return

    rows = {}
    for flag in ("1", "0"):
        env = dict(os.environ, CLERIC_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--_child",
                              "--repeats", str(args.repeats)],
                             env=env, capture_output=True, text=True, check=True)
        data = json.loads(out.stdout.strip().splitlines()[-1])
        rows[data["backend"]] = data

    names = list(rows)
    print(f"{'workload':<14}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for wl in WORKLOADS:
        vals = [rows[n][wl] for n in names]
        ratio = vals[1] / vals[0] if vals[0] > 0 else float("inf")
        print(f"{wl:<14}" + "".join(f"{v * 1000:>10.1f}ms" for v in vals)
              + f"{ratio:>9.2f}x")


if __name__ == "__main__":
    main()
