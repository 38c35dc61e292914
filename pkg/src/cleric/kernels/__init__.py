"""Backend dispatch for the hot numeric kernels.

Two implementations ship side by side: fixed-order numba loops
(`numba_backend`) and a vectorized pure-numpy port (`numpy_backend`).
Set CLERIC_NUMBA=0 to force the numpy path; it is also the automatic
fallback when numba cannot be imported.  `benchmarks/bench_backends.py`
compares the two.
"""

import os


def _numba_wanted() -> bool:
    return os.environ.get("CLERIC_NUMBA", "1").strip().lower() not in ("0", "false", "off", "no")


USE_NUMBA = False
if _numba_wanted():
    try:
        from . import numba_backend as _impl
        USE_NUMBA = True
    except ImportError:
        from . import numpy_backend as _impl
else:
    from . import numpy_backend as _impl

BACKEND = "numba" if USE_NUMBA else "numpy"

conv2d_core = _impl.conv2d_core
dcnv2_core = _impl.dcnv2_core
bilinear_resize_core = _impl.bilinear_resize_core
bilinear_sample_core = _impl.bilinear_sample_core
rc_encode_core = _impl.rc_encode_core
rc_decode_core = _impl.rc_decode_core

RC_TOTAL_BITS = _impl.RC_TOTAL_BITS
RC_TOTAL = _impl.RC_TOTAL
