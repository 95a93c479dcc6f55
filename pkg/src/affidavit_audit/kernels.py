"""Hot numeric kernels, with a numba fast path and a pure-numpy fallback.

The only true hot spot in the package is the all-pairs mixed-type distance
matrix (O(n^2 * attributes)) that LOF and DBSCAN consume.  Both backends
accumulate per-attribute contributions in the same fixed order (numeric
columns in schema order, then nominal columns in schema order), so their
outputs are bit-identical and independent of thread count.

Backend selection: numba is used when importable unless the environment
variable AFFIDAVIT_AUDIT_BACKEND is set to "numpy".  The variable is read
at import time.
"""

import os

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap

    prange = range

USE_NUMBA = HAVE_NUMBA and os.environ.get("AFFIDAVIT_AUDIT_BACKEND", "numba").lower() != "numpy"

# Row-block size for the numpy fallback; caps temporary allocations.
_BLOCK = 512


@njit(cache=True, parallel=True)
def _gower_kernel(num, inv_range, codes, out):  # pragma: no cover - exercised via gower_matrix
    n = num.shape[0]
    p = num.shape[1]
    q = codes.shape[1]
    for i in prange(n):
        for j in range(n):
            total = 0.0
            cnt = 0
            for a in range(p):
                x = num[i, a]
                y = num[j, a]
                if not (np.isnan(x) or np.isnan(y)):
                    total += abs(x - y) * inv_range[a]
                    cnt += 1
            for a in range(q):
                x = codes[i, a]
                y = codes[j, a]
                if x >= 0 and y >= 0:
                    if x != y:
                        total += 1.0
                    cnt += 1
            if cnt > 0:
                out[i, j] = total / cnt
            else:
                out[i, j] = 0.0


def gower_matrix_numba(num, inv_range, codes):
    out = np.empty((num.shape[0], num.shape[0]), dtype=np.float64)
    _gower_kernel(num, inv_range, codes, out)
    return out


def gower_matrix_numpy(num, inv_range, codes):
    n = num.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    cnt = np.zeros((n, n), dtype=np.int64)
    for lo in range(0, n, _BLOCK):
        hi = min(lo + _BLOCK, n)
        total = np.zeros((hi - lo, n), dtype=np.float64)
        c = np.zeros((hi - lo, n), dtype=np.int64)
        for a in range(num.shape[1]):
            col = num[:, a]
            miss = np.isnan(col)
            ok = ~(miss[lo:hi, None] | miss[None, :])
            diff = np.abs(col[lo:hi, None] - col[None, :]) * inv_range[a]
            total += np.where(ok, diff, 0.0)
            c += ok
        for a in range(codes.shape[1]):
            col = codes[:, a]
            ok = (col[lo:hi, None] >= 0) & (col[None, :] >= 0)
            neq = col[lo:hi, None] != col[None, :]
            total += np.where(ok & neq, 1.0, 0.0)
            c += ok
        out[lo:hi] = np.divide(total, c, out=np.zeros_like(total), where=c > 0)
        cnt[lo:hi] = c
    return out


def gower_matrix(num, inv_range, codes):
    """All-pairs Gower distance over a numeric block and a nominal-code block.

    num: (n, p) float64, NaN marks missing; inv_range: (p,) precomputed
    1/(max-min) per numeric column (0 for zero range); codes: (n, q) int32
    label codes, -1 marks missing.  Pairs with no jointly observed
    attribute get distance 0.
    """
    num = np.ascontiguousarray(num, dtype=np.float64)
    codes = np.ascontiguousarray(codes, dtype=np.int32)
    inv_range = np.ascontiguousarray(inv_range, dtype=np.float64)
    if USE_NUMBA:
        return gower_matrix_numba(num, inv_range, codes)
    return gower_matrix_numpy(num, inv_range, codes)
