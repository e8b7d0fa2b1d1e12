"""Compensated (Neumaier) row sums in fixed column order.

Results depend only on the input values and the column order, not on SIMD
width or thread count, which keeps predictions reproducible across machines.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _neumaier_weighted_rows(W, y):
    m, n = W.shape
    num = np.empty(m)
    den = np.empty(m)
    for i in range(m):
        sn = 0.0
        cn = 0.0
        sd = 0.0
        cd = 0.0
        for j in range(n):
            w = W[i, j]
            v = w * y[j]
            t = sn + v
            if abs(sn) >= abs(v):
                cn += (sn - t) + v
            else:
                cn += (v - t) + sn
            sn = t
            t = sd + w
            if abs(sd) >= abs(w):
                cd += (sd - t) + w
            else:
                cd += (w - t) + sd
            sd = t
        num[i] = sn + cn
        den[i] = sd + cd
    return num, den


@njit(cache=True, nogil=True)
def _neumaier_sum(v):
    s = 0.0
    c = 0.0
    for j in range(v.shape[0]):
        x = v[j]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


def weighted_row_sums(W, y):
    """Return ``(sum_j W[i, j] * y[j], sum_j W[i, j])`` for every row ``i``."""
    W = np.ascontiguousarray(W, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _neumaier_weighted_rows(W, y)


def compensated_sum(v):
    return float(_neumaier_sum(np.ascontiguousarray(v, dtype=np.float64)))
