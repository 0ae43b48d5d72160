"""Numba-compiled implementation of the convolution kernels.

Compiled objects are cached on disk (`cache=True`), so the JIT cost is paid
once per interpreter/version, not per process.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def conv_relu_pool(x, ell, w, b):
    n, h, d = w.shape
    positions = max(ell - h + 1, 1)
    hd = h * d
    # im2col, transposed so the contraction is one C-contiguous dgemm
    windows_t = np.empty((hd, positions), dtype=np.float64)
    for p in range(positions):
        for i in range(h):
            base = i * d
            for j in range(d):
                windows_t[base + j, p] = x[p + i, j]
    w2 = np.ascontiguousarray(w).reshape(n, hd)
    pre = np.dot(w2, windows_t)  # (n, positions)
    pooled = np.empty(n, dtype=np.float64)
    argmax = np.zeros(n, dtype=np.int64)
    for k in range(n):
        best = -1.0
        best_p = 0
        for p in range(positions):
            s = pre[k, p] + b[k]
            pre[k, p] = s
            r = s if s > 0.0 else 0.0
            if r > best:
                best = r
                best_p = p
        pooled[k] = best
        argmax[k] = best_p
    return pre, pooled, argmax


@njit(cache=True)
def conv_pool_backward(x, argmax, pooled, gfeat, h, dw, db):
    n = dw.shape[0]
    d = dw.shape[2]
    for k in range(n):
        if pooled[k] <= 0.0:
            continue
        g = gfeat[k]
        p = argmax[k]
        for i in range(h):
            for j in range(d):
                dw[k, i, j] += g * x[p + i, j]
        db[k] += g
