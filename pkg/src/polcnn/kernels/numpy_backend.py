"""Vectorized numpy implementation of the convolution kernels."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_relu_pool(
    x: np.ndarray, ell: int, w: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, h, d = w.shape
    positions = max(ell - h + 1, 1)
    # Windows over the real tokens; when ell < h the single window runs into
    # the zero padding, which rows >= ell already are.
    span = x[: positions + h - 1]
    windows = sliding_window_view(span, h, axis=0)  # (positions, d, h)
    pre = np.tensordot(w, windows, axes=((1, 2), (2, 1))) + b[:, None]  # (n, positions)
    post = np.maximum(pre, 0.0)
    argmax = post.argmax(axis=1)
    pooled = post[np.arange(n), argmax]
    return pre, pooled, argmax


def conv_pool_backward(
    x: np.ndarray,
    argmax: np.ndarray,
    pooled: np.ndarray,
    gfeat: np.ndarray,
    h: int,
    dw: np.ndarray,
    db: np.ndarray,
) -> None:
    gate = np.where(pooled > 0.0, gfeat, 0.0)
    span = x[: argmax.max() + h]
    windows = sliding_window_view(span, h, axis=0)  # (positions, d, h)
    picked = windows[argmax].transpose(0, 2, 1)  # (n, h, d)
    dw += gate[:, None, None] * picked
    db += gate
