"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles the convolution forward/backward loops; the
numpy backend is a vectorized fallback. Selection happens once at import
from the POLCNN_BACKEND environment variable:

  POLCNN_BACKEND=numba   force the JIT kernels (error if numba is missing)
  POLCNN_BACKEND=numpy   force the pure-numpy kernels
  unset / auto           numba when importable, numpy otherwise

Both backends implement the same contracts:

  conv_relu_pool(x, ell, w, b) -> (pre, pooled, argmax)
      x: (rows, d) tensor, real length ell; w: (n, h, d); b: (n,).
      pre[k, p] = b[k] + sum_{i,j} x[p+i, j] * w[k, i, j] over the
      max(ell - h + 1, 1) window positions; pooled[k] is the max of
      relu(pre[k]) and argmax[k] the lowest position attaining it.

  conv_pool_backward(x, argmax, pooled, gfeat, h, dw, db)
      Accumulates d(loss)/d(w), d(loss)/d(b) for upstream per-filter
      gradients gfeat, routing only through each filter's argmax window
      and gating on relu (pooled > 0).

Results agree across backends to floating-point roundoff, not bit-exactly;
determinism guarantees hold within a backend.
"""

import os

__all__ = ["BACKEND", "conv_relu_pool", "conv_pool_backward", "backend_name"]

_requested = os.environ.get("POLCNN_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"POLCNN_BACKEND={_requested!r} not one of auto, numba, numpy"
    )

if _requested in ("auto", "numba"):
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import numpy_backend as _impl

        BACKEND = "numpy"
else:
    from . import numpy_backend as _impl

    BACKEND = "numpy"

conv_relu_pool = _impl.conv_relu_pool
conv_pool_backward = _impl.conv_pool_backward


def backend_name() -> str:
    return BACKEND
