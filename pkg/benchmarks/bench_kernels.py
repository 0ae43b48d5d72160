"""Benchmark the numba kernels against the pure-numpy fallback.

Times the convolution forward (conv + relu + 1-max-pool) and the pooled
backward accumulation at fixture scale (d=16) and full scale (d=300),
and cross-checks that both backends agree numerically.

Usage: python benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from polcnn.kernels import numba_backend, numpy_backend

CASES = [
    ("fixture scale d=16", 16, 60, 12, 100),
    ("full scale d=300", 300, 60, 40, 100),
]
WIDTHS = (2, 3, 4)


def make_inputs(d, rows, ell, filters, seed=0):
    rng = np.random.default_rng(seed)
    x = np.zeros((rows, d))
    x[:ell] = rng.normal(size=(ell, d))
    banks = {h: (rng.normal(size=(filters, h, d)), rng.normal(size=filters)) for h in WIDTHS}
    gfeat = rng.normal(size=filters)
    return x, banks, gfeat


def run_backend(backend, x, ell, banks, gfeat, repeats):
    # warm-up (JIT compilation for numba, cache warming for numpy)
    for h, (w, b) in banks.items():
        pre, pooled, argmax = backend.conv_relu_pool(x, ell, w, b)
        dw, db = np.zeros_like(w), np.zeros_like(b)
        backend.conv_pool_backward(x, argmax, pooled, gfeat, h, dw, db)

    t0 = time.perf_counter()
    for _ in range(repeats):
        for h, (w, b) in banks.items():
            backend.conv_relu_pool(x, ell, w, b)
    fwd = (time.perf_counter() - t0) / repeats

    cached = {h: backend.conv_relu_pool(x, ell, w, b) for h, (w, b) in banks.items()}
    t0 = time.perf_counter()
    for _ in range(repeats):
        for h, (w, b) in banks.items():
            _, pooled, argmax = cached[h]
            dw, db = np.zeros_like(w), np.zeros_like(b)
            backend.conv_pool_backward(x, argmax, pooled, gfeat, h, dw, db)
    bwd = (time.perf_counter() - t0) / repeats
    return fwd, bwd


def verify_agreement(x, ell, banks, gfeat):
    worst = 0.0
    for h, (w, b) in banks.items():
        pre_np, pooled_np, arg_np = numpy_backend.conv_relu_pool(x, ell, w, b)
        pre_nb, pooled_nb, arg_nb = numba_backend.conv_relu_pool(x, ell, w, b)
        worst = max(worst, np.abs(pre_np - pre_nb).max(), np.abs(pooled_np - pooled_nb).max())
        assert np.array_equal(arg_np, arg_nb)
        dw_np, db_np = np.zeros_like(w), np.zeros_like(b)
        dw_nb, db_nb = np.zeros_like(w), np.zeros_like(b)
        numpy_backend.conv_pool_backward(x, arg_np, pooled_np, gfeat, h, dw_np, db_np)
        numba_backend.conv_pool_backward(x, arg_nb, pooled_nb, gfeat, h, dw_nb, db_nb)
        worst = max(worst, np.abs(dw_np - dw_nb).max(), np.abs(db_np - db_nb).max())
    return worst


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    print(f"{'case':<22}{'backend':<8}{'forward':>12}{'backward':>12}")
    print("-" * 54)
    for name, d, rows, ell, filters in CASES:
        x, banks, gfeat = make_inputs(d, rows, ell, filters)
        disagreement = verify_agreement(x, ell, banks, gfeat)
        for label, backend in (("numba", numba_backend), ("numpy", numpy_backend)):
            fwd, bwd = run_backend(backend, x, ell, banks, gfeat, args.repeats)
            print(f"{name:<22}{label:<8}{fwd * 1e6:>10.1f}us{bwd * 1e6:>10.1f}us")
        print(f"{'':<22}max |numba - numpy| = {disagreement:.2e}")
    print("\nper-sentence forward = one conv_relu_pool per filter width (3 banks)")


if __name__ == "__main__":
    main()
