"""Time the hot kernels under numba against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [--sizes 32,64,128] [--repeat 5]

With numba active, the fallback is reached through each kernel's .py_func
(the identical source, uncompiled); with FMLAB_NUMBA=0 only the numpy path
exists and the numba column is skipped.
"""

import argparse
import time

import numpy as np

from fmlab import kernels as K


def _fallback(fn):
    return getattr(fn, "py_func", fn)


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        work = [np.copy(a) if isinstance(a, np.ndarray) else a for a in args]
        t0 = time.perf_counter()
        fn(*work)
        best = min(best, time.perf_counter() - t0)
    return best


def _hermitian(n, rng):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return ((a + a.conj().T) / 2).astype(np.complex128)


def bench_eig(n, rng, repeat):
    h = _hermitian(n, rng)

    def run_jit(mat):
        d, e, q = K.tridiag_reduce(mat)
        K.tql2(d, e, q)

    def run_py(mat):
        d, e, q = _fallback(K.tridiag_reduce)(mat)
        _fallback(K.tql2)(d, e, q)

    return _time(run_jit, h, repeat=repeat), _time(run_py, h, repeat=repeat)


def bench_solve(n, rng, repeat):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))

    def run_jit(aa, bb):
        piv, _ = K.lu_factor(aa)
        K.lu_solve(aa, piv, bb)

    def run_py(aa, bb):
        piv, _ = _fallback(K.lu_factor)(aa)
        _fallback(K.lu_solve)(aa, piv, bb)

    return _time(run_jit, a, b, repeat=repeat), _time(run_py, a, b, repeat=repeat)


def bench_opnorm(rng, repeat, k=8, count=200):
    blocks = rng.standard_normal((count, k, k)) + 1j * rng.standard_normal((count, k, k))

    def run_jit(bl):
        for m in bl:
            K.jacobi_eigvals(np.conj(m.T) @ m)

    def run_py(bl):
        fn = _fallback(K.jacobi_eigvals)
        for m in bl:
            fn(np.conj(m.T) @ m)

    return _time(run_jit, blocks, repeat=repeat), _time(run_py, blocks, repeat=repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="32,64,128")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    print(f"kernel backend: {K.backend()}")
    if K.NUMBA_ENABLED:
        # trigger compilation outside the timed region
        bench_eig(8, rng, 1)
        bench_solve(8, rng, 1)
        bench_opnorm(rng, 1, count=2)
        header = f"{'kernel':<22}{'n':>6}{'numba':>12}{'numpy':>12}{'speedup':>10}"
    else:
        header = f"{'kernel':<22}{'n':>6}{'numpy':>12}"
    print(header)
    print("-" * len(header))

    for n in sizes:
        tj, tp = bench_eig(n, rng, args.repeat)
        _row("eig (householder+ql)", n, tj, tp)
        tj, tp = bench_solve(n, rng, args.repeat)
        _row("lu factor+solve", n, tj, tp)
    tj, tp = bench_opnorm(rng, args.repeat)
    _row("jacobi gram (k=8)", 200, tj, tp)


def _row(name, n, tj, tp):
    if K.NUMBA_ENABLED:
        print(f"{name:<22}{n:>6}{tj * 1e3:>10.2f}ms{tp * 1e3:>10.2f}ms{tp / tj:>9.1f}x")
    else:
        print(f"{name:<22}{n:>6}{tp * 1e3:>10.2f}ms")


if __name__ == "__main__":
    main()
