"""Benchmark the JIT kernels against their pure-numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py
(set PHOTON_NO_NUMBA=1 to confirm which path the package itself selects)
"""

import time

import numpy as np

from photon import _kernels


def bench(label, fn, args_iter, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for args in args_iter:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    print(f"{label:<28}{best * 1000:>10.2f} ms")
    return best


def main():
    rng = np.random.default_rng(0)

    # picklist scoring: one question against 2000 values
    question = _kernels.codepoints("which country regions are in the carribean")
    values = [rng.integers(97, 123, size=int(rng.integers(4, 24)))
              .astype(np.int32) for _ in range(2000)]
    lcs_args = [(question, v) for v in values]

    # span argmax: 2000 instances of n=30
    span_args = [(rng.normal(size=30), rng.normal(size=30))
                 for _ in range(2000)]

    print(f"numba available: {_kernels.USING_NUMBA}")
    if _kernels.USING_NUMBA:
        # trigger compilation outside the timed region
        _kernels._lcs_len_jit(question, values[0])
        _kernels._best_span_jit(*span_args[0])
        t_jit = bench("lcs_len (numba)", _kernels._lcs_len_jit, lcs_args)
        t_py = bench("lcs_len (numpy fallback)", _kernels._lcs_len_py, lcs_args)
        print(f"{'lcs speedup':<28}{t_py / t_jit:>10.1f}x")
        t_jit = bench("best_span (numba)", _kernels._best_span_jit, span_args)
        t_py = bench("best_span (numpy fallback)",
                     lambda s, e: _kernels._best_span_py(s.copy(), e), span_args)
        print(f"{'best_span speedup':<28}{t_py / t_jit:>10.1f}x")
    else:
        bench("lcs_len (numpy fallback)", _kernels._lcs_len_py, lcs_args)
        bench("best_span (numpy fallback)",
              lambda s, e: _kernels._best_span_py(s.copy(), e), span_args)


if __name__ == "__main__":
    main()
