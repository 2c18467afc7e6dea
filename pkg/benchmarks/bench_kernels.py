"""Benchmark the compiled step kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py

Also asserts that both backends return bit-identical doubles on random
inputs, which the solver relies on for reproducibility across installs
with and without a compiler.
"""

from __future__ import annotations

import time

import numpy as np

from impulsegame import _kernels_py

try:
    from impulsegame import _kernels
except ImportError:
    _kernels = None


def make_inputs(n: int, rng: np.random.Generator):
    v = rng.standard_normal(n)
    wp = np.abs(rng.standard_normal(n)) * 0.2
    wm = np.abs(rng.standard_normal(n)) * 0.2
    wp[-1] = 0.0
    wm[0] = 0.0
    w0 = 1.0 - wp - wm
    b = rng.standard_normal(n)
    return v, w0, wp, wm, b


def bench(fn, args, repeats: int = 200) -> float:
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main() -> None:
    rng = np.random.default_rng(7)
    print(f"{'n':>8} {'combine py':>12} {'combine cy':>12} {'grad py':>12} {'grad cy':>12}")
    for n in (101, 1001, 10001, 100001):
        v, w0, wp, wm, b = make_inputs(n, rng)
        dx = 0.05
        t_py_c = bench(_kernels_py.combine_1d, (v.copy(), w0, wp, wm))
        t_py_g = bench(_kernels_py.upwind_grad_1d, (v, b, dx))
        if _kernels is None:
            print(f"{n:>8} {t_py_c*1e6:>10.1f}us {'n/a':>12} {t_py_g*1e6:>10.1f}us {'n/a':>12}")
            continue
        out_py = _kernels_py.combine_1d(v.copy(), w0, wp, wm)
        out_cy = _kernels.combine_1d(v, w0, wp, wm)
        assert np.array_equal(out_py, out_cy), "combine_1d backends disagree"
        g_py = _kernels_py.upwind_grad_1d(v, b, dx)
        g_cy = _kernels.upwind_grad_1d(v, b, dx)
        assert np.array_equal(g_py, g_cy), "upwind_grad_1d backends disagree"
        t_cy_c = bench(_kernels.combine_1d, (v, w0, wp, wm))
        t_cy_g = bench(_kernels.upwind_grad_1d, (v, b, dx))
        print(
            f"{n:>8} {t_py_c*1e6:>10.1f}us {t_cy_c*1e6:>10.1f}us"
            f" {t_py_g*1e6:>10.1f}us {t_cy_g*1e6:>10.1f}us"
        )
    if _kernels is None:
        print("compiled extension not built; only the fallback was timed")
    else:
        print("backends bit-identical on all tested sizes")


if __name__ == "__main__":
    main()
