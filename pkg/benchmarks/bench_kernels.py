"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` wall time for each
backend, the speed-up, and the largest absolute difference between outputs.
"""
import argparse
import timeit

import numpy as np

from smoothreg import _kernels_py

try:
    from smoothreg import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def cases(n, rng):
    w = rng.uniform(size=n)
    xi = rng.standard_normal(n)
    s = rng.standard_normal((n, 4))
    return {
        "fgm_chain (quadratic)": ("fgm_chain", (0.3, w, 0.15, 0.0)),
        "fgm_chain (bisection)": ("fgm_chain", (0.3, w, 0.15, 0.10)),
        "arma11_filter": ("arma11_filter", (xi, 0.5, 0.2)),
        "bartlett_sum (lag 12)": ("bartlett_sum", (s, 12)),
    }


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"n={args.n}, best of {args.repeat}")
    print(f"{'kernel':<24}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}{'max |diff|':>12}")
    for label, (name, fargs) in cases(args.n, rng).items():
        py_fn = getattr(_kernels_py, name)
        t_py = best_time(py_fn, fargs, args.repeat)
        if compiled is None:
            print(f"{label:<24}{1e3 * t_py:>14.2f}{'n/a':>14}{'':>10}{'':>12}")
            continue
        c_fn = getattr(compiled, name)
        t_c = best_time(c_fn, fargs, args.repeat)
        diff = np.max(np.abs(np.asarray(py_fn(*fargs)) - np.asarray(c_fn(*fargs))))
        print(f"{label:<24}{1e3 * t_py:>14.2f}{1e3 * t_c:>14.2f}{t_py / t_c:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
