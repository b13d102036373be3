"""Timing comparison of the compiled kernels against the NumPy fallback.

Runs bidiff_values and third_kind_values from both backends on identical
random inputs across a range of sizes and prints per-call timings plus
the speedup of the extension. Also cross-checks that the two backends
agree to machine precision before timing anything.

Usage: python3 benchmarks/bench_kernels.py [--sizes 1000 10000 100000]
"""

import argparse
import timeit

import numpy as np

from conespectra._core import kernels_py

try:
    from conespectra._core import _kernels
except ImportError:
    _kernels = None


def make_inputs(n, rng):
    lam1 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    lam2 = rng.standard_normal(n) + 1j * rng.standard_normal(n) + 3.0
    y1 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    fm = rng.standard_normal((5, 5))
    fm = (fm + fm.T).astype(complex)
    pcoef = (rng.standard_normal(5) + 1j * rng.standard_normal(5))
    return {
        "bidiff_values": (fm, lam1, y1, lam2, y2),
        "third_kind_values": (lam1, y1, 2.0 + 0.5j, 1.0 + 0.2j,
                              -1.5 + 1.0j, 0.7 - 0.3j, pcoef),
    }


def best_time(fn, args, target=0.2):
    one = timeit.timeit(lambda: fn(*args), number=1)
    reps = max(3, int(target / max(one, 1e-9)))
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=reps))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+",
                    default=[1000, 10000, 100000])
    opts = ap.parse_args()

    if _kernels is None:
        print("extension _kernels not built; timing fallback only")

    rng = np.random.default_rng(42)
    header = f"{'kernel':<20}{'n':>8}{'numpy (us)':>14}"
    if _kernels is not None:
        header += f"{'cython (us)':>14}{'speedup':>10}"
    print(header)

    for n in opts.sizes:
        inputs = make_inputs(n, rng)
        for name, args in inputs.items():
            t_py = best_time(getattr(kernels_py, name), args)
            row = f"{name:<20}{n:>8}{t_py * 1e6:>14.1f}"
            if _kernels is not None:
                fn_c = getattr(_kernels, name)
                ref = getattr(kernels_py, name)(*args)
                got = fn_c(*args)
                err = np.max(np.abs(got - ref)) / np.max(np.abs(ref))
                if err > 1e-12:
                    raise SystemExit(
                        f"{name}: backends disagree, rel err {err:.2e}")
                t_c = best_time(fn_c, args)
                row += f"{t_c * 1e6:>14.1f}{t_py / t_c:>10.2f}x"
            print(row)


if __name__ == "__main__":
    main()
