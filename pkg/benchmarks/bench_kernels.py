"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--n 16 32] [--repeat 5]

Prints the best-of-repeat time per call for each kernel and grid size,
and checks that both backends agree bitwise.
"""
import argparse
import timeit

import numpy as np

from wedge4 import _kernels_py

try:
    from wedge4 import _kernels
except ImportError:
    _kernels = None


def cases(n, rng):
    shape = (n,) * 4
    w = rng.standard_normal((6,) + shape)
    w2 = rng.standard_normal((6,) + shape)
    a, d, b, c = rng.standard_normal((4,) + shape)
    return {
        "pairwise_sum": (w,),
        "pairing_field": (w, w2),
        "herm2_det": (a, d, b, c),
    }


def best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[16, 32])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<15}{'n':>4}{'python ms':>12}{'cython ms':>12}{'speedup':>9}  bitwise")
    for n in args.n:
        for name, inputs in cases(n, rng).items():
            tp = best(getattr(_kernels_py, name), inputs, args.repeat)
            if _kernels is None:
                print(f"{name:<15}{n:>4}{tp * 1e3:>12.2f}{'-':>12}{'-':>9}  -")
                continue
            tc = best(getattr(_kernels, name), inputs, args.repeat)
            same = np.array_equal(getattr(_kernels_py, name)(*inputs), getattr(_kernels, name)(*inputs))
            print(f"{name:<15}{n:>4}{tp * 1e3:>12.2f}{tc * 1e3:>12.2f}{tp / tc:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
