"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20]

Prints one line per kernel: best-of-``repeat`` wall time for each backend
and the speedup.  Exits quietly with a note when the extension is absent.
"""

import argparse
import sys
import timeit

import numpy as np

from momentctl import _kernels_py as py

try:
    from momentctl import _kernels as cy
except ImportError:
    cy = None


def cases():
    rng = np.random.default_rng(0)
    lam = np.sort(rng.uniform(1.0, 400.0, 200))
    m = np.arange(1, 161, dtype=np.int64)
    s = np.linspace(0.0, 500.0, 400)
    t = np.linspace(1e-3, 1.0, 2000)
    w = np.full_like(t, t[1] - t[0])
    v = np.sort(rng.uniform(0.0, 2000.0, 5000))
    return {
        "exp_time_gram 200x200": lambda k: k.exp_time_gram(lam, lam, 1.0, 0.0),
        "sine_overlap_matrix 160x160": lambda k: k.sine_overlap_matrix(m, m, 0.3, 1.1),
        "weighted_time_integrals 400x2000": lambda k: k.weighted_time_integrals(s, 1.5, 1.0, t, w),
        "window_max_count n=5000": lambda k: k.window_max_count(v, 3.0),
        "h5_pair_sup n=5000 band=64": lambda k: k.h5_pair_sup(v, 0.5, 64),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not built; nothing to compare")
        return 0
    print(f"{'kernel':36s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases().items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:36s} {tp:12.3f} {tc:12.3f} {tp / tc:8.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
