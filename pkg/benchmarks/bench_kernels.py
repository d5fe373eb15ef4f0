"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 40000] [--p 30] [--repeat 5]

Both backends are imported directly, so the comparison does not depend on
DPSIR_PURE_PYTHON. Each line reports the best-of-``repeat`` wall time per call
and the speedup of the compiled module.
"""

import argparse
import timeit

import numpy as np

from dpsir import _pykernels

try:
    from dpsir import _ckernels
except ImportError:
    _ckernels = None


def cases(n, p, k, H, rng):
    X = rng.standard_normal((n, p))
    labels = rng.integers(0, H, size=n)
    B = rng.standard_normal((p, k)) / np.sqrt(p)
    t = rng.uniform(-1, 1, size=n)
    m = int(np.ceil(n ** (1 / 3)))
    scores = rng.standard_normal(1000)
    noise = rng.laplace(size=(20, 1000))
    return {
        "bin_counts": (t, m),
        "slice_sums": (X, labels, H),
        "fold_terms": (X, labels, B, 3.0, H),
        "peel_select": (scores, noise),
    }


def best_time(fn, args, repeat):
    number = 1
    while True:
        t = timeit.timeit(lambda: fn(*args), number=number)
        if t > 0.05 or number >= 1000:
            break
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=40000)
    ap.add_argument("--p", type=int, default=30)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--H", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the fallback is timed")
    rng = np.random.default_rng(args.seed)
    print(f"n={args.n} p={args.p} k={args.k} H={args.H}")
    print(f"{'kernel':<12} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, call_args in cases(args.n, args.p, args.k, args.H, rng).items():
        t_py = best_time(getattr(_pykernels, name), call_args, args.repeat)
        if _ckernels is None:
            print(f"{name:<12} {1e3 * t_py:>10.3f} {'-':>10} {'-':>8}")
            continue
        t_c = best_time(getattr(_ckernels, name), call_args, args.repeat)
        print(f"{name:<12} {1e3 * t_py:>10.3f} {1e3 * t_c:>10.3f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
