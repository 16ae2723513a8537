"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel: best time per call for each backend, the speedup,
and the largest absolute difference between their outputs.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from stabl.kernels import backend
from stabl.learners import Dataset, LookupTableLearner, multiset_keys, row_hashes
from stabl.resampling import ResamplingScheme, enumerate_support


def cases(rng):
    n = 8
    support = enumerate_support(ResamplingScheme.classical(n, 8), collapse_symmetric=True)
    data = Dataset(np.arange(n, dtype=float), rng.random(n))
    keys = multiset_keys(row_hashes(data), support.counts)
    words = np.array([LookupTableLearner(s).seedword for s in range(200)], dtype=np.uint64)
    values = rng.random((20, len(support)))

    X = rng.standard_normal((100, 50))
    y = (rng.random(100) < 0.5).astype(float)
    h = 40
    W1, b1, W2 = rng.uniform(-0.3, 0.3, (50, h)), rng.uniform(-0.3, 0.3, h), rng.uniform(-0.3, 0.3, h)
    perms = np.array([rng.permutation(100) for _ in range(8)])
    Xt = rng.random((100, 50))
    yt = rng.standard_normal(100)

    return {
        "conditional_means (20 x 6435)": ("conditional_means", (values, support.probs, support.absent)),
        "table_conditional_means (200 x 6435)": ("table_conditional_means",
                                                 (keys, words, support.probs, support.absent, 0.0, 1.0)),
        "logistic_gd (100 x 50, 100 iters)": ("logistic_gd", (X, y, 10.0, 100)),
        "mlp_train (100 x 50, h=40, 8 epochs)": ("mlp_train", (X, y, W1, b1, W2, 0.1, perms, 0.2, 1e-4, 0.9, 100)),
        "tree_build (100 x 50, depth 50)": ("tree_build", (Xt, yt, 50)),
    }


def max_diff(a, b) -> float:
    if isinstance(a, tuple):
        return max(max_diff(u, v) for u, v in zip(a, b))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    both = np.isfinite(a) & np.isfinite(b)
    return float(np.max(np.abs(a[both] - b[both]), initial=0.0))


def best_time(fn, args, repeat: int) -> float:
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    try:
        compiled = backend("cython")
    except ImportError:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
    python = backend("python")
    print(f"{'kernel':40s} {'cython':>11s} {'python':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for label, (name, fargs) in cases(np.random.default_rng(0)).items():
        tc = best_time(getattr(compiled, name), fargs, args.repeat)
        tp = best_time(getattr(python, name), fargs, args.repeat)
        diff = max_diff(getattr(compiled, name)(*fargs), getattr(python, name)(*fargs))
        print(f"{label:40s} {tc * 1e3:9.3f}ms {tp * 1e3:9.3f}ms {tp / tc:7.1f}x {diff:11.2e}")


if __name__ == "__main__":
    main()
