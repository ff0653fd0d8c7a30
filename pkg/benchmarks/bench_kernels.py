"""Time the numba kernels against the numpy/scipy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

The first numba call of each kernel compiles (or loads the on-disk cache);
that warm-up is reported separately and excluded from the timings.
"""
import argparse
import time

import numpy as np

from reladv.attacks import _group_arrays
from reladv.kernels import numba_kernels, numpy_kernels
from reladv.relation import RelationSpec


def random_csr(n, avg_deg, rng):
    m = int(n * avg_deg)
    src = rng.integers(0, n, m)
    dst = rng.integers(0, n, m)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, np.int64)
    np.add.at(indptr, src + 1, 1)
    return np.cumsum(indptr), dst.astype(np.int64)


def cases(scale, rng):
    n = int(200_000 * scale)
    indptr, indices = random_csr(n, 1.5, rng)
    k = 14
    reach = rng.integers(1, 1 << k, k).astype(np.int64) | (1 << np.arange(k))
    comp = np.arange(k, dtype=np.int64)
    g0, g1 = rng.random(k), rng.random(k)
    d = 64
    spec = RelationSpec(additive=frozenset(range(32, 40)),
                        equivalence_groups=tuple(tuple(range(i, i + 4)) for i in range(0, 32, 4)))
    arrays = _group_arrays(spec, d)
    X = (rng.random((int(2000 * scale), d)) < 0.3).astype(np.uint8)
    G = rng.standard_normal(X.shape)
    rgb = rng.random((int(500_000 * scale), 3))
    hsv = numpy_kernels().rgb_to_hsv(rgb)
    return {
        "reach_mask": lambda K: K.reach_mask(indptr, indices, 0),
        "weak_labels": lambda K: K.weak_labels(indptr, indices),
        "strong_labels": lambda K: K.strong_labels(indptr, indices),
        "best_labeling": lambda K: K.best_labeling(reach, comp, k, g0, g1),
        "greedy_grad_batch": lambda K: K.greedy_grad_batch(X, G, *arrays, 8),
        "rgb_to_hsv": lambda K: K.rgb_to_hsv(rgb),
        "hsv_to_rgb": lambda K: K.hsv_to_rgb(hsv),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on problem sizes")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    jit, ref = numba_kernels(), numpy_kernels()
    print(f"{'kernel':<18} {'warm-up s':>10} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, call in cases(args.scale, np.random.default_rng(args.seed)).items():
        t = time.perf_counter()
        call(jit)
        warm = time.perf_counter() - t
        tj = best_of(lambda: call(jit), args.repeat)
        tn = best_of(lambda: call(ref), args.repeat)
        print(f"{name:<18} {warm:>10.2f} {tj * 1e3:>10.2f} {tn * 1e3:>10.2f} {tn / tj:>7.1f}x")


if __name__ == "__main__":
    main()
