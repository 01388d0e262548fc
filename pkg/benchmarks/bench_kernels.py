"""Time the compiled and fallback kernels on the same inputs.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--size PX] [--points N]
"""

import argparse
import timeit

import numpy as np

from pathrag.kernels import implementations


def inputs(size, points, seed=0):
    rng = np.random.default_rng(seed)
    mask = rng.random((size, size)) < 0.35
    # grow blobs so labeling sees realistic components
    mask = mask | np.roll(mask, 1, 0) | np.roll(mask, 1, 1)
    values = rng.random((size, size))
    xy = rng.uniform(0, size, size=(points, 2))
    return mask, values, xy


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--points", type=int, default=500)
    args = ap.parse_args(argv)

    mask, values, xy = inputs(args.size, args.points)
    impls = implementations()
    cases = {
        "binary_open_cross": lambda m: m.binary_open_cross(mask),
        "label_components": lambda m: m.label_components(mask, values),
        "knn_edges": lambda m: m.knn_edges(xy[:, 0], xy[:, 1], 5, 50.0),
    }
    print(f"image {args.size}x{args.size}, {args.points} points, best of {args.repeat}")
    print(f"{'kernel':<18} " + " ".join(f"{name:>10}" for name in impls) + "   speedup")
    for label, call in cases.items():
        best = {}
        for name, mod in impls.items():
            best[name] = min(timeit.repeat(lambda: call(mod), number=1, repeat=args.repeat))
        row = " ".join(f"{best[n] * 1000:>8.2f}ms" for n in impls)
        speed = f"{best['python'] / best['cython']:8.1f}x" if "cython" in best else "       -"
        print(f"{label:<18} {row}  {speed}")


if __name__ == "__main__":
    main()
