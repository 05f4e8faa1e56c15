"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 5]

Both backends are checked for identical output before timing.
"""
import argparse
import timeit

import numpy as np

from semvos import _pykernels
from semvos.kernels import available_backends


def workloads(size, seed=0):
    rng = np.random.default_rng(seed)
    mask = np.ascontiguousarray((rng.random((size, size)) < 0.55).astype(np.uint8))
    seeds, _ = _pykernels.label_components(np.ascontiguousarray((rng.random((size, size)) < 0.7).astype(np.uint8)), False)
    boundary = np.zeros((size, size), np.uint8)
    boundary[rng.integers(0, size, size * 4), rng.integers(0, size, size * 4)] = 1
    target = np.zeros_like(boundary)
    target[rng.integers(0, size, size * 4), rng.integers(0, size, size * 4)] = 1
    return {
        "label_components (8-conn)": lambda k: k.label_components(mask, True),
        "absorb_unlabeled": lambda k: k.absorb_unlabeled(seeds),
        "near_mask (r=3, euclid)": lambda k: k.near_mask(boundary, target, 3.0, False),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; timing the Python fallback only")
    print(f"{args.size}x{args.size}, best of {args.repeat}")
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for name, fn in workloads(args.size).items():
        outs = {b: fn(k) for b, k in backends.items()}
        if len(outs) > 1 and not same(outs["python"], outs["compiled"]):
            raise SystemExit(f"{name}: backends disagree")
        times = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for b, k in backends.items()}
        row = f"{name:<28}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
