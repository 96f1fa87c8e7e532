"""Time the compiled and pure-Python constrained Ward kernels on a pixel grid.

    python3 benchmarks/bench_ward.py --side 150 --dim 20 --repeat 3

Both kernels get the same random features on a 4-neighbour grid; the script
checks that their merge histories are identical before reporting timings.
"""
import argparse
import time

import numpy as np

from dmdclust import clustering


def grid_edges(side: int) -> np.ndarray:
    ids = np.arange(side * side).reshape(side, side)
    right = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    down = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    return np.concatenate([right, down])


def best_of(fn, repeat: int) -> tuple:
    best, result = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=150)
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    points = rng.random((args.side * args.side, args.dim))
    edges = grid_edges(args.side)

    timings = {}
    results = {}
    for name, kernel in clustering.KERNELS.items():
        timings[name], results[name] = best_of(lambda: kernel(points, edges), args.repeat)
        print(f"{name:>9}: {timings[name]:.3f} s  ({args.side}x{args.side} grid, D={args.dim})")

    if "compiled" not in results:
        print("compiled kernel not built; only the Python fallback was timed")
        return
    same = all(np.array_equal(a, b) for a, b in zip(results["compiled"], results["python"]))
    print(f"identical merge history: {same}")
    print(f"speedup: {timings['python'] / timings['compiled']:.1f}x")


if __name__ == "__main__":
    main()
