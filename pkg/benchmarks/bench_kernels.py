"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Also checks that both backends return the same numbers on each input.
"""
import argparse
import timeit

import numpy as np

from ccrmst import kernels


def cases(rng):
    out = []
    for nr, nc in ((100, 500), (200, 1000), (400, 2000)):
        cost = np.abs(rng.random((nr, 1)) - rng.random((1, nc)))
        out.append((f"assignment {nr}x{nc}", "solve_assignment", (cost,)))
    for n in (1000, 10000):
        t = np.sort(rng.exponential(size=n))
        ev = (rng.random(n) < 0.4).astype(float)
        w = 1 + rng.integers(0, 5, n).astype(float)
        out.append((f"nelson-aalen n={n}", "weighted_nelson_aalen", (t, ev, np.ones(n), w, np.quantile(t, 0.8))))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension is not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for label, name, inputs in cases(rng):
        fast = getattr(kernels.compiled_backend, name)
        slow = getattr(kernels.python_backend, name)
        a, b = fast(*inputs), slow(*inputs)
        for x, y in zip(a, b):
            assert np.array_equal(np.asarray(x), np.asarray(y)), f"{label}: backends disagree"
        n = 1 if "assignment" in label else 20
        ts = min(timeit.repeat(lambda: slow(*inputs), number=n, repeat=args.repeat)) / n
        tf = min(timeit.repeat(lambda: fast(*inputs), number=n, repeat=args.repeat)) / n
        print(f"{label:28s} {1e3 * ts:10.2f} {1e3 * tf:10.2f} {ts / tf:8.1f}")


if __name__ == "__main__":
    main()
