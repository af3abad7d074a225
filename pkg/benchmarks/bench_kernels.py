"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` wall time for each
backend and the speed-up.  Both backends must produce identical output; the
script checks that before timing.
"""

import argparse
import sys
import timeit

import numpy as np

from randinv import _kernels_py as py

try:
    from randinv import _kernels as cy
except ImportError:
    sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")


def cases():
    cdf4 = np.cumsum([0.25, 0.25, 0.25, 0.25])
    cdf16 = np.cumsum(np.full(16, 1 / 16))
    state = py.stream_state(2024, 7)
    rng = np.random.default_rng(0)
    counts = rng.integers(0, 60, size=16).astype(float)
    p0 = np.full(5, 0.2)
    return [
        ("draw_counts k=20000, |U|=4", lambda m: m.draw_counts(state, cdf4, 20000)),
        ("draw_indices k=1000, |U|=16", lambda m: m.draw_indices(state, cdf16, 1000)),
        ("stream_uniforms 10000x2", lambda m: m.stream_uniforms(2024, 0, 10000, 2)),
        ("cfn_pattern_probs x200", lambda m: [m.cfn_pattern_probs(t % 3, p0) for t in range(200)]),
        ("cfn_coordinate_ascent", lambda m: m.cfn_coordinate_ascent(counts, 0, p0)),
    ]


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, list):
        return np.allclose(np.asarray(a), np.asarray(b), atol=1e-12)
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, atol=1e-9)
    return a == b or abs(a - b) < 1e-12


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'kernel':32s} {'cython':>10s} {'python':>10s} {'speed-up':>9s}")
    for name, fn in cases():
        if not same(fn(cy), fn(py)):
            sys.exit(f"{name}: backends disagree")
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        print(f"{name:32s} {tc * 1e3:8.2f}ms {tp * 1e3:8.2f}ms {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
