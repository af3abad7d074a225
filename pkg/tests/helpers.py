"""Independent oracles shared by several test modules."""

import itertools

import numpy as np

MASK = (1 << 64) - 1


def splitmix_ref(seed: int, index: int, n: int) -> list[int]:
    """Plain-integer SplitMix64 written from the published reference."""

    def mix(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK
        return z ^ (z >> 31)

    g = 0x9E3779B97F4A7C15
    base = mix(seed ^ mix((index + g) & MASK))
    return [mix((base + i * g) & MASK) for i in range(1, n + 1)]


def cfn_bruteforce(topology: int, p) -> np.ndarray:
    """Pattern probabilities by summing over all 2^6 joint node states.

    Internal node x joins two leaves, y the other two; x is the root with a
    uniform state.
    """
    sides = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))][topology]
    out = np.zeros(16)
    for sx, sy, *leaves in itertools.product((0, 1), repeat=6):
        w = 0.5 * (p[4] if sx != sy else 1 - p[4])
        for leaf, s in zip(sides[0], (sx, sx)):
            w *= p[leaf] if leaves[leaf] != s else 1 - p[leaf]
        for leaf, s in zip(sides[1], (sy, sy)):
            w *= p[leaf] if leaves[leaf] != s else 1 - p[leaf]
        pat = leaves[0] * 8 + leaves[1] * 4 + leaves[2] * 2 + leaves[3]
        out[pat] += w
    return out


def plurality_bruteforce(q, target: int, m: int) -> float:
    """Plurality win probability by enumerating all n^m ordered vote sequences."""
    n = len(q)
    total = 0.0
    for seq in itertools.product(range(n), repeat=m):
        w = float(np.prod([q[s] for s in seq]))
        if w == 0:
            continue
        c = np.bincount(seq, minlength=n)
        top = c.max()
        if c[target] == top:
            total += w / int((c == top).sum())
    return total
