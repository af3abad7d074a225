"""Reference (numpy / pure Python) implementation of the hot kernels.

Must stay bit-compatible with ``_kernels.pyx`` for every random draw.

Generator: counter-based SplitMix64.  A stream with base state ``s`` emits
``mix64(s + i * GOLDEN)`` for ``i = 1, 2, ...``; a uniform double is the top
53 bits times 2**-53.  The base state of stream ``index`` under ``seed`` is
``mix64(seed ^ mix64(index + GOLDEN))``.

Categorical draws use the inverse CDF: the first index ``i`` with
``u < cdf[i]``; if rounding leaves ``u >= cdf[-1]`` the last outcome with
positive mass is returned.
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
TWO_M53 = 1.0 / 9007199254740992.0

_U_GOLDEN = np.uint64(GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))

# (x-side leaves, y-side leaves) per topology: 12|34, 13|24, 14|23
CFN_SIDES = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_np(z):
    z = (z ^ (z >> _S30)) * _U_M1
    z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


def stream_state(seed, index):
    return mix64((seed & MASK64) ^ mix64((index + GOLDEN) & MASK64))


def _stream_states_np(seed, start, n_streams):
    idx = np.arange(n_streams, dtype=np.uint64) + np.uint64(start & MASK64)
    h = _mix64_np(idx + _U_GOLDEN)
    return _mix64_np(np.uint64(seed & MASK64) ^ h)


def _raw(state, n):
    with np.errstate(over="ignore"):
        ctr = np.arange(1, n + 1, dtype=np.uint64) * _U_GOLDEN + np.uint64(state)
        return _mix64_np(ctr)


def uniforms(state, n):
    x = _raw(state, n)
    return (x >> _S11).astype(np.float64) * TWO_M53, (state + n * GOLDEN) & MASK64


def stream_uniforms(seed, start, n_streams, m):
    """Matrix of the first ``m`` uniforms of streams ``start .. start+n_streams-1``."""
    base = _stream_states_np(seed, start, n_streams)
    step = np.arange(1, m + 1, dtype=np.uint64) * _U_GOLDEN
    with np.errstate(over="ignore"):
        x = _mix64_np(base[:, None] + step[None, :])
    return (x >> _S11).astype(np.float64) * TWO_M53


def _last_positive(cdf):
    prev = 0.0
    last = 0
    for i, c in enumerate(cdf):
        if c > prev:
            last = i
        prev = c
    return last


def lookup(cdf, u):
    """Inverse-CDF lookup for an array of uniforms."""
    cdf = np.asarray(cdf, dtype=np.float64)
    idx = np.searchsorted(cdf, u, side="right")
    n = cdf.shape[0]
    if idx.size and idx.max() >= n:
        idx[idx >= n] = _last_positive(cdf)
    return idx.astype(np.int64)


def draw_indices(state, cdf, k):
    u, new_state = uniforms(state, k)
    return lookup(cdf, u), new_state


def draw_counts(state, cdf, k):
    idx, new_state = draw_indices(state, cdf, k)
    return np.bincount(idx, minlength=len(cdf)).astype(np.int64), new_state


# ---------------------------------------------------------------- CFN model


def cfn_pattern_probs(topology, p):
    """Site-pattern probabilities (leaf 1 = most significant bit).

    ``p`` holds the four pendant substitution probabilities (by leaf) then the
    central one.
    """
    (x1, x2), (y1, y2) = CFN_SIDES[topology]
    pc = p[4]
    out = [0.0] * 16
    for pat in range(16):
        s = ((pat >> 3) & 1, (pat >> 2) & 1, (pat >> 1) & 1, pat & 1)
        tot = 0.0
        for sx in (0, 1):
            fx = (p[x1] if s[x1] != sx else 1.0 - p[x1]) * (p[x2] if s[x2] != sx else 1.0 - p[x2])
            for sy in (0, 1):
                fc = pc if sx != sy else 1.0 - pc
                fy = (p[y1] if s[y1] != sy else 1.0 - p[y1]) * (p[y2] if s[y2] != sy else 1.0 - p[y2])
                tot += fc * fx * fy
        out[pat] = 0.5 * tot
    return out


def _loglik(counts, probs, total):
    acc = 0.0
    for c, q in zip(counts, probs):
        if c > 0.0:
            if q <= 0.0:
                return -math.inf
            acc += c * math.log(q)
    return acc / total


def _argmax_affine_log(a, b, counts):
    """Maximise sum c_i log(a_i + b_i t) over t in [0, 1/2] (concave)."""
    active = [(c, ai, bi) for c, ai, bi in zip(counts, a, b) if c > 0.0]
    for c, ai, bi in active:
        if ai <= 0.0 and ai + 0.5 * bi <= 0.0:
            return None

    def deriv(t):
        d = 0.0
        for c, ai, bi in active:
            den = ai + bi * t
            if den <= 0.0:
                if bi > 0.0:
                    return math.inf
                if bi < 0.0:
                    return -math.inf
                continue
            d += c * bi / den
        return d

    if deriv(0.0) <= 0.0:
        return 0.0
    if deriv(0.5) >= 0.0:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if deriv(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cfn_coordinate_ascent(counts, topology, p0, tol=1e-10, max_sweeps=500):
    """Coordinate ascent of the normalised CFN log-likelihood on [0, 1/2]^5.

    Each pattern probability is affine in any single edge parameter, so every
    coordinate step is an exact concave 1-d maximisation.
    Returns ``(loglik, p)``.
    """
    counts = [float(c) for c in counts]
    total = sum(counts)
    p = [float(v) for v in p0]
    cur = _loglik(counts, cfn_pattern_probs(topology, p), total)
    for _ in range(max_sweeps):
        start = cur
        for e in range(5):
            keep = p[e]
            p[e] = 0.0
            a = cfn_pattern_probs(topology, p)
            p[e] = 0.5
            h = cfn_pattern_probs(topology, p)
            b = [2.0 * (hi - lo) for hi, lo in zip(h, a)]
            t = _argmax_affine_log(a, b, counts)
            if t is None:
                p[e] = keep
                continue
            p[e] = t
            val = _loglik(counts, cfn_pattern_probs(topology, p), total)
            if val >= cur:
                cur = val
            else:
                p[e] = keep
        if not (cur - start > tol):
            break
    return cur, np.array(p)
