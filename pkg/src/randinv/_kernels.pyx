# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: SplitMix64 streams, categorical draws, CFN likelihood.

Semantics are defined by ``_kernels_py``; random draws are bit-identical.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport log, INFINITY

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef int[3][4] SIDES
SIDES[0][:] = [0, 1, 2, 3]
SIDES[1][:] = [0, 2, 1, 3]
SIDES[2][:] = [0, 3, 1, 2]

MASK64 = (1 << 64) - 1


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _u01(uint64_t x) noexcept nogil:
    return <double>(x >> 11) * TWO_M53


def mix64(z):
    return _mix64(<uint64_t>(z & MASK64))


def stream_state(seed, index):
    cdef uint64_t s = <uint64_t>(seed & MASK64)
    cdef uint64_t i = <uint64_t>(index & MASK64)
    return _mix64(s ^ _mix64(i + GOLDEN))


def uniforms(state, Py_ssize_t n):
    cdef uint64_t s = <uint64_t>(state & MASK64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            s = s + GOLDEN
            ov[i] = _u01(_mix64(s))
    return out, s


def stream_uniforms(seed, start, Py_ssize_t n_streams, Py_ssize_t m):
    cdef uint64_t sd = <uint64_t>(seed & MASK64)
    cdef uint64_t st = <uint64_t>(start & MASK64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_streams, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t r, j
    cdef uint64_t base
    with nogil:
        for r in range(n_streams):
            base = _mix64(sd ^ _mix64(st + <uint64_t>r + GOLDEN))
            for j in range(m):
                base = base + GOLDEN
                ov[r, j] = _u01(_mix64(base))
    return out


cdef Py_ssize_t _last_positive(const double[::1] cdf) noexcept nogil:
    cdef double prev = 0.0
    cdef Py_ssize_t i, last = 0
    for i in range(cdf.shape[0]):
        if cdf[i] > prev:
            last = i
        prev = cdf[i]
    return last


cdef inline Py_ssize_t _search(const double[::1] cdf, Py_ssize_t n, double u) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


def lookup(cdf_in, u_in):
    cdef const double[::1] cdf = np.ascontiguousarray(cdf_in, dtype=np.float64)
    cdef const double[::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef Py_ssize_t n = cdf.shape[0], i, j
    cdef Py_ssize_t last = _last_positive(cdf)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(u.shape[0], dtype=np.int64)
    cdef int64_t[::1] ov = out
    with nogil:
        for i in range(u.shape[0]):
            j = _search(cdf, n, u[i])
            ov[i] = last if j >= n else j
    return out


def draw_indices(state, cdf_in, Py_ssize_t k):
    cdef const double[::1] cdf = np.ascontiguousarray(cdf_in, dtype=np.float64)
    cdef uint64_t s = <uint64_t>(state & MASK64)
    cdef Py_ssize_t n = cdf.shape[0], i, j
    cdef Py_ssize_t last = _last_positive(cdf)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(k, dtype=np.int64)
    cdef int64_t[::1] ov = out
    with nogil:
        for i in range(k):
            s = s + GOLDEN
            j = _search(cdf, n, _u01(_mix64(s)))
            ov[i] = last if j >= n else j
    return out, s


def draw_counts(state, cdf_in, Py_ssize_t k):
    cdef const double[::1] cdf = np.ascontiguousarray(cdf_in, dtype=np.float64)
    cdef uint64_t s = <uint64_t>(state & MASK64)
    cdef Py_ssize_t n = cdf.shape[0], i, j
    cdef Py_ssize_t last = _last_positive(cdf)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] ov = out
    with nogil:
        for i in range(k):
            s = s + GOLDEN
            j = _search(cdf, n, _u01(_mix64(s)))
            if j >= n:
                j = last
            ov[j] += 1
    return out, s


# ---------------------------------------------------------------- CFN model


cdef void _cfn_probs(int topo, double* p, double* out) noexcept nogil:
    cdef int x1 = SIDES[topo][0], x2 = SIDES[topo][1]
    cdef int y1 = SIDES[topo][2], y2 = SIDES[topo][3]
    cdef double pc = p[4]
    cdef int pat, sx, sy
    cdef int s[4]
    cdef double tot, fx, fy, fc
    for pat in range(16):
        s[0] = (pat >> 3) & 1
        s[1] = (pat >> 2) & 1
        s[2] = (pat >> 1) & 1
        s[3] = pat & 1
        tot = 0.0
        for sx in range(2):
            fx = (p[x1] if s[x1] != sx else 1.0 - p[x1]) * (p[x2] if s[x2] != sx else 1.0 - p[x2])
            for sy in range(2):
                fc = pc if sx != sy else 1.0 - pc
                fy = (p[y1] if s[y1] != sy else 1.0 - p[y1]) * (p[y2] if s[y2] != sy else 1.0 - p[y2])
                tot += fc * fx * fy
        out[pat] = 0.5 * tot


def cfn_pattern_probs(int topology, p_in):
    cdef double p[5]
    cdef double out[16]
    cdef int i
    for i in range(5):
        p[i] = p_in[i]
    _cfn_probs(topology, p, out)
    return [out[i] for i in range(16)]


cdef double _loglik(double* counts, double* probs, double total) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(16):
        if counts[i] > 0.0:
            if probs[i] <= 0.0:
                return -INFINITY
            acc += counts[i] * log(probs[i])
    return acc / total


cdef double _deriv(double* a, double* b, double* c, double t) noexcept nogil:
    cdef double d = 0.0, den
    cdef int i
    for i in range(16):
        if c[i] > 0.0:
            den = a[i] + b[i] * t
            if den <= 0.0:
                if b[i] > 0.0:
                    return INFINITY
                if b[i] < 0.0:
                    return -INFINITY
                continue
            d += c[i] * b[i] / den
    return d


cdef double _argmax_affine_log(double* a, double* b, double* c) noexcept nogil:
    """Return the maximiser in [0, 1/2], or -1 when the objective is -inf."""
    cdef int i, it
    cdef double lo, hi, mid
    for i in range(16):
        if c[i] > 0.0 and a[i] <= 0.0 and a[i] + 0.5 * b[i] <= 0.0:
            return -1.0
    if _deriv(a, b, c, 0.0) <= 0.0:
        return 0.0
    if _deriv(a, b, c, 0.5) >= 0.0:
        return 0.5
    lo = 0.0
    hi = 0.5
    for it in range(100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _deriv(a, b, c, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cfn_coordinate_ascent(counts_in, int topology, p0, double tol=1e-10, int max_sweeps=500):
    cdef double c[16]
    cdef double p[5]
    cdef double a[16]
    cdef double h[16]
    cdef double b[16]
    cdef double pr[16]
    cdef double total = 0.0, cur, start, val, keep, t
    cdef int i, e, sweep
    for i in range(16):
        c[i] = float(counts_in[i])
        total += c[i]
    for i in range(5):
        p[i] = float(p0[i])
    with nogil:
        _cfn_probs(topology, p, pr)
        cur = _loglik(c, pr, total)
        for sweep in range(max_sweeps):
            start = cur
            for e in range(5):
                keep = p[e]
                p[e] = 0.0
                _cfn_probs(topology, p, a)
                p[e] = 0.5
                _cfn_probs(topology, p, h)
                for i in range(16):
                    b[i] = 2.0 * (h[i] - a[i])
                t = _argmax_affine_log(a, b, c)
                if t < 0.0:
                    p[e] = keep
                    continue
                p[e] = t
                _cfn_probs(topology, p, pr)
                val = _loglik(c, pr, total)
                if val >= cur:
                    cur = val
                else:
                    p[e] = keep
            if not (cur - start > tol):
                break
    return cur, np.array([p[0], p[1], p[2], p[3], p[4]])
