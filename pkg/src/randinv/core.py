"""Finite distributions, random functions as stochastic matrices, and sampling.

A random function ``Xi: A -> U`` is stored as its row-stochastic matrix
``X[a, u] = P[xi_a = u]``.  Composition of ``Xi: A -> U`` with
``Gamma: U -> V`` is the ordinary product ``X @ G``.  (Writing the inverter's
matrix column-wise, as is sometimes done, the same product reads ``X G^T``.)
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

INPUT_TOL = 1e-9
INTERNAL_TOL = 1e-12
KFOLD_CAP = 10**6


class LabelError(ValueError):
    """Labels do not conform (unknown label, mismatched ground sets)."""


def _labels(labels: Iterable) -> tuple[str, ...]:
    out = tuple(str(x) for x in labels)
    if len(set(out)) != len(out):
        raise LabelError(f"duplicate labels in {out!r}")
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _check_row(probs: np.ndarray, tol: float, what: str) -> None:
    if not np.all(np.isfinite(probs)):
        raise ValueError(f"{what}: non-finite probability")
    if np.any(probs < 0):
        raise ValueError(f"{what}: negative weight {probs.min()!r}")
    s = float(probs.sum())
    if abs(s - 1.0) > tol:
        raise ValueError(f"{what}: weights sum to {s!r}, not 1")


@dataclass(frozen=True, eq=False)
class Dist:
    """Labeled finite probability vector."""

    labels: tuple[str, ...]
    probs: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, label: str) -> float:
        return float(self.probs[self.labels.index(label)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dist):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.probs, other.probs)

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "probs": [float(p) for p in self.probs]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Dist":
        return make_dist(obj["labels"], obj["probs"])


def make_dist(labels: Sequence, weights: Sequence[float], tol: float = INPUT_TOL) -> Dist:
    """Validate ``weights`` as a distribution over ``labels``.

    Nothing is renormalised: weights that do not sum to 1 within ``tol`` are
    rejected.
    """
    labels = _labels(labels)
    probs = np.asarray(weights, dtype=np.float64).ravel()
    if probs.shape[0] != len(labels):
        raise ValueError(f"{len(labels)} labels but {probs.shape[0]} weights")
    _check_row(probs, tol, "make_dist")
    return Dist(labels, _readonly(probs))


def _dist_unchecked(labels: tuple[str, ...], probs: np.ndarray) -> Dist:
    return Dist(labels, _readonly(probs))


def _same_codomain(p: Dist, q: Dist) -> None:
    if p.labels != q.labels:
        raise LabelError("distributions live on different codomains")


def variational_distance(p: Dist, q: Dist) -> float:
    """Sum of absolute differences, in [0, 2]."""
    _same_codomain(p, q)
    return float(np.abs(p.probs - q.probs).sum())


def l2_distance(p: Dist, q: Dist) -> float:
    _same_codomain(p, q)
    return float(np.sqrt(((p.probs - q.probs) ** 2).sum()))


def kl_divergence(p: Dist, q: Dist) -> float:
    """Kullback-Leibler divergence in nats; ``inf`` when ``p`` is not dominated by ``q``."""
    _same_codomain(p, q)
    return _kl(p.probs, q.probs)


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    pm = p[mask]
    return float(max(0.0, (pm * np.log(pm / q[mask])).sum()))


def min_positive_prob(p: Dist) -> tuple[float, tuple[str, ...]]:
    """Smallest positive probability and the support it is taken over."""
    mask = p.probs > 0
    support = tuple(lab for lab, m in zip(p.labels, mask) if m)
    return float(p.probs[mask].min()), support


@dataclass(frozen=True, eq=False)
class RandomFn:
    """Random function ``domain -> codomain`` held as a row-stochastic matrix."""

    domain: tuple[str, ...]
    codomain: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.shape != (len(self.domain), len(self.codomain)):
            raise ValueError(
                f"matrix shape {m.shape} does not match "
                f"{len(self.domain)}x{len(self.codomain)} labels"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def index(self, a: str) -> int:
        try:
            return self.domain.index(a)
        except ValueError:
            raise LabelError(f"unknown domain label {a!r}") from None

    def row(self, a: str) -> Dist:
        return _dist_unchecked(self.codomain, self.matrix[self.index(a)])

    def rows(self) -> list[Dist]:
        return [_dist_unchecked(self.codomain, r) for r in self.matrix]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RandomFn):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.codomain == other.codomain
            and np.array_equal(self.matrix, other.matrix)
        )


def make_random_fn(domain: Sequence, codomain: Sequence, matrix, tol: float = INPUT_TOL) -> RandomFn:
    domain = _labels(domain)
    codomain = _labels(codomain)
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape != (len(domain), len(codomain)):
        raise ValueError(f"matrix shape {m.shape} does not match {len(domain)}x{len(codomain)} labels")
    for a, row in zip(domain, m):
        _check_row(row, tol, f"row {a!r}")
    return RandomFn(domain, codomain, _readonly(m))


def identity_fn(labels: Sequence, codomain: Sequence | None = None) -> RandomFn:
    labels = _labels(labels)
    codomain = labels if codomain is None else _labels(codomain)
    return make_random_fn(labels, codomain, np.eye(len(labels)))


def compose(xi: RandomFn, gamma: RandomFn) -> RandomFn:
    """``gamma o xi``: entry ``(a, v) = sum_u X[a, u] G[u, v]``."""
    if xi.codomain != gamma.domain:
        raise LabelError("codomain of the inner map must equal the domain of the outer map")
    m = xi.matrix @ gamma.matrix
    for a, row in zip(xi.domain, m):
        _check_row(row, INPUT_TOL, f"composed row {a!r}")
    return RandomFn(xi.domain, gamma.codomain, _readonly(m))


@dataclass(frozen=True, eq=False)
class Counts:
    """Multinomial outcome counts over a labeled codomain."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[str, int]:
        return {lab: int(c) for lab, c in zip(self.labels, self.counts)}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Counts):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.counts, other.counts)

    @classmethod
    def from_dict(cls, labels: Sequence, counts: Mapping[str, int]) -> "Counts":
        labels = _labels(labels)
        extra = set(counts) - set(labels)
        if extra:
            raise LabelError(f"outcomes {sorted(extra)} are not codomain labels")
        arr = np.array([int(counts.get(lab, 0)) for lab in labels], dtype=np.int64)
        if np.any(arr < 0):
            raise ValueError("negative count")
        return cls(labels, arr)


def empirical_distribution(c: Counts) -> Dist:
    k = c.total
    if k == 0:
        raise ValueError("empirical distribution of zero draws")
    return _dist_unchecked(c.labels, c.counts / k)


class RngStream:
    """Counter-based SplitMix64 stream identified by ``(seed, index)``.

    Draw ``i`` (1-based) of the stream is ``mix64(base + i * GOLDEN)`` where
    ``base = mix64(seed ^ mix64(index + GOLDEN))``, so results depend only on
    the seed, the stream index and the number of draws taken so far.
    """

    __slots__ = ("seed", "index", "state")

    def __init__(self, seed: int, index: int = 0):
        if not 0 <= int(seed) <= kernels.MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(index) < 0:
            raise ValueError("stream index must be nonnegative")
        self.seed = int(seed)
        self.index = int(index)
        self.state = kernels.stream_state(self.seed, self.index)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, index={self.index})"

    def next_u64(self) -> int:
        self.state = (self.state + kernels.GOLDEN) & kernels.MASK64
        return kernels._kernels_py.mix64(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * kernels.TWO_M53

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        return min(int(self.random() * n), n - 1)

    def choice(self, items: Sequence):
        return items[self.randbelow(len(items))]

    def uniforms(self, n: int) -> np.ndarray:
        u, self.state = kernels.uniforms(self.state, n)
        return u

    def categorical_counts(self, cdf: np.ndarray, k: int) -> np.ndarray:
        counts, self.state = kernels.draw_counts(self.state, cdf, k)
        return counts

    def categorical(self, cdf: np.ndarray, k: int) -> np.ndarray:
        idx, self.state = kernels.draw_indices(self.state, cdf, k)
        return idx


def cdf_of(probs: np.ndarray) -> np.ndarray:
    return np.cumsum(np.asarray(probs, dtype=np.float64))


def sample_dist(p: Dist, k: int, rng: RngStream, return_sequence: bool = False):
    if k < 1:
        raise ValueError("k must be >= 1")
    cdf = cdf_of(p.probs)
    if return_sequence:
        seq = rng.categorical(cdf, k)
        counts = np.bincount(seq, minlength=len(p)).astype(np.int64)
        return Counts(p.labels, counts), seq
    return Counts(p.labels, rng.categorical_counts(cdf, k))


def sample(xi: RandomFn, a: str, k: int, rng: RngStream, return_sequence: bool = False):
    """``k`` independent draws of ``xi_a``; returns ``Counts`` (and the index sequence)."""
    return sample_dist(xi.row(a), k, rng, return_sequence=return_sequence)


def tuple_label(labels: Sequence[str], digits: Sequence[int]) -> str:
    return ",".join(labels[d] for d in digits)


def decode_tuple_index(j: int, base: int, k: int) -> tuple[int, ...]:
    """Digits of tuple index ``j``; the first draw is the most significant digit."""
    out = []
    for _ in range(k):
        j, r = divmod(j, base)
        out.append(r)
    return tuple(reversed(out))


def kfold_explicit(xi: RandomFn, k: int, cap: int = KFOLD_CAP) -> RandomFn:
    """Exact product random function ``A -> U^k``.

    Tuple ``(u_1, ..., u_k)`` has index ``sum_i idx(u_i) |U|^(k-i)`` and label
    ``"u_1,...,u_k"``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(xi.codomain)
    if n**k > cap:
        raise ValueError(f"|U|^k = {n**k} exceeds the cap {cap}")
    m = xi.matrix
    out = m
    for _ in range(k - 1):
        out = (out[:, :, None] * m[:, None, :]).reshape(m.shape[0], -1)
    labels = tuple(tuple_label(xi.codomain, decode_tuple_index(j, n, k)) for j in range(n**k))
    return RandomFn(xi.domain, labels, _readonly(out))


# ------------------------------------------------------------------- I/O


def read_matrix_csv(path) -> RandomFn:
    """Matrix CSV: header row ``,u1,u2,...``; then ``a,x_a1,x_a2,...``."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_matrix_csv(text)


def parse_matrix_csv(text: str) -> RandomFn:
    rows = [r for r in csv.reader(io.StringIO(text)) if any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ValueError("matrix CSV needs a header and at least one row")
    header = [c.strip() for c in rows[0]]
    if header[0] != "":
        raise ValueError("first header cell must be blank")
    codomain = header[1:]
    domain, data = [], []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ValueError(f"line {i}: expected {len(header)} cells, got {len(r)}")
        domain.append(r[0].strip())
        try:
            data.append([float(c) for c in r[1:]])
        except ValueError as exc:
            raise ValueError(f"line {i}: {exc}") from None
    return make_random_fn(domain, codomain, data)


def format_matrix_csv(fn: RandomFn) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + list(fn.codomain))
    for a, row in zip(fn.domain, fn.matrix):
        w.writerow([a] + [repr(float(x)) for x in row])
    return buf.getvalue()


def write_matrix_csv(fn: RandomFn, path) -> None:
    Path(path).write_text(format_matrix_csv(fn), encoding="utf-8")


def read_dist_json(path) -> Dist:
    return Dist.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
