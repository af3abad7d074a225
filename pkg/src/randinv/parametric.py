"""Parametric random functions and parametric maximum likelihood.

A family assigns each class ``a`` a parameter set ``Theta(a)``; the point
``(a, theta)`` generates a distribution over the common codomain.  Parametric
MLE classifies by the supremum of the likelihood over each class's parameter
set, so families expose the supremum directly together with whether it is
attained.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .core import Counts, Dist, LabelError, RngStream, _labels, make_dist, variational_distance

TIE_TOL = 1e-12
PINSKER_C = 2.0 - math.sqrt(3.0)
C1 = 2.0 / PINSKER_C**2


@dataclass(frozen=True)
class ParamPoint:
    cls: str
    theta: Any


class ParamFamily(abc.ABC):
    """Per-class distribution oracle over a finite codomain."""

    classes: tuple[str, ...]
    codomain: tuple[str, ...]

    @abc.abstractmethod
    def point(self, cls: str, theta) -> Dist:
        """Distribution of ``xi_(cls, theta)``."""

    @abc.abstractmethod
    def sup_log_likelihood(self, cls: str, counts: Counts) -> tuple[float, bool]:
        """``(sup_theta log-likelihood / k, attained)`` over ``Theta(cls)``."""

    @abc.abstractmethod
    def grid(self, cls: str, resolution: int) -> list[tuple[Any, Dist]]:
        """Finite nested subset of ``Theta(cls)``; finer as ``resolution`` grows."""

    def grid_matrix(self, cls: str, resolution: int) -> tuple[list, np.ndarray]:
        pts = self.grid(cls, resolution)
        if not pts:
            return [], np.zeros((0, len(self.codomain)))
        return [t for t, _ in pts], np.vstack([d.probs for _, d in pts])

    def descriptor(self) -> dict:
        raise NotImplementedError

    def check_class(self, cls: str) -> None:
        if cls not in self.classes:
            raise LabelError(f"unknown class {cls!r}")

    def check_counts(self, counts: Counts) -> None:
        if counts.labels != self.codomain:
            raise LabelError("counts are not over the family codomain")
        if counts.total < 1:
            raise ValueError("empty counts")


def log_likelihood(p: Dist, c: Counts) -> float:
    """``(1/k) sum_u c_u log p_u``; ``-inf`` if a counted outcome has probability 0."""
    if p.labels != c.labels:
        raise LabelError("counts and distribution have different codomains")
    k = c.total
    if k < 1:
        raise ValueError("empty counts")
    return _loglik(p.probs, c.counts)


def _loglik(probs: np.ndarray, counts: np.ndarray) -> float:
    mask = counts > 0
    q = probs[mask]
    if np.any(q <= 0):
        return -math.inf
    return float((counts[mask] * np.log(q)).sum() / counts.sum())


def _loglik_rows(P: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Normalised log-likelihood of every row of ``P``."""
    mask = counts > 0
    sub = P[:, mask]
    with np.errstate(divide="ignore"):
        ll = np.log(sub) @ counts[mask] / counts.sum()
    return np.where(np.any(sub <= 0, axis=1), -np.inf, ll)


def class_suprema(F: ParamFamily, counts: Counts) -> dict[str, tuple[float, bool]]:
    F.check_counts(counts)
    return {a: F.sup_log_likelihood(a, counts) for a in F.classes}


def mle_candidates(F: ParamFamily, counts: Counts, tie_tol: float = TIE_TOL) -> list[str]:
    """Classes the parametric MLE may return.

    Classes whose supremum is within ``tie_tol`` of the best are tied; among
    tied classes those attaining their supremum are preferred, since only an
    attained supremum has some ``theta'`` dominating every rival point.
    """
    sups = class_suprema(F, counts)
    best = max(v for v, _ in sups.values())
    if best == -math.inf:
        raise ValueError("observation has zero likelihood under every class")
    tied = [a for a, (v, _) in sups.items() if v >= best - tie_tol]
    attained = [a for a in tied if sups[a][1]]
    return attained or tied


def parametric_mle(F: ParamFamily, counts: Counts, rng: RngStream | None = None, tie_tol: float = TIE_TOL) -> str:
    """Parametric MLE decision; residual ties go uniformly at random (first one if ``rng`` is None)."""
    cands = mle_candidates(F, counts, tie_tol)
    if len(cands) == 1 or rng is None:
        return cands[0]
    return rng.choice(cands)


# ----------------------------------------------------------------- bounds


def concentration_bound_kl(u_plus: int, k: int, delta: float) -> float:
    """Markov bound on ``P[d_KL(p_hat, p) >= delta]``: ``|U+| / (k delta)``."""
    if k < 1 or delta <= 0 or u_plus < 1:
        raise ValueError("need u_plus >= 1, k >= 1, delta > 0")
    return u_plus / (k * delta)


def concentration_bound_var(u_plus: int, k: int, delta: float) -> float:
    """Bound on ``P[d(p_hat, p) >= delta]``: ``|U+| / (k delta^2)``."""
    if k < 1 or delta <= 0 or u_plus < 1:
        raise ValueError("need u_plus >= 1, k >= 1, delta > 0")
    return u_plus / (k * delta**2)


def _ceil(x: float) -> int:
    # float noise such as 320.00000000000006 must not bump the integer
    r = round(x)
    if abs(x - r) <= 1e-12 * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def concentration_sample_size(u_plus: int, epsilon: float, delta: float) -> int:
    """Smallest ``k`` with ``k >= 2|U+| / (epsilon delta^2)``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if epsilon <= 0 or u_plus < 1:
        raise ValueError("need epsilon > 0 and u_plus >= 1")
    return _ceil(2 * u_plus / (epsilon * delta**2))


def mle_sample_size(u_plus: int, epsilon: float, d: float) -> int:
    """Samples guaranteeing MLE success ``>= 1 - epsilon`` when ``d_(a,theta) >= d``.

    ``k = ceil(c1 |U+| / (epsilon d^4))`` with ``c1 = 2 / (2 - sqrt 3)^2``.
    """
    if not 0 < d <= 2:
        raise ValueError("d must lie in (0, 2]")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if u_plus < 1:
        raise ValueError("u_plus must be >= 1")
    return _ceil(C1 * u_plus / (epsilon * d**4))


def estimate_d(F: ParamFamily, p: ParamPoint, resolution: int) -> float:
    """Grid upper bound on ``inf`` variational distance from ``p`` to every rival class."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    F.check_class(p.cls)
    target = F.point(p.cls, p.theta).probs
    best = math.inf
    for b in F.classes:
        if b == p.cls:
            continue
        _, P = F.grid_matrix(b, resolution)
        if P.shape[0] == 0:
            raise ValueError(f"class {b!r} has an empty grid")
        best = min(best, float(np.abs(P - target[None, :]).sum(axis=1).min()))
    return best


def exact_d(F: "GridFamily", p: ParamPoint) -> float:
    """Exact ``d_(a,theta)`` for a finite family (enumeration over all rival points)."""
    target = F.point(p.cls, p.theta)
    return min(
        variational_distance(target, F.point(b, t))
        for b in F.classes
        if b != p.cls
        for t in F.thetas(b)
    )


# ----------------------------------------------------------- grid family


class GridFamily(ParamFamily):
    """Finite family: each class carries explicitly listed distributions."""

    def __init__(self, codomain: Sequence, classes: Mapping[str, Mapping[str, Sequence[float]]]):
        self.codomain = _labels(codomain)
        self.classes = _labels(classes.keys())
        self._points: dict[str, dict[str, Dist]] = {}
        self._mats: dict[str, tuple[list[str], np.ndarray]] = {}
        for a, pts in classes.items():
            if not pts:
                raise ValueError(f"class {a!r} has an empty parameter set")
            d = {str(t): make_dist(self.codomain, probs) for t, probs in pts.items()}
            self._points[str(a)] = d
            self._mats[str(a)] = (list(d), np.vstack([x.probs for x in d.values()]))

    @classmethod
    def from_random_fn(cls, xi) -> "GridFamily":
        """Singleton parameter sets: the non-parametric case."""
        return cls(xi.codomain, {a: {"*": xi.matrix[i]} for i, a in enumerate(xi.domain)})

    def thetas(self, cls: str) -> list[str]:
        self.check_class(cls)
        return list(self._points[cls])

    def point(self, cls: str, theta) -> Dist:
        self.check_class(cls)
        try:
            return self._points[cls][str(theta)]
        except KeyError:
            raise LabelError(f"unknown parameter {theta!r} for class {cls!r}") from None

    def sup_log_likelihood(self, cls: str, counts: Counts) -> tuple[float, bool]:
        self.check_class(cls)
        return float(_loglik_rows(self._mats[cls][1], counts.counts).max()), True

    def grid(self, cls: str, resolution: int) -> list[tuple[Any, Dist]]:
        self.check_class(cls)
        return list(self._points[cls].items())

    def grid_matrix(self, cls: str, resolution: int):
        self.check_class(cls)
        return self._mats[cls]

    def descriptor(self) -> dict:
        return {
            "type": "grid",
            "codomain": list(self.codomain),
            "classes": {
                a: {t: [float(x) for x in d.probs] for t, d in pts.items()} for a, pts in self._points.items()
            },
        }
