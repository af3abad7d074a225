"""Non-parametric inverters and invertibility.

An inverter ``Gamma: U -> A`` is itself a :class:`~randinv.core.RandomFn`
whose matrix ``G[u, a] = P[gamma_u = a]``.  ``Gamma`` and ``Xi`` are always
independent, so every quantity here is a function of ``X @ G``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    LabelError,
    RandomFn,
    RngStream,
    _readonly,
    cdf_of,
    compose,
    make_random_fn,
)
from .lp import LPError, simplex

SEPARATION_TOL = 1e-12
RANK_TOL = 1e-9


def _check_inverter(xi: RandomFn, gamma: RandomFn) -> None:
    if gamma.domain != xi.codomain or gamma.codomain != xi.domain:
        raise LabelError("inverter must map the codomain of Xi back onto its domain")


def _weights(xi: RandomFn, w) -> np.ndarray:
    if w is None:
        return np.ones(len(xi.domain))
    if isinstance(w, Mapping):
        w = [w[a] for a in xi.domain]
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (len(xi.domain),):
        raise ValueError("weight function must be defined on all of A")
    if np.any(~(w > 0)):
        raise ValueError("weights must be strictly positive")
    return w


def map_estimator(xi: RandomFn, w=None, ties: str = "uniform", rel_tol: float = 1e-12) -> RandomFn:
    """Maximum a posteriori inverter; constant ``w`` gives the MLE.

    Row ``u`` of the result is uniform over ``argmax_a P[xi_a = u] w(a)``
    (``ties="uniform"``) or puts all mass on the first maximiser
    (``ties="first"``, useful for reproducible tests).
    """
    if ties not in ("uniform", "first"):
        raise ValueError("ties must be 'uniform' or 'first'")
    wv = _weights(xi, w)
    score = xi.matrix.T * wv[None, :]  # |U| x |A|
    best = score.max(axis=1, keepdims=True)
    is_max = score >= best - rel_tol * np.maximum(best, 1e-300)
    if ties == "first":
        first = np.argmax(is_max, axis=1)
        is_max = np.zeros_like(is_max)
        is_max[np.arange(len(first)), first] = True
    G = is_max / is_max.sum(axis=1, keepdims=True)
    return make_random_fn(xi.codomain, xi.domain, G)


def return_probabilities(xi: RandomFn, gamma: RandomFn) -> dict[str, float]:
    _check_inverter(xi, gamma)
    r = np.einsum("au,ua->a", xi.matrix, gamma.matrix)
    return dict(zip(xi.domain, map(float, r)))


def pairwise_distances(xi: RandomFn) -> np.ndarray:
    X = xi.matrix
    return np.abs(X[:, None, :] - X[None, :, :]).sum(axis=2)


def separates(xi: RandomFn, tol: float = SEPARATION_TOL) -> tuple[bool, float]:
    """Whether all pairwise variational distances exceed ``tol``; also the minimum."""
    n = len(xi.domain)
    if n < 2:
        raise ValueError("separation needs |A| >= 2")
    D = pairwise_distances(xi)
    dmin = float(D[~np.eye(n, dtype=bool)].min())
    return dmin > tol, dmin


@dataclass
class InverterReport:
    inverter: RandomFn
    r: dict[str, float]
    margins: dict[tuple[str, str], float]
    I1: bool
    I2: bool
    scale: float | None = None
    unscaled_margins: dict[tuple[str, str], float] | None = None

    @property
    def invertible(self) -> bool:
        return all(m > 0 for m in self.margins.values())

    @property
    def min_margin(self) -> float:
        return min(self.margins.values())

    def margins_for(self, a: str) -> dict[str, float]:
        return {x: m for (b, x), m in self.margins.items() if b == a}

    def to_json(self) -> dict:
        out = {
            "invertible": self.invertible,
            "r": self.r,
            "margins": {f"{a}->{x}": m for (a, x), m in self.margins.items()},
            "min_margin": self.min_margin,
            "I1": self.I1,
            "I2": self.I2,
            "inverter": {
                "domain": list(self.inverter.domain),
                "codomain": list(self.inverter.codomain),
                "matrix": self.inverter.matrix.tolist(),
            },
        }
        if self.scale is not None:
            out["scale"] = self.scale
            out["unscaled_margins"] = {f"{a}->{x}": m for (a, x), m in self.unscaled_margins.items()}
        return out


def check_invertibility(xi: RandomFn, gamma: RandomFn) -> InverterReport:
    """Margins ``P[gamma(xi_a) = a] - P[gamma(xi_a) = x]`` and the (I1)/(I2) flags.

    ``Xi`` is invertible by ``Gamma`` iff every margin is strictly positive.
    """
    _check_inverter(xi, gamma)
    C = xi.matrix @ gamma.matrix  # C[a, x] = P[gamma(xi_a) = x]
    n = len(xi.domain)
    margins = {}
    for i, a in enumerate(xi.domain):
        for j, x in enumerate(xi.domain):
            if i != j:
                margins[(a, x)] = float(C[i, i] - C[i, j])
    off = C[~np.eye(n, dtype=bool)]
    return InverterReport(
        inverter=gamma,
        r=dict(zip(xi.domain, map(float, np.diag(C)))),
        margins=margins,
        I1=bool(np.all(np.diag(C) > 1.0 / n)),
        I2=bool(np.all(off < 1.0 / n)) if off.size else True,
    )


def strict_inverter(xi: RandomFn) -> InverterReport:
    """Explicit inverter for a separating ``Xi``.

    With ``e_i = a_i / |a_i|`` (rows normalised in the euclidean norm) the
    columns of ``V`` are ``e_i - mean_j e_j`` and ``G = eps V + J / |A|``.
    ``V`` alone may have entries that make ``G`` negative, so it is scaled by
    ``eps = min(1, (1/|A|) / max|V|) / 2``; margins scale by the same ``eps``.
    The margin for ``(i, j)`` is ``eps (|a_i| - a_i . a_j / |a_j|)``.
    """
    ok, dmin = separates(xi)
    if not ok:
        raise ValueError(f"Xi does not separate A (min distance {dmin:g})")
    X = xi.matrix
    n = X.shape[0]
    norms = np.linalg.norm(X, axis=1)
    E = X / norms[:, None]
    V = (E - E.mean(axis=0)).T  # |U| x |A|, column i is v_i
    vmax = float(np.abs(V).max())
    eps = 0.5 * min(1.0, (1.0 / n) / vmax) if vmax > 0 else 0.5
    G = eps * V + 1.0 / n
    G = np.clip(G, 0.0, None)
    G = G / G.sum(axis=1, keepdims=True)
    gamma = RandomFn(xi.codomain, xi.domain, _readonly(G))
    rep = check_invertibility(xi, gamma)
    dots = X @ E.T  # dots[i, j] = a_i . a_j / |a_j|
    rep.scale = eps
    rep.unscaled_margins = {
        (a, b): float(norms[i] - dots[i, j])
        for i, a in enumerate(xi.domain)
        for j, b in enumerate(xi.domain)
        if i != j
    }
    return rep


@dataclass
class MinimaxResult:
    inverter: RandomFn
    value: float
    mu: dict[str, float]
    dual_value: float
    duality_gap: float
    r: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "dual_value": self.dual_value,
            "duality_gap": self.duality_gap,
            "mu": self.mu,
            "r": self.r,
            "inverter": {
                "domain": list(self.inverter.domain),
                "codomain": list(self.inverter.codomain),
                "matrix": self.inverter.matrix.tolist(),
            },
        }


def minimax_inverter(xi: RandomFn) -> MinimaxResult:
    """Inverter maximising ``min_a r_a``, with its least favourable prior.

    Primal: ``max z`` s.t. ``sum_u X[a,u] G[u,a] >= z`` for all ``a`` and the
    rows of ``G`` stochastic.  Dual: ``min sum_u t_u`` s.t.
    ``t_u >= mu(a) X[a,u]`` with ``mu`` a distribution on ``A``.
    """
    X = xi.matrix
    na, nu = X.shape
    nv = nu * na  # G[u, a] -> column u * na + a, then z
    c = np.zeros(nv + 1)
    c[-1] = -1.0
    A_ub = np.zeros((na, nv + 1))
    for a in range(na):
        A_ub[a, a : nv : na] = -X[a]
        A_ub[a, -1] = 1.0
    A_eq = np.zeros((nu, nv + 1))
    for u in range(nu):
        A_eq[u, u * na : (u + 1) * na] = 1.0
    try:
        primal = simplex(c, A_ub, np.zeros(na), A_eq, np.ones(nu))
    except LPError as exc:
        raise LPError(f"minimax primal failed: {exc}") from exc

    # dual variables: mu (na) then t (nu)
    cd = np.concatenate([np.zeros(na), np.ones(nu)])
    Ad = np.zeros((na * nu, na + nu))
    for a in range(na):
        for u in range(nu):
            Ad[a * nu + u, a] = X[a, u]
            Ad[a * nu + u, na + u] = -1.0
    Aeq_d = np.concatenate([np.ones(na), np.zeros(nu)])[None, :]
    try:
        dual = simplex(cd, Ad, np.zeros(na * nu), Aeq_d, np.ones(1))
    except LPError as exc:
        raise LPError(f"minimax dual failed: {exc}") from exc

    G = np.clip(primal.x[:nv].reshape(nu, na), 0.0, None)
    G = G / G.sum(axis=1, keepdims=True)
    gamma = RandomFn(xi.codomain, xi.domain, _readonly(G))
    value = -primal.fun
    mu = np.clip(dual.x[:na], 0.0, None)
    mu = mu / mu.sum()
    return MinimaxResult(
        inverter=gamma,
        value=float(value),
        mu=dict(zip(xi.domain, map(float, mu))),
        dual_value=float(dual.fun),
        duality_gap=float(abs(value - dual.fun)),
        r=return_probabilities(xi, gamma),
    )


def least_favorable_objective(xi: RandomFn, mu: Sequence[float]) -> float:
    """``sum_u max_a mu(a) P[xi_a = u]``."""
    mu = np.asarray(mu, dtype=np.float64)
    return float((mu[:, None] * xi.matrix).max(axis=0).sum())


def minimax_lower_bound(xi: RandomFn, variant: str = "conservative") -> float:
    """Worst-case return guarantee ``1/|A| + C min_a sum_b d(a, b)``.

    ``variant="stated"`` uses ``C = 1 / (2|A|(|A|-1))``; ``"conservative"``
    uses ``C = 1 / (4|A|(|A|-1))``, which the pairwise averaging argument
    supports.  The larger constant is not a valid bound: the two-point
    function with rows ``(1, 0)`` and ``(2/3, 1/3)`` has minimax value 3/5
    but a stated bound of 2/3.
    """
    n = len(xi.domain)
    if n < 2:
        raise ValueError("bound needs |A| >= 2")
    denom = {"stated": 2.0, "conservative": 4.0}.get(variant)
    if denom is None:
        raise ValueError("variant must be 'stated' or 'conservative'")
    s = float(pairwise_distances(xi).sum(axis=1).min())
    return 1.0 / n + s / (denom * n * (n - 1))


def spread_gap(b: Sequence[float]) -> tuple[float, float]:
    """``(sum_{i<j} |b_i - b_j|, max_j (b_j - mean b))``."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] < 2:
        raise ValueError("need at least two numbers")
    i, j = np.triu_indices(b.shape[0], k=1)
    return float(np.abs(b[i] - b[j]).sum()), float((b - b.mean()).max())


# ------------------------------------------------------- composition rank


@dataclass
class RankTestResult:
    full: bool
    rank: int
    null_vector: np.ndarray | None
    labels: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "full": self.full,
            "rank": self.rank,
            "null_vector": None if self.null_vector is None else self.null_vector.tolist(),
            "labels": list(self.labels),
        }


def rref(M: np.ndarray, tol: float = RANK_TOL) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form by partially pivoted elimination."""
    R = np.array(M, dtype=np.float64)
    rows, cols = R.shape
    pivots: list[int] = []
    r = 0
    for j in range(cols):
        if r >= rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, j])))
        if abs(R[p, j]) <= tol:
            R[r:, j] = 0.0
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, j]
        for i in range(rows):
            if i != r:
                R[i] -= R[i, j] * R[r]
        pivots.append(j)
        r += 1
    return R, pivots


def extended_matrix(upsilon: RandomFn) -> np.ndarray:
    """Coefficient matrix of the system ``sum_u P[ups_u = z] x_u = 0``, ``sum_u x_u = 0``."""
    Y = upsilon.matrix
    return np.vstack([Y.T, np.ones((1, Y.shape[0]))])


def composition_rank_test(upsilon: RandomFn, tol: float = RANK_TOL) -> RankTestResult:
    """Rank of ``Y`` extended by an all-ones row, with a null vector when deficient.

    Full rank (``= |U|``) means ``Upsilon o Xi`` separates whenever ``Xi`` does.
    The null vector is normalised to max-abs 1 with a positive first nonzero entry.
    """
    M = extended_matrix(upsilon)
    nu = M.shape[1]
    R, pivots = rref(M, tol)
    rank = len(pivots)
    if rank == nu:
        return RankTestResult(True, rank, None, upsilon.domain)
    free = next(j for j in range(nu) if j not in pivots)
    x = np.zeros(nu)
    x[free] = 1.0
    for r, j in enumerate(pivots):
        x[j] = -R[r, free]
    x /= np.abs(x).max()
    first = x[np.flatnonzero(np.abs(x) > tol)[0]]
    if first < 0:
        x = -x
    return RankTestResult(False, rank, x, upsilon.domain)


def composition_counterexample(upsilon: RandomFn, x, tol: float = RANK_TOL) -> RandomFn:
    """Two-point ``Xi`` that separates but whose composition with ``Upsilon`` does not.

    ``xi_a`` is the normalised positive part of ``x`` and ``xi_b`` the
    normalised negative part.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (len(upsilon.domain),):
        raise ValueError("null vector must be indexed by the domain of Upsilon")
    resid = extended_matrix(upsilon) @ x
    if np.abs(x).max() <= tol:
        raise ValueError("null vector is trivial")
    if np.abs(resid).max() > tol:
        raise ValueError(f"x does not solve the homogeneous system (residual {np.abs(resid).max():g})")
    pos = np.where(x > 0, x, 0.0)
    neg = np.where(x < 0, -x, 0.0)
    P, N = pos.sum(), neg.sum()
    if P <= tol or N <= tol:
        raise ValueError("x must have both positive and negative entries")
    return make_random_fn(("a", "b"), upsilon.domain, np.vstack([pos / P, neg / N]))


# ---------------------------------------------------------- amplification


@dataclass
class AmplifyResult:
    probability: float
    exact: bool
    m: int
    trials: int = 0


def _plurality_exact(q: np.ndarray, target: int, m: int) -> float:
    """P[target wins a plurality vote of ``m`` iid draws from ``q``], ties uniform."""
    n = q.shape[0]
    logq = np.log(np.where(q > 0, q, 1.0))
    total = 0.0
    lf = [math.lgamma(i + 1) for i in range(m + 1)]
    for comp in _compositions(m, n):
        c = np.asarray(comp)
        if np.any((q == 0) & (c > 0)):
            continue
        top = c.max()
        if c[target] != top:
            continue
        ties = int((c == top).sum())
        logp = lf[m] - sum(lf[ci] for ci in comp) + float((c * logq).sum())
        total += math.exp(logp) / ties
    return total


def _compositions(m: int, n: int):
    for bars in itertools.combinations(range(m + n - 1), n - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(m + n - 1 - prev - 1)
        yield out


def amplify(
    xi: RandomFn,
    gamma: RandomFn,
    m: int,
    a: str,
    rng: RngStream | None = None,
    exact_cap: int = 2_000_000,
    trials: int = 20000,
) -> AmplifyResult:
    """Success probability of the plurality vote over ``m`` independent ``gamma(xi_a)``.

    Exact (multinomial enumeration) when the number of vote profiles is at
    most ``exact_cap``; otherwise Monte Carlo with ``trials`` runs on ``rng``.
    Requires every margin of ``a`` under ``gamma`` to be positive.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rep = check_invertibility(xi, gamma)
    ia = xi.index(a)
    bad = {x: v for x, v in rep.margins_for(a).items() if not v > 0}
    if bad:
        raise ValueError(f"gamma does not invert {a!r}: margins {bad}")
    q = compose(xi, gamma).matrix[ia]
    n = q.shape[0]
    if math.comb(m + n - 1, n - 1) <= exact_cap:
        return AmplifyResult(_plurality_exact(q, ia, m), True, m)
    if rng is None:
        raise ValueError("Monte Carlo amplification needs an RngStream")
    cdf_x = cdf_of(xi.matrix[ia])
    cdf_g = np.cumsum(gamma.matrix, axis=1)
    wins = 0.0
    for _ in range(trials):
        us = rng.categorical(cdf_x, m)
        votes = np.array([rng.categorical(cdf_g[u], 1)[0] for u in us])
        c = np.bincount(votes, minlength=n)
        top = c.max()
        if c[ia] == top:
            tied = np.flatnonzero(c == top)
            wins += 1.0 if rng.choice(tied) == ia else 0.0
    return AmplifyResult(wins / trials, False, m, trials)
