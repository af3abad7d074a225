"""Ready-made parametric families.

* :class:`LinearFamily` - one fixed class against a class with a simplex of
  parameters; MLE needs a sample size linear in the support size.
* :class:`TrigFamily` - two classes whose rival distance vanishes at the
  interval endpoints, yet MLE still beats a coin flip.
* :class:`CFNFamily` - the two-state symmetric (CFN) model on the three
  unrooted binary trees with four leaves.
"""

from __future__ import annotations

import itertools
import math
import re
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import kernels
from .core import Counts, Dist, LabelError, _dist_unchecked, make_dist
from .parametric import GridFamily, ParamFamily, ParamPoint, _loglik_rows

# ----------------------------------------------------------- linear family


def linear_check_delta(delta: float) -> bool:
    """Whether ``2 (1 - 2 delta)^(delta / 2) > 1``."""
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    return 2.0 * (1.0 - 2.0 * delta) ** (delta / 2.0) > 1.0


class LinearFamily(ParamFamily):
    """Classes ``a`` (single point ``*``) and ``b`` (simplex over ``1..n``).

    ``(a, *)``: mass ``delta`` at 0 and ``(1 - delta)/n`` on each of ``1..n``.
    ``(b, lam)``: mass ``2 delta`` at 0 and ``lam_u (1 - 2 delta)`` at ``u``.
    """

    classes = ("a", "b")

    def __init__(self, n: int, delta: float):
        if n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        self.n = int(n)
        self.delta = float(delta)
        self.codomain = tuple(str(u) for u in range(self.n + 1))

    def point(self, cls: str, theta=None) -> Dist:
        self.check_class(cls)
        n, d = self.n, self.delta
        if cls == "a":
            if theta not in (None, "*"):
                raise LabelError("class 'a' has the single parameter '*'")
            return _dist_unchecked(self.codomain, np.concatenate([[d], np.full(n, (1 - d) / n)]))
        lam = np.asarray(theta, dtype=np.float64)
        if lam.shape != (n,):
            raise ValueError(f"class 'b' parameter must have length {n}")
        return make_dist(self.codomain, np.concatenate([[2 * d], lam * (1 - 2 * d)]))

    def sup_log_likelihood(self, cls: str, counts: Counts) -> tuple[float, bool]:
        self.check_class(cls)
        self.check_counts(counts)
        c = counts.counts
        k = c.sum()
        x = c[0]
        d = self.delta
        if cls == "a":
            return (x * math.log(d) + (k - x) * math.log((1 - d) / self.n)) / k, True
        # the maximising lambda puts mass c_u / (k - x) on each observed u
        rest = c[1:][c[1:] > 0]
        val = x * math.log(2 * d)
        if k > x:
            val += float((rest * np.log(rest / (k - x) * (1 - 2 * d))).sum())
        return val / k, True

    def grid(self, cls: str, resolution: int) -> list[tuple[Any, Dist]]:
        thetas, P = self.grid_matrix(cls, resolution)
        return [(t, _dist_unchecked(self.codomain, row)) for t, row in zip(thetas, P)]

    def grid_matrix(self, cls: str, resolution: int):
        """Class ``b``: segments from the uniform lambda towards each vertex, dyadic steps."""
        self.check_class(cls)
        if cls == "a":
            return ["*"], self.point("a").probs[None, :]
        n, d = self.n, self.delta
        steps = [j / 2**resolution for j in range(2**resolution + 1)]
        uni = np.full(n, 1.0 / n)
        thetas, rows = [], []
        for s in steps:
            verts = range(n) if s > 0 else [0]
            for i in verts:
                lam = (1 - s) * uni
                lam[i] += s
                thetas.append(("seg", i, s) if s > 0 else ("uniform",))
                rows.append(np.concatenate([[2 * d], lam * (1 - 2 * d)]))
        return thetas, np.vstack(rows)

    def descriptor(self) -> dict:
        return {"type": "linear31", "n": self.n, "delta": self.delta}


def linear_sup_log_likelihoods(fam: LinearFamily, sequence: Sequence[int]) -> tuple[float, float]:
    """``(log L1, log L2_lower)`` for an observed sequence over ``{0..n}``.

    ``L1`` is the exact class-``a`` likelihood and ``L2_lower`` the explicit
    class-``b`` lower bound obtained from uniform ``lambda`` on the observed
    nonzero outcomes.  Log form avoids underflow for long sequences.
    """
    seq = list(sequence)
    k = len(seq)
    if k > fam.n:
        raise ValueError("the construction assumes k <= n")
    x = sum(1 for u in seq if int(u) == 0)
    d, n = fam.delta, fam.n
    log_l1 = x * math.log(d) + (k - x) * math.log((1 - d) / n) if k else 0.0
    log_l2 = x * math.log(2 * d)
    if k > x:
        log_l2 += (k - x) * math.log((1 - 2 * d) / (k - x))
    return log_l1, log_l2


def linear_sup_likelihoods(fam: LinearFamily, sequence: Sequence[int]) -> tuple[float, float]:
    """``(L1, L2_lower)``; may underflow to 0 for long sequences."""
    l1, l2 = linear_sup_log_likelihoods(fam, sequence)
    return math.exp(l1), math.exp(l2)


def linear_ratio_floor(delta: float, rho: float) -> float:
    """``2 (1 - 2 delta)^(1 - rho)``: lower bound on the per-sample ratio when ``k <= n/2``."""
    return 2.0 * (1.0 - 2.0 * delta) ** (1.0 - rho)


# ------------------------------------------------------------- trig family

TRIG_CODOMAIN = ("(1,0)", "(1,1)", "(2,0)", "(2,1)")
_Q = math.pi / 4

# reachable range of P[first coordinate = 1] per (class, j): (lo, hi, lo_closed, hi_closed)
_TRIG_RANGE = {
    ("a1", 0): (0.5, 1.0, True, False),
    ("a1", 1): (0.5, 1.0, False, True),
    ("a2", 0): (0.0, 0.5, False, False),
    ("a2", 1): (0.0, 0.5, True, True),
}


def _trig_j(t: float) -> int:
    return int(math.floor(2.0 * t / math.pi))


class TrigFamily(ParamFamily):
    """``Theta(a1) = [pi/4, 3pi/4)``, ``Theta(a2) = (pi/4, 3pi/4]``.

    ``(a1, t)`` puts ``sin^2 t`` on ``(1, j)`` and ``cos^2 t`` on ``(2, j)``
    with ``j = floor(2t/pi)``; ``(a2, t)`` swaps ``sin`` and ``cos``.
    """

    classes = ("a1", "a2")
    codomain = TRIG_CODOMAIN

    def check_theta(self, cls: str, t: float) -> None:
        self.check_class(cls)
        lo_ok = t >= _Q if cls == "a1" else t > _Q
        hi_ok = t < 3 * _Q if cls == "a1" else t <= 3 * _Q
        if not (lo_ok and hi_ok):
            raise ValueError(f"t = {t!r} is outside Theta({cls})")

    def point(self, cls: str, theta) -> Dist:
        t = float(parse_angle(theta))
        self.check_theta(cls, t)
        j = _trig_j(t)
        s, c = math.sin(t) ** 2, math.cos(t) ** 2
        q1 = s if cls == "a1" else c
        probs = np.zeros(4)
        probs[j] = q1  # (1, j)
        probs[2 + j] = c if cls == "a1" else s  # (2, j)
        return _dist_unchecked(self.codomain, probs)

    def sup_log_likelihood(self, cls: str, counts: Counts) -> tuple[float, bool]:
        self.check_class(cls)
        self.check_counts(counts)
        c = counts.counts
        k = c.sum()
        if (c[0] + c[2]) > 0 and (c[1] + c[3]) > 0:
            return -math.inf, True
        j = 0 if (c[1] + c[3]) == 0 else 1
        n1, n2 = int(c[j]), int(c[2 + j])
        lo, hi, lo_closed, hi_closed = _TRIG_RANGE[(cls, j)]
        q = n1 / (n1 + n2)
        attained = True
        if q < lo or (q == lo and not lo_closed):
            q, attained = lo, lo_closed
        elif q > hi or (q == hi and not hi_closed):
            q, attained = hi, hi_closed
        val = 0.0
        if n1:
            val += n1 * math.log(q) if q > 0 else -math.inf
        if n2:
            val += n2 * math.log(1 - q) if q < 1 else -math.inf
        return val / k, attained

    def grid(self, cls: str, resolution: int) -> list[tuple[Any, Dist]]:
        self.check_class(cls)
        m = 2**resolution
        js = range(0, m) if cls == "a1" else range(1, m + 1)
        ts = [_Q + (math.pi / 2) * j / m for j in js]
        return [(t, self.point(cls, t)) for t in ts]

    def descriptor(self) -> dict:
        return {"type": "trig32"}


def trig_majority(counts: Counts, j: int | None = None) -> str:
    """Majority of first coordinates; a tie goes to ``a1`` when ``j = 0`` else ``a2``."""
    if counts.labels != TRIG_CODOMAIN:
        raise LabelError("counts must be over the trig codomain")
    c = counts.counts
    seen = {jj for jj in (0, 1) if c[jj] + c[2 + jj] > 0}
    if len(seen) > 1:
        raise ValueError("observed second coordinates are mixed")
    obs_j = seen.pop() if seen else (j or 0)
    if j is not None and j != obs_j:
        raise ValueError(f"observed second coordinate {obs_j} differs from j={j}")
    ones, twos = c[obs_j], c[2 + obs_j]
    if ones > twos:
        return "a1"
    if twos > ones:
        return "a2"
    return "a1" if obs_j == 0 else "a2"


def trig_tie_probability(k: int) -> float:
    """``C(k, k/2) 2^-k``: probability of equal first-coordinate counts at an endpoint."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k % 2:
        warnings.warn("tie probability is 0 for odd k", stacklevel=2)
        return 0.0
    return math.comb(k, k // 2) / 2.0**k


_ANGLE = re.compile(r"^\s*(?:(\d+(?:\.\d*)?)\s*\*?\s*)?pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(value) -> float:
    """Float, or strings such as ``"pi/4"``, ``"3*pi/4"``, ``"3pi/4"``."""
    if isinstance(value, (int, float, np.floating)):
        return float(value)
    m = _ANGLE.match(str(value))
    if not m:
        return float(value)
    num = float(m.group(1)) if m.group(1) else 1.0
    den = float(m.group(2)) if m.group(2) else 1.0
    return num * math.pi / den


# --------------------------------------------------------------- CFN model

TOPOLOGIES = ("12|34", "13|24", "14|23")
PATTERNS = tuple(format(i, "04b") for i in range(16))


@dataclass(frozen=True)
class EdgeProbs:
    """Substitution probabilities: pendant edges by leaf 1..4, then the central edge."""

    pendant: tuple[float, float, float, float]
    central: float

    def __post_init__(self):
        if len(self.pendant) != 4:
            raise ValueError("need four pendant probabilities")
        for v in (*self.pendant, self.central):
            if not 0.0 <= v <= 0.5:
                raise ValueError(f"substitution probability {v!r} outside [0, 0.5]")

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "EdgeProbs":
        return cls(tuple(float(x) for x in v[:4]), float(v[4]))

    def vector(self) -> np.ndarray:
        return np.array([*self.pendant, self.central], dtype=np.float64)


def topology_index(topology: str) -> int:
    try:
        return TOPOLOGIES.index(topology)
    except ValueError:
        raise LabelError(f"unknown topology {topology!r}; expected one of {TOPOLOGIES}") from None


def cfn_distribution(topology: str, p: EdgeProbs) -> Dist:
    """Distribution over the 16 site patterns (label bits in leaf order 1..4)."""
    probs = np.array(kernels.cfn_pattern_probs(topology_index(topology), p.vector()))
    return _dist_unchecked(PATTERNS, probs)


def cfn_check_P(p: EdgeProbs, f: float, g: float) -> bool:
    """Pendant probabilities ``<= g`` and central ``>= f``."""
    return all(v <= g for v in p.pendant) and p.central >= f


def cfn_patterns_batch(topology: int, P: np.ndarray) -> np.ndarray:
    """Vectorised pattern probabilities for many edge vectors (rows of ``P``)."""
    (x1, x2), (y1, y2) = kernels._kernels_py.CFN_SIDES[topology]
    bits = np.array([[(pat >> (3 - leaf)) & 1 for leaf in range(4)] for pat in range(16)])
    out = np.zeros((P.shape[0], 16))
    for sx, sy in itertools.product((0, 1), repeat=2):
        fc = P[:, 4] if sx != sy else 1.0 - P[:, 4]
        term = np.ones((P.shape[0], 16)) * fc[:, None]
        for leaf, s in ((x1, sx), (x2, sx), (y1, sy), (y2, sy)):
            diff = bits[:, leaf] != s
            pe = P[:, leaf][:, None]
            term = term * np.where(diff[None, :], pe, 1.0 - pe)
        out += term
    return 0.5 * out


class CFNFamily(ParamFamily):
    """CFN model on the three quartet topologies.

    The supremum of the likelihood over ``[0, 1/2]^5`` is found by a
    multistart search: the ``grid_resolution``-point lattice per edge, then
    coordinate ascent from the ``n_starts`` best lattice points.  The cube is
    closed, so suprema are reported as attained.  This is a heuristic for the
    global maximum.
    """

    classes = TOPOLOGIES
    codomain = PATTERNS

    def __init__(self, f: float | None = None, g: float | None = None, grid_resolution: int = 6, n_starts: int = 3):
        if grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if (f is None) != (g is None):
            raise ValueError("give both f and g or neither")
        self.f, self.g = f, g
        self.grid_resolution = int(grid_resolution)
        self.n_starts = int(n_starts)
        axis = np.linspace(0.0, 0.5, self.grid_resolution)
        self._start_pts = np.array(list(itertools.product(axis, repeat=5)))
        self._start_probs = [cfn_patterns_batch(t, self._start_pts) for t in range(3)]

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_start_probs")
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._start_probs = [cfn_patterns_batch(t, self._start_pts) for t in range(3)]

    def point(self, cls: str, theta) -> Dist:
        self.check_class(cls)
        if not isinstance(theta, EdgeProbs):
            theta = EdgeProbs.from_vector(theta)
        return cfn_distribution(cls, theta)

    def sup_with_argmax(self, cls: str, counts: Counts) -> tuple[float, np.ndarray]:
        self.check_class(cls)
        t = topology_index(cls)
        c = counts.counts.astype(np.float64)
        ll = _loglik_rows(self._start_probs[t], counts.counts)
        order = np.argsort(-ll, kind="stable")[: self.n_starts]
        best, arg = -math.inf, self._start_pts[order[0]]
        for i in order:
            val, p = kernels.cfn_coordinate_ascent(c, t, self._start_pts[i])
            if val > best:
                best, arg = val, p
        return float(best), np.asarray(arg)

    def sup_log_likelihood(self, cls: str, counts: Counts) -> tuple[float, bool]:
        self.check_counts(counts)
        return self.sup_with_argmax(cls, counts)[0], True

    def grid_matrix(self, cls: str, resolution: int):
        """Dyadic lattice with ``2^resolution + 1`` points per edge, filtered by (P) when set."""
        self.check_class(cls)
        axis = np.linspace(0.0, 0.5, 2**resolution + 1)
        pts = np.array(list(itertools.product(axis, repeat=5)))
        if self.f is not None:
            keep = np.all(pts[:, :4] <= self.g, axis=1) & (pts[:, 4] >= self.f)
            pts = pts[keep]
        P = cfn_patterns_batch(topology_index(cls), pts)
        return [EdgeProbs.from_vector(v) for v in pts], P

    def grid(self, cls: str, resolution: int) -> list[tuple[Any, Dist]]:
        thetas, P = self.grid_matrix(cls, resolution)
        return [(t, _dist_unchecked(self.codomain, row)) for t, row in zip(thetas, P)]

    def descriptor(self) -> dict:
        out = {"type": "cfn", "grid_resolution": self.grid_resolution}
        if self.f is not None:
            out.update(f=self.f, g=self.g)
        return out


def cfn_family(f: float | None = None, g: float | None = None, grid_resolution: int = 6) -> CFNFamily:
    return CFNFamily(f, g, grid_resolution)


def parse_cfn_instance(obj: dict) -> tuple[str, EdgeProbs]:
    """``{"topology": "12|34", "pendant": [...4...], "central": x}``."""
    topology_index(obj["topology"])
    return obj["topology"], EdgeProbs(tuple(float(v) for v in obj["pendant"]), float(obj["central"]))


def format_pattern_csv(p: Dist) -> str:
    lines = ["pattern,probability"]
    lines += [f"{lab},{float(q)!r}" for lab, q in zip(p.labels, p.probs)]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- descriptors


def family_from_descriptor(desc: dict) -> ParamFamily:
    kind = desc.get("type")
    if kind == "grid":
        return GridFamily(desc["codomain"], desc["classes"])
    if kind == "linear31":
        return LinearFamily(int(desc["n"]), float(desc["delta"]))
    if kind == "trig32":
        return TrigFamily()
    if kind == "cfn":
        return CFNFamily(desc.get("f"), desc.get("g"), int(desc.get("grid_resolution", 6)))
    raise ValueError(f"unknown family type {kind!r}")


def parse_truth(F: ParamFamily, obj) -> ParamPoint:
    """Truth as ``{"class": ..., "theta": ...}``; CFN also accepts an instance object."""
    if isinstance(F, CFNFamily) and isinstance(obj, dict) and "topology" in obj:
        top, p = parse_cfn_instance(obj)
        return ParamPoint(top, p)
    if isinstance(obj, str):
        obj = {"class": obj}
    cls = obj["class"]
    F.check_class(cls)
    theta = obj.get("theta")
    if isinstance(F, TrigFamily):
        theta = parse_angle(theta)
        F.check_theta(cls, theta)
    elif isinstance(F, LinearFamily):
        theta = "*" if cls == "a" else tuple(float(v) for v in theta)
    elif isinstance(F, CFNFamily):
        if isinstance(theta, dict):
            theta = EdgeProbs(tuple(float(v) for v in theta["pendant"]), float(theta["central"]))
        else:
            theta = EdgeProbs.from_vector(theta)
    elif isinstance(F, GridFamily):
        if theta is None:
            theta = F.thetas(cls)[0]
        theta = str(theta)
    F.point(cls, theta)
    return ParamPoint(cls, theta)
