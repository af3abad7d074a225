"""Seeded Monte Carlo estimates of return and MLE success probabilities.

Trial ``t`` of an experiment with master seed ``s`` draws everything from
``RngStream(s, t)``, so counts do not depend on how trials are split across
workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Callable

import numpy as np

from . import __version__, kernels
from .core import Counts, RandomFn, RngStream, cdf_of
from .inversion import _check_inverter
from .parametric import ParamFamily, ParamPoint, parametric_mle

CSV_HEADER = ("success", "trials", "estimate", "wilson_low", "wilson_high", "seed", "k")


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    n = trials
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == trials else min(1.0, centre + half)
    return min(low, phat), max(high, phat)


@dataclass
class Report:
    successes: int
    trials: int
    estimate: float
    wilson_low: float
    wilson_high: float
    seed: int
    k: int
    config: dict = field(default_factory=dict)
    runtime: float | None = None
    version: str = __version__

    @classmethod
    def from_counts(cls, successes: int, trials: int, seed: int, k: int, config: dict | None = None,
                    runtime: float | None = None, confidence: float = 0.95) -> "Report":
        lo, hi = wilson_interval(successes, trials, confidence)
        return cls(int(successes), int(trials), successes / trials, lo, hi, int(seed), int(k),
                   dict(config or {}), runtime)

    def to_json(self, include_runtime: bool = True) -> dict:
        out = asdict(self)
        if not include_runtime:
            out.pop("runtime")
        return out


def format_report(r: Report, fmt: str = "json", include_runtime: bool = True) -> str:
    if fmt == "json":
        return json.dumps(r.to_json(include_runtime), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerow([r.successes, r.trials, f"{r.estimate:.17g}", f"{r.wilson_low:.17g}",
                    f"{r.wilson_high:.17g}", r.seed, r.k])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(r: Report, fmt: str, path, include_runtime: bool = True) -> None:
    path = Path(path)
    try:
        path.write_text(format_report(r, fmt, include_runtime), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report(path, fmt: str | None = None) -> Report:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "json")
    text = path.read_text(encoding="utf-8")
    if fmt == "json":
        return Report(**json.loads(text))
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {rows[0]}")
    s, n, est, lo, hi, seed, k = rows[1]
    return Report(int(s), int(n), float(est), float(lo), float(hi), int(seed), int(k))


# -------------------------------------------------------------- experiments


def run_return_experiment(xi: RandomFn, gamma: RandomFn, a: str, trials: int, seed: int,
                          config: dict | None = None) -> Report:
    """Per trial: ``u ~ xi_a``, then ``a_hat ~ gamma_u``; counts ``a_hat == a``."""
    _check_inverter(xi, gamma)
    ia = xi.index(a)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t0 = time.perf_counter()
    U = kernels.stream_uniforms(seed, 0, trials, 2)
    us = kernels.lookup(cdf_of(xi.matrix[ia]), U[:, 0])
    cdf_g = np.cumsum(gamma.matrix, axis=1)
    hits = 0
    for u in np.unique(us):
        sel = us == u
        hits += int((kernels.lookup(cdf_g[u], U[sel, 1]) == ia).sum())
    cfg = {"kind": "return", "truth": a, "trials": trials, "seed": seed, "k": 1}
    cfg.update(config or {})
    return Report.from_counts(hits, trials, seed, 1, cfg, time.perf_counter() - t0)


Classifier = Callable[[Counts, RngStream], str]


def _mle_classifier(F: ParamFamily) -> Classifier:
    return lambda counts, rng: parametric_mle(F, counts, rng)


def _run_trials(F: ParamFamily, truth: ParamPoint, k: int, seed: int, start: int, stop: int,
                estimator: str | Classifier) -> int:
    p = F.point(truth.cls, truth.theta)
    cdf = cdf_of(p.probs)
    if estimator == "mle":
        classify = _mle_classifier(F)
    elif estimator in ("majority", "pedestrian"):
        from .models import trig_majority

        classify = lambda counts, rng: trig_majority(counts)  # noqa: E731
    elif callable(estimator):
        classify = estimator
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    hits = 0
    for t in range(start, stop):
        rng = RngStream(seed, t)
        counts = Counts(F.codomain, rng.categorical_counts(cdf, k))
        hits += classify(counts, rng) == truth.cls
    return hits


def _chunks(trials: int, workers: int) -> list[tuple[int, int]]:
    step = math.ceil(trials / workers)
    return [(s, min(trials, s + step)) for s in range(0, trials, step)]


def run_mle_experiment(F: ParamFamily, truth: ParamPoint, k: int, trials: int, seed: int,
                       workers: int = 1, estimator: str | Classifier = "mle",
                       config: dict | None = None) -> Report:
    """Estimate ``P[estimator returns truth.cls]`` from ``k`` draws of ``(truth.cls, truth.theta)``."""
    if k < 1 or trials < 1:
        raise ValueError("k and trials must be >= 1")
    F.check_class(truth.cls)
    F.point(truth.cls, truth.theta)
    t0 = time.perf_counter()
    if workers <= 1 or trials < 2:
        hits = _run_trials(F, truth, k, seed, 0, trials, estimator)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_run_trials, F, truth, k, seed, a, b, estimator)
                    for a, b in _chunks(trials, workers)]
            hits = sum(f.result() for f in futs)
    cfg = {"kind": "mle", "family": F.descriptor(), "truth": {"class": truth.cls, "theta": _jsonable(truth.theta)},
           "estimator": estimator if isinstance(estimator, str) else "custom",
           "trials": trials, "seed": seed, "k": k}
    cfg.update(config or {})
    return Report.from_counts(hits, trials, seed, k, cfg, time.perf_counter() - t0)


def _jsonable(theta):
    if hasattr(theta, "pendant"):
        return {"pendant": list(theta.pendant), "central": theta.central}
    if isinstance(theta, (tuple, list, np.ndarray)):
        return [_jsonable(t) for t in theta]
    if isinstance(theta, (np.floating, np.integer)):
        return theta.item()
    return theta
