"""``randinv`` command line.

Exit codes: 0 success, 1 malformed input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import compose, read_matrix_csv
from .inversion import (
    check_invertibility,
    composition_counterexample,
    composition_rank_test,
    map_estimator,
    minimax_inverter,
    separates,
    strict_inverter,
    minimax_lower_bound,
)
from .lp import LPError
from .models import (
    CFNFamily,
    LinearFamily,
    TrigFamily,
    cfn_distribution,
    family_from_descriptor,
    format_pattern_csv,
    linear_check_delta,
    linear_ratio_floor,
    linear_sup_log_likelihoods,
    parse_truth,
    trig_tie_probability,
)
from .parametric import (
    C1,
    ParamPoint,
    concentration_sample_size,
    estimate_d,
    mle_sample_size,
)
from .simulation import format_report, run_mle_experiment, run_return_experiment
from .models import EdgeProbs


class InputError(ValueError):
    pass


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


# ---------------------------------------------------------------- commands


def cmd_invert(args) -> None:
    xi = read_matrix_csv(args.matrix)
    ok, dmin = separates(xi)
    mle = check_invertibility(xi, map_estimator(xi))
    out = {"separates": ok, "min_distance": dmin, "map": mle.to_json()}
    if args.weights:
        w = [float(v) for v in args.weights.split(",")]
        out["map_weighted"] = check_invertibility(xi, map_estimator(xi, w)).to_json()
    out["strict"] = strict_inverter(xi).to_json() if ok else None
    _emit(args, _json(out))


def cmd_minimax(args) -> None:
    xi = read_matrix_csv(args.matrix)
    res = minimax_inverter(xi)
    rep = check_invertibility(xi, res.inverter)
    out = res.to_json()
    out["margins"] = {f"{a}->{x}": m for (a, x), m in rep.margins.items()}
    if len(xi.domain) >= 2:
        out["bounds"] = {v: minimax_lower_bound(xi, v) for v in ("stated", "conservative")}
    _emit(args, _json(out))


def cmd_bound(args) -> None:
    out = {"u_plus": args.uplus, "epsilon": args.epsilon, "c1": C1}
    if args.d is not None:
        out["d"] = args.d
        out["mle_sample_size"] = mle_sample_size(args.uplus, args.epsilon, args.d)
    if args.delta is not None:
        out["delta"] = args.delta
        out["concentration_sample_size"] = concentration_sample_size(args.uplus, args.epsilon, args.delta)
    if len(out) == 3:
        raise InputError("give --d and/or --delta")
    _emit(args, _json(out))


def cmd_compose_check(args) -> None:
    ups = read_matrix_csv(args.matrix)
    res = composition_rank_test(ups)
    out = res.to_json()
    out["u_size"] = len(ups.domain)
    if not res.full:
        xi = composition_counterexample(ups, res.null_vector)
        comp = compose(xi, ups).matrix
        out["counterexample"] = {
            "domain": list(xi.domain),
            "codomain": list(xi.codomain),
            "matrix": xi.matrix.tolist(),
            "separation": float(np.abs(xi.matrix[0] - xi.matrix[1]).sum()),
            "composed_row_difference": float(np.abs(comp[0] - comp[1]).max()),
        }
    _emit(args, _json(out))


def _resolve(base: Path, ref: str) -> Path:
    p = Path(ref)
    return p if p.is_absolute() else base / p


def run_config(cfg: dict, base: Path, workers: int | None = None):
    """Run an experiment config (see README for the schema) and return its Report."""
    try:
        seed = int(cfg["seed"])
        trials = int(cfg["trials"])
        k = int(cfg.get("k", 1))
        inst = cfg["instance"]
        estimator = cfg.get("estimator", "mle")
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad experiment config: {exc!r}") from None
    workers = int(cfg.get("workers", 1)) if workers is None else workers
    # worker count is an execution detail and must not change the report bytes
    echo = {key: v for key, v in cfg.items() if key != "workers"}
    if "matrix" in inst:
        xi = read_matrix_csv(_resolve(base, inst["matrix"]))
        a = str(cfg["truth"])
        if k == 1 and not (isinstance(estimator, str) and estimator in ("majority", "pedestrian")):
            gamma = _nonparametric_inverter(xi, estimator, base)
            return run_return_experiment(xi, gamma, a, trials, seed, config=echo)
        if estimator not in ("mle", "map"):
            raise InputError("k > 1 on a matrix instance supports only the mle estimator")
        from .parametric import GridFamily

        F = GridFamily.from_random_fn(xi)
        return run_mle_experiment(F, ParamPoint(a, "*"), k, trials, seed, workers, "mle", config=echo)
    if "family" in inst:
        F = family_from_descriptor(inst["family"])
        truth = parse_truth(F, cfg["truth"])
        if estimator not in ("mle", "majority", "pedestrian"):
            raise InputError("parametric experiments support estimators 'mle' and 'majority'")
        return run_mle_experiment(F, truth, k, trials, seed, workers, estimator, config=echo)
    raise InputError("instance needs a 'matrix' or a 'family'")


def _nonparametric_inverter(xi, estimator, base: Path):
    if isinstance(estimator, dict):
        from .core import make_random_fn

        g = read_matrix_csv(_resolve(base, estimator["matrix"]))
        return make_random_fn(g.domain, g.codomain, g.matrix)
    if estimator in ("map", "mle"):
        return map_estimator(xi)
    if estimator == "minimax":
        return minimax_inverter(xi).inverter
    if estimator == "strict":
        return strict_inverter(xi).inverter
    raise InputError(f"unknown estimator {estimator!r}")


def cmd_simulate(args) -> None:
    path = Path(args.config)
    cfg = json.loads(path.read_text(encoding="utf-8"))
    for key in ("seed", "trials", "k"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    rep = run_config(cfg, path.parent, args.workers)
    _emit(args, format_report(rep, args.format, include_runtime=args.timing))


def cmd_example31(args) -> None:
    fam = LinearFamily(args.n, args.delta)
    k = args.k or 100
    trials = args.trials or 1000
    seed = args.seed
    from .core import RngStream, Counts, cdf_of
    from .parametric import parametric_mle

    cdf = cdf_of(fam.point("a").probs)
    wrong = ratio_ok = ratio_checked = 0
    for t in range(trials):
        rng = RngStream(seed, t)
        seq = rng.categorical(cdf, k)
        counts = Counts(fam.codomain, np.bincount(seq, minlength=fam.n + 1))
        wrong += parametric_mle(fam, counts, rng) != "a"
        if k <= fam.n / 2:
            l1, l2 = linear_sup_log_likelihoods(fam, seq)
            rho = float(np.mean(seq == 0))
            ratio_checked += 1
            ratio_ok += (l2 - l1) >= k * math.log(linear_ratio_floor(fam.delta, rho)) - 1e-9
    from .simulation import Report

    rep = Report.from_counts(trials - wrong, trials, seed, k, {"kind": "example31", "n": fam.n, "delta": fam.delta})
    out = {
        "delta_condition": linear_check_delta(fam.delta),
        "delta_condition_lhs": 2 * (1 - 2 * fam.delta) ** (fam.delta / 2),
        "u_plus": fam.n + 1,
        "report": rep.to_json(include_runtime=False),
        "ratio_bound_checked": ratio_checked,
        "ratio_bound_held": ratio_ok,
    }
    _emit(args, _json(out))


def cmd_example32(args) -> None:
    fam = TrigFamily()
    k = args.k or 20
    trials = args.trials or 10000
    q = trig_tie_probability(k) if k % 2 == 0 else 0.0
    cases = [("a1", "pi/4"), ("a1", "pi/2"), ("a2", "pi/2"), ("a2", "3pi/4")]
    out = {"k": k, "tie_probability": q, "endpoint_prediction": (1 + q) / 2, "cases": []}
    for cls, t in cases:
        truth = parse_truth(fam, {"class": cls, "theta": t})
        row = {"class": cls, "theta": t}
        for est in ("mle", "majority"):
            rep = run_mle_experiment(fam, truth, k, trials, args.seed, estimator=est)
            row[est] = rep.to_json(include_runtime=False)
            row[est].pop("config")
        out["cases"].append(row)
    _emit(args, _json(out))


def cmd_cfn(args) -> None:
    p = EdgeProbs(tuple(args.pendant), args.central)
    fam = CFNFamily(args.f, args.g) if args.f is not None else CFNFamily()
    dist = cfn_distribution(args.topology, p)
    if args.patterns_out:
        Path(args.patterns_out).write_text(format_pattern_csv(dist), encoding="utf-8")
    truth = ParamPoint(args.topology, p)
    d_hat = estimate_d(fam, truth, args.resolution)
    eps = args.epsilon if args.epsilon is not None else 0.1
    out = {
        "topology": args.topology,
        "pendant": list(p.pendant),
        "central": p.central,
        "d_grid_estimate": d_hat,
        "d_grid_resolution": args.resolution,
        "u_plus_bound": 16,
        "epsilon": eps,
        "mle_sample_size": mle_sample_size(16, eps, d_hat) if d_hat > 0 else None,
        "reports": [],
    }
    ks = args.ks or ([args.k] if args.k else [100, 300, 1000])
    for k in ks:
        rep = run_mle_experiment(fam, truth, k, args.trials or 100, args.seed, workers=args.workers)
        j = rep.to_json(include_runtime=False)
        j.pop("config")
        out["reports"].append(j)
    _emit(args, _json(out))


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (64-bit)")
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--k", type=int, default=None, help="samples per trial")
    common.add_argument("--epsilon", type=float, default=None)
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    ap = argparse.ArgumentParser(prog="randinv", description=__doc__)
    ap.add_argument("--version", action="version", version=f"randinv {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invert", parents=[common], help="strict inverter, margins, MAP comparison")
    p.add_argument("--matrix", required=True, help="matrix CSV of Xi")
    p.add_argument("--weights", default=None, help="comma-separated MAP weights")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("minimax", parents=[common], help="minimax inverter by LP, with bounds")
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=cmd_minimax)

    p = sub.add_parser("bound", parents=[common], help="sample-size bounds")
    p.add_argument("--uplus", type=int, required=True)
    p.add_argument("--d", type=float, default=None, help="distance d for the MLE bound")
    p.add_argument("--delta", type=float, default=None, help="deviation threshold for the concentration sample size")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("compose-check", parents=[common], help="rank test for Upsilon")
    p.add_argument("--matrix", required=True, help="matrix CSV of Upsilon")
    p.set_defaults(func=cmd_compose_check)

    p = sub.add_parser("simulate", parents=[common], help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--timing", action="store_true", help="include runtime in the report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example31", parents=[common], help="linear-growth failure of MLE")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--n", type=int, default=1000)
    p.set_defaults(func=cmd_example31)

    p = sub.add_parser("example32", parents=[common], help="vanishing-distance trig family")
    p.set_defaults(func=cmd_example32)

    p = sub.add_parser("cfn", parents=[common], help="CFN quartet MLE experiment")
    p.add_argument("--topology", default="12|34")
    p.add_argument("--pendant", type=float, nargs=4, default=[0.15] * 4)
    p.add_argument("--central", type=float, default=0.15)
    p.add_argument("--ks", type=int, nargs="+", default=None)
    p.add_argument("--f", type=float, default=None)
    p.add_argument("--g", type=float, default=None)
    p.add_argument("--resolution", type=int, default=2, help="grid level for the d estimate")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--patterns-out", default=None, help="write the 16-pattern CSV here")
    p.set_defaults(func=cmd_cfn)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None and args.command != "simulate":
        args.seed = 0
    try:
        args.func(args)
    except (LPError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"randinv: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"randinv: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
