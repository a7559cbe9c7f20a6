"""Command-line front end.

    cse validate  --config run.json --out DIR
    cse calibrate --config run.json --out DIR
    cse bound     --config run.json --out DIR
    cse grid      --config run.json --out DIR
    cse confset   --config run.json --out DIR --calibration DIR/calibration.json --observed data.json
    cse schema

Exit status: 0 success, 2 configuration error, 3 numeric failure.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np
from scipy.stats import norm

from . import __version__
from .calibration import (
    REJECT_NOTHING,
    AffineEstimand,
    Calibrator,
    bootstrap_bias,
    confidence_set,
    observed_tile_statistics,
)
from .config import CONFIG_SCHEMA, ConfigError, load_config
from .grid import Platten, refine
from .model import OutcomeMatrix
from .simengine import resolve_threads
from .tiltbound import BoundQuery, forward_bound, optimize_forward, pinsker_bound, taylor_bound
from .validation import Validator

__all__ = ["main", "run"]

log = logging.getLogger("csekit")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _provenance(cfg, command):
    return {"tool": "csekit", "version": __version__, "command": command,
            "master_seed": cfg.master_seed, "config": cfg.resolved()}


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _write_csv(path, header, rows, provenance):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# provenance: " + json.dumps(provenance, separators=(",", ":")) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _tile_columns(platten):
    d = platten.dim
    return [f"center_{j}" for j in range(d)] + [f"half_width_{j}" for j in range(d)]


def _tile_values(tile):
    return list(tile.center) + list(tile.half_widths)


def _validation_scores(report):
    # slack the Tilt-Bound adds on top of the point bound
    return report.tile_upper - report.cp_upper


def _calibration_scores(result):
    lam = np.where(result.lambda_hat == REJECT_NOTHING, -1e300, result.lambda_hat)
    return -(lam - lam.min())


def _adaptive(cfg, platten, fit, score):
    history = []
    for r in range(cfg.adaptive_rounds):
        est = fit(platten)
        history.append({"round": r, "tiles": len(platten), "total_sims": platten.total_sims})
        platten = refine(platten, score(est), cfg.adaptive_budget, cfg.sim_growth)
    est = fit(platten)
    history.append(
        {"round": cfg.adaptive_rounds, "tiles": len(platten), "total_sims": platten.total_sims}
    )
    return est, platten, history


def cmd_validate(cfg, out, threads):
    def fit(p):
        return Validator(cfg.design, cfg.family, cfg.raw["delta"], cfg.master_seed,
                         cfg.raw.get("lower", False), threads).fit(p)

    est, platten, history = _adaptive(
        cfg, cfg.platten(), fit, lambda e: _validation_scores(e.report_)
    )
    report = est.report_
    prov = _provenance(cfg, "validate")
    payload = {"provenance": prov, "adaptive_history": history, "platten": platten.to_dict()}
    payload.update(report.to_dict())
    _write_json(os.path.join(out, "validation.json"), payload)
    header = _tile_columns(platten) + ["R", "N", "cp_upper", "tile_upper", "q_star"]
    if report.tile_lower is not None:
        header += ["cp_lower", "tile_lower"]
    rows = []
    for i, tile in enumerate(platten.tiles):
        row = _tile_values(tile) + [int(report.false_rejections[i]), int(report.n[i]),
                                    report.cp_upper[i], report.tile_upper[i], report.q_star[i]]
        if report.tile_lower is not None:
            row += [report.cp_lower[i], report.tile_lower[i]]
        rows.append(row)
    _write_csv(os.path.join(out, "validation.csv"), header, rows, prov)


def _warn_discretization(result, batches):
    worst = 0.0
    for a, b in zip(result.alpha_prime, batches):
        target = (b.n + 1) * a
        if target >= 1:
            worst = max(worst, (target - math.floor(target)) / target)
    if worst > 0.05:
        log.warning(
            "(N+1)*alpha' is far from an integer on some tiles (up to %.1f%% of the target "
            "level is lost to rounding); choose N so that (N+1)*alpha is an integer", 100 * worst
        )


def cmd_calibrate(cfg, out, threads):
    alpha = cfg.raw["alpha"]

    def fit(p):
        return Calibrator(cfg.design, cfg.family, alpha, cfg.master_seed, threads).fit(p)

    est, platten, history = _adaptive(cfg, cfg.platten(), fit, lambda e: _calibration_scores(e.result_))
    result = est.result_
    _warn_discretization(result, est.batches_)
    prov = _provenance(cfg, "calibrate")
    payload = {"provenance": prov, "adaptive_history": history, "platten": platten.to_dict()}
    payload.update(result.to_dict())
    if "bootstrap" in cfg.raw:
        diag = bootstrap_bias(platten, est.batches_, alpha, cfg.raw["bootstrap"]["B"],
                              alpha_primes=result.alpha_prime, seed=cfg.master_seed)
        payload["bootstrap"] = {
            "B": cfg.raw["bootstrap"]["B"],
            "mean_slack": diag["mean"],
            "std_slack": diag["std"],
        }
    _write_json(os.path.join(out, "calibration.json"), payload)
    header = _tile_columns(platten) + [f"sim_point_{j}" for j in range(platten.dim)]
    header += ["N", "alpha_prime", "k", "lambda_hat"]
    rows = [
        _tile_values(t) + list(t.sim_point)
        + [t.sim_count, result.alpha_prime[i], int(result.k[i]), result.lambda_hat[i]]
        for i, t in enumerate(platten.tiles)
    ]
    _write_csv(os.path.join(out, "calibration.csv"), header, rows, prov)


def cmd_bound(cfg, out, threads):
    if cfg.family.kind != "normal" or cfg.family.dim != 1:
        raise ConfigError("/family", "the bound command compares bounds for the 1-D normal z-test")
    opts = cfg.raw["bound"]
    theta0 = float(opts["theta0"])
    alpha = float(opts.get("alpha", 0.025))
    z = norm.ppf(1.0 - alpha)
    a = float(opts["a"]) if "a" in opts else float(norm.cdf(theta0 - z))
    grad = float(norm.pdf(theta0 - z))
    fixed_q = [float(q) for q in opts.get("fixed_q", [2.0**k for k in range(4, 10)])]
    vs = np.linspace(0.0, float(opts.get("v_max", 0.3)), int(opts.get("v_count", 31)))
    rows = []
    for v in vs:
        res = optimize_forward(cfg.family, BoundQuery([theta0], [[v]], a))
        row = [theta0 + v, v, norm.cdf(theta0 + v - z), res.bound,
               taylor_bound(a, grad * v, 1.0, v * v), pinsker_bound(a, v * v / 2.0), res.q_star]
        row += [forward_bound(cfg.family, [theta0], [v], q, a) for q in fixed_q]
        rows.append(row)
    header = ["theta", "v", "true_f", "tilt_opt", "taylor", "pinsker", "q_star"]
    header += ["q_" + _fmt(q) for q in fixed_q]
    _write_csv(os.path.join(out, "bound.csv"), header, rows, _provenance(cfg, "bound"))


def cmd_grid(cfg, out, threads):
    platten = cfg.platten()
    volumes = [t.volume for t in platten.tiles]
    configs = {}
    for t in platten.tiles:
        key = "".join(str(int(b)) for b in t.config) or "-"
        configs[key] = configs.get(key, 0) + 1
    payload = {
        "provenance": _provenance(cfg, "grid"),
        "stats": {
            "tiles": len(platten),
            "total_sims": platten.total_sims,
            "total_volume": float(sum(volumes)),
            "min_volume": float(min(volumes)),
            "max_volume": float(max(volumes)),
            "tiles_per_config": configs,
        },
        "platten": platten.to_dict(),
    }
    _write_json(os.path.join(out, "platten.json"), payload)


def _observed_outcomes(family, values):
    values = np.asarray(values, dtype=float).reshape(1, -1)
    if values.shape[1] != family.n_draws:
        raise ConfigError("/values", f"expected {family.n_draws} observed values")
    if family.kind == "normal":
        return OutcomeMatrix("normal", values)
    if family.kind == "bernoulli":
        return OutcomeMatrix("bernoulli", values.astype(bool), family.arm_slices)
    return OutcomeMatrix("glm", values.astype(bool), covariates=family.covariates)


def cmd_confset(cfg, out, threads, calibration_path, observed_path):
    if not calibration_path or not observed_path:
        raise ConfigError("/", "confset needs --calibration and --observed")
    try:
        with open(calibration_path) as fh:
            cal = json.load(fh)
        with open(observed_path) as fh:
            observed = json.load(fh)
        platten = Platten.from_dict(cal["platten"])
        thresholds = np.array(
            [REJECT_NOTHING if t["lambda_hat"] == "REJECT_NOTHING" else float(t["lambda_hat"])
             for t in cal["tiles"]]
        )
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError("/", f"cannot read calibration/observed input: {exc}") from None
    outcomes = _observed_outcomes(cfg.family, observed["values"])
    stats = observed_tile_statistics(cfg.design, platten, outcomes)
    est = cfg.raw.get("estimand", {"coef": [1.0] + [0.0] * (platten.dim - 1)})
    if len(est["coef"]) != platten.dim:
        raise ConfigError("/estimand/coef", f"expected {platten.dim} coefficients")
    cs = confidence_set(platten, stats, thresholds,
                        AffineEstimand(tuple(est["coef"]), est.get("offset", 0.0)))
    payload = {
        "provenance": _provenance(cfg, "confset"),
        "calibration_provenance": cal.get("provenance"),
        "alpha": cal.get("alpha"),
        "observed": observed["values"],
    }
    payload.update(cs.to_dict())
    _write_json(os.path.join(out, "confset.json"), payload)


COMMANDS = {
    "validate": cmd_validate,
    "calibrate": cmd_calibrate,
    "bound": cmd_bound,
    "grid": cmd_grid,
}


def _parser():
    parser = argparse.ArgumentParser(prog="cse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"csekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "calibrate", "bound", "grid", "confset"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--threads", type=int, help="worker threads (default: $CSE_THREADS or 1)")
        p.add_argument("--adaptive-rounds", type=int, help="override adaptive.rounds")
        if name == "confset":
            p.add_argument("--calibration", help="calibration.json from `cse calibrate`")
            p.add_argument("--observed", help='JSON file {"values": [...]} with one observed dataset')
    sub.add_parser("schema", help="print the configuration JSON schema")
    return parser


def run(argv=None):
    """Run one command; returns the exit status."""
    args = _parser().parse_args(argv)
    if args.command == "schema":
        json.dump(CONFIG_SCHEMA, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_OK
    try:
        cfg = load_config(args.config, args.command, args.seed, args.adaptive_rounds)
        threads = resolve_threads(args.threads)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "confset":
            cmd_confset(cfg, args.out, threads, args.calibration, args.observed)
        else:
            COMMANDS[args.command](cfg, args.out, threads)
    except ConfigError as exc:
        log.error("config error at %s", exc)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run(argv))
