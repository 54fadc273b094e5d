"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance threshold violated.

Outputs (written to ``--out-dir``, default the current directory):

=========  =============================  =======================================
command    file                           content
=========  =============================  =======================================
analyze    spectral_report.json           roots, dominant roots, v*, m*, regime
simulate   path.csv                       t, X, Y, dW (history rows: t < 0)
infer      inference.json                 I1, I2, I3?, theta_hat, r_scale, ...
limit      limit.csv                      rep, Delta, J, alpha_hat
mc         alpha_hat.csv, mc_summary.json T, rep, alpha_hat / per-cell KS summary
baseline   baseline.csv, baseline_...     rep, h_hat, ou_mle / KS summary
=========  =============================  =======================================

CSV floats use 17 significant digits; failed replications are written as ``nan``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, DelaySDEError, RegimeError
from .inference import delta_J, mle_alpha, mle_theta, scaling_r, sufficient_stats
from .limit_process import limit_delta_J, limit_mle_alpha, simulate_limit_experiment
from .mc_harness import (LIMIT_CELL, ExperimentConfig, ar1_baseline, ks_two_sample, mc_alpha_hat,
                         mc_coupled_alpha_hat, mc_limit_alpha_hat)
from .sdde_sim import InitialSegment, SamplePath, delayed_series, simulate_sdde
from .spectral import CharacteristicModel, Region, SpectralSummary, classify

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_THRESHOLD = 0, 2, 3, 4

log = logging.getLogger("delaysde")


class ThresholdViolation(Exception):
    pass


def fmt(x) -> str:
    x = float(x)
    return "nan" if math.isnan(x) else format(x, ".17g")


def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc


def _write_json(path: Path, obj) -> None:
    # json writes floats with repr, which round-trips every double exactly
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_model(path) -> CharacteristicModel:
    return CharacteristicModel.from_dict(_read_json(path))


def _seed(args, fallback: int = 0) -> int:
    s = args.seed if args.seed is not None else fallback
    if not 0 <= int(s) < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return int(s)


def _initial_segment(args) -> InitialSegment:
    if args.x0_file:
        d = _read_json(args.x0_file)
        kind = d.get("kind", "constant")
        if kind == "constant":
            return InitialSegment.constant(d.get("value", 0.0))
        if kind == "polynomial":
            return InitialSegment.polynomial(d["coeffs"])
        if kind == "table":
            return InitialSegment.table(d["t"], d["x"])
        raise ConfigError(f"unknown initial segment kind {kind!r}")
    return InitialSegment.constant(args.x0)


# -- subcommands --------------------------------------------------------------

def cmd_analyze(args, out: Path) -> int:
    model = _load_model(args.model)
    region = Region(*args.region) if args.region else None
    summary = classify(model, region)
    report = summary.to_dict()
    report["theta"] = model.theta
    _write_json(out / "spectral_report.json", report)
    print(json.dumps({k: report[k] for k in ("v_star", "m_star", "regime")}))
    return EXIT_OK


def cmd_simulate(args, out: Path) -> int:
    model = _load_model(args.model)
    path = simulate_sdde(model, _initial_segment(args), args.T, args.dt, _seed(args))
    Y = delayed_series(path, model.measure)
    with open(out / "path.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "X", "Y", "dW"])
        for t, x in zip(path.history_times[:-1], path.history[:-1]):
            w.writerow([fmt(t), fmt(x), "", ""])
        for k, (t, x) in enumerate(zip(path.times, path.values)):
            dw = fmt(path.noise[k]) if k < path.n_steps else ""
            w.writerow([fmt(t), fmt(x), fmt(Y[k]), dw])
    return EXIT_OK


def read_path_csv(file, r: float) -> SamplePath:
    """Rebuild a :class:`SamplePath` from a ``simulate`` CSV (Y column ignored)."""
    p = Path(file)
    if not p.is_file():
        raise ConfigError(f"file not found: {p}")
    with open(p, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"t", "X"} <= set(rows[0]):
        raise ConfigError(f"{p}: expected columns t, X[, Y, dW]")
    t = np.array([float(row["t"]) for row in rows])
    x = np.array([float(row["X"]) for row in rows])
    k0 = int(np.argmin(np.abs(t)))
    if abs(t[k0]) > 1e-12 or np.any(np.diff(t) <= 0):
        raise ConfigError(f"{p}: time column must be increasing and contain t = 0")
    dt = (t[-1] - t[k0]) / (len(t) - 1 - k0)
    dws = [row.get("dW", "") for row in rows[k0:-1]]
    noise = np.array([float(v) for v in dws]) if dws and all(v not in ("", None) for v in dws) else None
    if k0 * dt < r - 1e-9 * max(r, 1.0):
        raise ConfigError(f"{p}: history covers {k0 * dt} but the delay is {r}")
    return SamplePath(dt=dt, horizon_T=t[-1], r=k0 * dt, history=x[: k0 + 1], values=x[k0:], noise=noise)


def cmd_infer(args, out: Path) -> int:
    model = _load_model(args.model)
    path = read_path_csv(args.path, model.measure.r)
    if abs(path.r - model.measure.r) > 1e-9 * model.measure.r:
        raise ConfigError("path history length differs from the model delay")
    stats = sufficient_stats(path, model.measure)
    theta_base = model.theta if args.theta_base is None else args.theta_base
    if args.r_scale is not None:
        r = args.r_scale
    else:
        r = scaling_r(classify(CharacteristicModel(model.measure, theta_base)), path.horizon_T)
    d, J = delta_J(stats, theta_base, r)
    res = {"I1": stats.I1, "I2": stats.I2, "theta_hat": mle_theta(stats), "r_scale": r,
           "alpha_hat": mle_alpha(stats, theta_base, r), "delta": d, "J": J,
           "theta_base": theta_base, "T": path.horizon_T}
    if stats.I3 is not None:
        res["I3"] = stats.I3
    _write_json(out / "inference.json", res)
    return EXIT_OK


def cmd_limit(args, out: Path) -> int:
    summary = SpectralSummary.from_dict(_read_json(args.report))
    if summary.regime.value != "unstable":
        raise RegimeError(f"limit experiment needs an unstable model, report says {summary.regime.value}")
    seed = _seed(args)
    with open(out / "limit.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "Delta", "J", "alpha_hat"])
        for j in range(args.reps):
            paths = simulate_limit_experiment(summary, args.alpha, args.dt, seed, (LIMIT_CELL, j))
            d, J = limit_delta_J(paths)
            try:
                ah = limit_mle_alpha(paths)
            except ArithmeticError:
                ah = math.nan
            w.writerow([j, fmt(d), fmt(J), fmt(ah)])
    return EXIT_OK


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    return cfg.with_seed(args.seed) if args.seed is not None else cfg


def cmd_mc(args, out: Path) -> int:
    cfg = _config(args)
    if not cfg.horizons:
        raise ConfigError("mc needs at least one horizon")
    start = time.perf_counter()
    if args.coupled:
        cells, lim = mc_coupled_alpha_hat(cfg, workers=args.workers)
    else:
        summary = classify(cfg.require_model())
        cells = mc_alpha_hat(cfg, summary, args.workers)
        lim = mc_limit_alpha_hat(cfg, summary, args.workers)
    runtime = time.perf_counter() - start
    with open(out / "alpha_hat.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "rep", "alpha_hat"])
        for T, sample in cells.items():
            for j, v in enumerate(sample.replicates):
                w.writerow([fmt(T), j, fmt(v)])
        for j, v in enumerate(lim.replicates):
            w.writerow(["limit", j, fmt(v)])
    rows = [{"T": T, "N": s.size, "ks": ks_two_sample(s, lim), "failures": s.failures}
            for T, s in cells.items()]
    rows.append({"T": "limit", "N": lim.size, "ks": None, "failures": lim.failures})
    summary_json = {"cells": rows, "runtime_s": runtime, "seed": cfg.seed, "alpha": cfg.alpha}
    _write_json(out / "mc_summary.json", summary_json)
    ks_max = cfg.thresholds.get("ks_max")
    if ks_max is not None and rows[-2]["ks"] > ks_max:
        raise ThresholdViolation(f"KS {rows[-2]['ks']:.4f} at T={rows[-2]['T']} exceeds {ks_max}")
    return EXIT_OK


def cmd_baseline(args, out: Path) -> int:
    cfg = _config(args)
    start = time.perf_counter()
    ar, ou = ar1_baseline(cfg.baseline_h, cfg.baseline_n, cfg.replications, cfg.seed,
                          ou_dt=cfg.baseline_ou_dt, workers=args.workers)
    runtime = time.perf_counter() - start
    with open(out / "baseline.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "h_hat", "ou_mle"])
        for j, (a, b) in enumerate(zip(ar.replicates, ou.replicates)):
            w.writerow([j, fmt(a), fmt(b)])
    ks = ks_two_sample(ar, ou)
    _write_json(out / "baseline_summary.json",
                {"T": cfg.baseline_n, "N": cfg.replications, "ks": ks,
                 "failures": ar.failures + ou.failures, "runtime_s": runtime})
    ks_max = cfg.thresholds.get("ks_max")
    if ks_max is not None and ks > ks_max:
        raise ThresholdViolation(f"baseline KS {ks:.4f} exceeds {ks_max}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delaysde", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, help="master seed; overrides seeds in config files")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="characteristic roots and stability classification")
    a.add_argument("--model", required=True, help="model JSON (measure plus theta)")
    a.add_argument("--region", type=float, nargs=3, metavar=("SIGMA_MIN", "SIGMA_MAX", "PHI_MAX"))
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="simulate one path of the delay equation")
    s.add_argument("--model", required=True)
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--x0", type=float, default=0.0, help="constant initial segment")
    s.add_argument("--x0-file", help="JSON initial segment: constant, polynomial or table")
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("infer", help="likelihood statistics and MLEs from a path CSV")
    i.add_argument("--model", required=True)
    i.add_argument("--path", required=True)
    i.add_argument("--theta-base", type=float, help="base parameter (default: model theta)")
    i.add_argument("--r-scale", type=float, help="local scaling (default: T^(-m*-1) at the base)")
    i.set_defaults(func=cmd_infer)

    lm = sub.add_parser("limit", help="replications of the limit experiment")
    lm.add_argument("--report", required=True, help="spectral report JSON from 'analyze'")
    lm.add_argument("--alpha", type=float, default=0.0)
    lm.add_argument("--dt", type=float, default=1e-3)
    lm.add_argument("--reps", type=int, default=100)
    lm.set_defaults(func=cmd_limit)

    for name, func, text in (("mc", cmd_mc, "Monte Carlo: finite-horizon MLE versus limit MLE"),
                             ("baseline", cmd_baseline, "AR(1) near unit root versus OU drift MLE")):
        m = sub.add_parser(name, help=text)
        m.add_argument("--config", required=True, help="experiment JSON")
        m.add_argument("--workers", type=int, help="worker threads (capped by DELAYSDE_THREADS)")
        if name == "mc":
            m.add_argument("--coupled", action="store_true",
                           help="drive all horizons and the limit by one Brownian path per replication")
        m.set_defaults(func=func)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return args.func(args, out)
    except ThresholdViolation as exc:
        print(f"threshold violated: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except (ConfigError, RegimeError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DelaySDEError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
