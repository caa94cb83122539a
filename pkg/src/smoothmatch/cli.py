"""Command-line interface: simulate, estimate, compare, sweep, and study.

Configuration is a flat JSON document; command-line flags override file
values.  Exit codes: 0 success, 2 configuration/input error, 3 integration
divergence, 4 singular normal equations (identifiability), 5 optimizer
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .estimators import SmoothAndMatchEstimator
from .exceptions import (
    EstimationFailedError,
    IdentifiabilityError,
    IntegrationDivergedError,
    ParameterError,
    SmoothMatchError,
)
from .experiments import (
    NoiseSpec,
    root_n_consistency_study,
    simulate_observations,
    supnorm_rate_study,
)
from .io import (
    mc_report_to_dict,
    read_observations_csv,
    report_to_dict,
    supnorm_report_to_dict,
    write_grid_csv,
    write_json,
    write_observations_csv,
)
from .kernels import get_kernel, kernel_diagnostics
from .matching import CriterionSpec, make_grid, ols_estimate, select_bandwidth_rss
from .systems import get_system
from .weights import make_plateau_weight

_DEFAULTS = {
    "system": "lotka-volterra",
    "theta_true": None,
    "xi": None,
    "window": None,
    "n": 50,
    "sigma": 0.1,
    "seed": 0,
    "noise_family": "gaussian",
    "kernel_order": 4,
    "bandwidth": 1.0,
    "bandwidth_candidates": None,
    "grid_step": None,
    "weight_c": 0.7,
    "weight_beta": 0.5,
    "weight_margin": 1.05,
    "out": ".",
    "multistart": None,
    "tol": None,
    "max_iter": None,
    "ols_multistart": 16,
    "ols_step": None,
    "ols_warm_start": True,
    "n_values": None,
    "gamma": 0.15,
    "replications": 100,
    "interval": [0.2, 0.8],
    "b_ref": None,
    "n_ref": None,
    "b_scale": 0.5,
    "b_exponent": -1.0 / 9.0,
    "raw_csv": False,
    "integrate_step": None,
}


def load_config(args) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ParameterError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ParameterError(f"malformed config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ParameterError("config must be a flat JSON object")
        unknown = set(doc) - set(_DEFAULTS)
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    for flag in ("seed", "out", "bandwidth", "system"):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[flag] = value
    return cfg


def _out_path(cfg, name):
    os.makedirs(cfg["out"], exist_ok=True)
    return os.path.join(cfg["out"], name)


def _window_and_times(cfg):
    if cfg["window"] is not None:
        t_lo, t_hi = float(cfg["window"][0]), float(cfg["window"][1])
    else:
        t_lo, t_hi = 0.0, 25.0
    n = int(cfg["n"])
    if n < 2:
        raise ParameterError("n must be at least 2")
    times = t_lo + (t_hi - t_lo) * np.arange(1, n + 1) / n
    return (t_lo, t_hi), times


def _require(cfg, key):
    if cfg[key] is None:
        raise ParameterError(f"config key {key!r} is required for this command")
    return cfg[key]


def _estimator_from_config(cfg, window=None):
    return SmoothAndMatchEstimator(
        system=cfg["system"],
        bandwidth=float(cfg["bandwidth"]),
        kernel=int(cfg["kernel_order"]),
        weight_c=cfg["weight_c"],
        weight_beta=cfg["weight_beta"],
        weight_margin=cfg["weight_margin"],
        grid_step=cfg["grid_step"],
        window=window,
        multistart=cfg["multistart"],
        tol=cfg["tol"] if cfg["tol"] is not None else 1e-7,
        max_iter=cfg["max_iter"],
        xi=cfg["xi"],
        integrate_step=cfg["integrate_step"],
    )


def cmd_simulate(cfg) -> int:
    theta = np.asarray(_require(cfg, "theta_true"), dtype=float)
    xi = np.asarray(_require(cfg, "xi"), dtype=float)
    system = get_system(cfg["system"])
    (t_lo, _), times = _window_and_times(cfg)
    noise = NoiseSpec(sigma=cfg["sigma"], family=cfg["noise_family"], seed=cfg["seed"])
    obs = simulate_observations(system, theta, xi, times, noise, t0=t_lo)
    path = _out_path(cfg, "observations.csv")
    write_observations_csv(path, obs)
    sigma = np.atleast_1d(np.asarray(cfg["sigma"], dtype=float))
    print(
        f"simulated n={obs.n} d={obs.dim} sigma={sigma.tolist()} "
        f"seed={cfg['seed']} -> {path}"
    )
    return 0


def cmd_estimate(cfg, data_path) -> int:
    bandwidth = cfg["bandwidth"]
    if not isinstance(bandwidth, (int, float)):
        raise ParameterError(f"bandwidth must be numeric for estimate, got {bandwidth!r}")
    obs = read_observations_csv(data_path)
    window = tuple(cfg["window"]) if cfg["window"] is not None else None
    est = _estimator_from_config(cfg, window=window)
    est.fit(obs.times, obs.y)
    report_path = _out_path(cfg, "report.json")
    write_json(report_path, report_to_dict(est.report_))
    grid_path = _out_path(cfg, "grid.csv")
    write_grid_csv(grid_path, est.smoother_output_)
    theta = np.round(est.theta_, 6).tolist()
    print(f"method={est.report_.method} theta_hat={theta} -> {report_path}, {grid_path}")
    return 0


def cmd_compare_ols(cfg, data_path) -> int:
    """Run the smooth-and-match estimator and the OLS baseline on the same data.

    Wall times are measured around each full pipeline (smoothing included for
    the SME).  By default the OLS search is warm-started from the SME estimate
    — the intended division of labor, since the least squares criterion is
    multimodal from generic starts; set ``ols_warm_start`` false (and raise
    ``ols_multistart``) for a cold lattice search.
    """
    import time as _time

    xi = np.asarray(_require(cfg, "xi"), dtype=float)
    obs = read_observations_csv(data_path)
    window = tuple(cfg["window"]) if cfg["window"] is not None else None
    comparison = {}

    sme_report = ols_report = None
    sme_time = ols_time = None
    try:
        est = _estimator_from_config(cfg, window=window)
        tic = _time.perf_counter()
        est.fit(obs.times, obs.y)
        sme_time = _time.perf_counter() - tic
        sme_report = est.report_
        comparison["sme"] = report_to_dict(sme_report)
        comparison["sme"]["pipeline_wall_time_s"] = sme_time
    except SmoothMatchError as exc:
        comparison["sme"] = {"error": str(exc)}

    try:
        system = get_system(cfg["system"])
        t_lo = window[0] if window is not None else None
        warm = bool(cfg["ols_warm_start"]) and sme_report is not None
        opts = {"multistart": 0 if warm else int(cfg["ols_multistart"])}
        if warm:
            opts["extra_starts"] = [sme_report.theta_hat]
        if cfg["tol"] is not None:
            opts["tol"] = float(cfg["tol"])
        if cfg["max_iter"] is not None:
            opts["max_iter"] = int(cfg["max_iter"])
        span = obs.times[-1] - (t_lo if t_lo is not None else obs.t_origin)
        opts["step"] = (
            float(cfg["ols_step"]) if cfg["ols_step"] is not None else 2e-3 * span
        )
        if t_lo is not None:
            opts["t0"] = float(t_lo)
        obs_for_ols = obs if t_lo is None else read_observations_csv(data_path, t_origin=t_lo)
        tic = _time.perf_counter()
        ols_report = ols_estimate(obs_for_ols, system, xi, opts)
        ols_time = _time.perf_counter() - tic
        comparison["ols"] = report_to_dict(ols_report)
        comparison["ols"]["pipeline_wall_time_s"] = ols_time
        comparison["ols"]["warm_started_from_sme"] = warm
    except SmoothMatchError as exc:
        comparison["ols"] = {"error": str(exc)}

    if sme_time is not None and ols_time is not None and sme_time > 0:
        comparison["wall_time_ratio"] = ols_time / sme_time
    path = _out_path(cfg, "comparison.json")
    write_json(path, comparison)
    ok = sme_report is not None or ols_report is not None
    print(f"compare-ols: sme={'ok' if sme_report else 'failed'} "
          f"ols={'ok' if ols_report else 'failed'} -> {path}")
    return 0 if ok else 5


def cmd_sweep(cfg, data_path, candidates=None) -> int:
    xi = np.asarray(_require(cfg, "xi"), dtype=float)
    system = get_system(cfg["system"])
    if candidates is None:
        candidates = _require(cfg, "bandwidth_candidates")
    candidates = np.asarray(candidates, dtype=float)
    window = tuple(cfg["window"]) if cfg["window"] is not None else None
    obs = read_observations_csv(
        data_path, t_origin=None if window is None else float(window[0])
    )
    if window is None:
        window = (obs.t_origin, float(obs.times[-1]))
    t_lo, t_hi = window
    kernel = get_kernel(int(cfg["kernel_order"]))
    weight = make_plateau_weight(
        t_lo, t_hi, cfg["weight_c"], cfg["weight_beta"], cfg["weight_margin"]
    )
    grid = make_grid(t_lo, t_hi, step=cfg["grid_step"])
    template = CriterionSpec(
        weight=weight, grid=grid, kernel=kernel, bandwidth=float(candidates[0])
    )
    opts = {}
    if cfg["multistart"] is not None:
        opts["multistart"] = int(cfg["multistart"])
    if cfg["tol"] is not None:
        opts["tol"] = float(cfg["tol"])
    b_hat, rows = select_bandwidth_rss(
        obs, system, xi, candidates, template, opts=opts or None, t0=t_lo
    )

    csv_path = _out_path(cfg, "sweep.csv")
    p = system.dim_param
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("bandwidth,rss," + ",".join(f"theta{j + 1}" for j in range(p)) + "\n")
        for row in rows:
            theta = row["theta_hat"] or [math.nan] * p
            fh.write(
                ",".join(
                    [format(row["bandwidth"], ".17g"), format(row["rss"], ".17g")]
                    + [format(v, ".17g") for v in theta]
                )
                + "\n"
            )
    json_path = _out_path(cfg, "sweep.json")
    write_json(json_path, {"b_hat": b_hat, "table": rows})
    print(f"sweep: b_hat={b_hat:g} over {len(rows)} candidates -> {csv_path}, {json_path}")
    return 0


def cmd_mc_rootn(cfg) -> int:
    system = get_system(cfg["system"])
    theta = np.asarray(_require(cfg, "theta_true"), dtype=float)
    xi = np.asarray(_require(cfg, "xi"), dtype=float)
    window = cfg["window"] if cfg["window"] is not None else [0.0, 1.0]
    n_values = [int(n) for n in _require(cfg, "n_values")]
    report = root_n_consistency_study(
        system,
        theta,
        xi,
        (float(window[0]), float(window[1])),
        n_values,
        float(cfg["gamma"]),
        float(np.atleast_1d(np.asarray(cfg["sigma"], dtype=float))[0]),
        int(cfg["replications"]),
        int(cfg["seed"]),
        b_ref=cfg["b_ref"],
        n_ref=cfg["n_ref"],
        kernel=int(cfg["kernel_order"]),
    )
    path = _out_path(cfg, "mc_rootn.json")
    write_json(path, mc_report_to_dict(report))
    if cfg["raw_csv"]:
        raw_path = _out_path(cfg, "mc_rootn_raw.csv")
        with open(raw_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("n,rep,component,theta_hat\n")
            for n in report.n_values:
                if n not in report.estimates:
                    continue
                thetas = report.estimates[n]
                for rep in range(thetas.shape[0]):
                    for comp in range(thetas.shape[1]):
                        fh.write(
                            f"{n},{rep},{comp + 1},{format(thetas[rep, comp], '.17g')}\n"
                        )
    print(
        f"mc-rootn: n={list(report.n_values)} sqrt(n)*RMSE="
        f"{np.round(report.scaled, 4).tolist()} failures={report.failures} -> {path}"
    )
    return 0


def cmd_mc_supnorm(cfg) -> int:
    n_values = [int(n) for n in _require(cfg, "n_values")]
    scale = float(cfg["b_scale"])
    exponent = float(cfg["b_exponent"])
    noise = NoiseSpec(
        sigma=float(np.atleast_1d(np.asarray(cfg["sigma"], dtype=float))[0]),
        family=cfg["noise_family"],
        seed=int(cfg["seed"]),
    )
    report = supnorm_rate_study(
        mu=lambda t: np.sin(2.0 * np.pi * t),
        mu_prime=lambda t: 2.0 * np.pi * np.cos(2.0 * np.pi * t),
        kernel=int(cfg["kernel_order"]),
        n_values=n_values,
        bandwidth_rule=lambda n: scale * n**exponent,
        noise=noise,
        replications=int(cfg["replications"]),
        interval=tuple(cfg["interval"]),
    )
    path = _out_path(cfg, "mc_supnorm.json")
    write_json(path, supnorm_report_to_dict(report))
    print(
        f"mc-supnorm: family={report.family} mean sup errors "
        f"{np.round(report.mean_sup_x, 4).tolist()} -> {path}"
    )
    return 0


def cmd_kernel_info() -> int:
    info = {name: kernel_diagnostics(name) for name in ("gegenbauer4", "biweight2")}
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothmatch",
        description="Smooth-and-match parameter estimation for ODE systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, data=False):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--bandwidth", type=float, help="bandwidth (overrides config)")
        p.add_argument("--system", help="system name or linear-form JSON path")
        if data:
            p.add_argument("data", help="observation CSV file")

    add_common(sub.add_parser("simulate", help="simulate noisy observations"))
    add_common(sub.add_parser("estimate", help="smooth and match on a data file"), data=True)
    add_common(sub.add_parser("compare-ols", help="run SME and OLS on the same data"), data=True)
    sweep = sub.add_parser("sweep", help="bandwidth sweep by refit RSS")
    add_common(sweep, data=True)
    sweep.add_argument("--candidates", help="comma-separated bandwidth candidates")
    add_common(sub.add_parser("mc-rootn", help="root-n consistency study"))
    add_common(sub.add_parser("mc-supnorm", help="sup-norm rate study"))
    sub.add_parser("kernel-info", help="print kernel diagnostics")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "kernel-info":
            return cmd_kernel_info()
        cfg = load_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.data)
        if args.command == "compare-ols":
            return cmd_compare_ols(cfg, args.data)
        if args.command == "sweep":
            candidates = None
            if args.candidates:
                candidates = [float(v) for v in args.candidates.split(",")]
            return cmd_sweep(cfg, args.data, candidates)
        if args.command == "mc-rootn":
            return cmd_mc_rootn(cfg)
        if args.command == "mc-supnorm":
            return cmd_mc_supnorm(cfg)
        raise ParameterError(f"unknown command {args.command!r}")
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IntegrationDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except IdentifiabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except EstimationFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
