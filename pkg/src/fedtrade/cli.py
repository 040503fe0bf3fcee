"""Command-line front end.

``fedtrade <subcommand> --config <path> [--seed N] [--out DIR]`` drives the
analytic and simulation machinery from a single TOML config.  Every
subcommand prints one JSON object per result line on stdout; ``experiment``
additionally persists CSV and SVG artifacts.  Exit codes: 0 success, 2
config error, 3 numeric contract violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import altutility, bayesmean, dpmean, dpsgd, montecarlo
from .allocation import NoiseAllocation
from .core import ContractViolation
from .experiment import (
    ConfigError,
    build_experiment_config,
    build_lambda_model,
    build_setting,
    emit_outputs,
    load_raw_config,
    run_experiment,
)


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, frozenset):
        return sorted(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, Path):
        return str(value)
    return value


def _emit(op: str, payload: dict) -> None:
    line = {"op": op}
    line.update(_jsonable(payload))
    sys.stdout.write(json.dumps(line, sort_keys=True) + "\n")


def _weights_from_config(raw: dict, n_clients: int, seed: int) -> np.ndarray:
    model = build_lambda_model(raw)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(0, 0)))
    return model.sample(model.location, n_clients, rng)


def _allocation_from_config(raw: dict, local_precision: float, noise_scale: float = 1.0):
    table = raw.get("allocation")
    if not isinstance(table, dict):
        return None
    if "noise_stds" in table:
        return NoiseAllocation.from_noise_stds(
            [float(v) for v in table["noise_stds"]], local_precision, noise_scale
        )
    if "informativeness" in table:
        return NoiseAllocation.from_informativeness(
            [float(v) for v in table["informativeness"]], local_precision, noise_scale
        )
    raise ConfigError("[allocation] needs 'noise_stds' or 'informativeness'")


def _require_alloc(alloc, what: str):
    if alloc is None:
        raise ConfigError(f"{what} needs an [allocation] table in the config")
    return alloc


def _scalar_weight(raw: dict, weights: np.ndarray) -> float:
    opt = raw.get("optimize", {})
    if "accuracy_weight" in opt:
        return float(opt["accuracy_weight"])
    return float(weights[0])


def cmd_feasibility(raw: dict, seed: int) -> None:
    kind = raw["kind"]
    setting = build_setting(raw)
    if kind == "dpmean":
        derived = dpmean.derive(setting)
        weights = _weights_from_config(raw, setting.n_clients, seed)
        report = dpmean.existence(setting, derived, weights)
        _emit("derive", {"local_precision": derived.local_precision, "privacy_strength": derived.privacy_strength})
        _emit("existence", {
            "feasible": report.feasible, "coefficients": report.coefficients,
            "coefficient_sum": float(report.coefficients.sum()), "b_max": report.b_max,
            "witness_informativeness": None if report.witness is None else report.witness.informativeness,
        })
        alloc = _allocation_from_config(raw, derived.local_precision)
        if alloc is not None:
            rep = dpmean.utilities(setting, derived, alloc, weights)
            _emit("utilities", rep)
            for i in range(setting.n_clients):
                _emit("err_leak", {"client": i, **dataclasses.asdict(dpmean.err_leak(setting, derived, alloc, i))})
    elif kind == "dpsgd":
        weights = _weights_from_config(raw, setting.n_clients, seed)
        derived = dpsgd.derive(setting, weights)
        report = dpsgd.existence(derived)
        _emit("derive", {
            "curvature_ratio": derived.curvature_ratio, "rounds": derived.rounds,
            "batch_size": derived.batch_size, "local_precision": derived.local_precision,
            "privacy_strength": derived.privacy_strength,
        })
        _emit("existence", {
            "feasible": report.feasible, "coefficients": report.coefficients,
            "x_star": report.x_star, "g_max": report.g_max,
            "sufficient_ok": report.sufficient_ok, "necessary_ok": report.necessary_ok,
            "witness_informativeness": None if report.witness is None else report.witness.informativeness,
        })
        alloc = _allocation_from_config(raw, derived.local_precision, setting.dim)
        if alloc is not None:
            rep = dpsgd.utilities(derived, alloc, weights)
            _emit("utilities", rep)
            rounds = math.ceil(derived.rounds)
            _emit("accuracy_bound", {"rounds": rounds, "bound": dpsgd.accuracy_bound(derived, alloc, rounds)})
    elif kind == "bayesmean":
        weights = _weights_from_config(raw, setting.n_clients, seed)
        report = bayesmean.first_order_existence(setting, weights)
        _emit("existence", {
            "feasible": report.feasible, "coefficients": report.coefficients,
            "coefficient_sum": float(report.coefficients.sum()),
            "witness_scale": report.witness_scale,
            "witness_informativeness": None if report.witness is None else report.witness.informativeness,
        })
        alloc = _allocation_from_config(raw, setting.local_precision)
        if alloc is not None:
            rep = bayesmean.utilities(setting, alloc, weights)
            _emit("utilities", rep)
            for i in range(setting.n_clients):
                _emit("err_leak", {"client": i, **dataclasses.asdict(bayesmean.err_leak(setting, alloc, i))})
    else:
        raise ConfigError(f"feasibility does not support kind {kind!r}")


def cmd_optimize(raw: dict, seed: int) -> None:
    kind = raw["kind"]
    setting = build_setting(raw)
    if kind == "dpmean":
        derived = dpmean.derive(setting)
        weights = _weights_from_config(raw, setting.n_clients, seed)
        _emit("symmetric_optimum", dpmean.symmetric_optimum(setting, derived, _scalar_weight(raw, weights)))
        for family in dpmean.FAMILIES:
            found = dpmean.maximize_gamma(setting, derived, weights, family, int(raw.get("optimize", {}).get("grid_points", 512)))
            _emit("maximize_gamma", {"family": family, **dataclasses.asdict(found)})
    elif kind == "dpsgd":
        weights = _weights_from_config(raw, setting.n_clients, seed)
        derived = dpsgd.derive(setting, weights)
        _emit("symmetric_optimum", dpsgd.symmetric_optimum(derived, _scalar_weight(raw, weights)))
    elif kind == "bayesmean":
        weights = _weights_from_config(raw, setting.n_clients, seed)
        scalar = _scalar_weight(raw, weights)
        _emit("symmetric_optimum", bayesmean.symmetric_optimum(setting, scalar))
        for regime in ("large_N", "large_rho", "small_rho"):
            _emit("asymptotic", {"regime": regime, **dataclasses.asdict(bayesmean.asymptotic_beta(setting, scalar, regime))})
        for family in bayesmean.FAMILIES:
            found = bayesmean.maximize_gamma(setting, weights, family, int(raw.get("optimize", {}).get("grid_points", 512)))
            _emit("maximize_gamma", {"family": family, **dataclasses.asdict(found)})
    else:
        raise ConfigError(f"optimize does not support kind {kind!r}")


def cmd_simulate(raw: dict, seed: int) -> None:
    kind = raw["kind"]
    setting = build_setting(raw)
    sim = raw.get("simulate", {})
    trials = int(sim.get("trials", 100000))
    if kind == "dpmean":
        derived = dpmean.derive(setting)
        alloc = _require_alloc(_allocation_from_config(raw, derived.local_precision), "simulate")
        run = montecarlo.sim_dp_mean(setting, alloc, trials, seed, true_mean=float(sim.get("true_mean", 0.0)))
        for i, res in enumerate(run.per_client):
            _emit("sim_dp_mean", {"client": i, "support_overridden": run.support_overridden, **dataclasses.asdict(res)})
    elif kind == "bayesmean":
        alloc = _require_alloc(_allocation_from_config(raw, setting.local_precision), "simulate")
        for i, pair in enumerate(montecarlo.sim_bayes(setting, alloc, trials, seed)):
            _emit("sim_bayes", {"client": i, "posterior": pair.posterior, "reconstruction": pair.reconstruction})
    elif kind == "dpsgd":
        weights = _weights_from_config(raw, setting.n_clients, seed)
        derived = dpsgd.derive(setting, weights)
        alloc = _require_alloc(
            _allocation_from_config(raw, derived.local_precision, setting.dim), "simulate"
        )
        trials = int(sim.get("trials", 1000))
        problem = montecarlo.QuadraticProblem.canonical(setting)
        run = montecarlo.sim_sgd(setting, derived, alloc, problem, trials, seed)
        _emit("sim_sgd", run)
    else:
        raise ConfigError(f"simulate does not support kind {kind!r}")


def cmd_experiment(raw: dict, seed, out) -> None:
    config = build_experiment_config(raw, seed_override=seed, out_override=out)
    record = run_experiment(config)
    files = emit_outputs(record, config.out_dir)
    for row in record.aggregates:
        _emit("aggregate", row)
    _emit("files", {"paths": [str(p) for p in files], "config_digest": record.config_digest})


def cmd_altcheck(raw: dict, seed: int) -> None:
    kind = raw["kind"]
    if kind == "chung":
        table = raw.get("chung")
        if not isinstance(table, dict):
            raise ConfigError("kind 'chung' needs a [chung] table")
        report = altutility.chung_check(
            c=int(table.get("c", 2)),
            c1=float(table.get("c1", 1.0)),
            n0=int(table.get("n_start", table.get("n0", 0))),
            horizon=int(table.get("horizon", 0)),
            b_start=float(table.get("b_start", 1.0)),
        )
        _emit("chung_check", report)
        return
    setting = build_setting(raw)
    if kind == "altmean":
        weights = _weights_from_config(raw, setting.n_clients, seed)
        rho = setting.n_samples / setting.sigma**2
        alloc = _require_alloc(_allocation_from_config(raw, rho), "altcheck")
        _emit("alt_mean_feasibility", altutility.alt_mean_feasibility(setting, weights, alloc))
    elif kind == "altsgd":
        weights = _weights_from_config(raw, setting.base.n_clients, seed)
        rho = setting.base.n_samples / setting.base.sigma**2
        alloc = _require_alloc(_allocation_from_config(raw, rho, setting.base.dim), "altcheck")
        _emit("alt_sgd_feasibility", altutility.alt_sgd_feasibility(setting, weights, alloc))
    else:
        raise ConfigError(f"altcheck does not support kind {kind!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedtrade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("feasibility", "existence tests and participation reports"),
        ("optimize", "symmetric optima and informativeness-maximizing searches"),
        ("simulate", "Monte Carlo validation of the analytic evaluations"),
        ("experiment", "personalized-versus-symmetric sweep with CSV/SVG outputs"),
        ("altcheck", "linear-leak utility checks and the recurrence bound"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="path to the TOML config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_raw_config(args.config)
        seed = int(raw.get("seed", 0)) if args.seed is None else args.seed
        if args.command == "feasibility":
            cmd_feasibility(raw, seed)
        elif args.command == "optimize":
            cmd_optimize(raw, seed)
        elif args.command == "simulate":
            cmd_simulate(raw, seed)
        elif args.command == "experiment":
            cmd_experiment(raw, args.seed, args.out)
        elif args.command == "altcheck":
            cmd_altcheck(raw, seed)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"numeric contract violation: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
