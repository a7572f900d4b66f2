"""Command-line front end.

Every subcommand takes its parameters from three layers: built-in defaults,
then an optional JSON file (``--config``), then flags. The fully resolved
configuration is echoed in the JSON written to stdout.

Exit codes
----------
0  success
1  usage error (unknown flag, missing argument)
2  invalid configuration (bad value, unreadable config file, failed precondition)
3  runtime failure (I/O error, numerical failure)

On failure a single JSON error record is written to stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .abel import ABEL_RULES, MSE_CONVENTIONS, calibrate_mse_convention, run_abel_experiment, write_summary_csv
from .errors import QutError
from .experiments import (
    PhaseTransitionConfig,
    SyntheticConfig,
    concat_reports,
    load_dataset,
    read_numeric_csv,
    run_phase_transition,
    run_split_eval,
    run_synthetic,
)
from .model import LassoProblem, refit_least_squares, standardize
from .report import _jsonable
from .selectors import RULES, select_bic, select_cv, select_qut, select_scaled_lasso, select_sure
from .thresholds import DEFAULT_M, qut_monte_carlo
from .variance import rcv_variance, residual_variance

THREADS_ENV = "QUTLASSO_THREADS"
EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# value converters: accept strings from the command line or JSON values


def _num(kind):
    def conv(v):
        if isinstance(v, bool):
            raise ValueError(f"expected a number, got {v!r}")
        out = kind(v)
        if kind is float and not math.isfinite(out):
            raise ValueError(f"expected a finite number, got {v!r}")
        return out
    conv.__name__ = kind.__name__
    return conv


_int, _float = _num(int), _num(float)


def _list(item):
    def conv(v):
        if isinstance(v, str):
            v = [s for s in v.split(",") if s.strip()]
        if not isinstance(v, (list, tuple)):
            v = [v]
        return [item(x.strip() if isinstance(x, str) else x) for x in v]
    conv.__name__ = f"list of {item.__name__}"
    return conv


def _str(v):
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def _bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("1", "true", "yes", "on"):
        return True
    if isinstance(v, str) and v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _float_or(word):
    def conv(v):
        if isinstance(v, str) and v.strip().lower() == word:
            return word
        return _float(v)
    conv.__name__ = f"number or '{word}'"
    return conv


def _threads(v):
    if isinstance(v, str) and v.strip().lower() == "auto":
        return os.cpu_count() or 1
    n = _int(v)
    if n < 1:
        raise ValueError("threads must be at least 1")
    return n


_rules = _list(_str)

COMMON = {
    "seed": (0, _int, "master seed"),
    "threads": (None, _threads, f"worker threads, or 'auto' (default: ${THREADS_ENV} or 1)"),
    "out": (None, _str, "output path for the main table (CSV)"),
}

PARAMS = {
    "fit": {
        "design": (None, _str, "covariate CSV (header row)"),
        "response": (None, _str, "response CSV; a single column unless --response-column is given"),
        "response_column": (None, _str, "response column name"),
        "lambda": ("qut", _float_or("qut"), "penalty, or 'qut'"),
        "sigma": (1.0, _float_or("rcv"), "noise level, or 'rcv' to estimate it"),
        "m": (DEFAULT_M, _int, "Monte Carlo draws for QUT"),
        "standardize": (True, _bool, "scale columns to unit variance first"),
    },
    "qut": {
        "design": (None, _str, "covariate CSV (header row)"),
        "sigma": (1.0, _float, "noise level"),
        "m": (DEFAULT_M, _int, "Monte Carlo draws"),
        "alpha": (None, _float, "upper tail probability (default 1/sqrt(pi ln P))"),
        "standardize": (True, _bool, "scale columns to unit variance first"),
    },
    "select": {
        "design": (None, _str, "covariate CSV (header row)"),
        "response": (None, _str, "response CSV"),
        "response_column": (None, _str, "response column name"),
        "rule": ("qut", _str, f"one of {', '.join(RULES)}"),
        "sigma": ("rcv", _float_or("rcv"), "noise level, or 'rcv'"),
        "folds": (10, _int, "CV folds"),
        "n_lambda": (100, _int, "grid size for grid-based rules"),
        "m": (DEFAULT_M, _int, "Monte Carlo draws for QUT"),
        "standardize": (True, _bool, "scale columns to unit variance first"),
    },
    "variance": {
        "design": (None, _str, "covariate CSV (header row)"),
        "response": (None, _str, "response CSV"),
        "response_column": (None, _str, "response column name"),
        "method": ("rcv", _str, "rcv or residual"),
        "inner": ("cv", _str, "inner selector for RCV: cv or scaled_lasso"),
        "rule": ("cv", _str, "selector fixing the model for the residual method"),
        "standardize": (True, _bool, "scale columns to unit variance first"),
    },
    "phase": {
        "p": (200, _int, "number of columns"),
        "n_grid": (list(range(20, 181, 20)), _list(_int), "comma-separated N values"),
        "k_grid": (None, _list(_int), "comma-separated k values used for every N (default: 12-point grid)"),
        "amplitude": (10.0, _float, "nonzero coefficient value in units of sigma"),
        "reps": (50, _int, "replicates per cell"),
        "rules": (["qut", "oracle"], _rules, "rules: qut, oracle, cv, bic, sure, scaled_lasso"),
        "m": (DEFAULT_M, _int, "Monte Carlo draws for QUT"),
        "full_scale": (False, _bool, "P=1600, N=160..1440, every k, 100 replicates"),
        "json_out": (None, _str, "full JSON report path"),
    },
    "synthetic": {
        "n": (100, _int, "rows"),
        "p": (1000, _int, "columns"),
        "omega": ([0.0], _list(_float), "equicorrelation values"),
        "theta": ([0.5], _list(_float), "sparsity exponents, k = ceil(N^theta)"),
        "snr": ([1.0], _list(_float), "signal-to-noise ratios"),
        "reps": (100, _int, "replicates per cell"),
        "rules": (list(RULES), _rules, "rules to run"),
        "m": (DEFAULT_M, _int, "Monte Carlo draws for QUT"),
        "json_out": (None, _str, "full JSON report path"),
    },
    "split-eval": {
        "data": (None, _str, "data CSV (header row)"),
        "response_column": (None, _str, "response column name"),
        "train_fraction": (0.5, _float, "fraction of rows used for training"),
        "reps": (100, _int, "number of random splits"),
        "rules": (list(RULES), _rules, "rules to run"),
        "center": (True, _bool, "center training covariates and response"),
        "m": (DEFAULT_M, _int, "Monte Carlo draws for QUT"),
        "json_out": (None, _str, "full JSON report path"),
    },
    "abel": {
        "snr": ([0.25, 0.5, 1.0], _list(_float), "signal-to-noise ratios, sd(f)/sigma"),
        "reps": (100, _int, "replicates per snr"),
        "n": (512, _int, "grid size (power of 2)"),
        "r_max": (100.0, _float, "radius of the support"),
        "rules": (list(ABEL_RULES), _rules, "rules: qut, bic, sure"),
        "m": (DEFAULT_M, _int, "Monte Carlo draws for QUT"),
        "mse_convention": ("auto", _str, f"auto or one of {', '.join(MSE_CONVENTIONS)}"),
        "json_out": (None, _str, "full JSON report path"),
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qutlasso",
        description="Lasso with the quantile universal threshold, competing selectors and simulation studies.",
        epilog=(
            "exit codes: 0 success, 1 usage error, 2 invalid configuration, 3 runtime failure. "
            f"${THREADS_ENV} sets the default worker thread count. "
            "--config FILE reads a JSON object of parameters (names as listed, dashes or underscores); "
            "flags override it."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, params in PARAMS.items():
        sp = sub.add_parser(name, help=f"{name} (see '{name} --help')")
        sp.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
        for key, (default, conv, text) in {**params, **COMMON}.items():
            flag = "--" + key.replace("_", "-")
            if conv is _bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True, default=argparse.SUPPRESS,
                                help=f"{text} (default {default})")
                sp.add_argument("--no-" + key.replace("_", "-"), dest=key, action="store_const", const=False,
                                default=argparse.SUPPRESS, help=argparse.SUPPRESS)
            else:
                sp.add_argument(flag, dest=key, default=argparse.SUPPRESS, metavar="X",
                                help=f"{text} (default {default})")
    sp = sub.choices["fit"]
    sp.add_argument("--lam", dest="lambda", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def resolve_config(command: str, flags: dict) -> dict:
    """Defaults, then the JSON config file, then flags; every value converted and checked."""
    specs = {**PARAMS[command], **COMMON}
    layers = []
    if "config" in flags:
        path = flags.pop("config")
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        raw = {k.replace("-", "_"): v for k, v in raw.items()}
        cmd = raw.pop("command", command)
        if cmd != command:
            raise ConfigError(f"config is for command {cmd!r}, not {command!r}")
        raw.update(raw.pop("parameters", None) or {})
        unknown = sorted(set(raw) - set(specs))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        layers.append(raw)
    layers.append(flags)
    resolved = {k: d for k, (d, _, _) in specs.items()}
    env = os.environ.get(THREADS_ENV)
    if env:
        layers.insert(0, {"threads": env})
    for layer in layers:
        for key, value in layer.items():
            if value is None:
                resolved[key] = None
                continue
            try:
                resolved[key] = specs[key][1](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value for {key}: {exc}") from None
    if resolved["threads"] is None:
        resolved["threads"] = 1
    return resolved


# ---------------------------------------------------------------------------
# command implementations


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ConfigError("missing required parameter(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _positive(cfg, *keys):
    for k in keys:
        if cfg.get(k) is not None and not cfg[k] > 0:
            raise ConfigError(f"{k} must be positive")


def _check_rules(rules, allowed):
    bad = [r for r in rules if r not in allowed]
    if bad:
        raise ConfigError(f"unknown rule(s) {bad}; choose from {list(allowed)}")
    if not rules:
        raise ConfigError("no rules given")


def _load_design(cfg):
    header, X = read_numeric_csv(cfg["design"])
    return header, (standardize(X) if cfg["standardize"] else X)


def _load_xy(cfg):
    _require(cfg, "design", "response")
    header, design = _load_design(cfg)
    rh, Y = read_numeric_csv(cfg["response"])
    if cfg.get("response_column"):
        if cfg["response_column"] not in rh:
            raise ConfigError(f"response column {cfg['response_column']!r} not found")
        y = Y[:, rh.index(cfg["response_column"])]
    elif Y.shape[1] == 1:
        y = Y[:, 0]
    else:
        raise ConfigError("response file has several columns; pass --response-column")
    return header, design, y


def _sigma(cfg, design, y):
    if cfg["sigma"] == "rcv":
        est = rcv_variance(design, y, seed=cfg["seed"])
        return est.sigma, {"sigma_method": "rcv", "sigma_hat": est.sigma, "rcv": est.details}
    _positive(cfg, "sigma")
    return cfg["sigma"], {"sigma_method": "given"}


def _write_coefficients(path, header, support, beta_lasso, beta_refit, design):
    import pandas as pd

    scale = getattr(design, "column_scale", np.ones(len(header)))
    frame = pd.DataFrame({
        "index": np.arange(len(header)),
        "name": header,
        "in_support": np.isin(np.arange(len(header)), support),
        "beta_lasso": beta_lasso,
        "beta_refit": beta_refit,
        "beta_refit_original_scale": beta_refit * scale,
    })
    frame.to_csv(path, index=False, float_format="%.17g")


def cmd_qut(cfg):
    _require(cfg, "design")
    _positive(cfg, "sigma")
    _, design = _load_design(cfg)
    est = qut_monte_carlo(design, sigma=cfg["sigma"], m=cfg["m"], seed=cfg["seed"], alpha=cfg["alpha"],
                          keep_samples=False)
    return {"lambda_qut": est.lambda_qut, "alpha": est.alpha, "m": est.m, "null_quantile": est.quantile}


def cmd_fit(cfg):
    header, design, y = _load_xy(cfg)
    sigma, extra = _sigma(cfg, design, y)
    problem = LassoProblem(design, y)
    if cfg["lambda"] == "qut":
        est = qut_monte_carlo(problem.design, sigma=sigma, m=cfg["m"], seed=cfg["seed"], keep_samples=False)
        lam = est.lambda_qut
        extra.update(alpha=est.alpha)
    else:
        lam = cfg["lambda"]
        if lam < 0:
            raise ConfigError("lambda must be nonnegative")
    fit = problem.fit(lam)
    refit = refit_least_squares(problem.design, y, fit.active_set)
    if cfg["out"]:
        _write_coefficients(cfg["out"], header, fit.active_set, fit.beta, refit, problem.design)
    return {"lambda": lam, "sigma": sigma, "support": fit.active_set, "support_names": [header[i] for i in fit.active_set],
            "objective": fit.objective, "kkt_violation": fit.kkt_violation, "converged": fit.converged, **extra}


def cmd_select(cfg):
    header, design, y = _load_xy(cfg)
    _check_rules([cfg["rule"]], RULES)
    problem = LassoProblem(design, y)
    extra = {}
    rule = cfg["rule"]
    if rule in ("qut", "bic", "sure"):
        sigma, extra = _sigma(cfg, problem.design, y)
    if rule == "cv":
        from .selectors import lambda_grid

        sel = select_cv(problem, None, grid=lambda_grid(problem, n_lambda=cfg["n_lambda"]), folds=cfg["folds"],
                        seed=cfg["seed"])
    elif rule == "qut":
        sel = select_qut(problem, None, sigma=sigma, m=cfg["m"], seed=cfg["seed"])
    elif rule == "scaled_lasso":
        sel = select_scaled_lasso(problem, None)
    else:
        from .selectors import lambda_grid

        grid = lambda_grid(problem, n_lambda=cfg["n_lambda"])
        sel = (select_bic if rule == "bic" else select_sure)(problem, None, grid=grid, sigma=sigma)
    if cfg["out"]:
        _write_coefficients(cfg["out"], header, sel.support, sel.beta_lasso, sel.beta_refit, problem.design)
    return {"rule": rule, "lambda": sel.lam, "support": sel.support, "support_names": [header[i] for i in sel.support],
            "sigma_used": sel.sigma_used, **extra}


def cmd_variance(cfg):
    header, design, y = _load_xy(cfg)
    if cfg["method"] == "rcv":
        if cfg["inner"] not in ("cv", "scaled_lasso"):
            raise ConfigError("inner must be cv or scaled_lasso")
        est = rcv_variance(design, y, seed=cfg["seed"], inner_selector=cfg["inner"])
    elif cfg["method"] == "residual":
        _check_rules([cfg["rule"]], ("cv", "scaled_lasso"))
        problem = LassoProblem(design, y)
        sel = select_cv(problem, None, seed=cfg["seed"]) if cfg["rule"] == "cv" else select_scaled_lasso(problem, None)
        est = residual_variance(problem.design, y, sel.beta_refit, len(sel.support))
    else:
        raise ConfigError("method must be rcv or residual")
    return {"sigma2": est.sigma2, "sigma": est.sigma, "method": est.method, "k_used": est.k_used, "details": est.details}


def _write_report(report, cfg):
    if cfg["out"]:
        report.to_csv(cfg["out"])
    if cfg.get("json_out"):
        report.to_json(cfg["json_out"])
    return {"summary": report.summary.to_dict(orient="records"), "metadata": report.metadata}


def cmd_phase(cfg):
    _check_rules(cfg["rules"], ("qut", "oracle", "cv", "bic", "sure", "scaled_lasso"))
    _positive(cfg, "p", "reps", "amplitude")
    if cfg["full_scale"]:
        pcfg = PhaseTransitionConfig.full_scale(seed=cfg["seed"], m=cfg["m"], signal_amplitude=cfg["amplitude"])
    else:
        k_policy = {n: cfg["k_grid"] for n in cfg["n_grid"]} if cfg["k_grid"] else None
        pcfg = PhaseTransitionConfig(p=cfg["p"], n_grid=cfg["n_grid"], k_policy=k_policy,
                                     signal_amplitude=cfg["amplitude"], replications=cfg["reps"],
                                     seed=cfg["seed"], m=cfg["m"])
    report = run_phase_transition(pcfg, rules=tuple(cfg["rules"]), n_jobs=cfg["threads"])
    return _write_report(report, cfg)


def cmd_synthetic(cfg):
    _check_rules(cfg["rules"], RULES)
    _positive(cfg, "n", "p", "reps")
    try:
        configs = [SyntheticConfig(n=cfg["n"], p=cfg["p"], omega=w, theta=t, snr=s, replications=cfg["reps"],
                                   seed=cfg["seed"], m=cfg["m"])
                   for w in cfg["omega"] for t in cfg["theta"] for s in cfg["snr"]]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    reports = [run_synthetic(c, rules=tuple(cfg["rules"]), n_jobs=cfg["threads"]) for c in configs]
    return _write_report(concat_reports(reports), cfg)


def cmd_split_eval(cfg):
    _require(cfg, "data", "response_column")
    _check_rules(cfg["rules"], RULES)
    _positive(cfg, "reps")
    if not 0 < cfg["train_fraction"] < 1:
        raise ConfigError("train_fraction must lie in (0, 1)")
    try:
        data = load_dataset(cfg["data"], cfg["response_column"])
    except ValueError as exc:
        if "not in" in str(exc):
            raise ConfigError(str(exc)) from None
        raise
    report = run_split_eval(data, train_fraction=cfg["train_fraction"], repetitions=cfg["reps"],
                            rules=tuple(cfg["rules"]), seed=cfg["seed"], center=cfg["center"], m=cfg["m"],
                            n_jobs=cfg["threads"])
    return _write_report(report, cfg)


def cmd_abel(cfg):
    _check_rules(cfg["rules"], ABEL_RULES)
    _positive(cfg, "reps", "r_max")
    if any(s <= 0 for s in cfg["snr"]):
        raise ConfigError("snr values must be positive")
    conv = cfg["mse_convention"]
    if conv != "auto" and conv not in MSE_CONVENTIONS:
        raise ConfigError(f"mse_convention must be auto or one of {MSE_CONVENTIONS}")
    report = run_abel_experiment(snr_list=cfg["snr"], rules=cfg["rules"], replications=cfg["reps"],
                                 seed=cfg["seed"], n=cfg["n"], r_max=cfg["r_max"], m=cfg["m"])
    if conv == "auto":
        snr0 = 0.25 if any(np.isclose(cfg["snr"], 0.25)) else min(cfg["snr"])
        rule0 = "qut" if "qut" in cfg["rules"] else cfg["rules"][0]
        conv = calibrate_mse_convention(report, snr=snr0, rule=rule0)
    report.metadata["mse_convention"] = conv
    out = {"mse_convention": conv, "metadata": report.metadata}
    if cfg["out"]:
        table = write_summary_csv(report, cfg["out"], mse_convention=conv)
    else:
        from .abel import summary_table

        table = summary_table(report, conv)
        table.columns = [f"snr={s:g}:{m}" for s, m in table.columns]
    out["table"] = table.reset_index(names="method").to_dict(orient="records")
    if cfg.get("json_out"):
        report.to_json(cfg["json_out"])
    return out


COMMANDS = {
    "fit": cmd_fit, "qut": cmd_qut, "select": cmd_select, "variance": cmd_variance, "phase": cmd_phase,
    "synthetic": cmd_synthetic, "split-eval": cmd_split_eval, "abel": cmd_abel,
}


def _error(code, kind, message, command=None):
    record = {"status": "error", "exit_code": code, "error": kind, "message": str(message)}
    if command:
        record["command"] = command
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _error(EXIT_USAGE, "UsageError", exc)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if not args.command:
        parser.print_help(sys.stderr)
        return _error(EXIT_USAGE, "UsageError", "no command given")
    command = args.command
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        cfg = resolve_config(command, flags)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = COMMANDS[command](cfg)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, "ConfigError", exc, command)
    except (OSError, ArithmeticError) as exc:
        return _error(EXIT_RUNTIME, type(exc).__name__, exc, command)
    except (QutError, ValueError) as exc:
        # precondition failures raised by the library: the inputs were invalid
        return _error(EXIT_CONFIG, type(exc).__name__, exc, command)
    except Exception as exc:  # noqa: BLE001 - last-resort machine-readable record
        return _error(EXIT_RUNTIME, type(exc).__name__, exc, command)
    payload = {"status": "ok", "command": command, "config": cfg, "result": result,
               "warnings": [str(w.message) for w in caught]}
    print(json.dumps(_jsonable(payload), indent=1))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
