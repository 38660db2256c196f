"""Command-line front end.

Every subcommand resolves its configuration from defaults, an optional JSON
``--config`` file and command-line flags (in increasing precedence), writes
its data file and a ``<output>.manifest.json`` that records the resolved
configuration and seed. A manifest can be passed back as ``--config`` to
reproduce the run.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical failures.
Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__, kernels
from .arma_core import ArmaModel, derive_seed, new_seed, simulate
from .decimation import Arma21Params, decimate_arma21, decimate_general, q_rule
from .errors import (
    DegenerateSamplingError,
    EstimationFailure,
    FactorizationError,
    InvalidCovarianceError,
    InvalidParameterError,
    NonStationaryError,
    UnsupportedOrderError,
)
from .inference import (
    EstimateReport,
    aggregate_reports,
    arma21_report,
    effective_ar2,
    euler_mle,
    quartic_experiment,
    run_replicas,
    velocity_moments,
)
from .io import dump_json, flatten, read_series, write_csv, write_json, write_manifest, write_orbit, write_series
from .rg_flow import (
    OVERFLOW_GUARD,
    FixedPointSpec,
    TaylorParams,
    classify,
    euler_initial_condition,
    flow,
    make_fixed_point,
)
from .sde_exact import (
    LinearSde2D,
    continuum_to_fixed_point,
    euler_arma_params,
    exact_arma_params,
    simulate_euler,
    simulate_exact,
    small_tau_expansion,
)

__all__ = ["main", "ConfigError", "COMMANDS"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(InvalidParameterError):
    """Invalid configuration; carries the offending field and file position when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.field, self.line, self.column = field, line, column


# ---------------------------------------------------------------- field types


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    return [float(v) for v in text.split(",") if v.strip()] if text else []


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [_int(v) for v in text]
    return [_int(v) for v in str(text).split(",") if v.strip()]


def _int(v) -> int:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    try:
        return int(str(v).strip())
    except ValueError:
        pass
    f = float(v)
    if f != int(f):
        raise ValueError("expected an integer")
    return int(f)


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _opt_float(v):
    return None if v is None else float(v)


def _opt_int(v):
    return None if v is None else _int(v)


def _opt_str(v):
    return None if v is None else str(v)


@dataclass(frozen=True)
class Field:
    name: str
    conv: Callable[[Any], Any]
    default: Any
    help: str = ""
    choices: tuple | None = None
    flag: bool = False


GLOBAL_FIELDS = (
    Field("seed", _opt_int, None, "64-bit seed; drawn from OS entropy when omitted"),
    Field("output", str, None, "data file path (default <command>.<format>)"),
    Field("format", str, None, "csv or json", ("csv", "json")),
    Field("replicas", _int, 1, "independent replicas"),
    Field("workers", _opt_int, None, "worker threads for replicas"),
)

SDE_FIELDS = (
    Field("lam", float, 0.0, "position relaxation rate lambda"),
    Field("kappa", float, 0.0, "stiffness"),
    Field("eta", float, 1.0, "damping"),
    Field("sxx2", float, 0.0, "position noise variance rate"),
    Field("sxv2", float, 0.0, "cross noise covariance rate"),
    Field("svv2", _opt_float, None, "velocity noise variance rate (default 2 eta T)"),
    Field("temperature", float, 1.0, "temperature T used when svv2 is omitted"),
)

IC_FIELDS = (
    Field("ic", str, "euler", "initial condition kind", ("euler", "fixed", "order0")),
    Field("sigma2", float, 1.0, "noise amplitude of the Euler initial condition"),
    Field("cls", str, "A", "fixed-point class", ("A", "B", "C", "D")),
    Field("u", float, 0.0), Field("s", float, 0.0), Field("z", float, 0.0), Field("b", float, 0.0),
    Field("psi0", float, 0.0), Field("theta0", float, 0.0), Field("alpha0", float, 1.0), Field("beta0", float, 0.0),
    Field("K", _int, 3, "Taylor order"),
    Field("overflow_guard", float, OVERFLOW_GUARD),
)

COMMANDS: dict[str, dict] = {
    "simulate": {
        "help": "simulate a time series",
        "fields": (
            Field("scheme", str, "exact", "exact, euler or arma", ("exact", "euler", "arma")),
            Field("n", _int, 1000, "number of samples"),
            Field("tau", float, 0.01, "sampling interval"),
            *SDE_FIELDS,
            Field("phi", _floats, [], "AR coefficients, comma separated"),
            Field("nu", _floats, [], "lagged MA coefficients, comma separated"),
            Field("mu", float, 1.0, "current-noise coefficient"),
            Field("burn_in", _opt_int, None, "discarded leading steps"),
            Field("stationary", _bool, False, "start exact simulation from the stationary law", flag=True),
            Field("x0", float, 0.0), Field("v0", float, 0.0),
        ),
        "format": "csv",
    },
    "decimate": {
        "help": "decimate an ARMA model",
        "fields": (
            Field("phi", _floats, [], "AR coefficients"),
            Field("nu", _floats, [], "lagged MA coefficients"),
            Field("mu", float, 1.0),
            Field("psi", _opt_float, None, "ARMA(2,1) covariance form: psi"),
            Field("theta", _opt_float, None), Field("alpha", _opt_float, None), Field("beta", _opt_float, None),
            Field("steps", _int, 1, "number of decimations"),
        ),
        "format": "json",
    },
    "flow": {
        "help": "iterate the RG map",
        "fields": (*IC_FIELDS, Field("eta", float, 1.0), Field("kappa", float, 0.0), Field("iterations", _int, 20)),
        "format": "csv",
    },
    "classify": {
        "help": "classify the RG limit of an initial condition",
        "fields": (
            *IC_FIELDS,
            Field("eta", float, 1.0), Field("kappa", float, 0.0),
            Field("tol", float, 1e-9), Field("max_iter", _int, 200), Field("template_tol", float, 1e-6),
            Field("basin_grid", _int, 0, "classify an N x N grid of order-0 points instead"),
        ),
        "format": "json",
    },
    "exactify": {
        "help": "exact and Euler ARMA(2,1) of a linear SDE",
        "fields": (*SDE_FIELDS, Field("tau", float, 0.01), Field("method", str, "auto", "", ("auto", "closed", "quad"))),
        "format": "json",
    },
    "infer": {
        "help": "estimate damping and temperature",
        "fields": (
            Field("input", _opt_str, None, "series file; simulated when omitted"),
            Field("tau", _opt_float, None, "sampling interval of --input when not recorded"),
            Field("estimator", str, "euler", "euler or arma21", ("euler", "arma21")),
            Field("with_kappa", _bool, False, "include the stiffness regressor", flag=True),
            Field("cubic", _bool, False, "include the cubic-force regressor", flag=True),
            Field("scheme", str, "exact", "simulation scheme", ("exact", "euler")),
            *SDE_FIELDS,
            Field("taus", _floats, [0.01], "sweep of sampling intervals"),
            Field("ns", _ints, [100_000], "sweep of series lengths"),
            Field("burn_in", _int, 1000),
            Field("stationary", _bool, False, flag=True),
            Field("per_replica", _bool, False, "also write one row per replica", flag=True),
        ),
        "format": "csv",
    },
    "experiment": {
        "help": "named experiments: euler-bias, quartic, effective-ar2",
        "fields": (
            Field("name", str, "euler-bias", "", ("euler-bias", "quartic", "effective-ar2")),
            Field("eta", float, 1.0), Field("kappa", _opt_float, None), Field("lambda4", _opt_float, None),
            Field("temperature", float, 1.0),
            Field("tau", float, 0.01), Field("taus", _floats, [1e-3, 1e-2, 1e-1]),
            Field("n", _int, 1_000_000),
            Field("tau_sim", _opt_float, None), Field("subsample", _int, 10), Field("burn_in_time", float, 50.0),
            Field("einstein", str, "exact", "", ("exact", "leading")),
        ),
        "format": "csv",
    },
}


# ---------------------------------------------------------------- parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="armarg", description="ARMA renormalization and discretization toolkit")
    parser.add_argument("--version", action="version", version=f"armarg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"])
        p.add_argument("--config", default=None, help="JSON config file or a previous run's manifest")
        for f in (*GLOBAL_FIELDS, *spec["fields"]):
            flag = "--" + f.name.replace("_", "-")
            if f.flag:
                p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS, help=f.help)
            else:
                p.add_argument(flag, dest=f.name, default=argparse.SUPPRESS, help=f.help, metavar=f.name.upper())
    return parser


def _load_config(path: str, command: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if "config" in data and "command" in data:  # a manifest
        if data["command"] != command:
            raise ConfigError(f"manifest is for {data['command']!r}, not {command!r}", field="command")
        data = data["config"]
    return data


def resolve_config(command: str, flags: dict, file_cfg: dict | None = None) -> dict:
    """Merge defaults, config-file values and flags, converting and validating each field."""
    spec = COMMANDS[command]
    fields = {f.name: f for f in (*GLOBAL_FIELDS, *spec["fields"])}
    out = {}
    for source in (file_cfg or {}, flags):
        unknown = set(source) - set(fields)
        if unknown:
            raise ConfigError(f"unknown field {sorted(unknown)[0]!r} for {command}", field=sorted(unknown)[0])
    for name, f in fields.items():
        if name in flags:
            raw = flags[name]
        elif file_cfg and name in file_cfg:
            raw = file_cfg[name]
        else:
            out[name] = f.default
            continue
        try:
            val = f.conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field {name!r}: cannot parse {raw!r} ({exc})", field=name) from None
        if f.choices and val not in f.choices:
            raise ConfigError(f"field {name!r} must be one of {list(f.choices)}, got {val!r}", field=name)
        out[name] = val
    if out["format"] is None:
        out["format"] = spec["format"]
    if out["output"] is None:
        out["output"] = f"{command}.{out['format']}"
    if out["seed"] is None:
        out["seed"] = new_seed()
    if out["seed"] < 0 or out["seed"] >= 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", field="seed")
    if out["replicas"] < 1:
        raise ConfigError("replicas must be >= 1", field="replicas")
    return out


# ---------------------------------------------------------------- commands


def _sde(cfg: dict) -> LinearSde2D:
    svv2 = cfg["svv2"]
    if svv2 is None:
        svv2 = 2 * cfg["eta"] * cfg["temperature"] if cfg["eta"] > 0 else 2 * cfg["temperature"]
    return LinearSde2D(lam=cfg["lam"], kappa=cfg["kappa"], eta=cfg["eta"], sxx2=cfg["sxx2"], sxv2=cfg["sxv2"], svv2=svv2)


def _initial(cfg: dict) -> TaylorParams:
    K = cfg["K"]
    if cfg["ic"] == "euler":
        return euler_initial_condition(cfg["eta"], cfg["kappa"], cfg["sigma2"], K)
    if cfg["ic"] == "fixed":
        return make_fixed_point(FixedPointSpec(cfg["cls"], cfg["u"], cfg["s"], cfg["z"], cfg["b"]), K)
    arr = np.zeros((4, K + 1))
    arr[:, 0] = [cfg["psi0"], cfg["theta0"], cfg["alpha0"], cfg["beta0"]]
    return TaylorParams.from_array(arr)


def cmd_simulate(cfg: dict) -> dict:
    if cfg["scheme"] == "arma":
        model = ArmaModel(tuple(cfg["phi"]), tuple(cfg["nu"]), cfg["mu"])
        s = simulate(model, cfg["n"], tau=cfg["tau"], seed=cfg["seed"], burn_in=cfg["burn_in"])
        info = {"model": model.to_dict()}
    elif cfg["scheme"] == "euler":
        sde = _sde(cfg)
        s = simulate_euler(sde, cfg["tau"], cfg["n"], seed=cfg["seed"], burn_in=cfg["burn_in"])
        info = {"sde": sde.to_dict()}
    else:
        sde = _sde(cfg)
        s = simulate_exact(sde, cfg["tau"], cfg["n"], seed=cfg["seed"], x0=cfg["x0"], v0=cfg["v0"],
                           burn_in=cfg["burn_in"] or 0, stationary=cfg["stationary"])
        info = {"sde": sde.to_dict()}
    env = write_series(cfg["output"], s, cfg["format"])
    return {"series": env, **info}


def _write_record(cfg: dict, record: dict) -> None:
    if cfg["format"] == "json":
        write_json(cfg["output"], record)
    else:
        write_csv(cfg["output"], ["field", "value"], flatten(record))


def cmd_decimate(cfg: dict) -> dict:
    cov = [cfg[k] for k in ("psi", "theta", "alpha", "beta")]
    if any(v is not None for v in cov):
        if any(v is None for v in cov[:3]):
            raise ConfigError("the covariance form needs psi, theta and alpha", field="alpha")
        cur = Arma21Params(*[v or 0.0 for v in cov])
        record = {"mode": "arma21", "before": cur.to_dict(), "after": []}
        for _ in range(cfg["steps"]):
            cur = decimate_arma21(cur)
            record["after"].append(cur.to_dict())
    else:
        cur = ArmaModel(tuple(cfg["phi"]), tuple(cfg["nu"]), cfg["mu"])
        record = {"mode": "general", "before": cur.to_dict(), "after": []}
        for _ in range(cfg["steps"]):
            qt = q_rule(cur.p, cur.q)
            cur = decimate_general(cur)
            record["after"].append({**cur.to_dict(), "q_rule": qt})
    _write_record(cfg, record)
    return {"result": record["after"][-1] if record["after"] else record["before"]}


def cmd_flow(cfg: dict) -> dict:
    orbit = flow(_initial(cfg), cfg["iterations"], overflow_guard=cfg["overflow_guard"])
    write_orbit(cfg["output"], orbit, cfg["format"])
    return {"divergent": orbit.divergent, "steps": len(orbit) - 1, "final": orbit.states[-1].to_dict()}


def _triangle_grid(N: int) -> list[tuple[float, float]]:
    return [(p, t) for t in np.linspace(-1.5, 1.5, N) for p in np.linspace(-2.5, 2.5, N)]


def cmd_classify(cfg: dict) -> dict:
    kw = dict(tol=cfg["tol"], max_iter=cfg["max_iter"], template_tol=cfg["template_tol"], overflow_guard=cfg["overflow_guard"])
    if cfg["basin_grid"] > 0:
        rows, counts = [], {}
        for p0, t0 in _triangle_grid(cfg["basin_grid"]):
            c = classify(_initial({**cfg, "ic": "order0", "psi0": p0, "theta0": t0}), **kw)
            rows.append((p0, t0, c.verdict, c.iterations))
            counts[c.verdict] = counts.get(c.verdict, 0) + 1
        if cfg["format"] == "json":
            write_json(cfg["output"], [dict(zip(("psi0", "theta0", "verdict", "iterations"), r)) for r in rows])
        else:
            write_csv(cfg["output"], ["psi0", "theta0", "verdict", "iterations"], rows)
        return {"counts": counts}
    c = classify(_initial(cfg), **kw)
    record = c.to_dict()
    if cfg["ic"] == "euler":
        sde = LinearSde2D(kappa=cfg["kappa"], eta=cfg["eta"], svv2=cfg["sigma2"])
        record["continuum"] = continuum_to_fixed_point(sde).to_dict()
    _write_record(cfg, record)
    return {"verdict": c.verdict}


def cmd_exactify(cfg: dict) -> dict:
    sde, tau = _sde(cfg), cfg["tau"]
    record = {
        "sde": sde.to_dict(),
        "tau": tau,
        "exact": exact_arma_params(sde, tau, cfg["method"]).to_dict(),
        "euler": euler_arma_params(sde, tau).to_dict(),
        "small_tau": small_tau_expansion(sde, tau).to_dict(),
        "fixed_point": continuum_to_fixed_point(sde).to_dict(),
    }
    _write_record(cfg, record)
    return {"exact": record["exact"]}


def _fit(series, cfg: dict) -> EstimateReport:
    if cfg["estimator"] == "arma21":
        return arma21_report(series)
    return euler_mle(series, with_kappa=cfg["with_kappa"], cubic=cfg["cubic"])


def _write_reports(cfg: dict, reports: list[EstimateReport]) -> None:
    if cfg["format"] == "json":
        write_json(cfg["output"], [r.to_dict() for r in reports])
    else:
        write_csv(cfg["output"], EstimateReport.csv_header(), (r.csv_row() for r in reports))


def cmd_infer(cfg: dict) -> dict:
    if cfg["input"] is not None:
        rep = _fit(read_series(cfg["input"], cfg["tau"]), cfg)
        _write_reports(cfg, [rep])
        return {"rows": 1}
    sde = _sde(cfg)
    rows, k = [], 0
    for tau in cfg["taus"]:
        for n in cfg["ns"]:
            def one(seed, tau=tau, n=n):
                if cfg["scheme"] == "euler":
                    s = simulate_euler(sde, tau, n, seed=seed)
                else:
                    s = simulate_exact(sde, tau, n, seed=seed, burn_in=cfg["burn_in"], stationary=cfg["stationary"])
                r = _fit(s, cfg)
                r.extra = {"seed": seed}
                return r

            reps = run_replicas(one, derive_seed(cfg["seed"], k), cfg["replicas"], cfg["workers"])
            k += 1
            if cfg["per_replica"] or cfg["replicas"] == 1:
                rows += reps
            if cfg["replicas"] > 1:
                rows.append(aggregate_reports(reps))
    _write_reports(cfg, rows)
    return {"rows": len(rows)}


def cmd_experiment(cfg: dict) -> dict:
    name = cfg["name"]
    if name == "effective-ar2":
        rows = []
        for tau in cfg["taus"]:
            m = effective_ar2(cfg["eta"], cfg["temperature"], tau, einstein=cfg["einstein"])
            v2, v12 = velocity_moments(m, tau)
            target = 1 - 2 / 3 * cfg["eta"] * tau
            rows.append((tau, m.phi[0], m.phi[1], m.mu**2, v2, v12 / v2, abs(v2 - cfg["temperature"]), abs(v12 / v2 - target)))
        header = ["tau", "phi1", "phi2", "mu2", "v2", "ratio", "v2_residual", "ratio_residual"]
        if cfg["format"] == "json":
            write_json(cfg["output"], [dict(zip(header, r)) for r in rows])
        else:
            write_csv(cfg["output"], header, rows)
        return {"rows": len(rows)}

    if name == "quartic":
        kappa = -1.0 if cfg["kappa"] is None else cfg["kappa"]
        lam4 = 1.0 if cfg["lambda4"] is None else cfg["lambda4"]

        def one(seed):
            return quartic_experiment(cfg["eta"], kappa, lam4, cfg["temperature"], tau_sim=cfg["tau_sim"],
                                      subsample=cfg["subsample"], n=cfg["n"], seed=seed, burn_in_time=cfg["burn_in_time"])
    else:
        sde = LinearSde2D(kappa=cfg["kappa"] or 0.0, eta=cfg["eta"], svv2=2 * cfg["eta"] * cfg["temperature"])

        def one(seed):
            s = simulate_exact(sde, cfg["tau"], cfg["n"], seed=seed, burn_in=int(10 / (cfg["eta"] * cfg["tau"])))
            r = euler_mle(s, with_kappa=cfg["kappa"] is not None)
            r.extra = {"seed": seed}
            return r

    reps = run_replicas(one, cfg["seed"], cfg["replicas"], cfg["workers"])
    agg = aggregate_reports(reps) if len(reps) > 1 else reps[0]
    _write_reports(cfg, reps + ([agg] if len(reps) > 1 else []))
    return {"eta_hat": agg.eta_hat, "eta_se": agg.eta_se, "temperature_hat": agg.temperature_hat,
            "temperature_se": agg.temperature_se, "label": agg.label}


HANDLERS = {
    "simulate": cmd_simulate,
    "decimate": cmd_decimate,
    "flow": cmd_flow,
    "classify": cmd_classify,
    "exactify": cmd_exactify,
    "infer": cmd_infer,
    "experiment": cmd_experiment,
}

_CONFIG_ERRORS = (InvalidParameterError, InvalidCovarianceError, NonStationaryError, UnsupportedOrderError, OSError)
_NUMERIC_ERRORS = (FactorizationError, DegenerateSamplingError, EstimationFailure, ArithmeticError, np.linalg.LinAlgError)


def _report_error(exc: Exception, code: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for key in ("field", "line", "column"):
        val = getattr(exc, key, None)
        if val is not None:
            err[key] = val
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def run(argv=None) -> dict:
    """Parse, execute and return the manifest; raises on failure."""
    ns = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    file_cfg = _load_config(ns.config, ns.command) if ns.config else None
    cfg = resolve_config(ns.command, flags, file_cfg)
    summary = HANDLERS[ns.command](cfg)
    manifest = {
        "armarg_version": __version__,
        "command": ns.command,
        "backend": kernels.BACKEND,
        "config": cfg,
        "seed": cfg["seed"],
        "output": cfg["output"],
        **summary,
    }
    path = write_manifest(cfg["output"], manifest)
    manifest["manifest"] = str(path)
    return manifest


def main(argv=None) -> int:
    try:
        manifest = run(argv)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except _CONFIG_ERRORS as exc:
        return _report_error(exc, EXIT_CONFIG)
    except _NUMERIC_ERRORS as exc:
        return _report_error(exc, EXIT_NUMERIC)
    sys.stdout.write(dump_json({"output": manifest["output"], "manifest": manifest["manifest"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
