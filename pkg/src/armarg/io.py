"""File formats: series, orbits, reports and run manifests.

CSV files use ``.`` as decimal separator, ``\\n`` line endings and a header
row. Floats are written with 17 significant digits so they round-trip exactly.
JSON output maps non-finite floats to ``null``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .arma_core import TimeSeries
from .errors import InvalidParameterError
from .rg_flow import FlowOrbit

__all__ = [
    "format_float",
    "to_jsonable",
    "dump_json",
    "write_json",
    "write_csv",
    "manifest_path",
    "write_manifest",
    "read_manifest",
    "write_series",
    "read_series",
    "write_orbit",
    "orbit_header",
    "flatten",
]


def format_float(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x) + 0.0) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return str(x)


def to_jsonable(obj):
    """Recursively convert numpy values and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def dump_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dump_json(obj), encoding="utf-8", newline="\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) for v in row])


def manifest_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.name + ".manifest.json")


def write_manifest(output, manifest: dict) -> Path:
    path = manifest_path(output)
    write_json(path, manifest)
    return path


def read_manifest(output) -> dict | None:
    path = manifest_path(output)
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _envelope(series: TimeSeries) -> dict:
    return {"tau": series.tau, "seed": series.seed, "scheme": series.scheme, "n": len(series), "meta": dict(series.meta)}


def write_series(path, series: TimeSeries, fmt: str = "csv") -> dict:
    """Write a series; returns the JSON envelope (``tau``, ``seed``, ``scheme``)."""
    env = _envelope(series)
    if fmt == "json":
        write_json(path, {**env, "values": series.values})
    elif fmt == "csv":
        write_csv(path, ["n", "x"], zip(range(len(series)), series.values))
    else:
        raise InvalidParameterError(f"unknown format {fmt!r}")
    return env


def read_series(path, tau: float | None = None) -> TimeSeries:
    """Read a series written by :func:`write_series` or any CSV with an ``x`` column.

    ``tau`` falls back to the JSON envelope or manifest, and must be given otherwise.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidParameterError(f"no such file: {path}")
    if path.suffix.lower() == ".json":
        d = json.loads(path.read_text(encoding="utf-8"))
        tau = tau if tau is not None else d.get("tau")
        if tau is None:
            raise InvalidParameterError("tau is missing from the series file")
        return TimeSeries(tau=tau, values=d["values"], seed=d.get("seed"), scheme="external")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "x" not in reader.fieldnames:
            raise InvalidParameterError(f"{path}: expected a header row with an 'x' column")
        values = [float(row["x"]) for row in reader]
    seed = None
    if tau is None:
        man = read_manifest(path)
        env = (man or {}).get("series", {})
        tau = env.get("tau")
        seed = env.get("seed")
        if tau is None:
            raise InvalidParameterError(f"{path}: tau not given and no manifest found")
    return TimeSeries(tau=tau, values=values, seed=seed, scheme="external")


def orbit_header(K: int) -> list[str]:
    return ["l"] + [f"{n}_{k}" for n in ("psi", "theta", "alpha", "beta") for k in range(K + 1)]


def write_orbit(path, orbit: FlowOrbit, fmt: str = "csv") -> None:
    K = orbit.states[0].K
    if fmt == "json":
        write_json(path, {"divergent": orbit.divergent, "states": [s.to_dict() for s in orbit.states]})
    elif fmt == "csv":
        write_csv(path, orbit_header(K), ([l, *s.as_array().ravel()] for l, s in enumerate(orbit.states)))
    else:
        raise InvalidParameterError(f"unknown format {fmt!r}")


def flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    """Dotted ``(key, value)`` pairs of a nested dict/list structure."""
    out = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            out += flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        for i, v in enumerate(obj):
            out += flatten(v, f"{prefix}{i}.")
    else:
        out.append((prefix[:-1], "" if obj is None else obj))
    return out
