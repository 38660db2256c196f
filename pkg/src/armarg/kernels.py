"""Backend selection for the hot loops.

The compiled extension is used when importable. Setting the environment variable
``ARMARG_PURE_PYTHON=1`` forces the NumPy fallback.
"""

from __future__ import annotations

import importlib
import os

__all__ = ["BACKEND", "load_backend", "var2_simulate", "langevin_euler", "ma1_innovations"]


def load_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "cython":
        return importlib.import_module("armarg._kernels")
    if name == "python":
        return importlib.import_module("armarg._pykernels")
    raise ValueError(f"unknown backend {name!r}")


def _select():
    if os.environ.get("ARMARG_PURE_PYTHON", "").strip() not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _impl = _select()
var2_simulate = _impl.var2_simulate
langevin_euler = _impl.langevin_euler
ma1_innovations = _impl.ma1_innovations
