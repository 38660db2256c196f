"""Renormalization-group tools for ARMA processes and discretized linear SDEs."""

__version__ = "0.1.0"

from .arma_core import ArmaModel, TimeSeries, autocovariance, new_arma, simulate
from .decimation import Arma21Params, decimate_arma21, decimate_general, ma_from_covariance
from .errors import ArmargError
from .inference import arma21_mle, effective_ar2, euler_mle, quartic_experiment
from .rg_flow import FixedPointSpec, TaylorParams, classify, flow, make_fixed_point, rg_step
from .sde_exact import LinearSde2D, exact_arma_params, euler_discretize, simulate_exact

__all__ = [
    "ArmaModel", "TimeSeries", "autocovariance", "new_arma", "simulate",
    "Arma21Params", "decimate_arma21", "decimate_general", "ma_from_covariance",
    "ArmargError",
    "arma21_mle", "effective_ar2", "euler_mle", "quartic_experiment",
    "FixedPointSpec", "TaylorParams", "classify", "flow", "make_fixed_point", "rg_step",
    "LinearSde2D", "exact_arma_params", "euler_discretize", "simulate_exact",
]
