"""RG map on truncated Taylor coefficients of ARMA(2, 1) parameters.

Each parameter is expanded in the sampling interval, ``A(tau) = sum_k A_k tau^k``.
One RG step decimates the process (doubling the time step) and rescales
``A_k -> 2^{-k} A~_k`` so that the step is again ``tau``. Products of series are
truncated at order K, which closes the map at every order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .decimation import Arma21Params
from .errors import InvalidParameterError, UnsupportedOrderError

__all__ = [
    "TaylorParams",
    "FixedPointSpec",
    "FlowOrbit",
    "Classification",
    "OVERFLOW_GUARD",
    "FIXED_POINT_CLASSES",
    "rg_step",
    "flow",
    "inertial_flow_closed_form",
    "make_fixed_point",
    "classify",
    "euler_initial_condition",
]

OVERFLOW_GUARD = 1e12
FIXED_POINT_CLASSES = ("A", "B", "C", "D")
_NAMES = ("psi", "theta", "alpha", "beta")


@dataclass(frozen=True, eq=False)
class TaylorParams:
    """Series coefficients ``psi_k, theta_k, alpha_k, beta_k`` for ``k = 0..K``."""

    psi: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        arrays = [np.array(getattr(self, n), dtype=float).ravel() for n in _NAMES]
        if len({a.size for a in arrays}) != 1 or arrays[0].size == 0:
            raise InvalidParameterError("psi, theta, alpha and beta need the same non-zero length")
        for name, arr in zip(_NAMES, arrays):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def K(self) -> int:
        return self.psi.size - 1

    def as_array(self) -> np.ndarray:
        """Stack as a ``(4, K + 1)`` array (psi, theta, alpha, beta rows)."""
        return np.vstack((self.psi, self.theta, self.alpha, self.beta))

    @classmethod
    def from_array(cls, arr) -> "TaylorParams":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != 4:
            raise InvalidParameterError("expected an array of shape (4, K + 1)")
        return cls(*arr)

    @classmethod
    def zeros(cls, K: int) -> "TaylorParams":
        return cls.from_array(np.zeros((4, K + 1)))

    def evaluate(self, tau: float) -> Arma21Params:
        """Sum the truncated series at a given sampling interval."""
        powers = float(tau) ** np.arange(self.K + 1)
        return Arma21Params(*(self.as_array() @ powers))

    def to_dict(self) -> dict:
        return {n: getattr(self, n).tolist() for n in _NAMES}

    def __repr__(self) -> str:
        body = ", ".join(f"{n}={getattr(self, n).tolist()}" for n in _NAMES)
        return f"TaylorParams(K={self.K}, {body})"


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: a.size]


def rg_step(tp: TaylorParams) -> TaylorParams:
    """One RG iteration: decimate the series, then rescale order k by ``2^{-k}``.

    Evaluates, as truncated Cauchy products,

    ``psi~ = psi^2 + 2 theta``, ``theta~ = -theta^2``,
    ``alpha~ = (1 + psi^2 + theta^2) alpha + 2 psi (1 - theta) beta``,
    ``beta~ = psi (1 - theta) beta - theta alpha``.
    """
    psi, theta, alpha, beta = tp.psi, tp.theta, tp.alpha, tp.beta
    one = np.zeros_like(psi)
    one[0] = 1.0
    pp = _mul(psi, psi)
    tt = _mul(theta, theta)
    p1t = _mul(psi, one - theta)
    new = np.vstack(
        (
            pp + 2 * theta,
            -tt,
            _mul(one + pp + tt, alpha) + 2 * _mul(p1t, beta),
            _mul(p1t, beta) - _mul(theta, alpha),
        )
    )
    with np.errstate(over="ignore", invalid="ignore"):
        new = new * 2.0 ** -np.arange(tp.K + 1)
    return TaylorParams.from_array(new)


@dataclass(frozen=True)
class FlowOrbit:
    """Sequence of RG iterates ``l = 0, 1, ...``.

    ``divergent`` is set when the orbit was cut because a coefficient exceeded
    the overflow guard (or became non-finite).
    """

    states: tuple[TaylorParams, ...]
    divergent: bool = False

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self) -> Iterator[TaylorParams]:
        return iter(self.states)

    def as_array(self) -> np.ndarray:
        """Orbit as an ``(L, 4, K + 1)`` array."""
        return np.stack([s.as_array() for s in self.states])


def _escaped(tp: TaylorParams, guard: float) -> bool:
    arr = tp.as_array()
    return not np.all(np.isfinite(arr)) or np.abs(arr).max() > guard


def flow(tp: TaylorParams, iterations: int, overflow_guard: float = OVERFLOW_GUARD) -> FlowOrbit:
    """Iterate :func:`rg_step`.

    Returns the orbit ``[tp, rg_step(tp), ...]`` with ``iterations + 1`` entries,
    or fewer if a coefficient exceeds ``overflow_guard``; the offending iterate
    is kept as the last entry and the orbit is marked divergent.
    """
    if iterations < 1:
        raise InvalidParameterError("iterations must be at least 1")
    states = [tp]
    for _ in range(int(iterations)):
        nxt = rg_step(states[-1])
        states.append(nxt)
        if _escaped(nxt, overflow_guard):
            return FlowOrbit(tuple(states), True)
    return FlowOrbit(tuple(states), False)


def inertial_flow_closed_form(alpha3_0: float, beta3_0: float, l) -> tuple[float, float]:
    """Closed-form third-order noise flow at the inertial AR fixed point.

    Solves ``alpha' = (6 alpha + 8 beta) / 8``, ``beta' = (alpha + 4 beta) / 8``:
    the combination ``alpha + 2 beta`` is conserved and ``alpha - 4 beta``
    contracts by 4 per step. ``l = inf`` gives the limit ``alpha = 4 beta``.
    """
    if l < 0:
        raise InvalidParameterError("l must be non-negative")
    decay = 0.0 if np.isinf(l) else 4.0 ** -float(l)
    inv = alpha3_0 + 2 * beta3_0
    dev = alpha3_0 - 4 * beta3_0
    alpha = 2 * inv / 3 + decay * dev / 3
    beta = inv / 6 - decay * dev / 6
    return float(alpha), float(beta)


_ALLOWED = {"A": {"s"}, "B": {"u", "s"}, "C": {"u", "s"}, "D": {"u", "s", "z", "b"}}


@dataclass(frozen=True)
class FixedPointSpec:
    """Parameters of an RG fixed point.

    Parameters
    ----------
    cls : {"A", "B", "C", "D"}
        White noise, first-order Markov, three-branched jump process, or
        discretized second-order SDE.
    u, s, z, b : float
        Linear drift, order-1 noise, order-2 AR (class D) and order-3 noise
        (class D) parameters. Parameters that do not apply must be zero.
    """

    cls: str
    u: float = 0.0
    s: float = 0.0
    z: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.cls not in _ALLOWED:
            raise InvalidParameterError(f"class must be one of {FIXED_POINT_CLASSES}, got {self.cls!r}")
        for name in ("u", "s", "z", "b"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise InvalidParameterError(f"{name} must be finite")
            if name not in _ALLOWED[self.cls] and val != 0.0:
                raise InvalidParameterError(f"parameter {name} does not apply to class {self.cls}")
            object.__setattr__(self, name, val)

    def to_dict(self) -> dict:
        return {"class": self.cls, "u": self.u, "s": self.s, "z": self.z, "b": self.b}


def make_fixed_point(spec: FixedPointSpec, K: int = 3) -> TaylorParams:
    """Taylor coefficients of a fixed point truncated at order K.

    Classes A and B exist in closed form at any order
    (``psi = e^{u tau}``, ``alpha = s (e^{2 u tau} - 1) / (2 u)`` for B). Classes
    C and D are tabulated through order 3; higher orders are available only for
    the noise-free closed forms (C with ``s = 0``; D with ``s = b = 0`` and
    ``z = u^2 / 2``).

    Raises
    ------
    UnsupportedOrderError
        For K > 3 outside the closed-form cases.
    """
    K = int(K)
    if K < 0:
        raise InvalidParameterError("K must be non-negative")
    u, s, z, b = spec.u, spec.s, spec.z, spec.b
    arr = np.zeros((4, max(K, 3) + 1))
    fact = np.array([math.factorial(k) for k in range(arr.shape[1])], dtype=float)
    k = np.arange(arr.shape[1])
    if spec.cls == "A":
        arr[2, 0] = s
    elif spec.cls == "B":
        arr[0] = u**k / fact
        arr[2, 1:] = s * (2 * u) ** (k[1:] - 1) / fact[1:]
    elif spec.cls == "C":
        if K > 3 and s != 0:
            raise UnsupportedOrderError("class C noise coefficients are tabulated only through order 3")
        arr[0] = -((-u) ** k) / fact
        arr[1] = -((-2 * u) ** k) / fact
        arr[2, :4] = [0, 4 * s, -8 * u * s, 32 * u**2 * s / 3]
        arr[3, :4] = [0, s, -2 * u * s, 13 * u**2 * s / 6]
    else:
        closed = s == 0 and b == 0 and math.isclose(z, u * u / 2, rel_tol=1e-15, abs_tol=1e-300)
        if K > 3 and not closed:
            raise UnsupportedOrderError(
                "class D coefficients beyond order 3 exist in closed form only for s = b = 0, z = u^2/2"
            )
        arr[0] = u**k / fact
        arr[0, 0] = 2.0
        arr[1] = -(u**k) / fact
        arr[0, 2] = z
        arr[0, 3] = u * (6 * z - u * u) / 12
        arr[2, :4] = [0, -2 * s, -2 * u * s, 4 * b - (2 * z + 3 * u * u) * s]
        arr[3, :4] = [0, s, u * s, b]
    return TaylorParams.from_array(arr[:, : K + 1])


@dataclass(frozen=True)
class Classification:
    """Outcome of :func:`classify`.

    ``verdict`` is one of A, B, C, D, divergent or unresolved; ``params`` holds
    the fitted (u, s, z, b) for fixed-point verdicts.
    """

    verdict: str
    params: dict = field(default_factory=dict)
    iterations: int = 0
    residual: float = float("nan")
    limit: TaylorParams | None = None

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict, "iterations": self.iterations, "residual": self.residual}
        out.update({k: self.params.get(k) for k in ("u", "s", "z", "b")})
        return out


def _extract(cls: str, tp: TaylorParams) -> FixedPointSpec:
    a = tp.as_array()
    get = lambda r, k: a[r, k] if k <= tp.K else 0.0
    if cls == "A":
        return FixedPointSpec("A", s=get(2, 0))
    if cls == "B":
        return FixedPointSpec("B", u=get(0, 1), s=get(2, 1))
    if cls == "C":
        return FixedPointSpec("C", u=get(0, 1), s=get(2, 1) / 4)
    return FixedPointSpec("D", u=get(0, 1), s=-get(2, 1) / 2, z=get(0, 2), b=get(3, 3))


def _template_residual(cls: str, tp: TaylorParams) -> tuple[float, FixedPointSpec]:
    spec = _extract(cls, tp)
    K = tp.K
    if cls in ("C", "D") and K > 3:
        templ = make_fixed_point(spec, 3).as_array()
        diff = np.abs(tp.as_array()[:, :4] - templ)
    else:
        diff = np.abs(tp.as_array() - make_fixed_point(spec, K).as_array())
    scale = max(1.0, np.abs(tp.as_array()).max())
    return float(diff.max() / scale), spec


def classify(
    tp: TaylorParams,
    tol: float = 1e-9,
    max_iter: int = 200,
    template_tol: float = 1e-6,
    patience: int = 3,
    overflow_guard: float = OVERFLOW_GUARD,
) -> Classification:
    """Run the RG flow to a limit and match it against the fixed-point table.

    Convergence requires the normalized sup-distance between successive iterates
    to stay below ``tol`` for ``patience`` consecutive steps. The limit is then
    compared with each class template built from parameters read off designated
    coefficients (u from psi_1, s from alpha_0 for A or alpha_1 with the class
    sign pattern, z from psi_2, b from beta_3).

    Returns
    -------
    Classification
        Verdict A-D with fitted parameters, ``divergent`` when a coefficient
        exceeds ``overflow_guard``, or ``unresolved`` when the orbit does not
        settle within ``max_iter`` steps or matches no template.
    """
    cur = tp
    calm = 0
    for it in range(1, int(max_iter) + 1):
        nxt = rg_step(cur)
        if _escaped(nxt, overflow_guard):
            return Classification("divergent", {}, it, float("inf"), nxt)
        a, b = cur.as_array(), nxt.as_array()
        change = np.abs(b - a).max() / max(1.0, np.abs(a).max())
        cur = nxt
        calm = calm + 1 if change < tol else 0
        if calm >= patience:
            best = None
            for cls in FIXED_POINT_CLASSES:
                res, spec = _template_residual(cls, cur)
                if best is None or res < best[0]:
                    best = (res, cls, spec)
                if res < template_tol:
                    params = {k: getattr(spec, k) for k in ("u", "s", "z", "b")}
                    return Classification(cls, params, it, res, cur)
            return Classification("unresolved", {}, it, best[0], cur)
    return Classification("unresolved", {}, int(max_iter), float("nan"), cur)


def euler_initial_condition(eta: float, kappa: float, sigma2: float, K: int = 3) -> TaylorParams:
    """Taylor coefficients of the Euler AR(2) discretization of an inertial SDE.

    ``psi = 2 - eta tau - kappa tau^2``, ``theta = -1 + eta tau`` and
    ``alpha = sigma2 tau^3``, ``beta = 0``.
    """
    if K < 3:
        raise InvalidParameterError("the Euler noise enters at order 3; K must be at least 3")
    arr = np.zeros((4, K + 1))
    arr[0, :3] = [2.0, -eta, -kappa]
    arr[1, :2] = [-1.0, eta]
    arr[2, 3] = sigma2
    return TaylorParams.from_array(arr)
