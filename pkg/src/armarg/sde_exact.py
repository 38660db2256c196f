"""Discretizations of partially observed 2D linear SDEs.

The model is ``dy = A y dt + B dW`` with ``y = (x, v)``,

    A = [[-lambda, 1], [-kappa, -eta]],    B B^T = [[sxx2, sxv2], [sxv2, svv2]],

and only ``x`` is observed every ``tau``. The exact sampled process is an
ARMA(2, 1): with ``M = e^{A tau}`` the AR coefficients follow from
Cayley-Hamilton, ``psi = tr M`` and ``theta = -det M``, and the noise
``r_n = e1.w_{n-1} + c.w_{n-2}`` with ``c = (-M22, M12)`` is built from the
Gaussian transition noise ``w ~ N(0, Sigma(tau))``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, linalg

from . import kernels
from .arma_core import ArmaModel, TimeSeries, _seed_token
from .decimation import Arma21Params
from .errors import DegenerateSamplingError, InvalidParameterError
from .rg_flow import FixedPointSpec

__all__ = [
    "LinearSde2D",
    "SIGMA_SWITCH",
    "mat_exp_2x2",
    "transition_covariance",
    "stationary_covariance",
    "exact_arma_params",
    "small_tau_expansion",
    "continuum_to_fixed_point",
    "euler_arma_params",
    "euler_discretize",
    "simulate_exact",
    "simulate_euler",
    "gauge_shift",
]

# below this value of |Delta| tau^2 the closed-form covariance integrals cancel
SIGMA_SWITCH = 1e-2
_SERIES_SWITCH = 1.0


@dataclass(frozen=True)
class LinearSde2D:
    """Drift and diffusion of ``dx = (v - lam x) dt + ..., dv = -(kappa x + eta v) dt + ...``.

    Parameters
    ----------
    lam : float
        Position drag (1/time).
    kappa : float
        Elastic constant (1/time^2).
    eta : float
        Velocity drag (1/time).
    sxx2, sxv2, svv2 : float
        Entries of the diffusion matrix ``B B^T``.
    """

    lam: float = 0.0
    kappa: float = 0.0
    eta: float = 0.0
    sxx2: float = 0.0
    sxv2: float = 0.0
    svv2: float = 0.0

    def __post_init__(self):
        for name in ("lam", "kappa", "eta", "sxx2", "sxv2", "svv2"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise InvalidParameterError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        scale = max(abs(self.sxx2), abs(self.svv2), abs(self.sxv2))
        slack = 1e-14 * scale * scale
        if self.sxx2 < 0 or self.svv2 < 0 or self.sxx2 * self.svv2 - self.sxv2**2 < -slack:
            raise InvalidParameterError("the diffusion matrix must be positive semidefinite")

    def drift(self) -> np.ndarray:
        return np.array([[-self.lam, 1.0], [-self.kappa, -self.eta]])

    def diffusion(self) -> np.ndarray:
        return np.array([[self.sxx2, self.sxv2], [self.sxv2, self.svv2]])

    def half_trace(self) -> float:
        """``m = tr(A) / 2``."""
        return -0.5 * (self.lam + self.eta)

    def discriminant(self) -> float:
        """``Delta = m^2 - det A``; the eigenvalues of A are ``m +- sqrt(Delta)``."""
        return 0.25 * (self.lam - self.eta) ** 2 - self.kappa

    def is_stable(self, strict: bool = False) -> bool:
        """Whether all drift eigenvalues have non-positive (negative if strict) real part."""
        re = np.linalg.eigvals(self.drift()).real.max()
        return bool(re < 0 if strict else re <= 1e-14 * max(1.0, abs(self.kappa)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSde2D":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - {"lam", "kappa", "eta", "sxx2", "sxv2", "svv2"}
        if unknown:
            raise InvalidParameterError(f"unknown SDE fields: {sorted(unknown)}")
        return cls(**d)


def _cosh_sinh(m: float, delta: float, t: float) -> tuple[float, float]:
    """``(e^{mt} C(t), e^{mt} S(t))`` with ``e^{At} = e^{mt} (C I + S (A - m I))``.

    ``C = cosh(sqrt(Delta) t)`` and ``S = sinh(sqrt(Delta) t) / sqrt(Delta)``,
    continued analytically to ``Delta <= 0``.
    """
    x = delta * t * t
    if abs(x) <= _SERIES_SWITCH:
        c, s = 0.0, 0.0
        term_c, term_s = 1.0, 1.0
        for k in range(40):
            c += term_c
            s += term_s
            term_c *= x / ((2 * k + 1) * (2 * k + 2))
            term_s *= x / ((2 * k + 2) * (2 * k + 3))
            if abs(term_c) < 1e-17 and abs(term_s) < 1e-17:
                break
        em = math.exp(m * t)
        return em * c, em * s * t
    if delta > 0:
        r = math.sqrt(delta)
        ep, en = math.exp((m + r) * t), math.exp((m - r) * t)
        return 0.5 * (ep + en), 0.5 * (ep - en) / r
    w = math.sqrt(-delta)
    em = math.exp(m * t)
    return em * math.cos(w * t), em * math.sin(w * t) / w


def mat_exp_2x2(sde: LinearSde2D, t: float) -> np.ndarray:
    """Matrix exponential ``e^{A t}`` in closed form.

    Uses ``(A - m I)^2 = Delta I`` so that ``e^{At} = e^{mt} (C I + S (A - m I))``
    with hyperbolic (``Delta > 0``), trigonometric (``Delta < 0``) or power-series
    (``|Delta| t^2 <= 1``, covering repeated eigenvalues) evaluation of C and S.
    """
    t = float(t)
    if t < 0:
        raise InvalidParameterError("t must be non-negative")
    m, delta = sde.half_trace(), sde.discriminant()
    ec, es = _cosh_sinh(m, delta, t)
    Ap = sde.drift() - m * np.eye(2)
    return ec * np.eye(2) + es * Ap


def _int_exp(c: float, t: float) -> float:
    """``int_0^t e^{c s} ds``."""
    ct = c * t
    if abs(ct) < 1e-8:
        return t * (1 + 0.5 * ct)
    return math.expm1(ct) / c


def _basis_integrals_closed(m: float, delta: float, t: float) -> tuple[float, float, float]:
    if delta > 0:
        r = math.sqrt(delta)
        a, b = m + r, m - r
        Jaa, Jab, Jbb = _int_exp(2 * a, t), _int_exp(a + b, t), _int_exp(2 * b, t)
        icc = 0.25 * (Jaa + 2 * Jab + Jbb)
        iss = 0.25 * (Jaa - 2 * Jab + Jbb) / delta
        ics = 0.25 * (Jaa - Jbb) / r
        return icc, ics, iss
    w = math.sqrt(-delta)
    z = complex(2 * m, 2 * w)
    K = np.expm1(z * t) / z
    J = _int_exp(2 * m, t)
    return 0.5 * (J + K.real), K.imag / (2 * w), 0.5 * (J - K.real) / (w * w)


def _basis_integrals_quad(m: float, delta: float, t: float) -> tuple[float, float, float]:
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    f = lambda s, i: np.prod([_cosh_sinh(m, delta, s)[j] for j in i])
    icc = integrate.quad(f, 0, t, args=((0, 0),), **opts)[0]
    ics = integrate.quad(f, 0, t, args=((0, 1),), **opts)[0]
    iss = integrate.quad(f, 0, t, args=((1, 1),), **opts)[0]
    return icc, ics, iss


def transition_covariance(sde: LinearSde2D, t: float, method: str = "auto") -> np.ndarray:
    """Covariance ``Sigma(t) = int_0^t e^{As} B B^T e^{A^T s} ds`` of the exact transition.

    Parameters
    ----------
    sde : LinearSde2D
    t : float
    method : {"auto", "closed", "quad"}
        ``closed`` integrates the exponential representation analytically;
        ``quad`` uses adaptive Gauss-Kronrod quadrature of the three scalar
        integrals; ``auto`` picks ``closed`` unless ``|Delta| t^2 < 1e-2``, where
        the closed form loses digits to cancellation.
    """
    t = float(t)
    if t < 0:
        raise InvalidParameterError("t must be non-negative")
    if t == 0:
        return np.zeros((2, 2))
    m, delta = sde.half_trace(), sde.discriminant()
    if method == "auto":
        method = "closed" if abs(delta) * t * t >= SIGMA_SWITCH else "quad"
    if method == "closed":
        if delta == 0:
            raise InvalidParameterError("the closed form needs distinct eigenvalues; use method='quad'")
        icc, ics, iss = _basis_integrals_closed(m, delta, t)
    elif method == "quad":
        icc, ics, iss = _basis_integrals_quad(m, delta, t)
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    Q = sde.diffusion()
    Ap = sde.drift() - m * np.eye(2)
    AQ = Ap @ Q
    out = icc * Q + ics * (AQ + AQ.T) + iss * (Ap @ Q @ Ap.T)
    return 0.5 * (out + out.T)


def stationary_covariance(sde: LinearSde2D) -> np.ndarray:
    """Stationary covariance of ``(x, v)`` for a strictly stable drift."""
    if not sde.is_stable(strict=True):
        raise InvalidParameterError("a stationary law exists only for a strictly stable drift")
    return linalg.solve_continuous_lyapunov(sde.drift(), -sde.diffusion())


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not (tau > 0 and math.isfinite(tau)):
        raise InvalidParameterError(f"tau must be positive, got {tau!r}")
    return tau


def _arma_from_transition(M: np.ndarray, Q: np.ndarray) -> Arma21Params:
    psi = M[0, 0] + M[1, 1]
    theta = -(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    c = np.array([-M[1, 1], M[0, 1]])
    alpha = Q[0, 0] + c @ Q @ c
    beta = c @ Q[:, 0]
    return Arma21Params(psi, theta, alpha, beta)


def exact_arma_params(sde: LinearSde2D, tau: float, method: str = "auto") -> Arma21Params:
    """Exact ARMA(2, 1) law of ``x`` sampled every ``tau``.

    Raises
    ------
    DegenerateSamplingError
        When ``(e^{A tau})_{12}`` vanishes (``tau`` at an oscillation node).
    """
    tau = _check_tau(tau)
    delta = sde.discriminant()
    if delta < 0 and abs(delta) * tau * tau > _SERIES_SWITCH:
        if abs(math.sin(math.sqrt(-delta) * tau)) < 1e-10:
            raise DegenerateSamplingError(f"(e^(A tau))_12 vanishes at tau={tau}")
    M = mat_exp_2x2(sde, tau)
    Q = transition_covariance(sde, tau, method=method)
    return _arma_from_transition(M, Q)


def small_tau_expansion(sde: LinearSde2D, tau: float) -> Arma21Params:
    """Cubic Taylor polynomials in ``tau`` of the exact ARMA(2, 1) parameters."""
    tau = float(tau)
    lam, kap, eta = sde.lam, sde.kappa, sde.eta
    xx, xv, vv = sde.sxx2, sde.sxv2, sde.svv2
    g = eta + lam
    t1, t2, t3 = tau, tau**2, tau**3
    psi = 2 - g * t1 + 0.5 * t2 * (-2 * kap + eta**2 + lam**2) + t3 * (3 * kap * g - eta**3 - lam**3) / 6
    theta = -(1 - g * t1 + g**2 * t2 / 2 - g**3 * t3 / 6)
    core = vv + 2 * eta * xv
    alpha = 2 * xx * t1 - 2 * xx * g * t2 + (2 / 3) * (core + xx * (-kap + 3 * eta**2 + 3 * eta * lam + 2 * lam**2)) * t3
    beta = -xx * t1 + g * xx * t2 + (core + xx * (2 * kap - 3 * eta**2 - 6 * eta * lam - 4 * lam**2)) * t3 / 6
    return Arma21Params(psi, theta, alpha, beta)


def continuum_to_fixed_point(sde: LinearSde2D) -> FixedPointSpec:
    """Class-D fixed-point parameters whose flow a discretized SDE lands on.

    ``u = -(lambda + eta)``, ``z = -kappa + (eta^2 + lambda^2) / 2``, ``s = -sxx2`` and
    ``b = [svv2 + 2 eta sxv2 + sxx2 (2 kappa - 3 eta^2 - 6 eta lambda - 4 lambda^2)] / 6``.
    """
    lam, kap, eta = sde.lam, sde.kappa, sde.eta
    b = (sde.svv2 + 2 * eta * sde.sxv2 + sde.sxx2 * (2 * kap - 3 * eta**2 - 6 * eta * lam - 4 * lam**2)) / 6
    return FixedPointSpec("D", u=-(lam + eta), s=-sde.sxx2, z=-kap + (eta**2 + lam**2) / 2, b=b)


def _euler_transition(sde: LinearSde2D, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """One semi-implicit Euler step: velocity first, then position with the new velocity."""
    lam, kap, eta = sde.lam, sde.kappa, sde.eta
    M = np.array(
        [[1 - lam * tau - kap * tau**2, tau * (1 - eta * tau)], [-kap * tau, 1 - eta * tau]]
    )
    xx, xv, vv = sde.sxx2, sde.sxv2, sde.svv2
    Q = tau * np.array([[xx + 2 * tau * xv + tau**2 * vv, xv + tau * vv], [xv + tau * vv, vv]])
    return M, Q


def euler_arma_params(sde: LinearSde2D, tau: float) -> Arma21Params:
    """ARMA(2, 1) law of ``x`` under the semi-implicit Euler scheme.

    For ``lambda = 0`` the AR part is ``psi = 2 - eta tau - kappa tau^2``,
    ``theta = -1 + eta tau``. Leading noise terms are ``alpha = 2 sxx2 tau`` and
    ``beta = -sxx2 tau``; with ``sxx2 = sxv2 = 0`` the noise is white with
    variance ``svv2 tau^3``.
    """
    tau = _check_tau(tau)
    return _arma_from_transition(*_euler_transition(sde, tau))


def euler_discretize(sde: LinearSde2D, tau: float) -> ArmaModel:
    """Euler discretization as a generative ARMA model.

    Returns an AR(2) when noise enters only the velocity, else an ARMA(2, 1).
    """
    p = euler_arma_params(sde, tau)
    if sde.sxx2 == 0 and sde.sxv2 == 0:
        return ArmaModel((p.psi, p.theta), (), math.sqrt(sde.svv2) * tau**1.5)
    return p.to_model()


def _psd_sqrt(Q: np.ndarray) -> np.ndarray:
    """Lower-triangular L with ``L L^T = Q`` for a PSD 2x2 matrix (rank deficient allowed)."""
    L = np.zeros((2, 2))
    if Q[0, 0] > 0:
        L[0, 0] = math.sqrt(Q[0, 0])
        L[1, 0] = Q[1, 0] / L[0, 0]
        L[1, 1] = math.sqrt(max(Q[1, 1] - L[1, 0] ** 2, 0.0))
    else:
        L[1, 1] = math.sqrt(max(Q[1, 1], 0.0))
    return L


def simulate_exact(
    sde: LinearSde2D,
    tau: float,
    n: int,
    seed=None,
    x0: float = 0.0,
    v0: float = 0.0,
    burn_in: int = 0,
    stationary: bool = False,
) -> TimeSeries:
    """Sample ``x`` every ``tau`` from the exact Gaussian transition.

    Parameters
    ----------
    sde : LinearSde2D
    tau : float
    n : int
        Number of returned samples; the first one is the (post burn-in) initial state.
    seed : int, optional
    x0, v0 : float
        Initial state, ignored when ``stationary`` is set.
    burn_in : int
        Discarded leading steps.
    stationary : bool
        Draw the initial state from the stationary law (strictly stable drift only).
    """
    tau = _check_tau(tau)
    n = int(n)
    if n <= 0:
        raise InvalidParameterError("n must be positive")
    burn_in = int(burn_in)
    if burn_in < 0:
        raise InvalidParameterError("burn_in must be non-negative")
    token = _seed_token(seed)
    rng = np.random.default_rng(token)
    if stationary:
        P = stationary_covariance(sde)
        y0 = _psd_sqrt(P) @ rng.standard_normal(2)
    else:
        y0 = np.array([float(x0), float(v0)])
    M = mat_exp_2x2(sde, tau)
    L = _psd_sqrt(transition_covariance(sde, tau))
    xi = rng.standard_normal((burn_in + n - 1, 2))
    x = kernels.var2_simulate(np.ascontiguousarray(M), np.ascontiguousarray(L), y0, xi)
    return TimeSeries(tau=tau, values=np.asarray(x)[burn_in:], seed=token, scheme="exact")


def simulate_euler(sde: LinearSde2D, tau: float, n: int, seed=None, burn_in: int | None = None) -> TimeSeries:
    """Sample ``x`` from the Euler discretization, started from rest when non-stationary."""
    from .arma_core import simulate

    s = simulate(euler_discretize(sde, tau), n, tau=tau, seed=seed, burn_in=burn_in)
    return TimeSeries(tau=s.tau, values=s.values, seed=s.seed, scheme="euler")


def gauge_shift(sde: LinearSde2D, d_lambda: float) -> LinearSde2D:
    """A different SDE with the same law for ``x``.

    The observed process depends on the drift only through ``lambda + eta`` and
    ``lambda eta + kappa``, and on the diffusion through ``sxx2`` and
    ``eta^2 sxx2 + 2 eta sxv2 + svv2``. Moving ``d_lambda`` from ``eta`` to
    ``lambda`` and compensating ``kappa`` and ``svv2`` leaves all four unchanged.

    Raises
    ------
    InvalidParameterError
        If the compensated diffusion matrix is not positive semidefinite.
    """
    lam2 = sde.lam + d_lambda
    eta2 = sde.eta - d_lambda
    kap2 = sde.kappa + sde.lam * sde.eta - lam2 * eta2
    noise = sde.eta**2 * sde.sxx2 + 2 * sde.eta * sde.sxv2 + sde.svv2
    svv2 = noise - eta2**2 * sde.sxx2 - 2 * eta2 * sde.sxv2
    return LinearSde2D(lam=lam2, kappa=kap2, eta=eta2, sxx2=sde.sxx2, sxv2=sde.sxv2, svv2=svv2)
