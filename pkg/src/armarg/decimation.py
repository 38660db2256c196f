"""Decimation of ARMA processes: keep every other time point.

Multiplying the AR polynomial ``Phi(L)`` by ``Phi(-L)`` yields a polynomial in
``L**2``, i.e. an AR model on the doubled time step. The noise term becomes
``Phi(-L) Theta(L) eps_n`` whose covariance at even lags defines the coarse MA
part, of order ``floor((p + q) / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .arma_core import ArmaModel, IncrementCovariance, increment_covariance
from .errors import FactorizationError, InvalidCovarianceError, InvalidParameterError

__all__ = [
    "Arma21Params",
    "FACTOR_TOL",
    "FACTOR_MAX_ITER",
    "decimate_arma21",
    "ma_from_covariance",
    "coarse_ar_coefficients",
    "coarse_increment_covariance",
    "decimate_general",
    "q_rule",
]

FACTOR_TOL = 1e-12
FACTOR_MAX_ITER = 10_000


@dataclass(frozen=True)
class Arma21Params:
    """ARMA(2, 1) in covariance form.

    ``X_n = psi X_{n-1} + theta X_{n-2} + r_n`` with ``Var r_n = alpha`` and
    ``Cov(r_n, r_{n-1}) = beta``.
    """

    psi: float
    theta: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("psi", "theta", "alpha", "beta"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def is_psd(self, rtol: float = 1e-12) -> bool:
        """True when ``alpha >= 2 |beta|`` up to a relative slack."""
        scale = max(abs(self.alpha), abs(self.beta))
        return self.alpha - 2 * abs(self.beta) >= -rtol * scale

    def as_array(self) -> np.ndarray:
        return np.array([self.psi, self.theta, self.alpha, self.beta])

    def to_dict(self) -> dict:
        return {"psi": self.psi, "theta": self.theta, "alpha": self.alpha, "beta": self.beta}

    @property
    def covariance(self) -> IncrementCovariance:
        return IncrementCovariance((self.alpha, self.beta))

    def to_model(self) -> ArmaModel:
        """Generative ARMA(2, 1) with the invertible MA factor."""
        mu, nu = ma_from_covariance(self.covariance)
        return ArmaModel((self.psi, self.theta), nu, mu)

    @classmethod
    def from_model(cls, model: ArmaModel) -> "Arma21Params":
        """Covariance form of a model with ``p <= 2`` and ``q <= 1``."""
        if model.p > 2 or model.q > 1:
            raise InvalidParameterError(f"expected p <= 2 and q <= 1, got ({model.p}, {model.q})")
        phi = (*model.phi, 0.0, 0.0)
        g = increment_covariance(model)
        return cls(phi[0], phi[1], g.alpha, g.beta)


def decimate_arma21(params: Arma21Params) -> Arma21Params:
    """Coarse-grain an ARMA(2, 1) by dropping every other point.

    Returns ``(psi^2 + 2 theta, -theta^2, (1 + psi^2 + theta^2) alpha + 2 psi (1 - theta) beta,
    psi (1 - theta) beta - theta alpha)``.

    Raises
    ------
    InvalidCovarianceError
        If ``alpha < 2 |beta|``.
    """
    if not params.is_psd():
        raise InvalidCovarianceError(f"alpha={params.alpha} < 2|beta|={2 * abs(params.beta)}")
    psi, theta, alpha, beta = params.psi, params.theta, params.alpha, params.beta
    return Arma21Params(
        psi * psi + 2 * theta,
        -theta * theta,
        (1 + psi * psi + theta * theta) * alpha + 2 * psi * (1 - theta) * beta,
        psi * (1 - theta) * beta - theta * alpha,
    )


def _trim(gamma: np.ndarray) -> np.ndarray:
    scale = abs(gamma[0]) if gamma[0] != 0 else np.abs(gamma).max()
    k = gamma.size
    while k > 1 and abs(gamma[k - 1]) <= 1e-15 * scale:
        k -= 1
    return gamma[:k]


def _innovations(gamma: np.ndarray, tol: float, max_iter: int):
    """Banded innovations algorithm for an MA(q) covariance.

    Returns ``(sigma2, theta)`` with ``theta`` the normalized MA coefficients,
    or ``None`` when the coefficients have not converged within ``max_iter``.
    """
    q = gamma.size - 1
    gam = lambda h: gamma[h] if h <= q else 0.0
    v = [gamma[0]]
    rows: dict[int, np.ndarray] = {}  # rows[n][j - 1] = theta_{n, j}
    prev = None
    for n in range(1, max_iter + 1):
        row = np.zeros(q)
        for k in range(max(0, n - q), n):
            acc = gam(n - k)
            for j in range(max(0, n - q), k):
                if k - j <= q and n - j <= q:
                    acc -= rows[k][k - j - 1] * row[n - j - 1] * v[j]
            if v[k] <= 0:
                return None
            row[n - k - 1] = acc / v[k]
        rows[n] = row
        rows.pop(n - q - 1, None)
        vn = gamma[0] - sum(row[n - j - 1] ** 2 * v[j] for j in range(max(0, n - q), n))
        v.append(vn)
        if prev is not None and np.abs(row - prev).max() <= tol * max(1.0, np.abs(row).max()) and n > q:
            return vn, row
        prev = row
    return None


def _roots_factor(gamma: np.ndarray):
    """Minimum-phase factor from the roots of the covariance generating polynomial."""
    q = gamma.size - 1
    sym = np.concatenate((gamma[::-1], gamma[1:]))  # coefficients of z^q G(z), degree 2q
    roots = np.roots(sym)
    order = np.argsort(-np.abs(roots))
    outer = roots[order[:q]]
    poly = np.real(np.poly(1.0 / outer))  # read in ascending powers: prod (1 - z / r)
    poly = poly / poly[0]
    sigma2 = gamma[q] / poly[q]
    return sigma2, poly[1:]


def _polish(c: np.ndarray, g: np.ndarray, iters: int = 60) -> np.ndarray:
    """Gauss-Newton refinement of ``sum_j c_j c_{j+k} = g_k``."""
    q = g.size - 1
    for _ in range(iters):
        res = np.array([c[: c.size - k] @ c[k:] for k in range(q + 1)]) - g
        if np.abs(res).max() <= 1e-15 * abs(g[0]):
            break
        J = np.zeros((q + 1, q + 1))
        for k in range(q + 1):
            for j in range(q + 1 - k):
                J[k, j] += c[j + k]
                J[k, j + k] += c[j]
        step = np.linalg.lstsq(J, res, rcond=None)[0]
        c = c - step
    return c


def ma_from_covariance(cov, tol: float = FACTOR_TOL, max_iter: int = FACTOR_MAX_ITER) -> tuple[float, tuple[float, ...]]:
    """Invertible MA factor ``(mu, nu)`` reproducing an increment covariance.

    Parameters
    ----------
    cov : IncrementCovariance or sequence of float
        ``gamma_0..gamma_q``.
    tol : float
        Convergence tolerance of the innovations algorithm.
    max_iter : int
        Iteration cap of the innovations algorithm. A root-based spectral
        factorization is used if it is reached.

    Returns
    -------
    mu : float
    nu : tuple of float
        Length q, with ``mu + nu_1 z + ... + nu_q z^q`` free of roots inside the
        unit disk.

    Raises
    ------
    InvalidCovarianceError
        If the covariance is not positive semidefinite.
    FactorizationError
        If no factor reproduces the covariance.
    """
    if not isinstance(cov, IncrementCovariance):
        cov = IncrementCovariance(tuple(cov))
    if not cov.is_psd():
        raise InvalidCovarianceError(f"covariance {cov.gamma} is not positive semidefinite")
    gamma = np.asarray(cov.gamma, dtype=float)
    q = cov.q
    if q == 0:
        return math.sqrt(max(gamma[0], 0.0)), ()
    if q == 1:
        alpha, beta = gamma
        disc = math.sqrt(max(alpha * alpha - 4 * beta * beta, 0.0))
        mu2 = 0.5 * (alpha + disc)
        if mu2 == 0:
            return 0.0, (0.0,)
        mu = math.sqrt(mu2)
        return mu, (beta / mu,)
    if gamma[0] == 0:
        return 0.0, (0.0,) * q
    g = _trim(gamma)
    qe = g.size - 1
    if qe == 0:
        return math.sqrt(g[0]), (0.0,) * q
    if qe == 1:
        mu, nu = ma_from_covariance(IncrementCovariance(tuple(g)))
        return mu, nu + (0.0,) * (q - 1)
    res = _innovations(g, tol, max_iter)
    if res is None:
        res = _roots_factor(g)
    sigma2, theta = res
    if not sigma2 > 0:
        raise FactorizationError("non-positive innovation variance in spectral factorization")
    mu = math.sqrt(sigma2)
    nu = mu * np.asarray(theta, dtype=float)
    c = np.concatenate(([mu], nu))
    back = np.array([c[: c.size - k] @ c[k:] for k in range(qe + 1)])
    if np.abs(back - g).max() > 1e-8 * abs(g[0]):
        sigma2, theta = _roots_factor(g)
        c = _polish(math.sqrt(sigma2) * np.concatenate(([1.0], theta)), g)
        mu, nu = c[0], c[1:]
        back = np.array([c[: c.size - k] @ c[k:] for k in range(qe + 1)])
        if np.abs(back - g).max() > 1e-8 * abs(g[0]):
            raise FactorizationError("spectral factorization does not reproduce the covariance")
    return mu, tuple(float(v) for v in nu) + (0.0,) * (q - qe)


def coarse_ar_coefficients(phi: Sequence[float]) -> np.ndarray:
    """AR coefficients on the doubled time step.

    ``phi~_m = 2 phi_{2m} + (-1)^{m+1} phi_m^2 + 2 sum_{j=1}^{m-1} (-1)^{j+1} phi_j phi_{2m-j}``
    with ``phi_k = 0`` for ``k > p``.
    """
    phi = np.asarray(phi, dtype=float)
    p = phi.size
    f = lambda k: phi[k - 1] if 1 <= k <= p else 0.0
    out = np.zeros(p)
    for m in range(1, p + 1):
        acc = 2 * f(2 * m) + (-1) ** (m + 1) * f(m) ** 2
        for j in range(1, m):
            acc += 2 * (-1) ** (j + 1) * f(j) * f(2 * m - j)
        out[m - 1] = acc
    return out


def _combined_noise(model: ArmaModel) -> np.ndarray:
    a_neg = model.ar_polynomial * (-1.0) ** np.arange(model.p + 1)
    return np.convolve(a_neg, model.ma_polynomial)


def coarse_increment_covariance(model: ArmaModel, max_lag: int | None = None) -> np.ndarray:
    """Covariance ``gamma~_0..gamma~_max_lag`` of the coarse-grained noise term.

    The noise ``Phi(-L) Theta(L) eps_n = sum_j c_j eps_{n-j}`` is sampled every
    other step, so ``gamma~_k = sum_j c_j c_{j+2k}``.
    """
    c = _combined_noise(model)
    if max_lag is None:
        max_lag = q_rule(model.p, model.q)
    out = np.zeros(max_lag + 1)
    for k in range(max_lag + 1):
        s = 2 * k
        if s < c.size:
            out[k] = c[: c.size - s] @ c[s:]
    return out


def decimate_general(model: ArmaModel) -> ArmaModel:
    """Coarse-grain an ARMA(p, q) into an ARMA(p, floor((p + q) / 2)).

    The AR part follows from :func:`coarse_ar_coefficients` and the MA part is
    the invertible factor of :func:`coarse_increment_covariance`. For ``p = 0``
    this reduces to subsampling an MA process.
    """
    qt = q_rule(model.p, model.q)
    phi = coarse_ar_coefficients(model.phi)
    gamma = coarse_increment_covariance(model, qt)
    try:
        mu, nu = ma_from_covariance(IncrementCovariance(tuple(gamma)))
    except InvalidCovarianceError as exc:  # only reachable through rounding
        raise FactorizationError(str(exc)) from exc
    return ArmaModel(tuple(phi), nu, mu)


def q_rule(p: int, q: int) -> int:
    """MA order after one decimation, ``floor((p + q) / 2)``."""
    if p < 0 or q < 0:
        raise InvalidParameterError("orders must be non-negative")
    return (int(p) + int(q)) // 2
