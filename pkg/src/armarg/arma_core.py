"""ARMA(p, q) models: construction, simulation and exact autocovariances.

The update equation is

    X_n = sum_i phi_i X_{n-i} + sum_i nu_i eps_{n-i} + mu eps_n,

with i.i.d. standard normal innovations ``eps_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, signal

from .errors import InvalidParameterError, NonStationaryError

__all__ = [
    "ArmaModel",
    "IncrementCovariance",
    "TimeSeries",
    "SCHEMES",
    "RHO_TOL",
    "new_arma",
    "ar_roots",
    "is_stationary",
    "default_burn_in",
    "simulate",
    "autocovariance",
    "increment_covariance",
    "companion_matrix",
    "companion_eigenvalues",
    "branch_sectors",
    "new_seed",
    "derive_seed",
]

RHO_TOL = 1e-12
MAX_BURN_IN = 10**6
SCHEMES = ("euler", "exact", "arma", "external")


def _as_tuple(values, name) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise InvalidParameterError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ArmaModel:
    """Discrete ARMA(p, q) generative model.

    Parameters
    ----------
    phi : tuple of float
        AR coefficients phi_1..phi_p.
    nu : tuple of float
        Lagged MA coefficients nu_1..nu_q.
    mu : float
        Amplitude of the current innovation.
    """

    phi: tuple[float, ...] = ()
    nu: tuple[float, ...] = ()
    mu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "phi", _as_tuple(self.phi, "phi"))
        object.__setattr__(self, "nu", _as_tuple(self.nu, "nu"))
        mu = float(self.mu)
        if not math.isfinite(mu) or mu < 0:
            raise InvalidParameterError(f"mu must be finite and non-negative, got {self.mu!r}")
        object.__setattr__(self, "mu", mu)

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def q(self) -> int:
        return len(self.nu)

    @property
    def ma_polynomial(self) -> np.ndarray:
        """Coefficients ``[mu, nu_1, ..., nu_q]`` of the noise lag polynomial."""
        return np.array((self.mu, *self.nu))

    @property
    def ar_polynomial(self) -> np.ndarray:
        """Coefficients ``[1, -phi_1, ..., -phi_p]`` of the AR lag polynomial."""
        return np.concatenate(([1.0], -np.asarray(self.phi)))

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "phi": list(self.phi), "nu": list(self.nu), "mu": self.mu}


def new_arma(phi: Sequence[float] = (), nu: Sequence[float] = (), mu: float = 1.0) -> ArmaModel:
    """Validate and build an :class:`ArmaModel`."""
    return ArmaModel(phi, nu, mu)


@dataclass(frozen=True)
class IncrementCovariance:
    """Autocovariance ``gamma_0..gamma_q`` of the random increment.

    For q = 1, ``alpha = gamma_0`` and ``beta = gamma_1``.
    """

    gamma: tuple[float, ...]

    def __post_init__(self):
        g = _as_tuple(self.gamma, "gamma")
        if len(g) == 0:
            raise InvalidParameterError("gamma must contain at least gamma_0")
        object.__setattr__(self, "gamma", g)

    @property
    def q(self) -> int:
        return len(self.gamma) - 1

    @property
    def alpha(self) -> float:
        return self.gamma[0]

    @property
    def beta(self) -> float:
        return self.gamma[1] if len(self.gamma) > 1 else 0.0

    def is_psd(self, rtol: float = 1e-12) -> bool:
        """Check that the banded Toeplitz covariance is positive semidefinite.

        Equivalent to non-negativity of the spectral density
        ``gamma_0 + 2 sum_k gamma_k cos(k w)``.
        """
        g = np.asarray(self.gamma)
        scale = np.abs(g).max() if g.size else 0.0
        slack = rtol * scale
        if g[0] < -slack:
            return False
        if g.size == 1:
            return True
        if g.size == 2:
            return g[0] - 2 * abs(g[1]) >= -slack
        # minimum of the spectral density on a fine frequency grid
        w = np.linspace(0, np.pi, 64 * g.size + 1)
        k = np.arange(1, g.size)
        dens = g[0] + 2 * np.cos(np.outer(w, k)) @ g[1:]
        return dens.min() >= -slack * g.size


def _seed_token(seed) -> int:
    if seed is None:
        return new_seed()
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, np.uint64)[0])
    seed = int(seed)
    if seed < 0:
        raise InvalidParameterError("seed must be non-negative")
    return seed


def new_seed() -> int:
    """Fresh 64-bit seed drawn from OS entropy."""
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for replica ``index`` of a base ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Sampled observations with provenance.

    Parameters
    ----------
    tau : float
        Sampling interval.
    values : ndarray
        Observations ``X_0..X_{n-1}`` (stored read-only).
    seed : int or None
        Seed that regenerates the series, if synthetic.
    scheme : str
        One of ``euler``, ``exact``, ``arma`` or ``external``.
    """

    tau: float
    values: np.ndarray
    seed: int | None = None
    scheme: str = "external"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        tau = float(self.tau)
        if not (tau > 0 and math.isfinite(tau)):
            raise InvalidParameterError(f"tau must be positive, got {self.tau!r}")
        values = np.array(self.values, dtype=float).ravel()
        if values.size == 0:
            raise InvalidParameterError("a time series needs at least one value")
        values.flags.writeable = False
        if self.scheme not in SCHEMES:
            raise InvalidParameterError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def ar_roots(model: ArmaModel) -> np.ndarray:
    """Roots of ``z^p - phi_1 z^{p-1} - ... - phi_p``."""
    if model.p == 0:
        return np.empty(0, dtype=complex)
    return np.roots(model.ar_polynomial).astype(complex)


def is_stationary(model: ArmaModel, rho_tol: float = RHO_TOL) -> bool:
    """True when every AR root lies strictly inside ``|z| < 1 - rho_tol``."""
    roots = ar_roots(model)
    return bool(np.all(np.abs(roots) < 1 - rho_tol))


def default_burn_in(model: ArmaModel) -> int:
    """Ten times the slowest AR timescale, capped at 10**6 steps.

    Zero for pure MA models and for non-stationary models.
    """
    roots = ar_roots(model)
    if roots.size == 0 or not is_stationary(model):
        return 0
    gap = 1.0 - np.abs(roots).max()
    if gap <= 0:
        return 0
    steps = 10 * math.ceil(1.0 / gap - 1e-9)
    return int(min(steps, MAX_BURN_IN))


def simulate(
    model: ArmaModel,
    n: int,
    tau: float = 1.0,
    seed=None,
    burn_in: int | None = None,
    initial: Sequence[float] | None = None,
) -> TimeSeries:
    """Simulate the ARMA update equation with standard normal innovations.

    Parameters
    ----------
    model : ArmaModel
    n : int
        Number of returned values.
    tau : float
        Sampling interval recorded on the output.
    seed : int, optional
        Seed for a PCG64 generator. A fresh one is drawn and recorded if omitted.
    burn_in : int, optional
        Discarded leading steps. Defaults to :func:`default_burn_in` for stationary
        models and must be 0 for non-stationary ones.
    initial : sequence of float, optional
        Past values ``X_{-1}, X_{-2}, ...`` (most recent first). Past innovations
        are zero. Defaults to a zero state.

    Returns
    -------
    TimeSeries
    """
    n = int(n)
    if n <= 0:
        raise InvalidParameterError("n must be positive")
    stationary = is_stationary(model)
    if burn_in is None:
        burn_in = default_burn_in(model) if stationary and initial is None else 0
    burn_in = int(burn_in)
    if burn_in < 0:
        raise InvalidParameterError("burn_in must be non-negative")
    if burn_in > 0 and not stationary:
        raise InvalidParameterError("non-stationary models are simulated from their initial state with burn_in=0")
    token = _seed_token(seed)
    rng = np.random.default_rng(token)
    eps = rng.standard_normal(n + burn_in)
    b = model.ma_polynomial
    a = model.ar_polynomial
    zi = None
    if initial is not None and model.p > 0:
        past = np.zeros(model.p)
        init = np.asarray(initial, dtype=float)[: model.p]
        past[: init.size] = init
        zi = signal.lfiltic(b, a, past)
    if zi is None:
        x = signal.lfilter(b, a, eps)
    else:
        x, _ = signal.lfilter(b, a, eps, zi=zi)
    return TimeSeries(tau=tau, values=x[burn_in:], seed=token, scheme="arma")


def _state_space(model: ArmaModel) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix and noise loading for the state (X lags, eps lags)."""
    p, q = model.p, model.q
    d = p + q
    F = np.zeros((d, d))
    G = np.zeros(d)
    F[0, :p] = model.phi
    F[0, p:] = model.nu
    G[0] = model.mu
    for i in range(1, p):
        F[i, i - 1] = 1.0
    if q:
        G[p] = 1.0
        for i in range(1, q):
            F[p + i, p + i - 1] = 1.0
    return F, G


def autocovariance(model: ArmaModel, max_lag: int) -> np.ndarray:
    """Exact stationary autocovariance ``gamma(0..max_lag)``.

    Solves the discrete Lyapunov equation of the companion state-space form and
    propagates the stationary covariance with the transition matrix.

    Raises
    ------
    NonStationaryError
        If an AR root lies on or outside the unit circle.
    """
    max_lag = int(max_lag)
    if max_lag < 0:
        raise InvalidParameterError("max_lag must be non-negative")
    if not is_stationary(model):
        raise NonStationaryError("autocovariance requires a stationary model")
    out = np.zeros(max_lag + 1)
    if model.p == 0:
        c = model.ma_polynomial
        for k in range(min(max_lag, model.q) + 1):
            out[k] = c[: c.size - k] @ c[k:]
        return out
    F, G = _state_space(model)
    P = linalg.solve_discrete_lyapunov(F, np.outer(G, G))
    col = P[:, 0]
    for k in range(max_lag + 1):
        out[k] = col[0]
        col = F @ col
    return out


def increment_covariance(model: ArmaModel) -> IncrementCovariance:
    """Autocovariance of the noise term ``mu eps_n + sum_i nu_i eps_{n-i}``."""
    c = model.ma_polynomial
    gamma = [float(c[: c.size - k] @ c[k:]) for k in range(model.q + 1)]
    return IncrementCovariance(tuple(gamma))


def companion_matrix(model: ArmaModel) -> np.ndarray:
    """Companion matrix of the AR part acting on ``(X_n, ..., X_{n-p+1})``."""
    if model.p == 0:
        return np.zeros((0, 0))
    F, _ = _state_space(ArmaModel(model.phi, (), 0.0))
    return F


def companion_eigenvalues(model: ArmaModel) -> np.ndarray:
    """Eigenvalues of the companion matrix (the AR roots)."""
    return np.linalg.eigvals(companion_matrix(model))


def branch_sectors(model: ArmaModel, values, reference_angle: float | None = None) -> np.ndarray:
    """Angular sector index of each phase-plane state of an AR(2) trajectory.

    States ``(X_n, X_{n-1})`` are expressed in the real eigenbasis of the
    companion matrix, where the deterministic dynamics is a rotation by the
    eigenvalue argument ``w``. The circle is cut into ``round(2 pi / |w|)``
    equal wedges, the first one centred on ``reference_angle`` (the angle of the
    first state by default), and indices are oriented along the rotation so that
    a noise-free orbit advances by one sector per step.

    Parameters
    ----------
    model : ArmaModel
        Model with p = 2 and a complex-conjugate pair of AR roots.
    values : array_like
        Observed series ``X_0..X_{N-1}``.
    reference_angle : float, optional

    Returns
    -------
    ndarray of int
        Sector indices for the states ``n = 1..N-1``.
    """
    if model.p != 2:
        raise InvalidParameterError("branch sectors are defined for AR order 2")
    lam = companion_eigenvalues(model)
    if abs(lam[0].imag) <= 1e-15 * max(abs(lam[0]), 1e-300):
        raise InvalidParameterError("the AR roots must form a complex-conjugate pair")
    i = int(np.argmax(lam.imag))
    w = np.angle(lam[i])
    _, vecs = np.linalg.eig(companion_matrix(model))
    v = vecs[:, i]
    basis = np.column_stack((v.real, -v.imag))  # coordinates rotate by +w
    x = np.asarray(values, dtype=float)
    states = np.column_stack((x[1:], x[:-1]))
    coords = np.linalg.solve(basis, states.T)
    angles = np.arctan2(coords[1], coords[0])
    if reference_angle is None:
        reference_angle = angles[0]
    m = max(int(round(2 * np.pi / w)), 1)
    width = 2 * np.pi / m
    rel = np.mod(angles - reference_angle + width / 2, 2 * np.pi)
    return np.floor(rel / width).astype(int) % m
