"""Pure-Python/NumPy implementations of the hot loops.

Used when the compiled extension is unavailable or disabled. Results agree with
:mod:`armarg._kernels` up to floating-point rounding.
"""

from __future__ import annotations

import numpy as np
from scipy import signal


def var2_simulate(M, L, y0, xi):
    """Iterate ``y_{k+1} = M y_k + L xi_k`` and return the first coordinate.

    The first coordinate of a 2D linear recursion obeys a scalar second-order
    recursion with characteristic polynomial ``z^2 - tr(M) z + det(M)``, which is
    run through :func:`scipy.signal.lfilter`.
    """
    M = np.asarray(M, dtype=float)
    L = np.asarray(L, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[0]
    out = np.empty(n + 1)
    out[0] = y0[0]
    if n == 0:
        return out
    w = xi @ L.T
    out[1] = M[0] @ y0 + w[0, 0]
    if n == 1:
        return out
    psi = M[0, 0] + M[1, 1]
    theta = -(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    u = w[1:, 0] - M[1, 1] * w[:-1, 0] + M[0, 1] * w[:-1, 1]
    a = [1.0, -psi, -theta]
    zi = signal.lfiltic([1.0], a, [out[1], out[0]])
    out[2:], _ = signal.lfilter([1.0], a, u, zi=zi)
    return out


def langevin_euler(x, v, eta, kappa, lam, sigma, dt, xi, subsample):
    """Semi-implicit Euler steps of ``dx = v dt, dv = -(eta v + kappa x + lam x^3) dt + sigma dW``.

    ``x`` and ``v`` hold one state per replica and are updated in place.
    Returns positions recorded after every ``subsample`` steps.
    """
    xi = np.asarray(xi, dtype=float)
    R, m = xi.shape
    n_obs = m // subsample
    obs = np.empty((R, n_obs))
    amp = sigma * np.sqrt(dt)
    xr = np.array(x, dtype=float)
    vr = np.array(v, dtype=float)
    for j in range(n_obs):
        for k in range(j * subsample, (j + 1) * subsample):
            vr = vr - (eta * vr + kappa * xr + lam * xr**3) * dt + amp * xi[:, k]
            xr = xr + vr * dt
        obs[:, j] = xr
    x[:] = xr
    v[:] = vr
    return obs


def ma1_innovations(w, rho, vtol=1e-16):
    """Innovations recursion of a unit-variance MA(1) with lag-1 correlation ``rho``.

    Iterates the prediction-variance recursion until it reaches its fixed point,
    then filters the remainder with constant coefficients.

    Returns ``(S, logdet)`` with ``S = sum e_t^2 / v_t`` and ``logdet = sum log v_t``.
    """
    w = np.asarray(w, dtype=float)
    n = w.size
    if n == 0:
        return 0.0, 0.0
    v, e = 1.0, w[0]
    S, logdet = e * e, 0.0
    t = 1
    while t < n:
        vprev, eprev = v, e
        v = 1.0 - rho * rho / vprev
        e = w[t] - (rho / vprev) * eprev
        S += e * e / v
        logdet += np.log(v)
        t += 1
        if abs(v - vprev) <= vtol:
            break
    if t < n:
        # stationary regime: constant prediction variance
        c = rho / v
        rest, _ = signal.lfilter([1.0], [1.0, c], w[t:], zi=[-c * e])
        S += rest @ rest / v
        logdet += (n - t) * np.log(v)
    return float(S), float(logdet)
