# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror :mod:`armarg._pykernels`."""

import numpy as np

from libc.math cimport fabs, log, sqrt


def var2_simulate(const double[:, ::1] M, const double[:, ::1] L,
                  const double[::1] y0, const double[:, ::1] xi):
    """Iterate ``y_{k+1} = M y_k + L xi_k`` and return the first coordinate.

    Returns an array of length ``n + 1`` starting with ``y0[0]``.
    """
    cdef Py_ssize_t n = xi.shape[0], k
    out_arr = np.empty(n + 1)
    cdef double[::1] out = out_arr
    cdef double x = y0[0], v = y0[1], xn, vn
    cdef double m11 = M[0, 0], m12 = M[0, 1], m21 = M[1, 0], m22 = M[1, 1]
    cdef double l11 = L[0, 0], l12 = L[0, 1], l21 = L[1, 0], l22 = L[1, 1]
    with nogil:
        out[0] = x
        for k in range(n):
            xn = m11 * x + m12 * v + l11 * xi[k, 0] + l12 * xi[k, 1]
            vn = m21 * x + m22 * v + l21 * xi[k, 0] + l22 * xi[k, 1]
            x = xn
            v = vn
            out[k + 1] = x
    return out_arr


def langevin_euler(double[::1] x, double[::1] v, double eta, double kappa,
                   double lam, double sigma, double dt,
                   const double[:, ::1] xi, Py_ssize_t subsample):
    """Semi-implicit Euler steps of ``dx = v dt, dv = -(eta v + kappa x + lam x^3) dt + sigma dW``.

    ``x`` and ``v`` hold one state per replica and are updated in place.
    Returns positions recorded after every ``subsample`` steps.
    """
    cdef Py_ssize_t R = xi.shape[0], m = xi.shape[1], r, k, j
    cdef Py_ssize_t n_obs = m // subsample
    obs_arr = np.empty((R, n_obs))
    cdef double[:, ::1] obs = obs_arr
    cdef double xr, vr, amp = sigma * sqrt(dt)
    with nogil:
        for r in range(R):
            xr = x[r]
            vr = v[r]
            j = 0
            for k in range(n_obs * subsample):
                vr = vr - (eta * vr + kappa * xr + lam * xr * xr * xr) * dt + amp * xi[r, k]
                xr = xr + vr * dt
                if (k + 1) % subsample == 0:
                    obs[r, j] = xr
                    j += 1
            x[r] = xr
            v[r] = vr
    return obs_arr


def ma1_innovations(const double[::1] w, double rho, double vtol=1e-16):
    """Innovations recursion of a unit-variance MA(1) with lag-1 correlation ``rho``.

    Once the prediction variance reaches its fixed point the remaining terms use
    constant coefficients.

    Returns ``(S, logdet)`` with ``S = sum e_t^2 / v_t`` and ``logdet = sum log v_t``.
    """
    cdef Py_ssize_t n = w.shape[0], t = 1
    cdef double v = 1.0, e = 0.0, S = 0.0, logdet = 0.0, vprev, eprev, c, acc = 0.0
    if n == 0:
        return 0.0, 0.0
    with nogil:
        e = w[0]
        S = e * e
        while t < n:
            vprev = v
            eprev = e
            v = 1.0 - rho * rho / vprev
            e = w[t] - (rho / vprev) * eprev
            S += e * e / v
            logdet += log(v)
            t += 1
            if fabs(v - vprev) <= vtol:
                break
        if t < n:
            c = rho / v
            logdet += (n - t) * log(v)
            while t < n:
                e = w[t] - c * e
                acc += e * e
                t += 1
            S += acc / v
    return S, logdet
