import itertools

import numpy as np
import pytest
import mpmath as mp
import sympy as sp
from scipy import integrate, linalg

from armarg.arma_core import autocovariance
from armarg.decimation import Arma21Params, decimate_arma21
from armarg.errors import DegenerateSamplingError, InvalidParameterError
from armarg.sde_exact import (
    LinearSde2D,
    continuum_to_fixed_point,
    euler_arma_params,
    euler_discretize,
    exact_arma_params,
    gauge_shift,
    mat_exp_2x2,
    simulate_exact,
    small_tau_expansion,
    transition_covariance,
)

from conftest import block_se


def van_loan(sde, t):
    A, Q = sde.drift(), sde.diffusion()
    big = np.zeros((4, 4))
    big[:2, :2] = -A
    big[:2, 2:] = Q
    big[2:, 2:] = A.T
    E = linalg.expm(big * t)
    F = E[2:, 2:].T
    return F @ E[:2, 2:]


def ito_isometry(sde, tau):
    """alpha, beta by integrating the increment kernels against the diffusion."""
    A, Q = sde.drift(), sde.diffusion()
    M = linalg.expm(A * tau)
    psi = np.trace(M)
    row = lambda s: linalg.expm(A * s)[0]

    def k_r(u):  # kernel of r_n at time t - u, u in [0, 2 tau]
        return row(u) if u <= tau else row(u) - psi * row(u - tau)

    def k_prev(u):  # kernel of r_{n-1}, supported on [tau, 3 tau]
        return row(u - tau) if u <= 2 * tau else row(u - tau) - psi * row(u - 2 * tau)

    opts = dict(epsabs=0, epsrel=1e-12, limit=200)
    alpha = sum(integrate.quad(lambda u: k_r(u) @ Q @ k_r(u), a, b, **opts)[0] for a, b in ((0, tau), (tau, 2 * tau)))
    beta = integrate.quad(lambda u: k_r(u) @ Q @ k_prev(u), tau, 2 * tau, **opts)[0]
    return alpha, beta


def sympy_small_tau(vals):
    """Cubic Taylor coefficients of the exact map, with exact rational parameters."""
    lam, kap, eta, sxx, sxv, svv = (sp.Rational(v) for v in vals)
    s, t = sp.symbols("s t")
    A = sp.Matrix([[-lam, 1], [-kap, -eta]])
    Q = sp.Matrix([[sxx, sxv], [sxv, svv]])
    order = 6
    expA = lambda x: sum(((A * x) ** k / sp.factorial(k) for k in range(order)), sp.zeros(2, 2))
    E = expA(s)
    Sig = (E * Q * E.T).applyfunc(lambda f: sp.integrate(sp.expand(f), (s, 0, t)))
    M = expA(t)
    psi = M.trace()
    theta = -M.det()
    c = sp.Matrix([-M[1, 1], M[0, 1]])
    alpha = Sig[0, 0] + (c.T * Sig * c)[0, 0]
    beta = (-M[1, 1] * Sig[0, 0] + M[0, 1] * Sig[0, 1])
    coeffs = lambda f: [float(sp.expand(f).coeff(t, k)) for k in range(4)]
    return [coeffs(f) for f in (psi, theta, alpha, beta)]


STABLE = [
    LinearSde2D(lam=0.0, kappa=0.0, eta=1.0, svv2=2.0),
    LinearSde2D(lam=0.0, kappa=1.0, eta=1.0, svv2=2.0),
    LinearSde2D(lam=0.3, kappa=1.0, eta=0.7, sxx2=0.4, sxv2=0.1, svv2=1.3),
    LinearSde2D(lam=0.0, kappa=0.25, eta=1.0, svv2=1.0),  # critical damping
    LinearSde2D(lam=0.5, kappa=4.0, eta=0.2, sxx2=0.2, sxv2=-0.1, svv2=0.9),
    LinearSde2D(lam=1.0, kappa=0.0, eta=1.0, sxx2=1.0, svv2=1.0),
    LinearSde2D(lam=2.0, kappa=-0.5, eta=0.5, sxx2=0.3, sxv2=0.2, svv2=0.5),
    LinearSde2D(lam=0.0, kappa=0.0, eta=0.0, svv2=1.0),
]


class TestLinearSde2D:
    def test_psd(self):
        with pytest.raises(InvalidParameterError):
            LinearSde2D(sxx2=1.0, sxv2=2.0, svv2=1.0)
        with pytest.raises(InvalidParameterError):
            LinearSde2D(svv2=-1.0)

    def test_stability(self):
        assert LinearSde2D(kappa=1, eta=1).is_stable(strict=True)
        assert LinearSde2D(eta=1).is_stable()
        assert not LinearSde2D(eta=1).is_stable(strict=True)
        assert not LinearSde2D(kappa=-1, eta=1).is_stable()

    def test_dict_round_trip(self):
        sde = STABLE[2]
        assert LinearSde2D.from_dict(sde.to_dict()) == sde
        assert LinearSde2D.from_dict({"lambda": 0.3}).lam == 0.3


class TestMatExp:
    def test_nilpotent(self):
        assert np.allclose(mat_exp_2x2(LinearSde2D(), 0.7), [[1, 0.7], [0, 1]], rtol=0, atol=1e-16)

    def test_identity(self):
        assert np.array_equal(mat_exp_2x2(STABLE[2], 0.0), np.eye(2))

    def test_integrated_ou(self):
        assert mat_exp_2x2(LinearSde2D(eta=1.0), 1.0)[0, 1] == pytest.approx(1 - np.exp(-1), rel=1e-15)

    @pytest.mark.parametrize("sde", STABLE + [LinearSde2D(kappa=-3.0, eta=0.1), LinearSde2D(lam=1.0, eta=1.0 + 1e-9)])
    @pytest.mark.parametrize("t", [1e-6, 0.01, 0.3, 1.0, 7.0])
    def test_vs_high_precision(self, sde, t):
        # scaling-and-squaring in double precision loses ~1e-10 on the nearly
        # repeated eigenvalue case, so the reference is computed with 50 digits
        with mp.workdps(50):
            E = mp.expm(mp.matrix(sde.drift().tolist()) * mp.mpf(t))
            want = np.array([[float(E[i, j]) for j in range(2)] for i in range(2)])
        got = mat_exp_2x2(sde, t)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-13 * np.abs(want).max())

    @pytest.mark.parametrize("sde", STABLE)
    def test_group_law(self, sde):
        s, t = 0.37, 1.21
        lhs = mat_exp_2x2(sde, s + t)
        rhs = mat_exp_2x2(sde, s) @ mat_exp_2x2(sde, t)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-13 * np.abs(lhs).max())


class TestTransitionCovariance:
    @pytest.mark.parametrize("sde", STABLE)
    @pytest.mark.parametrize("t", [1e-3, 0.05, 0.5, 3.0])
    @pytest.mark.parametrize("method", ["closed", "quad", "auto"])
    def test_vs_van_loan(self, sde, t, method):
        if method == "closed" and abs(sde.discriminant()) * t * t < 1e-4:
            pytest.skip("closed form cancels for nearly repeated eigenvalues")
        want = van_loan(sde, t)
        got = transition_covariance(sde, t, method=method)
        tol = 1e-9 if method == "closed" else 1e-10
        assert np.allclose(got, want, rtol=tol, atol=1e-12 * np.abs(want).max())

    @pytest.mark.parametrize("sde", STABLE)
    def test_paths_agree(self, sde):
        if sde.discriminant() == 0:
            pytest.skip("closed form needs distinct eigenvalues")
        for t in (0.2, 1.0, 2.0):
            a = transition_covariance(sde, t, method="closed")
            b = transition_covariance(sde, t, method="quad")
            assert np.allclose(a, b, rtol=1e-10, atol=1e-14 * np.abs(b).max())

    @pytest.mark.parametrize("sde", STABLE)
    def test_psd(self, sde):
        for t in np.geomspace(1e-4, 10, 15):
            assert np.linalg.eigvalsh(transition_covariance(sde, t)).min() >= -1e-14 * t


class TestExactParams:
    def test_integrated_ou(self):
        eta, tau = 1.3, 0.05
        p = exact_arma_params(LinearSde2D(eta=eta, svv2=1.0), tau)
        assert p.psi == pytest.approx(1 + np.exp(-eta * tau), rel=1e-14)
        assert p.theta == pytest.approx(-np.exp(-eta * tau), rel=1e-14)

    def test_integrated_ou_small_tau_noise(self):
        s2 = 1.7
        for tau in (1e-3, 1e-4):
            p = exact_arma_params(LinearSde2D(eta=1.0, svv2=s2), tau)
            assert p.alpha / tau**3 == pytest.approx(2 * s2 / 3, rel=5 * tau)
            assert p.beta / tau**3 == pytest.approx(s2 / 6, rel=5 * tau)

    @pytest.mark.parametrize("sde", STABLE)
    @pytest.mark.parametrize("tau", [0.01, 0.1, 0.7])
    def test_vs_ito_isometry(self, sde, tau):
        p = exact_arma_params(sde, tau)
        alpha, beta = ito_isometry(sde, tau)
        assert p.alpha == pytest.approx(alpha, rel=1e-9)
        assert p.beta == pytest.approx(beta, rel=1e-9, abs=1e-12 * alpha)
        assert p.is_psd()

    def test_psi_forms_agree(self):
        sde, tau = STABLE[2], 0.3
        M1, M2 = mat_exp_2x2(sde, tau), mat_exp_2x2(sde, 2 * tau)
        p = exact_arma_params(sde, tau)
        assert p.psi == pytest.approx(M2[0, 1] / M1[0, 1], rel=1e-12)
        assert p.theta == pytest.approx(M2[0, 0] - p.psi * M1[0, 0], rel=1e-12)

    def test_oscillation_node(self):
        sde = LinearSde2D(kappa=1.0, svv2=1.0)
        with pytest.raises(DegenerateSamplingError):
            exact_arma_params(sde, np.pi)

    def test_tau_positive(self):
        with pytest.raises(InvalidParameterError):
            exact_arma_params(STABLE[0], 0.0)

    @pytest.mark.parametrize("sde", STABLE)
    def test_rg_invariance(self, sde):
        for tau in (0.01, 0.02, 0.05):
            lhs = decimate_arma21(exact_arma_params(sde, tau)).as_array()
            rhs = exact_arma_params(sde, 2 * tau).as_array()
            assert np.allclose(lhs, rhs, rtol=1e-9, atol=0)

    def test_gauge_witness(self):
        a = LinearSde2D(lam=0.0, kappa=1.0, eta=1.0, sxx2=0.2, svv2=1.0)
        b = gauge_shift(a, 0.5)
        assert (b.lam, b.eta) == (0.5, 0.5)
        fa, fb = continuum_to_fixed_point(a), continuum_to_fixed_point(b)
        assert np.allclose([fa.u, fa.s, fa.z, fa.b], [fb.u, fb.s, fb.z, fb.b], rtol=1e-14, atol=1e-15)
        for tau in (0.01, 0.1, 1.0):
            pa, pb = exact_arma_params(a, tau).as_array(), exact_arma_params(b, tau).as_array()
            assert np.allclose(pa, pb, rtol=1e-9, atol=0)
        assert not np.allclose(a.drift(), b.drift())

    def test_gauge_shift_psd(self):
        with pytest.raises(InvalidParameterError):
            gauge_shift(LinearSde2D(eta=1.0, sxx2=1.0, svv2=0.0), -5.0)


class TestSmallTau:
    @pytest.mark.parametrize(
        "vals",
        [("3/10", "1", "7/10", "2/5", "1/10", "13/10"), ("0", "0", "1", "0", "0", "1"), ("1", "-1/2", "1/3", "1", "1/5", "2")],
    )
    def test_vs_sympy_series(self, vals):
        sde = LinearSde2D(*[float(sp.Rational(v)) for v in vals])
        want = np.array(sympy_small_tau(vals))
        # probe the polynomial at four points and solve for its coefficients
        taus = np.array([0.5, 1.0, 1.5, 2.0])
        V = np.vander(taus, 4, increasing=True)
        got = np.linalg.solve(V, np.array([small_tau_expansion(sde, t).as_array() for t in taus]))
        assert np.allclose(got.T, want, rtol=1e-10, atol=1e-12)

    def test_examples(self):
        eta, tau = 0.8, 0.1
        p = small_tau_expansion(LinearSde2D(eta=eta), tau)
        assert p.theta == pytest.approx(-1 + eta * tau - (eta * tau) ** 2 / 2 + (eta * tau) ** 3 / 6)
        p0 = small_tau_expansion(STABLE[2], 0.0)
        assert p0.as_array().tolist() == [2, -1, 0, 0]
        s = 0.37
        p = small_tau_expansion(LinearSde2D(sxx2=s), 1e-3)
        assert p.alpha / 1e-3 == pytest.approx(2 * s, rel=1e-2)

    def test_exact_converges_at_fourth_order(self):
        sde = LinearSde2D(lam=0.3, kappa=1.0, eta=0.7, sxx2=0.4, sxv2=0.1, svv2=1.3)
        taus = np.array([0.04, 0.02, 0.01, 0.005])
        err = np.array(
            [np.abs(exact_arma_params(sde, t).as_array() - small_tau_expansion(sde, t).as_array()).max() for t in taus]
        )
        slope = np.polyfit(np.log(taus), np.log(err), 1)[0]
        assert slope >= 3.8


class TestFixedPointMap:
    def test_examples(self):
        f = continuum_to_fixed_point(LinearSde2D(eta=1.0, svv2=1.0))
        assert f.cls == "D"
        assert (f.u, f.z, f.s, f.b) == pytest.approx((-1, 0.5, 0, 1 / 6))
        f = continuum_to_fixed_point(LinearSde2D())
        assert (f.u, f.z, f.s, f.b) == (0, 0, 0, 0)
        f = continuum_to_fixed_point(LinearSde2D(kappa=1.0))
        assert (f.u, f.z, f.s, f.b) == (0, -1, 0, 0)

    def test_matches_small_tau(self):
        from armarg.rg_flow import make_fixed_point

        sde = STABLE[2]
        tp = make_fixed_point(continuum_to_fixed_point(sde), 3)
        taus = np.array([0.5, 1.0, 1.5, 2.0])
        V = np.vander(taus, 4, increasing=True)
        coef = np.linalg.solve(V, np.array([small_tau_expansion(sde, t).as_array() for t in taus])).T
        # only psi_3 is left free by the fixed-point family
        mask = np.ones((4, 4), bool)
        mask[0, 3] = False
        assert np.allclose(coef[mask], tp.as_array()[mask], rtol=1e-10, atol=1e-12)


class TestEuler:
    def test_inertial_is_ar2(self):
        eta, kappa, s2, tau = 1.0, 0.5, 2.0, 0.01
        m = euler_discretize(LinearSde2D(kappa=kappa, eta=eta, svv2=s2), tau)
        assert (m.p, m.q) == (2, 0)
        assert np.allclose(m.phi, [2 - eta * tau - kappa * tau**2, -1 + eta * tau], rtol=1e-15)
        assert m.mu == pytest.approx(np.sqrt(s2) * tau**1.5, rel=1e-14)

    def test_small_tau_limit(self):
        m = euler_discretize(STABLE[2], 1e-9)
        assert np.allclose(m.phi, [2, -1], atol=1e-8)

    def test_leading_noise(self):
        s, tau = 0.6, 1e-4
        p = euler_arma_params(LinearSde2D(eta=1.0, sxx2=s, svv2=1.0), tau)
        assert p.alpha == pytest.approx(2 * s * tau, rel=1e-3)
        assert p.beta == pytest.approx(-s * tau, rel=1e-3)
        assert euler_discretize(LinearSde2D(eta=1.0, sxx2=s, svv2=1.0), tau).q == 1

    def test_non_invariance_slope(self):
        sde = LinearSde2D(kappa=1.0, eta=1.0, svv2=2.0)
        taus = np.array([0.04, 0.02, 0.01, 0.005])
        res = []
        for t in taus:
            lhs = decimate_arma21(euler_arma_params(sde, t)).as_array()[2:]
            rhs = euler_arma_params(sde, 2 * t).as_array()[2:]
            res.append(np.abs(lhs - rhs).max())
        slope = np.polyfit(np.log(taus), np.log(res), 1)[0]
        assert abs(slope - 3) < 0.2


class TestSimulateExact:
    def test_zero_noise(self):
        sde = LinearSde2D(kappa=1.0, eta=0.3)
        s = simulate_exact(sde, 0.1, 50, seed=1, x0=1.0, v0=0.0)
        M = mat_exp_2x2(sde, 0.1)
        y = np.array([1.0, 0.0])
        for k in range(50):
            assert s.values[k] == pytest.approx(y[0], rel=1e-12, abs=1e-15)
            y = M @ y
        assert s.scheme == "exact"

    def test_determinism(self):
        sde = STABLE[1]
        a = simulate_exact(sde, 0.05, 100, seed=4)
        b = simulate_exact(sde, 0.05, 100, seed=4)
        assert np.array_equal(a.values, b.values)

    def test_integrated_ou_velocity(self):
        eta, T, tau, n = 1.0, 1.0, 0.01, 10**6
        s = simulate_exact(LinearSde2D(eta=eta, svv2=2 * eta * T), tau, n, seed=3, burn_in=2000)
        vbar = np.diff(s.values) / tau
        mean, se = block_se(lambda b: np.mean(b**2), vbar)
        h = eta * tau
        want = 2 * T * (h - 1 + np.exp(-h)) / h**2
        assert abs(mean - want) < 4 * se
        assert abs(mean - T) < 0.02

    def test_harmonic_autocovariance(self):
        sde = LinearSde2D(kappa=1.0, eta=1.0, svv2=2.0)
        tau = 0.1
        s = simulate_exact(sde, tau, 400_000, seed=5, stationary=True)
        model = exact_arma_params(sde, tau).to_model()
        want = autocovariance(model, 5)

        def acov(b):
            b = b - b.mean()
            return np.array([b[: b.size - k] @ b[k:] / b.size for k in range(6)])

        mean, se = block_se(acov, s.values)
        assert np.all(np.abs(mean - want) < 4 * se)

    def test_stationary_requires_stable(self):
        with pytest.raises(InvalidParameterError):
            simulate_exact(LinearSde2D(eta=1.0, svv2=1.0), 0.1, 10, stationary=True)
