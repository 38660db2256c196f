import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armarg.arma_core import (
    ArmaModel,
    IncrementCovariance,
    TimeSeries,
    autocovariance,
    branch_sectors,
    companion_eigenvalues,
    default_burn_in,
    increment_covariance,
    is_stationary,
    new_arma,
    simulate,
)
from armarg.errors import InvalidParameterError, NonStationaryError

from conftest import block_se


def _sample_acov(x, max_lag):
    x = x - x.mean()
    n = len(x)
    return np.array([x[: n - k] @ x[k:] / n for k in range(max_lag + 1)])


class TestNewArma:
    def test_euler_ar2(self):
        eta, kappa, sigma, tau = 1.0, 0.5, 1.0, 0.01
        m = new_arma([2 - eta * tau - kappa * tau**2, -1 + eta * tau], [], sigma * tau**1.5)
        assert (m.p, m.q) == (2, 0)
        assert m.mu == pytest.approx(1e-3)

    def test_white_noise(self):
        m = new_arma([], [], 1.0)
        assert (m.p, m.q) == (0, 0)

    def test_deterministic_ar1(self):
        m = new_arma([0.5], [], 0.0)
        assert m.mu == 0.0

    def test_negative_mu(self):
        with pytest.raises(InvalidParameterError):
            new_arma([0.5], [], -1.0)

    def test_non_finite(self):
        with pytest.raises(InvalidParameterError):
            new_arma([np.nan], [], 1.0)


class TestStationarity:
    def test_examples(self):
        assert is_stationary(new_arma([0.5], [], 1))
        assert not is_stationary(new_arma([2, -1], [], 1))
        assert is_stationary(new_arma([], [], 1))

    def test_margin(self):
        assert not is_stationary(new_arma([1 - 1e-14], [], 1))
        assert is_stationary(new_arma([1 - 1e-6], [], 1))

    def test_burn_in(self):
        assert default_burn_in(new_arma([0.9], [], 1)) == 100
        assert default_burn_in(new_arma([], [1.0], 1)) == 0
        assert default_burn_in(new_arma([1 - 1e-9], [], 1)) == 10**6


class TestIncrementCovariance:
    def test_examples(self):
        g = increment_covariance(new_arma([], [1.0], 2.0))
        assert (g.alpha, g.beta) == (5.0, 2.0)
        assert increment_covariance(new_arma([], [], 1.0)).gamma == (1.0,)
        g = increment_covariance(new_arma([], [3.0], 0.0))
        assert (g.alpha, g.beta) == (9.0, 0.0)

    def test_general_q(self):
        g = increment_covariance(new_arma([], [0.5, -0.25], 1.0))
        c = np.array([1.0, 0.5, -0.25])
        assert np.allclose(g.gamma, [c @ c, c[:-1] @ c[1:], c[0] * c[2]])

    @given(
        st.floats(0, 5),
        st.lists(st.floats(-5, 5), min_size=0, max_size=5),
    )
    @settings(max_examples=100, deadline=None)
    def test_always_psd(self, mu, nu):
        g = increment_covariance(new_arma([], nu, mu))
        assert g.is_psd()

    def test_psd_check(self):
        assert not IncrementCovariance((2.0, 1.1)).is_psd()
        assert IncrementCovariance((2.0, 1.0)).is_psd()


class TestSimulate:
    def test_white_noise_variance(self):
        n = 10**5
        s = simulate(new_arma([], [], 1.0), n, seed=1)
        assert len(s) == n
        assert abs(s.values.var() - 1) < 3 * np.sqrt(2 / n)

    def test_ar1_lag1(self):
        a = 0.1
        s = simulate(new_arma([1 - a], [], 1.0), 200_000, seed=2)
        mean, se = block_se(lambda b: _sample_acov(b, 1), s.values)
        assert abs(mean[1] - (1 - a) * mean[0]) < 4 * np.hypot(se[1], (1 - a) * se[0])

    def test_determinism(self):
        m = new_arma([0.5, -0.2], [0.3], 1.0)
        a = simulate(m, 1000, seed=5)
        b = simulate(m, 1000, seed=5)
        c = simulate(m, 1000, seed=6)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_provenance(self):
        s = simulate(new_arma([], [], 1.0), 10, tau=0.5, seed=3)
        assert s.tau == 0.5 and s.seed == 3 and s.scheme == "arma"
        assert simulate(new_arma([], [], 1.0), 10).seed is not None

    def test_errors(self):
        with pytest.raises(InvalidParameterError):
            simulate(new_arma([], [], 1.0), 0)
        with pytest.raises(InvalidParameterError):
            simulate(new_arma([2, -1], [], 1.0), 10, burn_in=5)

    def test_non_stationary_zero_start(self):
        s = simulate(new_arma([2, -1], [], 1.0), 5, seed=0)
        eps = np.random.default_rng(0).standard_normal(5)
        # double integration of the innovations from rest
        assert np.allclose(s.values, np.cumsum(np.cumsum(eps)))

    def test_initial_state(self):
        s = simulate(new_arma([0.5], [], 0.0), 4, initial=[8.0])
        assert np.allclose(s.values, [4, 2, 1, 0.5])

    def test_recursion_matches_definition(self):
        phi, nu, mu = [0.5, -0.2], [0.3, 0.1], 0.7
        s = simulate(new_arma(phi, nu, mu), 50, seed=9, burn_in=0)
        eps = np.random.default_rng(9).standard_normal(50)
        x = np.zeros(50)
        for n in range(50):
            acc = mu * eps[n]
            for i, f in enumerate(phi, 1):
                acc += f * x[n - i] if n - i >= 0 else 0.0
            for i, v in enumerate(nu, 1):
                acc += v * eps[n - i] if n - i >= 0 else 0.0
            x[n] = acc
        assert np.allclose(s.values, x)


class TestTimeSeries:
    def test_invariants(self):
        with pytest.raises(InvalidParameterError):
            TimeSeries(tau=0.0, values=np.ones(3))
        with pytest.raises(InvalidParameterError):
            TimeSeries(tau=1.0, values=np.array([]))
        with pytest.raises(InvalidParameterError):
            TimeSeries(tau=1.0, values=np.ones(3), scheme="bogus")

    def test_read_only(self):
        s = TimeSeries(tau=1.0, values=np.ones(3))
        with pytest.raises(ValueError):
            s.values[0] = 2.0


class TestAutocovariance:
    def test_ar1_closed_form(self):
        a, sigma = 0.1, 1.0
        g = autocovariance(new_arma([1 - a], [], sigma), 5)
        g0 = sigma**2 / (1 - (1 - a) ** 2)
        assert g[0] == pytest.approx(5.2631578947368425, rel=1e-12)
        assert np.allclose(g, g0 * (1 - a) ** np.arange(6), rtol=1e-12)

    def test_white_noise(self):
        assert np.allclose(autocovariance(new_arma([], [], 2.0), 3), [4, 0, 0, 0])

    def test_pure_ma(self):
        g = autocovariance(new_arma([], [0.5], 1.0), 3)
        assert np.allclose(g, [1.25, 0.5, 0, 0])

    def test_non_stationary(self):
        with pytest.raises(NonStationaryError):
            autocovariance(new_arma([2, -1], [], 1.0), 2)

    def test_arma21_yule_walker_oracle(self):
        # psi-weights oracle: gamma(k) = sum_j psi_j psi_{j+k}
        phi, nu, mu = [0.5, -0.2], [0.3], 1.0
        w = np.zeros(400)
        for j in range(400):
            w[j] = (mu if j == 0 else 0) + (nu[0] if j == 1 else 0)
            w[j] += sum(phi[i - 1] * w[j - i] for i in (1, 2) if j - i >= 0)
        oracle = [w[: 400 - k] @ w[k:] for k in range(6)]
        assert np.allclose(autocovariance(new_arma(phi, nu, mu), 5), oracle, rtol=1e-12)

    @pytest.mark.parametrize(
        "phi,nu",
        [([0.5, -0.2], [0.3]), ([0.9], []), ([1.2, -0.5, 0.1], [0.4, 0.2])],
    )
    def test_monte_carlo(self, phi, nu):
        m = new_arma(phi, nu, 1.0)
        s = simulate(m, 10**6, seed=11)
        mean, se = block_se(lambda b: _sample_acov(b, 5), s.values)
        assert np.all(np.abs(mean - autocovariance(m, 5)) < 4 * se)


class TestClassC:
    def test_eigen_arguments(self):
        u, tau = 2.0, 0.002
        m = new_arma([-np.exp(-u * tau), -np.exp(-2 * u * tau)], [], 0.0)
        lam = companion_eigenvalues(m)
        assert np.allclose(np.sort(np.angle(lam)), [-2 * np.pi / 3, 2 * np.pi / 3], atol=1e-10)
        assert np.allclose(np.abs(lam), np.exp(-u * tau), rtol=1e-12)

    def test_deterministic_orbit_cycles(self):
        u, tau = 2.0, 0.002
        m = new_arma([-np.exp(-u * tau), -np.exp(-2 * u * tau)], [], 0.0)
        s = simulate(m, 300, initial=[1.0, 0.3])
        k = branch_sectors(m, s.values)
        assert np.all((np.diff(k) % 3) == 1)

    def test_requires_complex_pair(self):
        with pytest.raises(InvalidParameterError):
            branch_sectors(new_arma([0.5, 0.1], [], 1.0), np.ones(5))
