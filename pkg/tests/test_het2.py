import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squeezefilter import fock, het2
from squeezefilter.core import ConfigError, ModelParams, SqueezeParam
from squeezefilter.het2 import SqueezeRegion
from squeezefilter.noise import TimeGrid, generate_batch, generate_path

P = ModelParams(1.0, 0.1, 0.0, 0.05, "double")


def rk4_rho(rho0, mu, t, n=20_000):
    h = t / n
    f = lambda r: -mu * math.sinh(r) * math.cosh(r)  # noqa: E731
    r = rho0
    for _ in range(n):
        k1 = f(r)
        k2 = f(r + h * k1 / 2)
        k3 = f(r + h * k2 / 2)
        k4 = f(r + h * k3)
        r += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return r


class TestSqueeze:
    def test_initial(self):
        s = het2.squeeze_at(0.0, P, SqueezeParam(0.5, 1.0))
        assert (s.rho, s.theta) == (0.5, 1.0)

    def test_against_rk4(self):
        p = ModelParams(1.0, 1 / math.pi, 0.0, 0.05)
        s = het2.squeeze_at(math.pi, p, SqueezeParam(0.5, 0.0))
        assert s.rho == pytest.approx(0.17168, abs=1e-5)
        assert s.rho == pytest.approx(rk4_rho(0.5, p.mu, math.pi), rel=1e-12)
        assert s.theta == pytest.approx(-2 * math.pi)

    def test_asymptotic(self):
        p = ModelParams(1.0, 0.04)
        s = het2.squeeze_at(1000.0, p, SqueezeParam(8.0))
        assert s.rho == pytest.approx(math.exp(-40) * math.tanh(8.0), rel=1e-10)
        assert s.rho < 1e-17

    def test_strong_initial_squeeze_finite(self):
        rho, _ = het2.rho_theta(np.array([0.0, 1e-6, 1.0]), P, 8.0, 0.0)
        assert rho[0] == pytest.approx(8.0, rel=1e-12)
        assert np.all(np.diff(rho) < 0)

    def test_negative_time(self):
        with pytest.raises(ConfigError):
            het2.squeeze_at(-1.0, P, SqueezeParam(0.5))

    @given(st.floats(0, 50), st.floats(0, 50), st.floats(0.01, 4.0), st.floats(1e-3, 2.0))
    @settings(max_examples=200, deadline=None)
    def test_semigroup(self, t1, t2, rho0, mu):
        p = ModelParams(1.0, mu)
        r1 = het2.squeeze_at(t1, p, SqueezeParam(rho0)).rho
        r12 = het2.squeeze_at(t2, p, SqueezeParam(r1)).rho
        assert r12 == pytest.approx(het2.squeeze_at(t1 + t2, p, SqueezeParam(rho0)).rho,
                                    rel=1e-12, abs=1e-300)

    def test_theta_linear(self):
        t = np.linspace(0, 30, 31)
        _, th = het2.rho_theta(t, P, 0.5, 0.7)
        np.testing.assert_allclose(th - 0.7, -2 * t, rtol=0, atol=1e-13)


class TestUncertainties:
    def test_vacuum(self):
        dx, dy = het2.uncertainties(np.linspace(0, 10, 5), P, 0.0, 0.3)
        np.testing.assert_array_equal(dx, 0.5)
        np.testing.assert_array_equal(dy, 0.5)

    def test_initial_values(self):
        dx, dy = het2.uncertainties(0.0, P, 0.5, 0.0)
        assert dx == pytest.approx(math.exp(-0.5) / 2, abs=1e-12)
        assert dy == pytest.approx(math.exp(0.5) / 2, abs=1e-12)

    def test_matches_family_formula(self):
        rng = np.random.default_rng(3)
        from squeezefilter.core import quadrature_moments
        for _ in range(100):
            t, rho0, th0 = rng.uniform(0, 50), rng.uniform(0, 3), rng.uniform(-3, 3)
            rho, th = het2.rho_theta(t, P, rho0, th0)
            _, _, dx, dy = quadrature_moments(0, rho, th)
            assert het2.uncertainties(t, P, rho0, th0) == pytest.approx((dx, dy), rel=1e-10)

    def test_product_and_equality(self):
        rng = np.random.default_rng(5)
        t = rng.uniform(0, 200, 10_000)
        rho0 = rng.uniform(0, 5)
        dx, dy = het2.uncertainties(t, P, rho0, 0.4)
        assert np.min(dx * dy) >= 0.25 - 1e-12
        # cos(theta) = +-1 at theta0 - 2 t = k pi
        tk = (0.4 + np.arange(0, 40) * math.pi) / 2
        dx, dy = het2.uncertainties(tk, P, rho0, 0.4)
        np.testing.assert_allclose(dx * dy, 0.25, atol=1e-9)

    def test_approaches_vacuum(self):
        dx, dy = het2.uncertainties(400.0, P, 2.0, 0.0)
        assert abs(dx - 0.5) < 1e-8 and abs(dy - 0.5) < 1e-8


class TestRegion:
    def test_examples(self):
        assert het2.squeeze_region(0, P, 0.5, 0.0) is SqueezeRegion.X_SQUEEZED
        assert het2.squeeze_region(0, P, 0.5, math.pi) is SqueezeRegion.Y_SQUEEZED
        assert het2.squeeze_region(0, P, 0.5, math.pi / 2) is SqueezeRegion.NONE
        assert het2.squeeze_region(0, P, 0.0, 0.0) is SqueezeRegion.NONE

    def test_consistent_with_uncertainties(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            p = ModelParams(rng.uniform(0.2, 3), rng.uniform(1e-3, 1))
            rho0, th0 = rng.uniform(0.01, 3), rng.uniform(-3, 3)
            t = rng.uniform(0, 5 / p.mu, 500)
            codes = het2.squeeze_region_codes(t, p, rho0, th0)
            dx, dy = het2.uncertainties(t, p, rho0, th0)
            assert np.array_equal(codes == 1, dx < 0.5)
            assert np.array_equal(codes == -1, dy < 0.5)


def _em_alpha(path, p, xi0, alpha0):
    """Euler-Maruyama on the displacement SDE with the exact squeeze."""
    t = path.grid.times
    rho, theta = het2.rho_theta(t, p, xi0.rho, xi0.theta)
    a = np.empty(len(t), dtype=complex)
    a[0] = alpha0
    dt = path.grid.dt
    for k, dq in enumerate(path.increments):
        drift = (-(1j * p.omega + p.mu / 2) - p.mu * math.sinh(rho[k]) ** 2) * a[k]
        noise = math.sqrt(p.mu) * np.exp(1j * theta[k]) * math.sinh(rho[k]) * np.exp(-1j * p.phase(t[k]))
        a[k + 1] = a[k] + drift * dt - noise * dq
    return a


class TestTrajectories:
    def test_coherent_noise_free(self):
        g = TimeGrid(5.0, 1e-3)
        a0 = 0.4 - 0.3j
        exact = a0 * np.exp(-(1j * P.omega + P.mu / 2) * g.times)
        for seed in range(3):
            path = generate_path(g, "complex", seed)
            a = het2.alpha_trajectory(path, P, SqueezeParam(0.0), a0)
            if seed == 0:
                first = a
            np.testing.assert_array_equal(a, first)
            np.testing.assert_allclose(a, exact, rtol=1e-15, atol=0)
        assert np.all(het2.alpha_trajectory(path, P, SqueezeParam(0.0), 0) == 0)

    def test_vacuum_likelihood_phase(self):
        path = generate_path(TimeGrid(3.0, 1e-3), "complex", 1)
        sol = het2.solve(path, P, SqueezeParam(0.0), 0)
        np.testing.assert_allclose(sol.l, np.exp(-0.5j * P.omega * sol.t), atol=1e-14)

    def test_initial_frame(self):
        path = generate_path(TimeGrid(1.0, 1e-3), "complex", 1)
        sol = het2.solve(path, P, SqueezeParam(0.5, 0.2), 0.3 + 0.1j)
        t, rec, mom = sol.frame(0)
        assert t == 0 and rec.l == 1 and rec.alpha == 0.3 + 0.1j
        assert rec.squeeze == SqueezeParam(0.5, 0.2)
        assert len(sol.frames) == len(sol)

    def test_alpha_against_em(self):
        g = TimeGrid(2.0, 1e-4)
        xi0 = SqueezeParam(0.5, 0.0)
        for seed in range(3):
            path = generate_path(g, "complex", seed)
            a = het2.alpha_trajectory(path, P, xi0, 0.5)
            assert np.max(np.abs(a - _em_alpha(path, P, xi0, 0.5))) < 10 * g.dt

    def test_rejects_real_noise(self):
        path = generate_path(TimeGrid(1.0, 0.01), "real", 0)
        with pytest.raises(ConfigError):
            het2.alpha_trajectory(path, P, SqueezeParam(0.5), 0)

    def test_l_grid_mismatch(self):
        path = generate_path(TimeGrid(1.0, 0.01), "complex", 0)
        with pytest.raises(ConfigError):
            het2.l_trajectory(path, P, SqueezeParam(0.5), 0, np.zeros(5))

    def test_batch_equals_single(self):
        g = TimeGrid(1.0, 1e-3)
        batch = generate_batch(g, "complex", 3, range(4))
        sol = het2.solve(batch, P, SqueezeParam(0.5), 0.5)
        one = het2.solve(generate_path(g, "complex", 3, 2), P, SqueezeParam(0.5), 0.5)
        np.testing.assert_allclose(sol.alpha[2], one.alpha, rtol=1e-13)
        np.testing.assert_allclose(sol.l[2], one.l, rtol=1e-12)

    # Both sides carry O(sqrt(dt)) strong error once |alpha| is sizeable (left-point
    # sums with stochastic integrands; missing Milstein term in the oracle), so the
    # 10 dt bound only holds for small displacements.
    @pytest.mark.parametrize("alpha0,tol", [(0.0, 1e-3), (0.5, 1e-3), (0.6 - 0.7j, 1e-2)])
    def test_fock_oracle_short_horizon(self, alpha0, tol):
        g = TimeGrid(0.5, 1e-4)
        xi0 = SqueezeParam(0.5, 0.3)
        path = generate_batch(g, "complex", 21, range(4))
        sol = het2.solve(path, P, xi0, alpha0)
        cps = np.arange(250, g.n_steps + 1, 250)
        states = fock.integrate_filter(fock.build_squeezed_coherent(xi0, alpha0, 60), path, P, cps)
        fx, fy, fdx, fdy, fn = fock.fock_moments(states)
        mx, my, dx, dy = sol.moments()
        assert np.max(np.abs(np.abs(sol.l[:, cps]) ** 2 - fn)) < tol
        assert np.max(np.abs(mx[:, cps] - fx)) < tol
        assert np.max(np.abs(my[:, cps] - fy)) < tol
        assert np.max(np.abs(dx[cps] - fdx)) < tol
        assert np.max(np.abs(dy[cps] - fdy)) < tol

    def test_frozen_trajectory(self):
        path = generate_path(TimeGrid(1.0, 0.01), "complex", 7)
        sol = het2.solve(path, P, SqueezeParam(0.5), 0.5)
        assert sol.alpha[-1] == pytest.approx(FROZEN_ALPHA, abs=1e-13)
        assert sol.l[-1] == pytest.approx(FROZEN_L, abs=1e-13)


FROZEN_ALPHA = 0.3440213058475431 - 0.30694705257427923j
FROZEN_L = 0.8249418360043144 - 0.6067907299107763j
