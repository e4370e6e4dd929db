import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squeezefilter import core
from squeezefilter.core import (
    ConfigError,
    GammaParam,
    ModelParams,
    NumericGuardError,
    SqueezedCoherentRecord,
    SqueezeParam,
    gamma_from_squeeze,
    kappa,
    moments_from_record,
    squeeze_from_gamma,
)


def _tanh_series(x, terms=60):
    # artanh inverse via odd series of tanh is awkward; use exp-series ratio instead
    e = sum((2 * x) ** k / math.factorial(k) for k in range(terms))
    return (e - 1) / (e + 1)


def _artanh_series(x, terms=400):
    return sum(x ** (2 * k + 1) / (2 * k + 1) for k in range(terms))


class TestModelParams:
    def test_defaults_follow_figure_preset(self):
        p = ModelParams()
        assert (p.omega, p.mu, p.phi0, p.vartheta) == (1.0, 0.01, 0.0, 0.05)

    @pytest.mark.parametrize("kw", [{"omega": 0}, {"mu": -1}, {"mu": float("nan")},
                                    {"phi0": float("inf")}, {"scheme": "triple"}])
    def test_rejects_bad_values(self, kw):
        with pytest.raises((ConfigError, ValueError)):
            ModelParams(**kw)

    def test_phase_linear(self):
        p = ModelParams(phi0=0.3, vartheta=0.05)
        assert p.phase(2.0) == pytest.approx(0.4)
        np.testing.assert_allclose(p.phase([0, 1]), [0.3, 0.35])


class TestGamma:
    def test_zero_squeeze(self):
        g = gamma_from_squeeze(SqueezeParam(0.0, 1.3))
        assert g.gamma == 0

    def test_real_value_against_series(self):
        g = gamma_from_squeeze(SqueezeParam(0.5, 0.0))
        assert g.gamma.real == pytest.approx(_tanh_series(0.5), abs=1e-14)
        assert g.gamma.real == pytest.approx(0.46211715726000974, abs=1e-15)

    def test_imaginary_value(self):
        g = gamma_from_squeeze(SqueezeParam(2.0, math.pi / 2))
        assert g.gamma.imag == pytest.approx(0.9640275800758169, abs=1e-15)
        assert abs(g.gamma.real) < 1e-15

    def test_inverse_conventions(self):
        s = squeeze_from_gamma(GammaParam(0j))
        assert (s.rho, s.theta) == (0.0, 0.0)
        s = squeeze_from_gamma(GammaParam(-0.5))
        assert s.rho == pytest.approx(_artanh_series(0.5), abs=1e-14)
        assert s.theta == pytest.approx(math.pi)
        s = squeeze_from_gamma(GammaParam(0.46211715726000974))
        assert s.rho == pytest.approx(0.5, abs=1e-14)

    @pytest.mark.parametrize("g", [1.0, 1.0 + 0.1j, -2.0, 1j])
    def test_rejects_outside_disk(self, g):
        with pytest.raises(ConfigError):
            squeeze_from_gamma(GammaParam(g))

    @given(st.floats(0.0, 20.0), st.floats(-math.pi + 1e-9, math.pi))
    @settings(max_examples=300, deadline=None)
    def test_round_trip(self, rho, theta):
        s = squeeze_from_gamma(gamma_from_squeeze(SqueezeParam(rho, theta)))
        assert s.rho == pytest.approx(rho, abs=1e-12, rel=1e-12)
        if rho > 1e-6:
            assert abs(core.wrap_angle(s.theta - theta)) < 1e-12

    def test_strong_squeeze_survives(self):
        g = gamma_from_squeeze(SqueezeParam(18.0, 0.2))
        assert g.deficit > 0
        assert squeeze_from_gamma(g).rho == pytest.approx(18.0, rel=1e-12)

    def test_gamma1_gamma2(self):
        g = gamma_from_squeeze(SqueezeParam(0.7, 0.4))
        assert g.gamma1 == pytest.approx(math.cosh(0.7))
        assert g.gamma2 == pytest.approx(math.sinh(0.7) * complex(math.cos(0.4), math.sin(0.4)))


class TestKappa:
    def test_values(self):
        assert kappa(GammaParam(0j)) == 1
        assert kappa(gamma_from_squeeze(SqueezeParam(0.5))) == pytest.approx(math.exp(1.0), rel=1e-14)
        assert kappa(GammaParam(0.5j)) == pytest.approx(0.6 + 0.8j, abs=1e-15)

    @given(st.floats(0.0, 15.0), st.floats(-math.pi, math.pi))
    @settings(max_examples=300, deadline=None)
    def test_right_half_plane(self, rho, theta):
        k = kappa(gamma_from_squeeze(SqueezeParam(rho, theta)))
        assert k.real > 0
        assert math.isfinite(abs(k))


class TestMoments:
    def test_vacuum(self):
        m = moments_from_record(SqueezedCoherentRecord())
        assert (m.meanX, m.meanY, m.dX, m.dY) == (0, 0, 0.5, 0.5)

    def test_squeezed_vacuum(self):
        m = moments_from_record(SqueezedCoherentRecord(1, SqueezeParam(0.5, 0.0), 0j))
        assert m.dX == pytest.approx(math.exp(-0.5) / 2, abs=1e-14)
        assert m.dY == pytest.approx(math.exp(0.5) / 2, abs=1e-14)
        assert m.dX == pytest.approx(0.30326532985631671, abs=1e-15)

    def test_coherent_means(self):
        m = moments_from_record(SqueezedCoherentRecord(1, SqueezeParam(0.0), 1 + 1j))
        assert (m.meanX, m.meanY) == pytest.approx((1.0, 1.0))
        assert (m.dX, m.dY) == (0.5, 0.5)

    def test_vectorised_form_agrees(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            rho, theta = rng.uniform(0, 3), rng.uniform(-4, 4)
            a = complex(*rng.normal(size=2))
            m = moments_from_record(SqueezedCoherentRecord(1, SqueezeParam(rho, theta), a))
            v = core.quadrature_moments(a, rho, theta)
            np.testing.assert_allclose(v, (m.meanX, m.meanY, m.dX, m.dY), rtol=1e-11, atol=1e-13)

    def test_uncertainty_product(self):
        rng = np.random.default_rng(11)
        rho = rng.uniform(0, 10, 10_000)
        theta = rng.uniform(-math.pi, math.pi, 10_000)
        worst = min(m.dX * m.dY for m in (moments_from_record(
            SqueezedCoherentRecord(1, SqueezeParam(r, t))) for r, t in zip(rho, theta)))
        assert worst >= 0.25 - 1e-12

    @pytest.mark.parametrize("rho", [0.3, 1.0, 4.0])
    def test_product_minimal_iff_real_gamma(self, rho):
        for th in (0.0, math.pi):
            m = moments_from_record(SqueezedCoherentRecord(1, SqueezeParam(rho, th)))
            assert m.dX * m.dY == pytest.approx(0.25, abs=1e-9)
        m = moments_from_record(SqueezedCoherentRecord(1, SqueezeParam(rho, 1.0)))
        assert m.dX * m.dY > 0.25 + 1e-6


def test_record_guards_norm():
    with pytest.raises(NumericGuardError):
        SqueezedCoherentRecord(0.0)
    with pytest.raises(NumericGuardError):
        SqueezedCoherentRecord(complex("nan"))


def test_squeeze_param_validation():
    with pytest.raises(ConfigError):
        SqueezeParam(-0.1)
    assert SqueezeParam(1.0, 3 * math.pi).wrapped_theta == pytest.approx(math.pi)
    assert SqueezeParam(2.0, math.pi / 2).xi == pytest.approx(2j)


def test_wrap_angle_range():
    x = np.linspace(-20, 20, 1001)
    w = core.wrap_angle(x)
    assert np.all(w > -math.pi) and np.all(w <= math.pi)
    np.testing.assert_allclose(np.cos(w), np.cos(x), atol=1e-12)
