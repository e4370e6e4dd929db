"""Domain types and squeeze-parameter algebra shared by both detection schemes.

Units: hbar = 1. The squeeze magnitude ``rho`` is the canonical stored value;
the disk coordinate ``gamma = exp(i theta) tanh(rho)`` is derived on demand
and carries an exact ``deficit = 1 - |gamma|`` so that strongly squeezed
states (rho of order 10-20, where tanh rounds to 1.0) survive the round trip.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class SqueezeFilterError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SqueezeFilterError, ValueError):
    """Invalid parameters or configuration."""


class NumericGuardError(SqueezeFilterError, ArithmeticError):
    """A numeric guard tripped (overflow, NaN, invariant violation)."""


class SingularityError(NumericGuardError):
    """A closed-form denominator came too close to zero."""


class Scheme(str, enum.Enum):
    DOUBLE = "double"
    SINGLE = "single"


@dataclass(frozen=True)
class ModelParams:
    """Cavity-mode and detection parameters.

    Parameters
    ----------
    omega : float
        Mode angular frequency (> 0).
    mu : float
        Coupling constant to the observed field (> 0).
    phi0 : float
        Initial local-oscillator phase.
    vartheta : float
        Local-oscillator detuning, so that ``phi(t) = phi0 + vartheta * t``.
    scheme : Scheme
        Double heterodyne (complex record) or single heterodyne (real record).
    """

    omega: float = 1.0
    mu: float = 0.01
    phi0: float = 0.0
    vartheta: float = 0.05
    scheme: Scheme = Scheme.DOUBLE

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ConfigError(f"omega must be finite and > 0, got {self.omega}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ConfigError(f"mu must be finite and > 0, got {self.mu}")
        if not (math.isfinite(self.phi0) and math.isfinite(self.vartheta)):
            raise ConfigError("phi0 and vartheta must be finite")
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    def phase(self, t):
        """Local-oscillator phase at time(s) ``t``."""
        return self.phi0 + self.vartheta * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class SqueezeParam:
    """Squeeze parameter ``xi = rho * exp(i theta)``; ``theta`` kept unwrapped."""

    rho: float
    theta: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.rho) or self.rho < 0:
            raise ConfigError(f"rho must be finite and >= 0, got {self.rho}")
        if not math.isfinite(self.theta):
            raise ConfigError(f"theta must be finite, got {self.theta}")

    @property
    def xi(self) -> complex:
        return self.rho * complex(math.cos(self.theta), math.sin(self.theta))

    @property
    def wrapped_theta(self) -> float:
        """``theta`` reduced to (-pi, pi]."""
        return wrap_angle(self.theta)


@dataclass(frozen=True)
class GammaParam:
    """Disk coordinate ``gamma = exp(i theta) tanh(rho)`` with ``|gamma| < 1``.

    ``deficit`` stores ``1 - |gamma|`` exactly; it is recomputed from
    ``gamma`` when not supplied.
    """

    gamma: complex
    deficit: float = field(default=float("nan"))

    def __post_init__(self):
        g = complex(self.gamma)
        object.__setattr__(self, "gamma", g)
        d = self.deficit
        if math.isnan(d):
            d = 1.0 - abs(g)
            object.__setattr__(self, "deficit", d)
        if not (d > 0.0) or not math.isfinite(abs(g)):
            raise ConfigError(f"|gamma| must be < 1, got |gamma| = {abs(g)!r}")

    @property
    def gamma1(self) -> float:
        """``cosh(rho)``."""
        return math.cosh(squeeze_from_gamma(self).rho)

    @property
    def gamma2(self) -> complex:
        """``exp(i theta) sinh(rho)``."""
        s = squeeze_from_gamma(self)
        return complex(math.cos(s.theta), math.sin(s.theta)) * math.sinh(s.rho)


@dataclass(frozen=True)
class SqueezedCoherentRecord:
    """Posterior state ``l * S(xi) |alpha>`` in the Gaussian family."""

    l: complex = 1.0 + 0j
    squeeze: SqueezeParam = SqueezeParam(0.0, 0.0)
    alpha: complex = 0j

    def __post_init__(self):
        n2 = abs(self.l) ** 2
        if not (math.isfinite(n2) and n2 > 0):
            raise NumericGuardError(f"|l|^2 must be positive and finite, got {n2}")


@dataclass(frozen=True)
class QuadratureMoments:
    meanX: float
    meanY: float
    dX: float
    dY: float


def wrap_angle(theta):
    """Map angles to (-pi, pi]."""
    w = np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2 * np.pi)
    return float(w) if np.ndim(w) == 0 else w


def _tanh_deficit(rho: float) -> float:
    # 1 - tanh(rho) without cancellation
    e = math.exp(-2.0 * rho)
    return 2.0 * e / (1.0 + e)


def gamma_from_squeeze(s: SqueezeParam) -> GammaParam:
    """``gamma = tanh(rho) exp(i theta)``."""
    if s.rho == 0.0:
        return GammaParam(0j, 1.0)
    phase = complex(math.cos(s.theta), math.sin(s.theta))
    return GammaParam(math.tanh(s.rho) * phase, _tanh_deficit(s.rho))


def squeeze_from_gamma(g: GammaParam) -> SqueezeParam:
    """Inverse of :func:`gamma_from_squeeze`; ``theta = 0`` when ``gamma = 0``.

    Raises
    ------
    ConfigError
        If ``|gamma| >= 1``.
    """
    if not isinstance(g, GammaParam):
        g = GammaParam(g)
    d = g.deficit
    if d >= 1.0:
        return SqueezeParam(0.0, 0.0)
    # artanh(1 - d) = 0.5 * log((2 - d) / d)
    rho = 0.5 * math.log((2.0 - d) / d) if d < 0.5 else math.atanh(1.0 - d)
    theta = math.atan2(g.gamma.imag, g.gamma.real)
    return SqueezeParam(rho, theta)


def kappa(g: GammaParam) -> complex:
    """Moebius image ``(1 + gamma) / (1 - gamma)``; always ``Re kappa > 0``."""
    if not isinstance(g, GammaParam):
        g = GammaParam(g)
    gam = g.gamma
    r = abs(gam)
    if r == 0.0:
        return 1.0 + 0j
    ph = gam / r
    half = math.atan2(ph.imag, ph.real) / 2
    # 1 - gamma = (1 - e^{i th}) + d e^{i th}, with 1 - e^{i th} = -2i sin(th/2) e^{i th/2}
    one_minus = -2j * math.sin(half) * complex(math.cos(half), math.sin(half)) + g.deficit * ph
    return (1.0 + gam) / one_minus


def quadrature_moments(alpha, rho, theta):
    """Vectorised means and standard deviations of X, Y for ``S(xi)|alpha>``.

    Returns ``(meanX, meanY, dX, dY)`` arrays broadcast over the inputs.
    """
    alpha = np.asarray(alpha, dtype=complex)
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    mean_a = alpha * np.cosh(rho) - np.conj(alpha) * np.exp(1j * theta) * np.sinh(rho)
    # cosh 2r -/+ sinh 2r cos th, rewritten to avoid cancellation at large rho
    base = np.exp(-2 * rho)
    sh = 2 * np.sinh(2 * rho)
    dX = 0.5 * np.sqrt(base + sh * np.sin(theta / 2) ** 2)
    dY = 0.5 * np.sqrt(base + sh * np.cos(theta / 2) ** 2)
    return mean_a.real, mean_a.imag, dX, dY


def uncertainties_from_gamma(g: GammaParam) -> tuple[float, float]:
    """``dX = (4 Re k)^(-1/2)``, ``dY = |k| (4 Re k)^(-1/2)`` with ``k = kappa(g)``."""
    if not isinstance(g, GammaParam):
        g = GammaParam(g)
    k = kappa(g)
    re_k = k.real
    if g.gamma != 0:
        # Re k = (1 - |g|^2) / |1 - g|^2, with 1 - |g|^2 = d (2 - d)
        re_k = g.deficit * (2.0 - g.deficit) * abs(k) ** 2 / abs(1.0 + g.gamma) ** 2
    dx = 1.0 / math.sqrt(4.0 * re_k)
    return dx, abs(k) * dx


def moments_from_record(r: SqueezedCoherentRecord) -> QuadratureMoments:
    """Posterior quadrature means and uncertainties of ``S(xi)|alpha>``."""
    s = r.squeeze
    c, sh = math.cosh(s.rho), math.sinh(s.rho)
    mean_a = r.alpha * c - r.alpha.conjugate() * complex(math.cos(s.theta), math.sin(s.theta)) * sh
    dx, dy = uncertainties_from_gamma(gamma_from_squeeze(s))
    return QuadratureMoments(mean_a.real, mean_a.imag, dx, dy)
