"""Closed-form posterior under double heterodyne detection.

The squeeze magnitude contracts deterministically, ``tanh rho(t) =
exp(-mu t) tanh rho0``, and the squeeze axis rotates at ``-2 omega``; only the
displacement ``alpha`` and the likelihood amplitude ``l`` see the complex
record. All stochastic integrals are left-endpoint sums on the record's own
grid, accumulated once (O(n) per trajectory).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    ModelParams,
    QuadratureMoments,
    SqueezedCoherentRecord,
    SqueezeParam,
    quadrature_moments,
)
from .noise import NoiseKind, NoisePath, ito_cumulative


class SqueezeRegion(str, enum.Enum):
    X_SQUEEZED = "X"
    Y_SQUEEZED = "Y"
    NONE = "none"


def _one_minus_s(t, params, rho0):
    """``1 - exp(-mu t) tanh rho0`` without cancellation when it is tiny."""
    e0 = np.exp(-2.0 * rho0)
    return -np.expm1(-params.mu * t) + np.exp(-params.mu * t) * (2.0 * e0 / (1.0 + e0))


def rho_theta(t, params: ModelParams, rho0: float, theta0: float):
    """Vectorised ``(rho(t), theta(t))``; theta is left unwrapped."""
    t = np.asarray(t, dtype=float)
    theta = theta0 - 2.0 * params.omega * t
    if rho0 == 0.0:
        return np.zeros_like(t), theta
    one_minus = _one_minus_s(t, params, rho0)
    x = np.exp(-params.mu * t) * np.tanh(rho0)
    with np.errstate(divide="ignore"):
        near_one = 0.5 * np.log((2.0 - one_minus) / one_minus)
    rho = np.where(x < 0.5, np.arctanh(np.minimum(x, 0.5)), near_one)
    rho = np.where(t == 0.0, rho0, rho)
    return rho, theta


def squeeze_at(t: float, params: ModelParams, xi0: SqueezeParam) -> SqueezeParam:
    if t < 0:
        raise ConfigError("t must be >= 0")
    rho, theta = rho_theta(t, params, xi0.rho, xi0.theta)
    return SqueezeParam(float(rho), float(theta))


def _check(path: NoisePath):
    if path.kind is not NoiseKind.COMPLEX:
        raise ConfigError("double heterodyne needs a complex noise record")


def alpha_trajectory(path: NoisePath, params: ModelParams, xi0: SqueezeParam,
                     alpha0: complex) -> np.ndarray:
    """Displacement ``alpha(t_k)`` on every grid point of ``path``."""
    _check(path)
    t = path.grid.times
    c = 1j * params.omega + 0.5 * params.mu
    rho, _ = rho_theta(t, params, xi0.rho, xi0.theta)
    tl = t[:-1]
    integrand = np.exp(-c * tl) * np.exp(-1j * params.phase(tl))
    stoch = ito_cumulative(integrand, path.increments)
    amp = np.sqrt(params.mu) * np.exp(1j * xi0.theta) * np.sinh(xi0.rho)
    return np.exp(-c * t) * (np.cosh(rho) / np.cosh(xi0.rho)) * (alpha0 - amp * stoch)


def l_trajectory(path: NoisePath, params: ModelParams, xi0: SqueezeParam,
                 alpha0: complex, alphas: np.ndarray) -> np.ndarray:
    """Likelihood amplitude ``l(t_k)``; ``|l|^2`` is the record's density."""
    _check(path)
    alphas = np.asarray(alphas)
    if alphas.shape[-1] != path.grid.n_steps + 1:
        raise ConfigError("alphas must be sampled on the path's grid")
    t = path.grid.times
    dt = path.grid.dt
    mu = params.mu
    rho, theta = rho_theta(t, params, xi0.rho, xi0.theta)
    ch, sh = np.cosh(rho), np.sinh(rho)
    a = alphas[..., :-1]
    ito = ito_cumulative(np.sqrt(mu) * a * ch[:-1] * np.exp(-1j * params.phase(t[:-1])),
                         path.increments)
    drift = mu * np.exp(-1j * theta[:-1]) * a**2 * sh[:-1] * ch[:-1] * dt
    chi = ito.copy()
    chi[..., 1:] += np.cumsum(drift, axis=-1)
    expo = -0.5j * params.omega * t + 0.5 * (np.abs(alphas) ** 2 - abs(alpha0) ** 2) + chi
    return np.sqrt(ch / np.cosh(xi0.rho)) * np.exp(expo)


def uncertainties(t, params: ModelParams, rho0: float, theta0: float):
    """Deterministic ``(dX(t), dY(t))``; broadcasts over ``t``.

    With ``s = exp(-mu t) tanh rho0`` and ``c = 2 s / (1 - s^2)`` the variances
    are ``(1 + c (s -+ cos)) / 4``; they are evaluated here as
    ``((1 - s)^2 + 4 s sin^2 or cos^2 of half the angle) / (4 (1 - s^2))`` so that
    strong squeezing does not cancel.
    """
    t = np.asarray(t, dtype=float)
    s = np.exp(-params.mu * t) * np.tanh(rho0)
    om = _one_minus_s(t, params, rho0)
    half = 0.5 * (theta0 - 2.0 * params.omega * t)
    den = om * (1.0 + s)
    dx = 0.5 * np.sqrt((om * om + 4.0 * s * np.sin(half) ** 2) / den)
    dy = 0.5 * np.sqrt((om * om + 4.0 * s * np.cos(half) ** 2) / den)
    if np.ndim(dx) == 0:
        return float(dx), float(dy)
    return dx, dy


def squeeze_region_codes(t, params: ModelParams, rho0: float, theta0: float) -> np.ndarray:
    """+1 where X is squeezed, -1 where Y is squeezed, 0 elsewhere."""
    t = np.asarray(t, dtype=float)
    if rho0 <= 0.0:
        return np.zeros(t.shape, dtype=int)
    s = np.exp(-params.mu * t) * np.tanh(rho0)
    cos = np.cos(theta0 - 2.0 * params.omega * t)
    return np.where(cos > s, 1, np.where(cos < -s, -1, 0))


def squeeze_region(t: float, params: ModelParams, rho0: float, theta0: float) -> SqueezeRegion:
    code = int(squeeze_region_codes(t, params, rho0, theta0))
    return {1: SqueezeRegion.X_SQUEEZED, -1: SqueezeRegion.Y_SQUEEZED}.get(code, SqueezeRegion.NONE)


@dataclass(frozen=True, eq=False)
class Het2Solution:
    """Posterior record on every grid point of one (or a stack of) record(s)."""

    params: ModelParams
    xi0: SqueezeParam
    alpha0: complex
    t: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray
    l: np.ndarray

    def __len__(self):
        return len(self.t)

    def moments(self):
        """Arrays ``(meanX, meanY, dX, dY)``."""
        return quadrature_moments(self.alpha, self.rho, self.theta)

    def frame(self, k: int):
        """``(t, SqueezedCoherentRecord, QuadratureMoments)`` at grid index ``k``."""
        rec = SqueezedCoherentRecord(complex(self.l[..., k]),
                                     SqueezeParam(float(self.rho[k]), float(self.theta[k])),
                                     complex(self.alpha[..., k]))
        mx, my, dx, dy = (float(v) for v in quadrature_moments(rec.alpha, rec.squeeze.rho,
                                                               rec.squeeze.theta))
        return float(self.t[k]), rec, QuadratureMoments(mx, my, dx, dy)

    @property
    def frames(self):
        return [self.frame(k) for k in range(len(self.t))]


def solve(path: NoisePath, params: ModelParams, xi0: SqueezeParam, alpha0: complex) -> Het2Solution:
    alphas = alpha_trajectory(path, params, xi0, alpha0)
    ls = l_trajectory(path, params, xi0, alpha0, alphas)
    rho, theta = rho_theta(path.grid.times, params, xi0.rho, xi0.theta)
    return Het2Solution(params, xi0, complex(alpha0), path.grid.times, rho, theta, alphas, ls)
