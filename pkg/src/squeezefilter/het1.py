"""Posterior under single balanced heterodyne detection.

Here the squeeze coordinate ``gamma(t)`` obeys a deterministic Riccati flow

    d gamma / dt = -(2 i omega + mu) gamma + mu exp(-2 i phi(t)) gamma^2,

which is solved in closed form (general phase law and the linear phase
``phi = pi/2 + vartheta t``) and, independently, by fixed-step RK4. The
displacement and likelihood amplitude are driven by a real Wiener record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    GammaParam,
    ModelParams,
    NumericGuardError,
    QuadratureMoments,
    SingularityError,
    SqueezedCoherentRecord,
    SqueezeParam,
    gamma_from_squeeze,
    kappa,  # noqa: F401  re-exported
    quadrature_moments,
    uncertainties_from_gamma,
    wrap_angle,
)
from .noise import NoiseKind, NoisePath, TimeGrid, ito_cumulative

_SINGULAR = 1e-12


def _as_complex(g) -> complex:
    return g.gamma if isinstance(g, GammaParam) else complex(g)


def gamma_general_array(t, params: ModelParams, gamma0) -> np.ndarray:
    """Closed-form ``gamma(t)`` for ``phi(t) = phi0 + vartheta t``, vectorised."""
    g0 = _as_complex(gamma0)
    t = np.asarray(t, dtype=float)
    if g0 == 0:
        return np.zeros(t.shape, dtype=complex)
    w, mu = params.omega, params.mu
    k = 2j * (w + params.vartheta) + mu
    # int_0^t exp(-(2i w + mu) s - 2i phi(s)) ds, done analytically
    integral = np.exp(-2j * params.phi0) * (-np.expm1(-k * t)) / k
    den = 1.0 - mu * g0 * integral
    if np.any(np.abs(den) < _SINGULAR):
        raise SingularityError("Riccati closed-form denominator vanished")
    return g0 * np.exp(-(2j * w + mu) * t) / den


def gamma_linear_phase_array(t, params: ModelParams, gamma0) -> np.ndarray:
    """Closed form specialised to ``phi(t) = pi/2 + vartheta t``, vectorised."""
    if abs(wrap_angle(params.phi0 - math.pi / 2)) > 1e-12:
        raise ConfigError("linear-phase closed form requires phi0 = pi/2")
    g0 = _as_complex(gamma0)
    t = np.asarray(t, dtype=float)
    w, mu, vt = params.omega, params.mu, params.vartheta
    k = 2j * (w + vt) + mu
    decay = np.exp(-(2j * w + mu) * t)
    # numerator and denominator multiplied through by exp(-(2i w + mu) t)
    den = (k + mu * g0) - mu * g0 * decay * np.exp(-2j * vt * t)
    if np.any(np.abs(den) < _SINGULAR * abs(k)):
        raise SingularityError("Riccati closed-form denominator vanished")
    return np.where(t == 0.0, g0, k * g0 * decay / den)


def gamma_closed_general(t: float, params: ModelParams, gamma0) -> GammaParam:
    if t < 0:
        raise ConfigError("t must be >= 0")
    return GammaParam(complex(gamma_general_array(t, params, gamma0)))


def gamma_closed_linear_phase(t: float, params: ModelParams, gamma0) -> GammaParam:
    if t < 0:
        raise ConfigError("t must be >= 0")
    return GammaParam(complex(gamma_linear_phase_array(t, params, gamma0)))


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    params: ModelParams
    gamma0: GammaParam | None  # None for batched initial values
    t: np.ndarray
    gamma: np.ndarray

    @property
    def samples(self):
        return [(float(tk), GammaParam(complex(g))) for tk, g in zip(self.t, self.gamma)]

    def kappa_values(self) -> np.ndarray:
        return (1 + self.gamma) / (1 - self.gamma)


def _riccati_rhs(t, g, params):
    return (-(2j * params.omega + params.mu) * g
            + params.mu * np.exp(-2j * params.phase(t)) * g * g)


def riccati_integrate(grid: TimeGrid, params: ModelParams, gamma0, substeps: int = 1) -> RiccatiSolution:
    """Classical RK4 on ``grid``, with ``substeps`` RK4 steps per grid interval.

    ``gamma0`` may be a :class:`GammaParam`, a complex number, or an array of
    initial values that are integrated jointly (time is the last axis of the
    result).

    Raises
    ------
    NumericGuardError
        If ``|gamma|`` reaches 1 or the state stops being finite.
    """
    g = np.array(_as_complex(gamma0) if np.ndim(gamma0) == 0 else gamma0, dtype=complex)
    h = grid.dt / substeps
    n = grid.n_steps
    out = np.empty((n + 1,) + g.shape, dtype=complex)
    out[0] = g
    for i in range(n):
        for j in range(substeps):
            t = (i * substeps + j) * h
            k1 = _riccati_rhs(t, g, params)
            k2 = _riccati_rhs(t + h / 2, g + h / 2 * k1, params)
            k3 = _riccati_rhs(t + h / 2, g + h / 2 * k2, params)
            k4 = _riccati_rhs(t + h, g + h * k3, params)
            g = g + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(np.abs(g) >= 1.0) or not np.all(np.isfinite(g)):
            raise NumericGuardError(f"|gamma| left the unit disk at t={(i + 1) * grid.dt}")
        out[i + 1] = g
    g0 = GammaParam(complex(out[0])) if g.ndim == 0 else None
    return RiccatiSolution(params, g0, grid.times, np.moveaxis(out, 0, -1))


def riccati_converged(grid: TimeGrid, params: ModelParams, gamma0, tol: float = 1e-11,
                      max_doublings: int = 12) -> RiccatiSolution:
    """RK4 with substeps doubled until successive solutions agree within ``tol``."""
    prev = riccati_integrate(grid, params, gamma0, 1)
    substeps = 1
    for _ in range(max_doublings):
        substeps *= 2
        cur = riccati_integrate(grid, params, gamma0, substeps)
        if np.max(np.abs(cur.gamma - prev.gamma)) < tol:
            return cur
        prev = cur
    raise NumericGuardError("RK4 step doubling did not converge")


def uncertainties_single(g) -> tuple[float, float]:
    """``(dX, dY)`` from ``kappa(gamma)``; independent of the record."""
    return uncertainties_from_gamma(g if isinstance(g, GammaParam) else GammaParam(g))


def uncertainties_single_array(gamma: np.ndarray):
    """Vectorised ``(dX, dY)`` for an array of ``gamma`` values."""
    gamma = np.asarray(gamma, dtype=complex)
    k = (1 + gamma) / (1 - gamma)
    dx = 1.0 / np.sqrt(4.0 * k.real)
    return dx, np.abs(k) * dx


def _gamma_samples(gamma, path: NoisePath) -> np.ndarray:
    g = gamma.gamma if isinstance(gamma, RiccatiSolution) else np.asarray(gamma, dtype=complex)
    if g.shape[-1] != path.grid.n_steps + 1:
        raise ConfigError("gamma must be sampled on the path's grid")
    return g


def _check(path: NoisePath):
    if path.kind is not NoiseKind.REAL:
        raise ConfigError("single heterodyne needs a real noise record")


def _trapezoid_cumulative(f: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros(f.shape, dtype=complex)
    np.cumsum(0.5 * (f[..., 1:] + f[..., :-1]) * dt, axis=-1, out=out[..., 1:])
    return out


def alpha_trajectory_single(path: NoisePath, params: ModelParams, gamma, alpha0: complex) -> np.ndarray:
    """Displacement ``alpha(t_k)`` on every grid point of a real record."""
    _check(path)
    g = _gamma_samples(gamma, path)
    t = path.grid.times
    mu = params.mu
    if 0.5 * mu * t[-1] > 600:
        raise NumericGuardError("mu * t_max too large for the running-accumulator form")
    c = 1j * params.omega + 0.5 * mu
    phase = params.phase(t)
    # E(t) = exp(mu int_0^t e^{-2i phi} gamma); exp(int_s^t) = E(t) / E(s)
    log_e = _trapezoid_cumulative(mu * np.exp(-2j * phase) * g, path.grid.dt)
    growth = np.exp(-c * t + log_e)
    tl = slice(None, -1)
    integrand = np.exp(c * t[tl] - log_e[tl]) * np.exp(-1j * phase[tl]) * g[tl]
    stoch = ito_cumulative(integrand, path.increments)
    root = np.sqrt(1.0 - np.abs(g) ** 2)
    return growth / root * (alpha0 * root[0] - np.sqrt(mu) * stoch)


def l_trajectory_single(path: NoisePath, params: ModelParams, gamma, alphas: np.ndarray) -> np.ndarray:
    """Likelihood amplitude ``l(t_k)`` for a real record."""
    _check(path)
    g = _gamma_samples(gamma, path)
    alphas = np.asarray(alphas)
    if alphas.shape[-1] != path.grid.n_steps + 1:
        raise ConfigError("alphas must be sampled on the path's grid")
    t = path.grid.times
    dt = path.grid.dt
    mu = params.mu
    phase = params.phase(t)
    ep = np.exp(-2j * phase)
    g2 = np.abs(g) ** 2
    inv = 1.0 / (1.0 - g2)
    gc = np.conj(g)
    # gamma-only pieces (deterministic): trapezoid
    det = (-mu * g2 * inv / 2
           - mu / 2 * ep * inv * (0.5 * g2 * g)
           + mu / 2 * gc**2 / ep * inv * (0.5 * g))
    # pieces carrying alpha: left endpoint, like the Ito term
    a2 = alphas**2
    stoch_dt = (mu * gc * a2 * inv - mu / 2 * ep * inv * a2 - mu / 2 * gc**2 / ep * inv * a2)[..., :-1] * dt
    ito = ito_cumulative(np.sqrt(mu) * np.exp(-1j * phase[:-1]) * alphas[..., :-1] * np.sqrt(inv[:-1]),
                         path.increments)
    expo = ito + _trapezoid_cumulative(det, dt)
    expo[..., 1:] += np.cumsum(stoch_dt, axis=-1)
    expo += -0.5j * params.omega * t + 0.5 * (np.abs(alphas) ** 2 - np.abs(alphas[..., :1]) ** 2)
    return np.exp(expo)


def rho_theta_from_gamma(gamma: np.ndarray, theta0: float):
    """``rho = artanh|gamma|`` and an unwrapped ``theta`` that starts at ``theta0``."""
    gamma = np.asarray(gamma, dtype=complex)
    rho = np.arctanh(np.abs(gamma))
    if not np.any(gamma):
        return rho, np.full(gamma.shape, float(theta0))
    theta = np.unwrap(np.angle(gamma))
    return rho, theta + (theta0 - theta[0])


@dataclass(frozen=True, eq=False)
class Het1Solution:
    params: ModelParams
    xi0: SqueezeParam
    alpha0: complex
    t: np.ndarray
    gamma: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray
    l: np.ndarray

    def __len__(self):
        return len(self.t)

    def moments(self):
        mx, my, _, _ = quadrature_moments(self.alpha, self.rho, self.theta)
        dx, dy = uncertainties_single_array(self.gamma)
        return mx, my, dx, dy

    def frame(self, k: int):
        rec = SqueezedCoherentRecord(complex(self.l[..., k]),
                                     SqueezeParam(float(self.rho[k]), float(self.theta[k])),
                                     complex(self.alpha[..., k]))
        mx, my, _, _ = quadrature_moments(rec.alpha, rec.squeeze.rho, rec.squeeze.theta)
        dx, dy = uncertainties_single(complex(self.gamma[k]))
        return float(self.t[k]), rec, QuadratureMoments(float(mx), float(my), dx, dy)

    @property
    def frames(self):
        return [self.frame(k) for k in range(len(self.t))]


def solve(path: NoisePath, params: ModelParams, xi0: SqueezeParam, alpha0: complex,
          gamma_method: str = "closed") -> Het1Solution:
    """Full posterior record; ``gamma_method`` is ``"closed"`` or ``"rk4"``."""
    g0 = gamma_from_squeeze(xi0)
    if gamma_method == "closed":
        g = gamma_general_array(path.grid.times, params, g0)
    elif gamma_method == "rk4":
        g = riccati_converged(path.grid, params, g0).gamma
    else:
        raise ConfigError(f"unknown gamma_method {gamma_method!r}")
    alphas = alpha_trajectory_single(path, params, g, alpha0)
    ls = l_trajectory_single(path, params, g, alphas)
    rho, theta = rho_theta_from_gamma(g, xi0.theta)
    return Het1Solution(params, xi0, complex(alpha0), path.grid.times, g, rho, theta, alphas, ls)
