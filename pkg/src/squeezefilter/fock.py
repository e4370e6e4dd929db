"""Brute-force truncated Fock-space oracle.

Nothing here uses the closed forms: states are built from the number basis,
the linear filtering equation is stepped with Euler-Maruyama, and the
unconditional evolution is an RK4-integrated Lindblad equation. Operators
are dense except for the squeeze action used to build reference states, which
may need a padded space of a few thousand levels when rho approaches 2.

Convention: ``<m|a|n> = sqrt(n) delta_{m, n-1}``; vectors carry the Fock
index on their last axis so a stack of trajectories can be stepped at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.sparse import diags
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln

from .core import (
    ConfigError,
    ModelParams,
    NumericGuardError,
    Scheme,
    SqueezeFilterError,
    SqueezeParam,
)
from .noise import NoisePath

TAIL_TOL = 1e-10
MIN_CUTOFF = 8


class CutoffError(SqueezeFilterError):
    """The number-basis truncation cannot represent the requested state."""


def _check_cutoff(cutoff: int):
    if cutoff < MIN_CUTOFF:
        raise ConfigError(f"cutoff must be >= {MIN_CUTOFF}, got {cutoff}")


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)


def build_operators(cutoff: int, omega: float = 1.0):
    """``(a, a_dag, H)`` on ``|0> .. |cutoff>`` with ``H = omega (a_dag a + 1/2)``.

    ``[a, a_dag]`` is the identity except for the ``(N, N)`` corner, which
    equals ``-N`` because of the truncation.
    """
    _check_cutoff(cutoff)
    a = annihilation(cutoff)
    ad = a.conj().T
    h = omega * (ad @ a + 0.5 * np.eye(cutoff + 1))
    return a, ad, h


def quadrature_operators(cutoff: int):
    a = annihilation(cutoff)
    ad = a.conj().T
    return (a + ad) / 2, (a - ad) / 2j


def tail_mass(psi: np.ndarray) -> np.ndarray:
    """Relative weight of the two highest Fock levels."""
    psi = np.asarray(psi)
    tail = np.sum(np.abs(psi[..., -2:]) ** 2, axis=-1)
    return tail / np.sum(np.abs(psi) ** 2, axis=-1)


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    if alpha == 0:
        out = np.zeros(cutoff + 1, dtype=complex)
        out[0] = 1.0
        return out
    logmag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def gaussian_amplitudes(gamma, beta, prefactor, cutoff: int) -> np.ndarray:
    """Number-basis amplitudes of ``prefactor * exp(-gamma a_dag^2 / 2 + beta a_dag)|0>``.

    Uses ``(n + 1) f_{n+1} = beta f_n - gamma f_{n-1}`` for the power-series
    coefficients ``f_n``, rescaled by ``sqrt(n!)`` on the fly. Broadcasts
    over leading dimensions of ``gamma``, ``beta`` and ``prefactor``.
    """
    gamma, beta, prefactor = np.broadcast_arrays(*(np.asarray(x, dtype=complex)
                                                   for x in (gamma, beta, prefactor)))
    out = np.zeros(gamma.shape + (cutoff + 1,), dtype=complex)
    # c_n = f_n sqrt(n!): c_{n+1} = (beta c_n - gamma sqrt(n) c_{n-1}) / sqrt(n + 1)
    out[..., 0] = 1.0
    out[..., 1] = beta
    for n in range(1, cutoff):
        out[..., n + 1] = (beta * out[..., n] - gamma * math.sqrt(n) * out[..., n - 1]) / math.sqrt(n + 1)
    return prefactor[..., None] * out


def squeezed_coherent_normal_ordered(xi: SqueezeParam, alpha, cutoff: int, l=1.0) -> np.ndarray:
    """``l S(xi)|alpha>`` from the normally ordered squeeze operator.

    ``S = cosh(r)^(-1/2) exp(-G a_dag^2/2) exp(-ln cosh(r) a_dag a) exp(conj(G) a^2/2)``
    with ``G = e^{i theta} tanh r``. Acting on ``|alpha>`` this collapses to a
    Gaussian in ``a_dag``; ``alpha`` and ``l`` may be arrays.
    """
    r, th = xi.rho, xi.theta
    g = np.exp(1j * th) * np.tanh(r)
    ch = np.cosh(r)
    alpha = np.asarray(alpha, dtype=complex)
    pref = (np.asarray(l, dtype=complex) / np.sqrt(ch)
            * np.exp(-0.5 * np.abs(alpha) ** 2 + 0.5 * np.conj(g) * alpha**2))
    return gaussian_amplitudes(g, alpha / ch, pref, cutoff)


def squeeze_operator(xi: SqueezeParam, cutoff: int) -> np.ndarray:
    """``S(xi) = exp((conj(xi) a^2 - xi a_dag^2) / 2)`` on the truncated space."""
    a = annihilation(cutoff)
    ad = a.conj().T
    x = xi.xi
    return expm(0.5 * (np.conj(x) * (a @ a) - x * (ad @ ad)))


def _squeeze_generator(xi: SqueezeParam, cutoff: int):
    # (conj(xi) a^2 - xi a_dag^2) / 2 as a sparse matrix
    n = np.arange(cutoff + 1, dtype=float)
    two = np.sqrt(n[2:] * n[1:-1])  # <n|a^2|n+2> = sqrt((n+1)(n+2))
    x = xi.xi
    return diags([0.5 * np.conj(x) * two, -0.5 * x * two], [2, -2], format="csr", dtype=complex)


def apply_squeeze(xi: SqueezeParam, v: np.ndarray, dagger: bool = False) -> np.ndarray:
    """``S(xi) v`` (or ``S(xi)^+ v``) via a norm-controlled Taylor action.

    Never forms the dense exponential, so padded spaces of a few thousand
    levels stay cheap.
    """
    g = _squeeze_generator(xi, np.shape(v)[-1] - 1)
    return expm_multiply(-g if dagger else g, np.asarray(v, dtype=complex))


def _padded(xi: SqueezeParam, cutoff: int) -> int:
    # squeezed amplitudes fall off like tanh(r)^(n/2); pad until that reaches ~1e-17
    extra = 40
    if xi.rho > 0:
        extra = max(extra, math.ceil(80.0 / -math.log(math.tanh(xi.rho))))
    return cutoff + max(cutoff, extra)


def build_squeezed_coherent(xi: SqueezeParam, alpha: complex, cutoff: int,
                            method: str = "expm", tail_tol: float = TAIL_TOL) -> np.ndarray:
    """``S(xi) D(alpha)|0>`` truncated to ``|0> .. |cutoff>``.

    ``method="expm"`` exponentiates the squeeze generator on a padded space
    and applies it to the coherent amplitudes; ``method="normal"`` uses the
    normally ordered product. Both should agree to ~1e-8 when the cutoff
    passes the tail test.

    Raises
    ------
    CutoffError
        If the two top levels hold more than ``tail_tol`` of the weight.
    """
    _check_cutoff(cutoff)
    if method == "expm":
        big = _padded(xi, cutoff)
        psi = apply_squeeze(xi, coherent_amplitudes(alpha, big))[: cutoff + 1]
    elif method == "normal":
        psi = squeezed_coherent_normal_ordered(xi, alpha, cutoff)
    else:
        raise ConfigError(f"unknown method {method!r}")
    if tail_mass(psi) >= tail_tol:
        raise CutoffError(f"cutoff {cutoff} too small for rho={xi.rho}, alpha={alpha}")
    return psi


def bogoliubov_check(xi: SqueezeParam, cutoff: int, alpha: complex = 0.7, n_test: int = 6) -> float:
    """Largest residual of the squeeze-operator identities on low Fock states.

    Checks ``S^+ a S = a cosh r - a_dag e^{i theta} sinh r`` on
    ``|0> .. |n_test-1>``, ``S a S^+ = a cosh r + a_dag e^{i theta} sinh r``
    on the same vectors, and the eigenvalue relation
    ``S a S^+ |xi, alpha> = alpha |xi, alpha>``. The operators are built on a
    padded space; residuals are measured on the first ``cutoff + 1`` levels.
    """
    big = _padded(xi, cutoff)
    ch, sh = math.cosh(xi.rho), math.sinh(xi.rho)
    e = complex(math.cos(xi.theta), math.sin(xi.theta))
    keep = slice(0, cutoff + 1)
    S = lambda v: apply_squeeze(xi, v)  # noqa: E731
    Sd = lambda v: apply_squeeze(xi, v, dagger=True)  # noqa: E731
    dev = 0.0
    for n in range(n_test):
        v = np.zeros(big + 1, dtype=complex)
        v[n] = 1.0
        lhs = Sd(apply_a(S(v)))
        rhs = ch * apply_a(v) - e * sh * apply_adag(v)
        dev = max(dev, np.linalg.norm((lhs - rhs)[keep]))
        lhs = S(apply_a(Sd(v)))
        rhs = ch * apply_a(v) + e * sh * apply_adag(v)
        dev = max(dev, np.linalg.norm((lhs - rhs)[keep]))
    psi = S(coherent_amplitudes(alpha, big))
    dev = max(dev, np.linalg.norm((S(apply_a(Sd(psi))) - alpha * psi)[keep]))
    return float(dev)


def _filter_coefficients(cutoff: int, params: ModelParams):
    n = np.arange(cutoff + 1, dtype=float)
    drift = -(1j * params.omega * (n + 0.5) + 0.5 * params.mu * n)
    lower = np.sqrt(n[1:])  # (a psi)_n = sqrt(n + 1) psi_{n+1}
    return drift, lower


def apply_a(psi: np.ndarray) -> np.ndarray:
    out = np.zeros_like(psi)
    out[..., :-1] = np.sqrt(np.arange(1, psi.shape[-1])) * psi[..., 1:]
    return out


def apply_adag(psi: np.ndarray) -> np.ndarray:
    """Truncated creation operator (the top level is dropped)."""
    out = np.zeros_like(psi)
    out[..., 1:] = np.sqrt(np.arange(1, psi.shape[-1])) * psi[..., :-1]
    return out


def sde_step(psi: np.ndarray, dq, dt: float, t: float, params: ModelParams) -> np.ndarray:
    """One Euler-Maruyama step of the linear (unnormalised) filtering equation.

    ``psi + [-(i H + mu/2 a_dag a) psi] dt + sqrt(mu) e^{-i phi(t)} a psi dQ``
    with ``phi`` taken at the step's left endpoint. ``dq`` must be complex for
    double heterodyne and real for single heterodyne.
    """
    psi = np.asarray(psi)
    cutoff = psi.shape[-1] - 1
    if params.scheme is Scheme.SINGLE and np.any(np.imag(dq) != 0):
        raise ConfigError("single heterodyne takes a real increment")
    drift, _ = _filter_coefficients(cutoff, params)
    coef = math.sqrt(params.mu) * np.exp(-1j * params.phase(t))
    dq = np.asarray(dq)[..., None]
    with np.errstate(over="ignore", invalid="ignore"):
        new = psi + drift * psi * dt + coef * dq * apply_a(psi)
    if not np.all(np.isfinite(new)):
        raise NumericGuardError(f"non-finite state at t={t}")
    return new


def integrate_filter(psi0: np.ndarray, path: NoisePath, params: ModelParams,
                     checkpoints=None) -> np.ndarray:
    """Step ``psi0`` through ``path`` and return states at ``checkpoints``.

    ``checkpoints`` are grid indices (default: final index only); the result
    has shape ``batch + (len(checkpoints), cutoff + 1)``. ``path`` may hold a
    stack of records, in which case ``psi0`` is broadcast over it.
    """
    n = path.grid.n_steps
    if checkpoints is None:
        checkpoints = [n]
    checkpoints = [int(k) for k in checkpoints]
    if min(checkpoints) < 0 or max(checkpoints) > n:
        raise ConfigError("checkpoint outside the grid")
    want = {}
    for pos, k in enumerate(checkpoints):
        want.setdefault(k, []).append(pos)
    inc = path.increments
    psi = np.broadcast_to(np.asarray(psi0, dtype=complex),
                          inc.shape[:-1] + (np.shape(psi0)[-1],)).copy()
    out = np.empty(inc.shape[:-1] + (len(checkpoints), psi.shape[-1]), dtype=complex)
    cutoff = psi.shape[-1] - 1
    drift, lower = _filter_coefficients(cutoff, params)
    step_drift = 1.0 + drift * path.grid.dt
    sq = math.sqrt(params.mu)
    phases = np.exp(-1j * params.phase(path.grid.left_times))
    noise = sq * phases * inc  # (..., n)
    for k in range(n + 1):
        for pos in want.get(k, ()):
            out[..., pos, :] = psi
        if k == n:
            break
        new = step_drift * psi
        new[..., :-1] += noise[..., k, None] * lower * psi[..., 1:]
        psi = new
        if k % 256 == 0 and not np.all(np.isfinite(psi)):
            raise NumericGuardError(f"non-finite state at step {k}")
    if not np.all(np.isfinite(out)):
        raise NumericGuardError("non-finite state in filter integration")
    return out


def posterior_expectation(psi: np.ndarray, z: np.ndarray):
    """``<psi|Z psi> / <psi|psi>``; broadcasts over leading axes of ``psi``."""
    psi = np.asarray(psi)
    norm = np.sum(np.abs(psi) ** 2, axis=-1)
    if np.any(norm == 0):
        raise NumericGuardError("zero-norm state")
    val = np.einsum("...i,ij,...j->...", psi.conj(), z, psi) / norm
    return val if np.ndim(val) else complex(val)


def fock_moments(psi: np.ndarray):
    """``(meanX, meanY, dX, dY, norm2)`` computed directly in the number basis."""
    psi = np.asarray(psi)
    norm2 = np.sum(np.abs(psi) ** 2, axis=-1)
    m, m2, n = _ladder_moments(psi)
    mx, my = m.real, m.imag
    # X^2 = (a^2 + a_dag^2 + 2 a_dag a + 1) / 4, Y^2 = -(a^2 + a_dag^2 - 2 a_dag a - 1) / 4
    vx = (2 * m2.real + 2 * n + 1) / 4 - mx**2
    vy = (-2 * m2.real + 2 * n + 1) / 4 - my**2
    return mx, my, np.sqrt(vx), np.sqrt(vy), norm2


def _ladder_moments(psi: np.ndarray):
    """Normalised ``<a>``, ``<a^2>``, ``<a_dag a>`` using O(N) ladder actions.

    The truncated ``a_dag a`` is diagonal, so these agree with the dense-matrix
    expectations exactly (no corner correction is needed).
    """
    psi = np.asarray(psi)
    norm = np.sum(np.abs(psi) ** 2, axis=-1)
    if np.any(norm == 0):
        raise NumericGuardError("zero-norm state")
    ap = apply_a(psi)
    m = np.sum(psi.conj() * ap, axis=-1) / norm
    m2 = np.sum(psi.conj() * apply_a(ap), axis=-1) / norm
    n = np.sum(np.abs(ap) ** 2, axis=-1) / norm
    return m, m2, n


def cutoff_gate(xi: SqueezeParam, alpha: complex, cutoff: int, tol: float = 1e-8) -> bool:
    """True if doubling ``cutoff`` moves <a>, <a^2>, <a_dag a> by less than ``tol``."""
    vals = [np.array(_ladder_moments(squeezed_coherent_normal_ordered(xi, alpha, n)))
            for n in (cutoff, 2 * cutoff)]
    return bool(np.max(np.abs(vals[0] - vals[1])) < tol)


def choose_cutoff(xi: SqueezeParam, alpha: complex, tol: float = 1e-8, start: int = 16,
                  maximum: int = 2048, margin: float = 1.5) -> int:
    """Smallest cutoff passing :func:`cutoff_gate` and the tail test, times ``margin``.

    Doubles from ``start`` until the gate passes, then bisects back down. The
    margin leaves headroom for the displacement to wander during a trajectory.
    """
    def ok(n):
        return (cutoff_gate(xi, alpha, n, tol)
                and tail_mass(squeezed_coherent_normal_ordered(xi, alpha, n)) < TAIL_TOL)

    n = max(start, MIN_CUTOFF)
    while not ok(n):
        n *= 2
        if n > maximum:
            raise CutoffError(f"no cutoff <= {maximum} passes the gate for rho={xi.rho}, alpha={alpha}")
    lo = max(n // 2, MIN_CUTOFF)
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return int(math.ceil(hi * margin))


# -- unconditional evolution ------------------------------------------------

def lindblad_rhs(rho: np.ndarray, params: ModelParams) -> np.ndarray:
    """``-i[H, rho] + mu (a rho a_dag - {a_dag a, rho}/2)``."""
    n = np.arange(rho.shape[-1], dtype=float)
    h = params.omega * (n + 0.5)
    out = (-1j * (h[:, None] - h[None, :]) - 0.5 * params.mu * (n[:, None] + n[None, :])) * rho
    s = np.sqrt(n[1:])
    out[:-1, :-1] += params.mu * np.outer(s, s) * rho[1:, 1:]
    return out


def lindblad_step(rho: np.ndarray, dt: float, params: ModelParams) -> np.ndarray:
    """One RK4 step of the Lindblad equation."""
    k1 = lindblad_rhs(rho, params)
    k2 = lindblad_rhs(rho + dt / 2 * k1, params)
    k3 = lindblad_rhs(rho + dt / 2 * k2, params)
    k4 = lindblad_rhs(rho + dt * k3, params)
    return rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def lindblad_evolve(rho0: np.ndarray, t_max: float, dt: float, params: ModelParams,
                    checkpoints=None, positivity_tol: float = 1e-6) -> np.ndarray:
    """RK4-evolve ``rho0``; return density matrices at ``checkpoints`` times.

    Raises
    ------
    NumericGuardError
        If an eigenvalue drops below ``-positivity_tol`` at a checkpoint.
    """
    n = int(round(t_max / dt))
    if checkpoints is None:
        checkpoints = [t_max]
    idx = [int(round(c / dt)) for c in checkpoints]
    rho = np.array(rho0, dtype=complex)
    out = np.empty((len(idx),) + rho.shape, dtype=complex)
    for k in range(n + 1):
        for pos, want in enumerate(idx):
            if want == k:
                if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -positivity_tol:
                    raise NumericGuardError(f"density matrix lost positivity at t={k * dt}")
                out[pos] = rho
        if k < n:
            rho = lindblad_step(rho, dt, params)
    return out


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    return np.einsum("...i,...j->...ij", psi, psi.conj())


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def fidelity_pure(psi: np.ndarray, rho: np.ndarray) -> float:
    """``<psi|rho|psi>`` for normalised ``psi``."""
    psi = psi / np.linalg.norm(psi)
    return float(np.real(psi.conj() @ rho @ psi))


def trace_distance(r1: np.ndarray, r2: np.ndarray) -> float:
    d = r1 - r2
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


# -- fitting the Gaussian family -------------------------------------------

@dataclass(frozen=True)
class FitResult:
    xi: SqueezeParam
    alpha: complex
    fidelity: float
    gaussian: bool  # False when the moments are inconsistent with a pure Gaussian


def fit_squeezed_coherent(psi: np.ndarray, gaussian_tol: float = 1e-6) -> FitResult:
    """Match ``psi`` to the closest ``S(xi)|alpha>`` by first and second moments.

    With ``m = <a>``, centred ``<a^2> - m^2 = -e^{i theta} sinh r cosh r`` and
    ``<a_dag a> - |m|^2 = sinh^2 r``. ``alpha`` then inverts
    ``m = alpha cosh r - conj(alpha) e^{i theta} sinh r``.
    """
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise NumericGuardError("zero-norm state")
    psi = psi / nrm
    cutoff = psi.shape[-1] - 1
    a = annihilation(cutoff)
    m = posterior_expectation(psi, a)
    c2 = posterior_expectation(psi, a @ a) - m * m
    nc = max(posterior_expectation(psi, a.conj().T @ a).real - abs(m) ** 2, 0.0)
    r = math.asinh(math.sqrt(nc))
    theta = float(np.angle(-c2)) if abs(c2) > 0 else 0.0
    ch, sh = math.cosh(r), math.sinh(r)
    alpha = m * ch + np.conj(m) * sh * complex(math.cos(theta), math.sin(theta))
    xi = SqueezeParam(r, theta)
    # a pure Gaussian satisfies |<a^2>_c|^2 = N_c (N_c + 1)
    consistent = abs(abs(c2) ** 2 - nc * (nc + 1)) < gaussian_tol
    ref = squeezed_coherent_normal_ordered(xi, alpha, cutoff)
    ref = ref / np.linalg.norm(ref)
    fid = float(abs(np.vdot(ref, psi)) ** 2)
    return FitResult(xi, complex(alpha), fid, bool(consistent))
