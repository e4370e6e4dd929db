"""Discretised Wiener measurement records and left-endpoint Ito sums.

Every trajectory draws from its own Philox stream keyed by
``(seed, trajectory_index)``, so ensembles can be split across workers in any
order and still reproduce bit for bit.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError


class NoiseKind(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k * dt`` for ``k = 0 .. n_steps``."""

    t_max: float
    dt: float

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ConfigError(f"t_max must be > 0, got {self.t_max}")
        n = round(self.t_max / self.dt)
        if n < 1 or abs(n * self.dt - self.t_max) > 1e-12 * max(1.0, self.t_max):
            raise ConfigError(f"t_max={self.t_max} is not a multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return round(self.t_max / self.dt)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def left_times(self) -> np.ndarray:
        """Left endpoints ``t_0 .. t_{n-1}`` of the integration steps."""
        return np.arange(self.n_steps) * self.dt


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for trajectory ``index`` of master ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Increments ``dQ_k`` on ``grid``; imaginary parts are zero for ``REAL``."""

    grid: TimeGrid
    kind: NoiseKind
    increments: np.ndarray
    seed: int = 0
    index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        inc = np.asarray(self.increments, dtype=complex)
        if inc.shape[-1] != self.grid.n_steps:
            raise ConfigError(
                f"{inc.shape[-1]} increments do not fit a grid of {self.grid.n_steps} steps"
            )
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def values(self) -> np.ndarray:
        """Cumulative record ``Q(t_k)`` with ``Q(0) = 0``."""
        q = np.zeros(self.increments.shape[:-1] + (self.grid.n_steps + 1,), dtype=complex)
        np.cumsum(self.increments, axis=-1, out=q[..., 1:])
        return q

    def coarsen(self, factor: int) -> "NoisePath":
        """Same Brownian path on a grid ``factor`` times coarser (increments summed)."""
        factor = int(factor)
        if factor < 1 or self.grid.n_steps % factor:
            raise ConfigError(f"cannot coarsen {self.grid.n_steps} steps by {factor}")
        inc = self.increments.reshape(self.increments.shape[:-1] + (-1, factor)).sum(axis=-1)
        grid = TimeGrid(self.grid.t_max, self.grid.dt * factor)
        return NoisePath(grid, self.kind, inc, self.seed, self.index)

    def to_csv(self, path) -> None:
        """Write columns ``k, t_k, re_dQ, im_dQ`` (one row per step)."""
        if self.increments.ndim != 1:
            raise ConfigError("only single paths can be dumped")
        t = self.grid.left_times
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t_k", "re_dQ", "im_dQ"])
            for k, (tk, dq) in enumerate(zip(t, self.increments)):
                w.writerow([k, f"{tk:.16e}", f"{dq.real:.16e}", f"{dq.imag:.16e}"])


def _draw(rng: np.random.Generator, n: int, dt: float, kind: NoiseKind) -> np.ndarray:
    sd = math.sqrt(dt)
    if kind is NoiseKind.REAL:
        return rng.normal(0.0, sd, n).astype(complex)
    q = rng.normal(0.0, sd, (2, n))
    # dQ = (dQ1 - i dQ2) / sqrt 2, so (dQ)^2 -> 0 and |dQ|^2 -> dt
    return (q[0] - 1j * q[1]) / math.sqrt(2.0)


def generate_path(grid: TimeGrid, kind, seed: int, index: int = 0) -> NoisePath:
    """Sample a Wiener record for trajectory ``index`` of master ``seed``."""
    kind = NoiseKind(kind)
    inc = _draw(trajectory_rng(seed, index), grid.n_steps, grid.dt, kind)
    return NoisePath(grid, kind, inc, int(seed), int(index))


def generate_batch(grid: TimeGrid, kind, seed: int, indices) -> NoisePath:
    """Stack of paths, one row per trajectory index; identical to per-index calls."""
    kind = NoiseKind(kind)
    indices = list(indices)
    inc = np.empty((len(indices), grid.n_steps), dtype=complex)
    for row, i in enumerate(indices):
        inc[row] = _draw(trajectory_rng(seed, i), grid.n_steps, grid.dt, kind)
    return NoisePath(grid, kind, inc, int(seed), indices[0] if indices else 0)


def ito_integrate(f, path: NoisePath):
    """Left-endpoint Ito sum ``sum_k f(t_k) dQ_k``.

    ``f`` is either a callable of the left-endpoint times or an array sampled
    there (length ``n_steps``, or ``n_steps + 1`` with the last sample
    ignored).
    """
    n = path.grid.n_steps
    if callable(f):
        f = f(path.grid.left_times)
    f = np.asarray(f)
    if f.ndim == 0:
        f = np.full(n, f)
    if f.shape[-1] == n + 1:
        f = f[..., :-1]
    if f.shape[-1] != n:
        raise ConfigError(f"integrand has {f.shape[-1]} samples, grid has {n} steps")
    return np.sum(f * path.increments, axis=-1)


def ito_cumulative(f, increments: np.ndarray) -> np.ndarray:
    """Running left-endpoint sums ``I_k = sum_{j<k} f_j dQ_j``, with ``I_0 = 0``."""
    out = np.zeros(np.broadcast_shapes(np.shape(f), increments.shape)[:-1]
                   + (increments.shape[-1] + 1,), dtype=complex)
    np.cumsum(f * increments, axis=-1, out=out[..., 1:])
    return out
