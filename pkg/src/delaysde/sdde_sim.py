"""Euler-Maruyama simulation of the linear delay equation

    dX(t) = theta * Y(t) dt + dW(t),   Y(t) = int_{[-r,0]} X(t+u) a(du),

on a uniform grid whose step divides the delay ``r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numba as nb
import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError, GridAlignmentError
from .measure import SignedMeasure
from .rng import as_rng
from .spectral import CharacteristicModel

_SNAP = 1e-9


def aligned_step(r: float, dt: float) -> float:
    """Largest step not exceeding ``dt`` that divides ``r`` an integer number of times."""
    if not (0 < dt <= r * (1 + 1e-12)):
        raise ConfigError(f"time step must satisfy 0 < dt <= r, got dt={dt}, r={r}")
    n = math.ceil(r / dt - _SNAP)
    step = r / n
    if abs(r / step - round(r / step)) > _SNAP:
        raise GridAlignmentError(f"cannot align step {dt} with delay {r}")
    return step


@dataclass(frozen=True)
class InitialSegment:
    """Deterministic initial path X0 on [-r, 0].

    Use the constructors :meth:`constant`, :meth:`polynomial` and :meth:`table`.
    Tabulated values are linearly interpolated, hence continuous.
    """

    kind: str = "constant"
    value: float = 0.0
    coeffs: tuple = ()
    t: tuple = ()
    x: tuple = ()

    @classmethod
    def constant(cls, c: float = 0.0) -> "InitialSegment":
        return cls("constant", value=float(c))

    @classmethod
    def polynomial(cls, coeffs) -> "InitialSegment":
        return cls("polynomial", coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def table(cls, t, x) -> "InitialSegment":
        t = tuple(float(v) for v in t)
        x = tuple(float(v) for v in x)
        if len(t) != len(x) or len(t) < 1 or any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigError("tabulated initial segment needs increasing times and matching values")
        return cls("table", t=t, x=x)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, self.value)
        if self.kind == "polynomial":
            return P.polyval(t, self.coeffs)
        if self.kind == "table":
            if t.size and (t.min() < self.t[0] - 1e-9 or t.max() > self.t[-1] + 1e-9):
                raise ConfigError("tabulated initial segment does not cover [-r, 0]")
            return np.interp(t, self.t, self.x)
        raise ConfigError(f"unknown initial segment kind {self.kind!r}")


@dataclass
class SamplePath:
    """A simulated or observed trajectory on the grid ``-r, ..., 0, dt, ..., T``."""

    dt: float
    horizon_T: float
    r: float
    history: np.ndarray
    values: np.ndarray
    noise: np.ndarray | None = None
    seed: object = None
    theta: float | None = None

    def __post_init__(self):
        self.history = np.asarray(self.history, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.history[-1] != self.values[0]:
            raise ConfigError("history and values must agree at t = 0")
        if self.noise is not None and len(self.noise) != len(self.values) - 1:
            raise ConfigError("retained noise must have one increment per step")

    @property
    def n_steps(self) -> int:
        return len(self.values) - 1

    @property
    def n_history(self) -> int:
        return len(self.history) - 1

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.history[:-1], self.values])

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def history_times(self) -> np.ndarray:
        return (np.arange(self.n_history + 1) - self.n_history) * self.dt


def _add_interp(acc: dict, s: float, w: float) -> None:
    """Spread weight ``w`` at fractional lag ``s`` (in steps) onto grid lags."""
    j = math.floor(s + _SNAP)
    frac = s - j
    if abs(frac) <= _SNAP:
        acc[j] = acc.get(j, 0.0) + w
        return
    acc[j] = acc.get(j, 0.0) + w * (1.0 - frac)
    acc[j + 1] = acc.get(j + 1, 0.0) + w * frac


@lru_cache(maxsize=64)
def delay_kernel(a: SignedMeasure, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Lags (in steps) and weights with Y(t_k) = sum_j w_j X(t_k - lag_j dt).

    Off-grid atoms use linear interpolation of X; density pieces use the
    trapezoid rule on the grid points inside the piece plus its endpoints.
    """
    acc: dict[int, float] = {}
    for u, w in a.atoms:
        _add_interp(acc, -u / dt, w)
    for p in a.density:
        s_lo, s_hi = -p.hi / dt, -p.lo / dt
        inner = np.arange(math.floor(s_lo + _SNAP) + 1, math.ceil(s_hi - _SNAP))
        nodes = np.concatenate([[s_lo], inner[(inner > s_lo + _SNAP) & (inner < s_hi - _SNAP)], [s_hi]])
        vals = P.polyval(-nodes * dt, p.coeffs)
        widths = np.diff(nodes) * dt
        for i, width in enumerate(widths):
            _add_interp(acc, nodes[i], 0.5 * width * vals[i])
            _add_interp(acc, nodes[i + 1], 0.5 * width * vals[i + 1])
    lags = np.array(sorted(acc), dtype=np.int64)
    weights = np.array([acc[j] for j in lags], dtype=float)
    return lags, weights


@nb.njit(cache=True, nogil=True)
def _euler_kernel(full, lags, weights, offset, theta, dt, dW, Y):
    n = dW.shape[0]
    for k in range(n):
        i = offset + k
        y = 0.0
        for j in range(lags.shape[0]):
            y += weights[j] * full[i - lags[j]]
        Y[k] = y
        full[i + 1] = full[i] + theta * y * dt + dW[k]
    i = offset + n
    y = 0.0
    for j in range(lags.shape[0]):
        y += weights[j] * full[i - lags[j]]
    Y[n] = y


@nb.njit(cache=True, nogil=True)
def _apply_kernel(full, lags, weights, offset, n, Y):
    for k in range(n + 1):
        i = offset + k
        y = 0.0
        for j in range(lags.shape[0]):
            y += weights[j] * full[i - lags[j]]
        Y[k] = y


def _grid(model: CharacteristicModel, T: float, dt: float) -> tuple[float, int, int]:
    if not T > 0:
        raise ConfigError(f"horizon must be positive, got {T}")
    step = aligned_step(model.measure.r, dt)
    n_hist = int(round(model.measure.r / step))
    n_steps = max(1, int(round(T / step)))
    return step, n_hist, n_steps


def simulate_sdde(model: CharacteristicModel, x0: InitialSegment | None = None, T: float = 1.0,
                  dt: float = 0.01, seed=None, *, increments=None, keep_noise: bool = True) -> SamplePath:
    """Simulate one path by Euler-Maruyama.

    Parameters
    ----------
    model : CharacteristicModel
        Delay measure and drift parameter.
    x0 : InitialSegment, optional
        Initial path on [-r, 0]; zero by default.
    T, dt : float
        Horizon and step hint.  The step is reduced to divide ``r`` and the
        horizon rounded to a whole number of steps.
    seed : int, tuple or numpy Generator
        An int seeds stream ``(0, 0)``; a tuple ``(seed, *key)`` selects a
        substream (see :mod:`delaysde.rng`).
    increments : array, optional
        Test mode: Wiener increments to use instead of random draws.
    """
    x0 = x0 or InitialSegment.constant(0.0)
    step, n_hist, n_steps = _grid(model, T, dt)
    if increments is not None:
        dW = np.asarray(increments, dtype=float)
        if dW.shape != (n_steps,):
            raise ConfigError(f"expected {n_steps} increments, got shape {dW.shape}")
    else:
        if isinstance(seed, tuple):
            rng = as_rng(seed[0], seed[1:])
        else:
            rng = as_rng(seed)
        dW = rng.standard_normal(n_steps) * math.sqrt(step)
    hist_t = (np.arange(n_hist + 1) - n_hist) * step
    full = np.empty(n_hist + n_steps + 1)
    full[: n_hist + 1] = x0(hist_t)
    lags, weights = delay_kernel(model.measure, step)
    Y = np.empty(n_steps + 1)
    _euler_kernel(full, lags, weights, n_hist, model.theta, step, dW, Y)
    return SamplePath(dt=step, horizon_T=n_steps * step, r=model.measure.r,
                      history=full[: n_hist + 1].copy(), values=full[n_hist:].copy(),
                      noise=dW.copy() if keep_noise else None, seed=seed, theta=model.theta)


def delayed_series(path: SamplePath, a: SignedMeasure) -> np.ndarray:
    """Y(t_k) for every grid point k = 0..n of the path."""
    if abs(a.r - path.r) > 1e-12 * path.r:
        raise ConfigError("measure delay does not match the path's history length")
    lags, weights = delay_kernel(a, path.dt)
    Y = np.empty(path.n_steps + 1)
    _apply_kernel(path.full, lags, weights, path.n_history, path.n_steps, Y)
    return Y


def delayed_functional(path: SamplePath, a: SignedMeasure, k: int) -> float:
    """Y(t_k) = int X(t_k + u) a(du) on the path's grid."""
    if not 0 <= k <= path.n_steps:
        raise IndexError(f"grid index {k} outside [0, {path.n_steps}]")
    return float(delayed_series(path, a)[k])


def ito_integral(f, increments):
    """Left-endpoint (Ito) sum ``sum_k f[k] * increments[k]``."""
    f = np.asarray(f)
    dG = np.asarray(increments)
    if f.shape != dG.shape:
        raise ValueError(f"integrand and increments differ in length: {f.shape} vs {dG.shape}")
    return np.dot(f, dG)
