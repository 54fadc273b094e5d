"""Likelihood statistics and maximum likelihood estimators from an observed path.

All stochastic integrals are left-endpoint (Ito) sums; Lebesgue integrals are
left Riemann sums on the same grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDenominatorError, RegimeError
from .measure import SignedMeasure
from .sdde_sim import SamplePath, delayed_series, ito_integral
from .spectral import Regime, SpectralSummary

DENOMINATOR_EPS = 1e-12


@dataclass(frozen=True)
class SufficientStats:
    """I1 = int Y dX, I2 = int Y^2 dt, I3 = int Y dW (simulation only)."""

    I1: float
    I2: float
    I3: float | None = None
    horizon_T: float | None = None

    def __post_init__(self):
        if self.I2 < 0:
            raise ValueError(f"I2 must be nonnegative, got {self.I2}")

    def to_dict(self) -> dict:
        d = {"I1": self.I1, "I2": self.I2, "horizon_T": self.horizon_T}
        if self.I3 is not None:
            d["I3"] = self.I3
        return d


def stats_from_arrays(Y: np.ndarray, dX: np.ndarray, dt: float, dW: np.ndarray | None = None,
                      horizon_T: float | None = None) -> SufficientStats:
    """Statistics from left-endpoint values ``Y[k]`` and increments over each step."""
    I1 = float(ito_integral(Y, dX))
    I2 = float(np.dot(Y, Y) * dt)
    I3 = None if dW is None else float(ito_integral(Y, dW))
    return SufficientStats(I1, I2, I3, horizon_T)


def sufficient_stats(path: SamplePath, a: SignedMeasure) -> SufficientStats:
    Y = delayed_series(path, a)[:-1]
    return stats_from_arrays(Y, np.diff(path.values), path.dt, path.noise, path.horizon_T)


def loglik_ratio(stats: SufficientStats, theta: float, theta_new: float) -> float:
    """log dP_{theta_new}/dP_theta evaluated on the observed statistics."""
    return (theta_new - theta) * stats.I1 - 0.5 * (theta_new ** 2 - theta ** 2) * stats.I2


def scaling_r(summary: SpectralSummary, T: float) -> float:
    """Local scaling T**(-m* - 1); defined only at an unstable point."""
    if summary.regime is not Regime.UNSTABLE:
        raise RegimeError(f"scaling is defined only for the unstable regime, model is {summary.regime.value}")
    return float(T) ** (-int(summary.m_star) - 1)


def delta_J(stats: SufficientStats, theta: float, r_scale: float) -> tuple[float, float]:
    """Score and observed information at ``theta`` with local scaling ``r_scale``.

    The unobservable ``int Y dW`` is reconstructed as ``I1 - theta * I2``.
    """
    delta = r_scale * (stats.I1 - theta * stats.I2)
    J = r_scale ** 2 * stats.I2
    return delta, J


def mle_theta(stats: SufficientStats, eps: float = DENOMINATOR_EPS) -> float:
    if not stats.I2 > eps:
        raise DegenerateDenominatorError(f"int Y^2 dt = {stats.I2} is not above {eps}")
    return stats.I1 / stats.I2


def mle_alpha(stats: SufficientStats, theta_base: float, r_scale: float,
              eps: float = DENOMINATOR_EPS) -> float:
    """MLE of the local parameter ``alpha`` in ``theta_base + alpha * r_scale``."""
    return (mle_theta(stats, eps) - theta_base) / r_scale
