"""Monte Carlo experiments for the nearly unstable regime.

Seeding rule: replication ``j`` of cell ``i`` draws stream ``s`` from
``make_rng(master_seed, i, j, s)``.  Cells are horizons in the order given
(``i = 0, 1, ...``).  Reserved cells: :data:`LIMIT_CELL` for the limit
experiment, :data:`BASELINE_CELL` for the AR(1)/OU baseline and
:data:`COUPLED_CELL` for coupled sampling.  Results are assembled by
replication index, so the worker count never changes the output.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, DelaySDEError, DegenerateDenominatorError, EmptySampleError
from .inference import delta_J, mle_alpha, scaling_r, stats_from_arrays
from .limit_process import (DEFAULT_DT as LIMIT_DT, limit_mle_alpha, simulate_limit_experiment,
                            simulate_limit_system, unit_grid)
from .rng import make_rng
from .sdde_sim import _euler_kernel, _grid, delay_kernel
from .spectral import CharacteristicModel, SpectralSummary, classify, require_unstable

log = logging.getLogger(__name__)

LIMIT_CELL = 1_000_000
BASELINE_CELL = 2_000_000
COUPLED_CELL = 3_000_000
LOG_OVERFLOW = 50.0
THREADS_ENV = "DELAYSDE_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of a Monte Carlo run.

    JSON layout::

        {"model": {"r": 1, "atoms": [...], "density": [...], "theta": 0},
         "alpha": 1.0, "horizons": [25, 100, 400], "dt": 0.01,
         "replications": 2000, "seed": 1,
         "limit": {"dt": 0.001, "replications": 2000},
         "baseline": {"h": 0.0, "n": 500, "ou_dt": 0.001},
         "thresholds": {"ks_max": 0.08}, "h_grid": [-1, 1]}

    Only ``replications`` is always required; ``model`` and ``horizons`` are
    needed by the delay-equation experiments.  ``ks_max`` is checked at the
    largest horizon (and for the baseline KS).
    """

    replications: int
    model: CharacteristicModel | None = None
    alpha: float = 0.0
    horizons: tuple = ()
    dt: float = 0.01
    seed: int = 0
    limit_dt: float = LIMIT_DT
    limit_replications: int | None = None
    baseline_h: float = 0.0
    baseline_n: int = 500
    baseline_ou_dt: float = 1e-3
    thresholds: dict = field(default_factory=dict)
    h_grid: tuple = ()

    def __post_init__(self):
        if int(self.replications) < 2:
            raise ConfigError(f"need at least 2 replications, got {self.replications}")
        hs = tuple(float(t) for t in self.horizons)
        if any(t <= 0 for t in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
            raise ConfigError(f"horizons must be positive and increasing, got {list(hs)}")
        object.__setattr__(self, "horizons", hs)
        if not self.dt > 0 or not self.limit_dt > 0:
            raise ConfigError("time steps must be positive")
        if self.limit_replications is not None and int(self.limit_replications) < 2:
            raise ConfigError("need at least 2 limit replications")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def n_limit(self) -> int:
        return int(self.limit_replications or self.replications)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            model = CharacteristicModel.from_dict(d["model"]) if "model" in d else None
            lim = d.get("limit", {})
            base = d.get("baseline", {})
            return cls(
                replications=int(d["replications"]),
                model=model,
                alpha=float(d.get("alpha", 0.0)),
                horizons=tuple(d.get("horizons", ())),
                dt=float(d.get("dt", 0.01)),
                seed=int(d.get("seed", 0)),
                limit_dt=float(lim.get("dt", LIMIT_DT)),
                limit_replications=lim.get("replications"),
                baseline_h=float(base.get("h", 0.0)),
                baseline_n=int(base.get("n", 500)),
                baseline_ou_dt=float(base.get("ou_dt", 1e-3)),
                thresholds=dict(d.get("thresholds", {})),
                h_grid=tuple(float(h) for h in d.get("h_grid", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            return cls.from_dict(json.loads(p.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from exc

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def require_model(self) -> CharacteristicModel:
        if self.model is None:
            raise ConfigError("this experiment needs a 'model' entry")
        return self.model


@dataclass(frozen=True)
class EmpiricalSample:
    """Successful estimates sorted ascending, plus per-replication values.

    ``replicates[j]`` is the estimate of replication ``j`` or NaN if it failed.
    """

    values: np.ndarray
    replicates: np.ndarray
    failures: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_replicates(cls, reps, meta=None) -> "EmpiricalSample":
        reps = np.asarray(reps, dtype=float)
        ok = np.isfinite(reps)
        return cls(np.sort(reps[ok]), reps, int((~ok).sum()), dict(meta or {}))

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def size(self) -> int:
        return len(self.replicates)


def worker_count(requested: int | None = None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, int(n))


def _map(fn, n: int, workers: int | None) -> list:
    w = worker_count(workers)
    if w == 1:
        return [fn(j) for j in range(n)]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, range(n)))


class _SddeRunner:
    """Reusable simulation of many paths of one model on one grid."""

    def __init__(self, model: CharacteristicModel, theta: float, T: float, dt: float):
        self.step, self.n_hist, self.n_steps = _grid(model, T, dt)
        self.lags, self.weights = delay_kernel(model.measure, self.step)
        self.theta = float(theta)
        self.horizon = self.n_steps * self.step
        self.sqdt = math.sqrt(self.step)

    def stats(self, rng):
        """Sufficient statistics of one path started from the zero segment."""
        return self.stats_from_increments(rng.standard_normal(self.n_steps) * self.sqdt)

    def stats_from_increments(self, dW):
        full = np.zeros(self.n_hist + self.n_steps + 1)
        Y = np.empty(self.n_steps + 1)
        _euler_kernel(full, self.lags, self.weights, self.n_hist, self.theta, self.step, dW, Y)
        X = full[self.n_hist:]
        return stats_from_arrays(Y[:-1], np.diff(X), self.step, dW, self.horizon)


def _summary(config: ExperimentConfig, summary: SpectralSummary | None) -> SpectralSummary:
    s = summary if summary is not None else classify(config.require_model())
    require_unstable(s)
    return s


def mc_alpha_hat(config: ExperimentConfig, summary: SpectralSummary | None = None,
                 workers: int | None = None) -> dict:
    """Sample of the local-parameter MLE for every horizon.

    Paths are generated at ``theta + alpha * r_T`` from the zero initial
    segment; estimates use the base ``theta`` and the same scaling.
    """
    model = config.require_model()
    s = _summary(config, summary)
    out = {}
    for cell, T in enumerate(config.horizons):
        r = scaling_r(s, T)
        runner = _SddeRunner(model, model.theta + config.alpha * r, T, config.dt)

        def one(j, cell=cell, r=r, runner=runner):
            try:
                st = runner.stats(make_rng(config.seed, cell, j, 0))
                return mle_alpha(st, model.theta, r)
            except (DelaySDEError, FloatingPointError, ArithmeticError) as exc:
                log.debug("replication %d of T=%g failed: %s", j, T, exc)
                return math.nan

        reps = _map(one, config.replications, workers)
        out[T] = EmpiricalSample.from_replicates(
            reps, {"seed": config.seed, "T": T, "dt": runner.step, "alpha": config.alpha})
    return out


def mc_limit_alpha_hat(config: ExperimentConfig, summary: SpectralSummary | None = None,
                       workers: int | None = None) -> EmpiricalSample:
    """Sample of the limit-experiment MLE from independent limit systems."""
    s = _summary(config, summary)

    def one(j):
        try:
            paths = simulate_limit_experiment(s, config.alpha, config.limit_dt, config.seed, (LIMIT_CELL, j))
            return limit_mle_alpha(paths)
        except (DelaySDEError, FloatingPointError, ArithmeticError) as exc:
            log.debug("limit replication %d failed: %s", j, exc)
            return math.nan

    reps = _map(one, config.n_limit, workers)
    return EmpiricalSample.from_replicates(
        reps, {"seed": config.seed, "T": "limit", "dt": config.limit_dt, "alpha": config.alpha})


def mc_coupled_alpha_hat(config: ExperimentConfig, summary: SpectralSummary | None = None,
                         workers: int | None = None) -> tuple[dict, EmpiricalSample]:
    """Horizon samples and limit sample driven by one Brownian path per replication.

    Replication ``j`` draws a Brownian path ``B`` on [0, 1] at resolution
    ``dt / T_max``.  The delay equation on [0, T] is driven by
    ``W(t) = sqrt(T) B(t / T)`` and the limit chain by ``B`` itself.  Each
    sample keeps its exact law; only the dependence between samples changes,
    so KS distances to the limit track pathwise convergence instead of
    sampling noise.  Requires a single real dominant root.
    """
    model = config.require_model()
    s = _summary(config, summary)
    if len(s.dominant_roots) != 1 or s.dominant_roots[0].lam.imag != 0.0:
        raise ConfigError("coupled sampling needs exactly one real dominant root")
    rec = s.dominant_roots[0]
    m = int(s.m_star)
    runners = []
    for T in config.horizons:
        r = scaling_r(s, T)
        runners.append((T, r, _SddeRunner(model, model.theta + config.alpha * r, T, config.dt)))
    n_fine = runners[-1][2].n_steps
    step_lim, n_lim = unit_grid(config.limit_dt)
    if any(n_fine % run.n_steps for _, _, run in runners) or n_fine % n_lim:
        raise ConfigError("horizon and limit grids must all divide the finest grid")

    def one(j):
        dB = make_rng(config.seed, COUPLED_CELL, j, 0).standard_normal(n_fine) / math.sqrt(n_fine)
        row = []
        for T, r, run in runners:
            dW = math.sqrt(run.horizon) * dB.reshape(run.n_steps, -1).sum(axis=1)
            try:
                row.append(mle_alpha(run.stats_from_increments(dW), model.theta, r))
            except (DelaySDEError, FloatingPointError, ArithmeticError):
                row.append(math.nan)
        try:
            path = simulate_limit_system(rec, m, config.alpha, step_lim,
                                         increments=dB.reshape(n_lim, -1).sum(axis=1))
            row.append(limit_mle_alpha([path]))
        except (DelaySDEError, FloatingPointError, ArithmeticError):
            row.append(math.nan)
        return row

    res = np.array(_map(one, config.replications, workers)).reshape(config.replications, -1)
    meta = {"seed": config.seed, "alpha": config.alpha, "coupled": True}
    cells = {T: EmpiricalSample.from_replicates(res[:, i], {**meta, "T": T, "dt": run.step})
             for i, (T, _, run) in enumerate(runners)}
    return cells, EmpiricalSample.from_replicates(res[:, -1], {**meta, "T": "limit", "dt": step_lim})


def _values(s) -> np.ndarray:
    v = s.values if isinstance(s, EmpiricalSample) else np.sort(np.asarray(s, dtype=float))
    return v


def ks_two_sample(s1, s2) -> float:
    """Sup distance between the two empirical CDFs (ties handled exactly)."""
    x, y = _values(s1), _values(s2)
    if len(x) == 0 or len(y) == 0:
        raise EmptySampleError("both samples need at least one value")
    z = np.concatenate([x, y])
    f1 = np.searchsorted(x, z, side="right") / len(x)
    f2 = np.searchsorted(y, z, side="right") / len(y)
    return float(np.max(np.abs(f1 - f2)))


def martingale_log_values(config: ExperimentConfig, T: float | None = None,
                          summary: SpectralSummary | None = None, workers: int | None = None) -> np.ndarray:
    """``alpha * Delta - alpha**2 * J / 2`` per replication, paths at the base parameter."""
    model = config.require_model()
    s = _summary(config, summary)
    if T is None:
        if not config.horizons:
            raise ConfigError("no horizon given")
        T = config.horizons[-1]
    cell = config.horizons.index(T) if T in config.horizons else len(config.horizons)
    r = scaling_r(s, T)
    runner = _SddeRunner(model, model.theta, T, config.dt)
    a = config.alpha

    def one(j):
        st = runner.stats(make_rng(config.seed, cell, j, 0))
        d, J = delta_J(st, model.theta, r)
        return a * d - 0.5 * a * a * J

    return np.array(_map(one, config.replications, workers))


def martingale_mean_check(config: ExperimentConfig, T: float | None = None,
                          summary: SpectralSummary | None = None,
                          workers: int | None = None) -> tuple[float, float]:
    """Sample mean and standard error of the likelihood ratio (population mean 1)."""
    logs = martingale_log_values(config, T, summary, workers)
    flagged = int(np.sum(logs > LOG_OVERFLOW))
    if flagged:
        log.warning("%d replications have log-likelihood ratio above %g", flagged, LOG_OVERFLOW)
    vals = np.exp(np.minimum(logs, 700.0))
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(len(vals)))


def ar1_lse(innov: np.ndarray, beta: float) -> float:
    """Least-squares estimate of ``beta`` from the AR(1) path driven by ``innov``."""
    x = lfilter([1.0], [1.0, -beta], innov)
    prev = np.concatenate([[0.0], x[:-1]])
    den = float(np.dot(prev, prev))
    if not den > 0:
        raise DegenerateDenominatorError("AR(1) design sum vanishes")
    return float(np.dot(prev, x)) / den


def ou_drift_mle(dW: np.ndarray, h: float, dt: float) -> float:
    """Drift MLE ``int Y dY / int Y^2 dt`` for the Euler OU path on [0, 1]."""
    y = lfilter([1.0], [1.0, -(1.0 + h * dt)], dW)
    prev = np.concatenate([[0.0], y[:-1]])
    den = float(np.dot(prev, prev)) * dt
    if not den > 0:
        raise DegenerateDenominatorError("OU design integral vanishes")
    return float(np.dot(prev, np.diff(np.concatenate([[0.0], y])))) / den


def ar1_baseline(h: float, n: int, N: int, seed: int = 0, *, ou_dt: float = 1e-3,
                 innovations=None, workers: int | None = None) -> tuple[EmpiricalSample, EmpiricalSample]:
    """Near-unit-root AR(1) estimator ``n (beta_hat - 1)`` versus the OU drift MLE.

    ``innovations`` (shape ``(N, n)``) replaces the AR(1) noise for testing;
    the OU sample is still simulated.
    """
    if n < 1 or N < 1:
        raise ConfigError("need n >= 1 and N >= 1")
    beta = 1.0 + h / n
    n_ou = max(1, int(round(1.0 / ou_dt)))
    dt = 1.0 / n_ou
    if innovations is not None:
        innovations = np.asarray(innovations, dtype=float)
        if innovations.shape != (N, n):
            raise ConfigError(f"innovations must have shape ({N}, {n})")

    def one(j):
        eps = innovations[j] if innovations is not None else make_rng(seed, BASELINE_CELL, j, 0).standard_normal(n)
        try:
            hn = n * (ar1_lse(eps, beta) - 1.0)
        except DegenerateDenominatorError:
            hn = math.nan
        dW = make_rng(seed, BASELINE_CELL, j, 1).standard_normal(n_ou) * math.sqrt(dt)
        try:
            ou = ou_drift_mle(dW, h, dt)
        except DegenerateDenominatorError:
            ou = math.nan
        return hn, ou

    res = np.array(_map(one, N, workers)).reshape(N, 2)
    meta = {"seed": seed, "h": h, "n": n}
    return (EmpiricalSample.from_replicates(res[:, 0], {**meta, "T": "ar1"}),
            EmpiricalSample.from_replicates(res[:, 1], {**meta, "T": "ou", "dt": dt}))
