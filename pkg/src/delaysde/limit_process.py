"""The delay-free limit experiment on [0, 1].

For every dominant root ``lam`` (Im lam >= 0) the chain

    dX_0 = alpha * c * X_m dt + dW_phi,     dX_l = X_{l-1} dt  (l = 1..m),

is driven by a Wiener process ``W_phi`` that is real for ``phi = Im lam = 0``
and standard complex, ``(W_re + i W_im) / sqrt(2)``, otherwise.  Chains for
different roots use independent noise.  Complex pairs are represented by their
upper half-plane member; the conjugate's contribution is folded in through
``2 Re(...)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import ConfigError, DegenerateDenominatorError
from .rng import as_rng
from .spectral import NEG_INF, RootRecord, SpectralSummary

DEFAULT_DT = 1e-3
DENOMINATOR_EPS = 1e-12
_REAL_ROOT_TOL = 1e-12


def unit_grid(dt: float) -> tuple[float, int]:
    """Step dividing [0, 1] evenly and the number of steps."""
    if not 0 < dt <= 1:
        raise ConfigError(f"limit-system step must be in (0, 1], got {dt}")
    n = max(1, int(round(1.0 / dt)))
    return 1.0 / n, n


@dataclass(frozen=True)
class ComplexWienerPath:
    """Discretized W_phi on a uniform grid over [0, 1].

    ``values`` is real for ``phi == 0`` and complex otherwise; ``increments``
    always has the dtype of ``values``.
    """

    frequency: float
    dt: float
    increments: np.ndarray

    @property
    def values(self) -> np.ndarray:
        out = np.empty(len(self.increments) + 1, dtype=self.increments.dtype)
        out[0] = 0
        np.cumsum(self.increments, out=out[1:])
        return out

    @property
    def n_steps(self) -> int:
        return len(self.increments)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def conj(self) -> "ComplexWienerPath":
        """The path for ``-phi``: pointwise conjugate, no new randomness."""
        return ComplexWienerPath(-self.frequency, self.dt, np.conj(self.increments))


def simulate_complex_wiener(phi: float, dt: float = DEFAULT_DT, seed=None, key=(),
                            *, increments=None) -> ComplexWienerPath:
    """Simulate W_phi.

    Parameters
    ----------
    phi : float
        Frequency; 0 gives a real path.  Negative input returns the conjugate
        of the ``|phi|`` path drawn from the same stream.
    seed, key
        Master seed (or Generator) and stream key, see :mod:`delaysde.rng`.
    increments : array, optional
        Test mode.  Real array of shape ``(n,)`` for ``phi == 0``; for
        ``phi > 0`` either a complex ``(n,)`` array used as is, or a real
        ``(2, n)`` array of standard-Wiener increments for the real and
        imaginary parts.
    """
    if phi < 0:
        return simulate_complex_wiener(-phi, dt, seed, key, increments=increments).conj()
    step, n = unit_grid(dt)
    if increments is None:
        rng = as_rng(seed, key)
        if phi == 0:
            dW = rng.standard_normal(n) * math.sqrt(step)
        else:
            z = rng.standard_normal((2, n)) * math.sqrt(step)
            dW = (z[0] + 1j * z[1]) / math.sqrt(2.0)
    else:
        inc = np.asarray(increments)
        if phi == 0:
            if inc.shape != (n,) or np.iscomplexobj(inc):
                raise ConfigError(f"real frequency needs {n} real increments")
            dW = inc.astype(float)
        elif np.iscomplexobj(inc) and inc.shape == (n,):
            dW = inc.astype(complex)
        elif inc.shape == (2, n):
            dW = (inc[0] + 1j * inc[1]) / math.sqrt(2.0)
        else:
            raise ConfigError(f"expected complex ({n},) or real (2, {n}) increments, got {inc.shape}")
    return ComplexWienerPath(float(phi), step, dW)


def iterated_wiener(w: ComplexWienerPath, ell: int) -> np.ndarray:
    """(1/l!) sum_{u_j < s} (s - u_j)**l dW_j at every grid point s."""
    ell = int(ell)
    if ell < 0:
        raise ValueError("order must be nonnegative")
    if ell == 0:
        return w.values
    n = w.n_steps
    kernel = (np.arange(n + 1) * w.dt) ** ell / math.factorial(ell)
    kernel[0] = 0.0
    if np.iscomplexobj(w.increments):
        re = np.convolve(w.increments.real, kernel)[: n + 1]
        im = np.convolve(w.increments.imag, kernel)[: n + 1]
        return re + 1j * im
    return np.convolve(w.increments, kernel)[: n + 1]


@dataclass(frozen=True)
class LimitSystemPath:
    """Trajectories ``states[l, k] = X_l(t_k)`` for one dominant root."""

    root: RootRecord
    m_star: int
    alpha: float
    wiener: ComplexWienerPath
    states: np.ndarray

    @property
    def dt(self) -> float:
        return self.wiener.dt

    @property
    def coefficient(self) -> complex:
        return self.root.coeffs[self.m_star]

    @property
    def is_real(self) -> bool:
        return abs(self.root.lam.imag) <= _REAL_ROOT_TOL


@nb.njit(cache=True, nogil=True)
def _chain(X, drift, dW, dt):
    m = X.shape[0] - 1
    for k in range(dW.shape[0]):
        kick = drift * X[m, k] * dt
        for ell in range(m, 0, -1):
            X[ell, k + 1] = X[ell, k] + X[ell - 1, k] * dt
        X[0, k + 1] = X[0, k] + kick + dW[k]


def simulate_limit_system(root: RootRecord, m_star: int, alpha: float, dt: float = DEFAULT_DT,
                          seed=None, key=(), *, wiener: ComplexWienerPath | None = None,
                          increments=None) -> LimitSystemPath:
    """Euler scheme for the limit chain attached to ``root``.

    ``wiener`` (or raw ``increments``) couples the chain to a given noise
    path; otherwise noise is drawn from ``(seed, key)``.
    """
    if root.poly_degree == NEG_INF or int(root.poly_degree) != int(m_star):
        raise ConfigError(f"root {root.lam} has polynomial degree {root.poly_degree}, not m* = {m_star}")
    m_star = int(m_star)
    phi = root.lam.imag
    if abs(phi) <= _REAL_ROOT_TOL:
        phi = 0.0
    if phi < 0:
        raise ConfigError("limit chains are indexed by roots with Im >= 0")
    if wiener is None:
        wiener = simulate_complex_wiener(phi, dt, seed, key, increments=increments)
    elif (wiener.frequency == 0) != (phi == 0):
        raise ConfigError("Wiener path frequency does not match the root")
    n = wiener.n_steps
    X = np.zeros((m_star + 1, n + 1), dtype=complex)
    c = complex(root.coeffs[m_star])
    _chain(X, complex(alpha) * c, wiener.increments.astype(complex), wiener.dt)
    return LimitSystemPath(root, m_star, float(alpha), wiener, X)


def _root_terms(p: LimitSystemPath) -> tuple[complex, float, complex]:
    """(score, information, numerator) contributions of one chain, unfolded."""
    c = p.coefficient
    xm = p.states[p.m_star, :-1]
    dW = p.wiener.increments
    dX0 = np.diff(p.states[0])
    score = c * np.dot(xm, np.conj(dW))
    info = abs(c) ** 2 * float(np.dot(xm.real, xm.real) + np.dot(xm.imag, xm.imag)) * p.dt
    numer = c * np.dot(xm, np.conj(dX0))
    weight = 1.0 if p.is_real else 2.0
    return weight * score, weight * info, weight * numer


def limit_delta_J(paths, return_residual: bool = False):
    """Limit score and information summed over the dominant roots.

    With ``return_residual`` the imaginary part of the score (zero up to
    rounding) is returned as a third value.
    """
    delta = 0.0 + 0.0j
    J = 0.0
    for p in paths:
        s, i, _ = _root_terms(p)
        # a conjugate pair contributes z + conj(z); its imaginary parts cancel
        delta += s if p.is_real else complex(s.real, 0.0)
        J += i
    if return_residual:
        return delta.real, J, delta.imag
    return delta.real, J


def limit_mle_alpha(paths, eps: float = DENOMINATOR_EPS) -> float:
    """MLE of ``alpha`` from the observed chains: ratio of the drift score to J."""
    numer = 0.0
    J = 0.0
    for p in paths:
        _, i, nu = _root_terms(p)
        numer += nu.real
        J += i
    if not J > eps:
        raise DegenerateDenominatorError(f"limit information {J} is not above {eps}")
    return numer / J


def limit_loglik_ratio(paths, alpha: float, alpha_new: float) -> float:
    """log dP_{alpha_new}/dP_alpha for chains simulated at ``alpha``."""
    delta, J = limit_delta_J(paths)
    h = alpha_new - alpha
    return h * delta - 0.5 * h * h * J


def wiener_delta_J(roots, m_star: int, wieners) -> tuple[float, float]:
    """(Delta, J) in iterated-integral form, summed over each root and its conjugate.

    ``roots`` are the dominant roots with Im >= 0, ``wieners`` their driving paths.
    """
    delta = 0.0
    J = 0.0
    for rec, w in zip(roots, wieners):
        c = complex(rec.coeffs[m_star])
        wm = iterated_wiener(w, m_star)[:-1]
        term = c * np.dot(wm, np.conj(w.increments))
        info = abs(c) ** 2 * float(np.sum(np.abs(wm) ** 2)) * w.dt
        if abs(rec.lam.imag) <= _REAL_ROOT_TOL:
            delta += term.real
            J += info
        else:
            delta += term.real + np.conj(term).real
            J += 2.0 * info
    return float(delta), float(J)


def simulate_limit_experiment(summary: SpectralSummary, alpha: float, dt: float = DEFAULT_DT,
                              seed=None, key=()) -> list[LimitSystemPath]:
    """One draw of the full limit system: one chain per dominant root.

    Root ``i`` uses stream key ``(*key, i)`` so chains are independent.
    """
    m = int(summary.m_star)
    return [simulate_limit_system(rec, m, alpha, dt, seed, tuple(key) + (i,))
            for i, rec in enumerate(summary.dominant_roots)]


# -- real-form algebra used to cross-check the complex implementation -----

def phi_vec(z: complex) -> np.ndarray:
    """Column (Re z, Im z)."""
    return np.array([z.real, z.imag])


def psi_mat(z: complex) -> np.ndarray:
    """Real 2x2 matrix of multiplication by ``z``."""
    return np.array([[z.real, -z.imag], [z.imag, z.real]])


def companion_drift(c: complex, alpha: float, m_star: int, pair: bool) -> np.ndarray:
    """Drift matrix of the chain in real coordinates.

    For a real root the state is ``(X_0, ..., X_m)``; for a complex root each
    ``X_l`` is replaced by its (Re, Im) block.
    """
    b = 2 if pair else 1
    d = b * (m_star + 1)
    A = np.zeros((d, d))
    A[0:b, d - b:d] = alpha * (psi_mat(complex(c)) if pair else complex(c).real)
    for ell in range(1, m_star + 1):
        A[ell * b:(ell + 1) * b, (ell - 1) * b:ell * b] = np.eye(b)
    return A
