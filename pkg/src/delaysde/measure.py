"""Finite signed measures on the delay window [-r, 0].

A measure is a finite list of atoms plus a piecewise-polynomial density.
That class is closed under the operations we need and admits closed-form
exponential moments

    M_k(lam) = int_{[-r,0]} u**k * exp(lam*u) a(du),

which the characteristic function and the residue coefficients are built from.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError, OrderExceededError

MAX_ORDER = 32
# |lam| * (piece length) below which the Taylor branch is used.
TAYLOR_THRESHOLD = 1e-4
_EDGE_SLOP = 1e-12


class DensityPiece(NamedTuple):
    lo: float
    hi: float
    coeffs: tuple  # ascending powers of u

    @property
    def length(self) -> float:
        return self.hi - self.lo


def _as_piece(p) -> DensityPiece:
    if isinstance(p, DensityPiece):
        return p
    if isinstance(p, dict):
        return DensityPiece(float(p["lo"]), float(p["hi"]), tuple(float(c) for c in p["coeffs"]))
    lo, hi, coeffs = p
    return DensityPiece(float(lo), float(hi), tuple(float(c) for c in np.atleast_1d(coeffs)))


@dataclass(frozen=True)
class SignedMeasure:
    """Atoms plus piecewise-polynomial density on [-r, 0].

    Parameters
    ----------
    r : float
        Delay horizon, strictly positive.
    atoms : sequence of (u, w)
        Point masses ``w`` at locations ``u`` in [-r, 0].
    density : sequence of (lo, hi, coeffs)
        Density ``sum_j coeffs[j] * u**j`` on ``[lo, hi]``.  Intervals may
        share endpoints but must not overlap.
    max_order : int
        Largest moment order accepted by :meth:`exp_moment`.
    """

    r: float
    atoms: tuple = ()
    density: tuple = ()
    max_order: int = field(default=MAX_ORDER, compare=False)

    def __post_init__(self):
        r = float(self.r)
        if not (r > 0 and math.isfinite(r)):
            raise ConfigError(f"delay r must be positive and finite, got {self.r!r}")
        object.__setattr__(self, "r", r)
        atoms = tuple((float(u), float(w)) for u, w in self.atoms)
        pieces = tuple(sorted((_as_piece(p) for p in self.density), key=lambda p: (p.lo, p.hi)))
        for u, w in atoms:
            if not (-r - _EDGE_SLOP <= u <= _EDGE_SLOP) or not math.isfinite(w):
                raise ConfigError(f"atom ({u}, {w}) outside [-{r}, 0] or non-finite")
        for p in pieces:
            if not (-r - _EDGE_SLOP <= p.lo < p.hi <= _EDGE_SLOP):
                raise ConfigError(f"density interval [{p.lo}, {p.hi}] not a proper subinterval of [-{r}, 0]")
            if len(p.coeffs) == 0 or not all(math.isfinite(c) for c in p.coeffs):
                raise ConfigError(f"density piece on [{p.lo}, {p.hi}] has no or non-finite coefficients")
        for p, q in zip(pieces, pieces[1:]):
            if q.lo < p.hi - _EDGE_SLOP:
                raise ConfigError(f"density intervals [{p.lo}, {p.hi}] and [{q.lo}, {q.hi}] overlap")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "density", pieces)
        if self.is_zero():
            raise ConfigError("the delay measure must not be identically zero")
        object.__setattr__(self, "_tv", self._variation())

    # -- construction -----------------------------------------------------

    @classmethod
    def dirac(cls, u: float = 0.0, w: float = 1.0, r: float | None = None) -> "SignedMeasure":
        """Point mass ``w`` at ``u``; ``r`` defaults to ``max(|u|, 1)``."""
        return cls(r=r if r is not None else max(abs(u), 1.0), atoms=((u, w),))

    @classmethod
    def uniform(cls, lo: float, hi: float, height: float = 1.0, r: float | None = None) -> "SignedMeasure":
        return cls(r=r if r is not None else -lo, density=((lo, hi, (height,)),))

    @classmethod
    def from_dict(cls, d: dict) -> "SignedMeasure":
        try:
            atoms = [(a["u"], a["w"]) for a in d.get("atoms", [])]
            return cls(r=d["r"], atoms=atoms, density=d.get("density", []))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed measure description: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "SignedMeasure":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "atoms": [{"u": u, "w": w} for u, w in self.atoms],
            "density": [{"lo": p.lo, "hi": p.hi, "coeffs": list(p.coeffs)} for p in self.density],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    # -- queries ----------------------------------------------------------

    def is_zero(self) -> bool:
        by_loc: dict[float, float] = {}
        for u, w in self.atoms:
            by_loc[u] = by_loc.get(u, 0.0) + w
        if any(w != 0.0 for w in by_loc.values()):
            return False
        return all(all(c == 0.0 for c in p.coeffs) for p in self.density)

    def total_mass(self) -> float:
        """a([-r, 0]), exact for the polynomial pieces."""
        mass = math.fsum(w for _, w in self.atoms)
        for p in self.density:
            anti = P.polyint(p.coeffs)
            mass += float(P.polyval(p.hi, anti) - P.polyval(p.lo, anti))
        return mass

    def total_variation(self) -> float:
        """|a|([-r, 0]); pieces are split at the real zeros of their polynomial."""
        return self._tv

    def _variation(self) -> float:
        tv = math.fsum(abs(w) for _, w in self.atoms)
        for p in self.density:
            c = np.trim_zeros(np.asarray(p.coeffs, dtype=float), "b")
            if c.size == 0:
                continue
            cuts = [p.lo, p.hi]
            if c.size > 1:
                z = P.polyroots(c)
                cuts += [float(x.real) for x in z if abs(x.imag) < 1e-12 and p.lo < x.real < p.hi]
            cuts.sort()
            anti = P.polyint(c)
            for a, b in zip(cuts, cuts[1:]):
                tv += abs(float(P.polyval(b, anti) - P.polyval(a, anti)))
        return tv

    def exp_moment(self, lam, k: int = 0):
        """Return ``int u**k exp(lam*u) a(du)``; ``lam`` may be an array."""
        return exp_moment(self, lam, k)

    def merged(self, other: "SignedMeasure") -> "SignedMeasure":
        """The sum of two measures, overlapping density pieces combined."""
        r = max(self.r, other.r)
        pieces = list(self.density) + list(other.density)
        cuts = sorted({x for p in pieces for x in (p.lo, p.hi)})
        combined = []
        for lo, hi in zip(cuts, cuts[1:]):
            mid = 0.5 * (lo + hi)
            cover = [p.coeffs for p in pieces if p.lo <= mid <= p.hi]
            if cover:
                acc = np.zeros(1)
                for c in cover:
                    acc = P.polyadd(acc, c)
                combined.append((lo, hi, tuple(float(x) for x in acc)))
        return SignedMeasure(r=r, atoms=self.atoms + other.atoms, density=combined,
                             max_order=min(self.max_order, other.max_order))


def total_mass(a: SignedMeasure) -> float:
    return a.total_mass()


def _unit_moments(mu: np.ndarray, nmax: int) -> np.ndarray:
    """F[i] = int_0^1 t**i exp(mu*t) dt for i = 0..nmax, vectorised over ``mu``.

    Forward recursion F_i = (e**mu - i F_{i-1}) / mu is stable for i <= |mu|;
    above that the backward recursion F_{i-1} = (e**mu - mu F_i) / i is used,
    started far enough up that the starting error is damped below rounding.
    """
    mu = np.asarray(mu, dtype=complex)
    out = np.empty((nmax + 1,) + mu.shape, dtype=complex)
    amu = np.abs(mu)
    small = amu < TAYLOR_THRESHOLD
    i = np.arange(nmax + 1).reshape((-1,) + (1,) * mu.ndim)
    if np.any(small):
        ms = np.where(small, mu, 0.0)
        acc = np.zeros_like(out)
        term = np.ones_like(ms)
        for j in range(8):
            acc += term / (i + j + 1)
            term = term * ms / (j + 1)
        out[:] = acc
    big = ~small
    if np.any(big):
        mb = np.where(big, mu, 1.0)
        e = np.exp(mb)
        amb = np.abs(mb)
        back = np.empty_like(out)
        needs_back = amb < nmax + 1
        if np.any(needs_back):
            amax = float(np.max(amb[needs_back]))
            top = nmax + 60 + int(math.ceil(3.0 * amax))
            f = e / (top + 1)
            for kk in range(top, 0, -1):
                f = (e - mb * f) / kk
                if kk - 1 <= nmax:
                    back[kk - 1] = f
        fwd = np.empty_like(out)
        f = (e - 1.0) / mb
        fwd[0] = f
        for kk in range(1, nmax + 1):
            f = (e - kk * f) / mb
            fwd[kk] = f
        use_fwd = (i <= np.abs(mb)) & (np.abs(mb) >= 1.0)
        out = np.where(big, np.where(use_fwd, fwd, back), out)
    return out


def _piece_moment(p: DensityPiece, lam: np.ndarray, k: int) -> np.ndarray:
    # Expand around the endpoint nearer to zero so the monomial shift stays benign.
    if abs(p.hi) <= abs(p.lo):
        e, sign = p.hi, -1.0
    else:
        e, sign = p.lo, 1.0
    L = p.length
    shift = [e, sign * L]  # u = e + sign*L*t, t in [0, 1]
    q = np.array([0.0])
    comp = np.array([1.0])
    for c in p.coeffs:
        q = P.polyadd(q, c * comp)
        comp = P.polymul(comp, shift)
    q = P.polymul(q, P.polypow(shift, k)) if k else q
    q = np.trim_zeros(np.asarray(q, dtype=float), "b")
    if q.size == 0:
        return np.zeros(lam.shape, dtype=complex)
    F = _unit_moments(sign * lam * L, q.size - 1)
    s = np.tensordot(q, F, axes=(0, 0))
    return L * np.exp(lam * e) * s


def exp_moment(a: SignedMeasure, lam, k: int = 0):
    """Exponential moment ``int_{[-r,0]} u**k exp(lam*u) a(du)``.

    Atoms are summed exactly and density pieces integrated in closed form.
    Returns a complex scalar for scalar ``lam``, an array otherwise.

    Raises
    ------
    OrderExceededError
        If ``k`` exceeds ``a.max_order``.
    """
    k = int(k)
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    if k > a.max_order:
        raise OrderExceededError(f"moment order {k} exceeds maximum {a.max_order}")
    scalar = np.ndim(lam) == 0
    lam = np.asarray(lam, dtype=complex)
    total = np.zeros(lam.shape, dtype=complex)
    for u, w in a.atoms:
        total += w * (u ** k) * np.exp(lam * u)
    for p in a.density:
        total += _piece_moment(p, lam, k)
    return complex(total) if scalar else total


def measure_from_parts(atoms: Iterable[Sequence[float]] = (), density: Iterable = (), r: float | None = None) -> SignedMeasure:
    """Build a measure, inferring ``r`` from the leftmost support point when omitted."""
    atoms = list(atoms)
    density = [_as_piece(p) for p in density]
    if r is None:
        left = [u for u, _ in atoms] + [p.lo for p in density]
        r = max(-min(left), 0.0) if left else 0.0
        r = r if r > 0 else 1.0
    return SignedMeasure(r=r, atoms=atoms, density=density)
