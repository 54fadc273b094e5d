"""Characteristic roots, residue coefficients and the (v*, m*) classification.

The characteristic function of the delay equation with drift parameter
``theta`` and delay measure ``a`` is

    h(lam) = lam - theta * int exp(lam*u) a(du).

Roots are located with the argument principle on recursively subdivided
rectangles and polished with Newton's method.  Multiple roots are detected
from the winding count of the enclosing cell and polished as simple zeros of
``h^(m-1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import (
    InconsistentMultiplicityError,
    NonConvergenceError,
    RegimeError,
    RegionTooLargeError,
)
from .measure import SignedMeasure, exp_moment

NEG_INF = float("-inf")

ROOT_RESIDUAL = 1e-12        # |h(lam)| <= ROOT_RESIDUAL * (1 + |lam|)
CLUSTER_RADIUS = 1e-7        # zeros closer than this are merged into one multiple root
CRITICAL_LINE_TOL = 1e-8     # |Re lam - v*| below this counts as on the critical line
COEFF_TOL = 1e-10            # |c| <= COEFF_TOL * (1 + |theta|) counts as zero
MAX_CELLS = 20000
MAX_MULTIPLICITY = 8         # cells with a larger winding count are always subdivided
_SPLITS = (0.5137, 0.4709, 0.5419, 0.4381, 0.5853, 0.3967)


@dataclass(frozen=True)
class CharacteristicModel:
    measure: SignedMeasure
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))

    def h(self, lam):
        return char_eval(self, lam)

    def derivative(self, lam, k: int = 1):
        return char_derivative(self, lam, k)

    @classmethod
    def from_dict(cls, d: dict) -> "CharacteristicModel":
        return cls(SignedMeasure.from_dict(d), float(d.get("theta", 0.0)))

    def to_dict(self) -> dict:
        out = self.measure.to_dict()
        out["theta"] = self.theta
        return out


class Region(NamedTuple):
    """Search rectangle ``sigma_min <= Re <= sigma_max``, ``|Im| <= phi_max``."""

    sigma_min: float
    sigma_max: float
    phi_max: float

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return (self.sigma_min - slack <= z.real <= self.sigma_max + slack
                and abs(z.imag) <= self.phi_max + slack)


def default_region(model: CharacteristicModel) -> Region:
    """Rectangle used when the caller gives none.

    Any root with nonnegative real part satisfies ``|lam| <= |theta| |a|_TV``,
    so the rectangle always contains the whole closed right half-plane part of
    the spectrum.
    """
    r = model.measure.r
    bound = abs(model.theta) * model.measure.total_variation()
    return Region(-5.0 / r, max(1.0, 2.0 * bound), max(8.0 * math.pi / r, bound + 1.0))


def char_eval(model: CharacteristicModel, lam):
    """h(lam) = lam - theta * int exp(lam u) a(du)."""
    if model.theta == 0.0:
        return lam + 0j if np.ndim(lam) == 0 else np.asarray(lam, dtype=complex)
    return lam - model.theta * exp_moment(model.measure, lam, 0)


def char_derivative(model: CharacteristicModel, lam, k: int = 1):
    """Exact k-th derivative of h, obtained by differentiating under the integral."""
    if k < 1:
        raise ValueError("derivative order must be >= 1")
    if model.theta == 0.0:
        base = 1.0 if k == 1 else 0.0
        return complex(base) if np.ndim(lam) == 0 else np.full(np.shape(lam), base, dtype=complex)
    val = -model.theta * exp_moment(model.measure, lam, k)
    return val + 1.0 if k == 1 else val


def _eval_scale(model: CharacteristicModel, z: np.ndarray) -> np.ndarray:
    """Rough magnitude of the terms summed in h(z), for rounding-level thresholds."""
    a = model.measure
    tv = a.total_variation()
    grow = np.exp(np.clip(-a.r * z.real, 0.0, 700.0))
    return 1.0 + np.abs(z) + abs(model.theta) * tv * grow


class _NearRoot(Exception):
    pass


def _winding(model: CharacteristicModel, x0: float, x1: float, y0: float, y1: float) -> int:
    """Winding number of h around the rectangle, by adaptive phase tracking."""
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
    density = 4.0 * (1.0 + model.measure.r) * (1.0 + abs(model.theta)) ** 0.5
    pts = []
    for a, b in zip(corners, corners[1:]):
        n = max(8, int(math.ceil(abs(b - a) * density)))
        pts.append(a + (b - a) * np.arange(n) / n)
    pts.append(np.array([corners[0]]))
    z = np.concatenate(pts)
    hv = np.asarray(char_eval(model, z))
    span = max(x1 - x0, y1 - y0)
    for _ in range(80):
        tiny = 1e3 * np.finfo(float).eps * _eval_scale(model, z)
        if np.any(np.abs(hv) <= tiny):
            raise _NearRoot
        ratio = hv[1:] / hv[:-1]
        dphi = np.angle(ratio)
        bad = (np.abs(dphi) > math.pi / 4) | (np.abs(np.log(np.abs(ratio))) > 1.0)
        if not bad.any():
            total = dphi.sum() / (2.0 * math.pi)
            n = int(round(total))
            if abs(total - n) > 0.05:
                raise _NearRoot
            return n
        idx = np.nonzero(bad)[0]
        if np.min(np.abs(z[idx + 1] - z[idx])) < 1e-14 * (1.0 + span):
            raise _NearRoot
        mid = 0.5 * (z[idx] + z[idx + 1])
        hmid = np.asarray(char_eval(model, mid))
        z = np.insert(z, idx + 1, mid)
        hv = np.insert(hv, idx + 1, hmid)
    raise _NearRoot


def _newton(f, df, z: complex, maxiter: int = 60, reach: float = math.inf) -> complex | None:
    """Newton iteration; gives up once it strays more than ``reach`` from the start."""
    start = z
    with np.errstate(all="ignore"):
        for _ in range(maxiter):
            d = df(z)
            if d == 0 or not np.isfinite(d):
                return None
            step = f(z) / d
            z = z - step
            if not np.isfinite(z) or abs(z - start) > reach:
                return None
            if abs(step) <= 4.0 * np.finfo(float).eps * (1.0 + abs(z)):
                return z
        f0 = abs(f(z))
    return z if f0 <= ROOT_RESIDUAL * (1.0 + abs(z)) else None


def _taylor(model: CharacteristicModel, lam: complex, upto: int) -> list[complex]:
    """h_k = h^(k)(lam) / k! for k = 0..upto."""
    out = [complex(char_eval(model, lam))]
    for k in range(1, upto + 1):
        out.append(complex(char_derivative(model, lam, k)) / math.factorial(k))
    return out


def _polish(model: CharacteristicModel, z: complex, m: int, reach: float = math.inf) -> complex | None:
    if m == 1:
        return _newton(lambda w: complex(char_eval(model, w)),
                       lambda w: complex(char_derivative(model, w, 1)), z, reach=reach)
    return _newton(lambda w: complex(char_derivative(model, w, m - 1)),
                   lambda w: complex(char_derivative(model, w, m)), z, reach=reach)


def _cluster_radius(model: CharacteristicModel, z: complex, m: int) -> float:
    """Radius within which the m zeros of the local Taylor polynomial lie."""
    hk = _taylor(model, z, m)
    lead = abs(hk[m])
    if lead == 0.0:
        return math.inf
    return max((abs(hk[k]) / lead) ** (1.0 / (m - k)) for k in range(m))


@dataclass
class RootSearch:
    """Result of :func:`locate_roots`."""

    roots: list  # of (complex, int)
    winding_count: int
    region: Region
    cells: int = 0


def locate_roots(model: CharacteristicModel, region: Region | None = None, *,
                 max_cells: int = MAX_CELLS) -> RootSearch:
    """All zeros of h in ``region`` with multiplicities, plus the boundary winding count."""
    region = Region(*region) if region is not None else default_region(model)
    x0, x1, phi = region
    if not (x1 > x0 and phi > 0):
        raise ValueError(f"degenerate search region {region}")
    # Nudge the outer boundary off any root sitting on it.
    nudge = 0.0
    for attempt in range(12):
        try:
            total = _winding(model, x0 - nudge, x1 + nudge, -phi - nudge, phi + nudge)
            break
        except _NearRoot:
            nudge = 1e-9 * (1.0 + abs(x0) + abs(x1) + phi) * 3.0 ** attempt
    else:
        raise NonConvergenceError("could not place the region boundary away from roots")
    region = Region(x0 - nudge, x1 + nudge, phi + nudge)

    found: list[tuple[complex, int]] = []
    stack = [((region.sigma_min, region.sigma_max, -region.phi_max, region.phi_max), total)]
    cells = 0
    while stack:
        (cx0, cx1, cy0, cy1), count = stack.pop()
        cells += 1
        if cells > max_cells:
            raise RegionTooLargeError(f"root search exceeded {max_cells} cells; shrink the region")
        if count == 0:
            continue
        centre = complex(0.5 * (cx0 + cx1), 0.5 * (cy0 + cy1))
        size = max(cx1 - cx0, cy1 - cy0)
        slack = 1e-9 * (1.0 + abs(centre))
        cand = _polish(model, centre, count, reach=2.0 * size) if count <= MAX_MULTIPLICITY else None
        if cand is not None and (cx0 - slack <= cand.real <= cx1 + slack) and (cy0 - slack <= cand.imag <= cy1 + slack):
            if count == 1 or _cluster_radius(model, cand, count) <= CLUSTER_RADIUS * (1.0 + abs(cand)):
                found.append((cand, count))
                continue
        if size < 1e-12 * (1.0 + abs(centre)):
            raise NonConvergenceError(f"Newton failed in a cell of size {size:.3g} near {centre}")
        children = _split(model, cx0, cx1, cy0, cy1, count)
        stack.extend(reversed(children))

    roots = _symmetrise(model, found)
    return RootSearch(roots=roots, winding_count=total, region=region, cells=cells)


def _split(model, x0, x1, y0, y1, count):
    for frac in _SPLITS:
        if (x1 - x0) >= (y1 - y0):
            xm = x0 + frac * (x1 - x0)
            boxes = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        else:
            ym = y0 + frac * (y1 - y0)
            boxes = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
        try:
            counts = [_winding(model, *b) for b in boxes]
        except _NearRoot:
            continue
        if sum(counts) == count and min(counts) >= 0:
            return list(zip(boxes, counts))
    raise NonConvergenceError(f"could not subdivide cell [{x0}, {x1}] x [{y0}, {y1}] consistently")


def _snap_real(model: CharacteristicModel, z: complex, m: int) -> complex:
    if z.imag != 0.0 and abs(z.imag) <= 1e-9 * (1.0 + abs(z)):
        real = _polish(model, complex(z.real, 0.0), m)
        if real is not None and real.imag == 0.0:
            return real
    return z


def _symmetrise(model, found):
    """Snap near-real roots onto the axis and make the list closed under conjugation."""
    roots = [(_snap_real(model, z, m), m) for z, m in found]
    upper = [(z, m) for z, m in roots if z.imag > 0]
    lower = [(z, m) for z, m in roots if z.imag < 0]
    real = [(z, m) for z, m in roots if z.imag == 0]
    paired = []
    for z, m in upper:
        match = None
        for j, (w, mw) in enumerate(lower):
            if mw == m and abs(w - z.conjugate()) <= 1e-7 * (1.0 + abs(z)):
                match = j
                break
        if match is not None:
            lower.pop(match)
        paired.extend([(z, m), (z.conjugate(), m)])
    out = real + paired + lower
    out.sort(key=lambda t: (round(t[0].real, 12), t[0].imag))
    return out


def find_roots(model: CharacteristicModel, region: Region | None = None, *,
               max_cells: int = MAX_CELLS) -> list[tuple[complex, int]]:
    """Zeros of h in the region as ``(lambda, multiplicity)`` pairs, sorted by Re then Im.

    Raises
    ------
    RegionTooLargeError
        If subdivision exceeds ``max_cells`` cells.
    NonConvergenceError
        If Newton polishing fails on a fully subdivided cell.
    """
    return locate_roots(model, region, max_cells=max_cells).roots


def residue_coeffs(model: CharacteristicModel, lam: complex, m: int) -> list[complex]:
    """All residue coefficients c_l, l = 0..m-1, at a zero of order m.

    With h(z) = (z - lam)**m g(z) and b = 1/g as a power series,

        Res_{z=lam} (z-lam)**l e^{zu} / h(z)
            = e^{lam u} sum_{j=0}^{m-l-1} u**j / j! * b_{m-l-1-j},

    and integrating against a turns ``u**j e^{lam u}`` into exponential moments.
    """
    hk = _taylor(model, lam, 2 * m - 1)
    g = hk[m:2 * m]
    scale = 1.0 + abs(lam) + abs(model.theta) * model.measure.total_variation()
    if abs(g[0]) <= 1e-13 * scale:
        raise InconsistentMultiplicityError(
            f"h^({m})({lam}) vanishes; {lam} is not a zero of order exactly {m}")
    b = [1.0 / g[0]]
    for n in range(1, m):
        b.append(-sum(g[i] * b[n - i] for i in range(1, n + 1)) / g[0])
    moments = [exp_moment(model.measure, lam, j) for j in range(m)]
    out = []
    for ell in range(m):
        top = m - ell - 1
        out.append(sum(b[top - j] * moments[j] / math.factorial(j) for j in range(top + 1)))
    return out


def residue_coeff(model: CharacteristicModel, root: tuple[complex, int], ell: int) -> complex:
    """c_{theta, lam, ell} = int Res_{z=lam} [(z-lam)**ell e^{zu} / h(z)] a(du)."""
    lam, m = root
    if not 0 <= ell < m:
        raise ValueError(f"coefficient index {ell} out of range for a zero of order {m}")
    return residue_coeffs(model, lam, m)[ell]


class Regime(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    EXPLOSIVE = "explosive"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class RootRecord:
    lam: complex
    multiplicity: int
    coeffs: tuple
    poly_degree: float  # int-valued, or -inf for the zero polynomial

    @property
    def frequency(self) -> float:
        return abs(self.lam.imag)

    def leading(self, m_star: int) -> complex:
        return self.coeffs[int(m_star)]

    def to_dict(self) -> dict:
        return {
            "re": self.lam.real,
            "im": self.lam.imag,
            "mult": self.multiplicity,
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
            "poly_degree": None if self.poly_degree == NEG_INF else int(self.poly_degree),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RootRecord":
        deg = d.get("poly_degree")
        return cls(complex(d["re"], d["im"]), int(d["mult"]),
                   tuple(complex(c[0], c[1]) for c in d["coeffs"]),
                   NEG_INF if deg is None else int(deg))


@dataclass(frozen=True)
class SpectralSummary:
    v_star: float
    m_star: float
    dominant_roots: tuple
    regime: Regime
    search_region: Region
    roots: tuple = field(default=(), compare=False)
    winding_count: int = 0

    def to_dict(self) -> dict:
        fin = lambda x: None if x == NEG_INF else x
        return {
            "roots": [r.to_dict() for r in self.roots],
            "dominant": [r.to_dict() for r in self.dominant_roots],
            "v_star": fin(self.v_star),
            "m_star": None if self.m_star == NEG_INF else int(self.m_star),
            "regime": self.regime.value,
            "winding_count": self.winding_count,
            "region": {"sigma_min": self.search_region.sigma_min,
                       "sigma_max": self.search_region.sigma_max,
                       "phi_max": self.search_region.phi_max},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralSummary":
        reg = d["region"]
        v = d["v_star"]
        m = d["m_star"]
        return cls(NEG_INF if v is None else float(v), NEG_INF if m is None else int(m),
                   tuple(RootRecord.from_dict(x) for x in d["dominant"]),
                   Regime(d["regime"]),
                   Region(reg["sigma_min"], reg["sigma_max"], reg["phi_max"]),
                   tuple(RootRecord.from_dict(x) for x in d.get("roots", [])),
                   int(d.get("winding_count", 0)))


def root_record(model: CharacteristicModel, lam: complex, m: int) -> RootRecord:
    coeffs = tuple(residue_coeffs(model, lam, m))
    tol = COEFF_TOL * (1.0 + abs(model.theta))
    deg = NEG_INF
    for ell, c in enumerate(coeffs):
        if abs(c) > tol:
            deg = ell
    return RootRecord(lam, m, coeffs, deg)


def classify(model: CharacteristicModel, region: Region | None = None) -> SpectralSummary:
    """Compute v*, m*, the dominant roots and the stability regime."""
    search = locate_roots(model, region)
    records = tuple(root_record(model, lam, m) for lam, m in search.roots)
    live = [rec for rec in records if rec.poly_degree != NEG_INF]
    if not live:
        return SpectralSummary(NEG_INF, NEG_INF, (), Regime.DEGENERATE, search.region,
                               records, search.winding_count)
    v_star = max(rec.lam.real for rec in live)
    critical = [rec for rec in live if abs(rec.lam.real - v_star) <= CRITICAL_LINE_TOL]
    m_star = max(rec.poly_degree for rec in critical)
    if abs(v_star) <= CRITICAL_LINE_TOL:
        v_star, regime = 0.0, Regime.UNSTABLE
    else:
        regime = Regime.STABLE if v_star < 0 else Regime.EXPLOSIVE
    dominant = tuple(rec for rec in critical if rec.poly_degree == m_star and rec.lam.imag >= 0)
    return SpectralSummary(v_star, m_star, dominant, regime, search.region, records,
                           search.winding_count)


def require_unstable(summary: SpectralSummary) -> None:
    if summary.regime is not Regime.UNSTABLE:
        raise RegimeError(f"model is {summary.regime.value} (v* = {summary.v_star}); "
                          "an unstable point (v* = 0) is required")
