"""Riemann sphere arithmetic: points, rational maps, metric, derivatives.

Points live on the sphere C u {infinity}.  Everything is computed in one of
two charts: the affine plane for |z| <= 1 and the coordinate w = 1/z for
|z| > 1 (the crossover radius is exactly 1).  Internally a point is a
"state" (x, inverted) with |x| <= 1, so no intermediate quantity overflows
no matter how close an orbit gets to infinity.

The metric is the chordal distance

    sigma(p, q) = 2|p - q| / sqrt((1 + |p|^2)(1 + |q|^2)),

which equals the Euclidean distance between the points' images on the unit
2-sphere (see embed); its diameter is 2 and the map w = 1/z is an isometry,
so all chart-wise formulas below agree where charts overlap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import MapConstructionError
from .roots import PolyRoots, find_roots

CHART_CROSSOVER = 1.0
COPRIMALITY_TOL = 1e-10
_TRIM_REL = 1e-14


@dataclass(frozen=True)
class SpherePoint:
    """A point of the Riemann sphere: an affine complex number or infinity."""

    z: complex = 0j
    infinite: bool = False

    def __post_init__(self):
        if self.infinite:
            object.__setattr__(self, "z", 0j)
        else:
            zc = complex(self.z)
            if not (math.isfinite(zc.real) and math.isfinite(zc.imag)):
                raise ValueError("affine sphere point must have finite coordinates")
            object.__setattr__(self, "z", zc)

    @property
    def is_infinite(self) -> bool:
        return self.infinite

    def to_complex(self) -> complex:
        if self.infinite:
            raise ValueError("the point at infinity has no affine coordinate")
        return self.z

    def __repr__(self) -> str:
        return "SpherePoint(INFINITY)" if self.infinite else f"SpherePoint({self.z!r})"


INFINITY = SpherePoint(infinite=True)


def as_point(x) -> SpherePoint:
    """Coerce a complex number (or SpherePoint) to a SpherePoint."""
    if isinstance(x, SpherePoint):
        return x
    return SpherePoint(complex(x))


# ---------------------------------------------------------------------------
# chart states
#
# A state is (x, inverted) with |x| <= 1; inverted means the stored value is
# w = 1/z (w = 0 encodes infinity).  All metric and evaluation formulas are
# written against states.

def _state_of(p: SpherePoint) -> tuple[complex, bool]:
    if p.infinite:
        return 0j, True
    if abs(p.z) > CHART_CROSSOVER:
        return 1.0 / p.z, True
    return p.z, False


def _point_of(x: complex, inverted: bool) -> SpherePoint:
    if inverted:
        # values this deep in the inverted chart have no affine representation
        if abs(x) < 1e-300:
            return INFINITY
        return SpherePoint(1.0 / complex(x))
    return SpherePoint(complex(x))


def _sigma_states(x1: complex, inv1: bool, x2: complex, inv2: bool) -> float:
    if inv1 == inv2:
        num = 2.0 * abs(x1 - x2)
    else:
        # sigma(z, 1/w) = 2|zw - 1| / sqrt((1+|z|^2)(1+|w|^2))
        num = 2.0 * abs(x1 * x2 - 1.0)
    den = math.sqrt((1.0 + abs(x1) ** 2) * (1.0 + abs(x2) ** 2))
    return num / den


def spherical_distance(p, q) -> float:
    """Chordal distance between two sphere points (diameter 2)."""
    x1, i1 = _state_of(as_point(p))
    x2, i2 = _state_of(as_point(q))
    return _sigma_states(x1, i1, x2, i2)


def embed(p) -> np.ndarray:
    """Image of a sphere point on the unit 2-sphere in R^3.

    Euclidean distance between embedded points equals spherical_distance;
    infinity maps to the north pole (0, 0, 1).
    """
    sp = as_point(p)
    if sp.infinite:
        return np.array([0.0, 0.0, 1.0])
    z = sp.z
    r2 = abs(z) ** 2
    s = 1.0 / (1.0 + r2)
    return np.array([2.0 * z.real * s, 2.0 * z.imag * s, (r2 - 1.0) * s])


def unembed(v) -> SpherePoint:
    """Inverse of embed; the input vector is normalized to the sphere first."""
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot project the zero vector to the sphere")
    x, y, zc = v / n
    if 1.0 - zc <= 0.0:
        return INFINITY
    return SpherePoint(complex(x, y) / (1.0 - zc))


# ---------------------------------------------------------------------------
# polynomial helpers (ascending coefficient arrays)

def _trim(coeffs: np.ndarray, rel: float = _TRIM_REL) -> np.ndarray:
    """Drop negligible leading (high-order) coefficients."""
    a = np.asarray(coeffs, dtype=np.complex128)
    if a.size == 0:
        return a
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return a[:1] * 0.0
    keep = a.size
    while keep > 1 and abs(a[keep - 1]) <= rel * scale:
        keep -= 1
    return a[:keep].copy()


def polyval(coeffs: np.ndarray, z: complex) -> complex:
    acc = 0j
    for c in coeffs[::-1]:
        acc = acc * z + c
    return acc


def polyder(coeffs: np.ndarray) -> np.ndarray:
    if len(coeffs) <= 1:
        return np.zeros(1, dtype=np.complex128)
    k = np.arange(1, len(coeffs))
    return (coeffs[1:] * k).astype(np.complex128)


def polymul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)


def polyadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(len(a), len(b))
    out = np.zeros(n, dtype=np.complex128)
    out[: len(a)] += a
    out[: len(b)] += b
    return out


def _resultant_relative(p: np.ndarray, q: np.ndarray) -> float:
    """|Res(p, q)| normalized by coefficient scale; ~0 iff common root."""
    m, n = len(p) - 1, len(q) - 1
    if m == 0 or n == 0:
        return 1.0
    size = m + n
    syl = np.zeros((size, size), dtype=np.complex128)
    # rows of p (descending convention for the classical Sylvester layout)
    pd, qd = p[::-1], q[::-1]
    for i in range(n):
        syl[i, i : i + m + 1] = pd
    for i in range(m):
        syl[n + i, i : i + n + 1] = qd
    det = np.linalg.det(syl)
    scale = (np.max(np.abs(p)) ** n) * (np.max(np.abs(q)) ** m)
    if scale == 0.0:
        return 0.0
    return float(abs(det)) / scale


# ---------------------------------------------------------------------------
# rational maps

class RationalMap:
    """A rational map f = P/Q of degree >= 2, immutable after construction.

    Coefficients are ascending.  On construction the pair is trimmed,
    checked for coprimality (relative resultant above 1e-10) and scaled so
    the denominator's leading coefficient is exactly 1.
    """

    def __init__(self, numerator, denominator):
        p = _trim(np.asarray(numerator, dtype=np.complex128))
        q = _trim(np.asarray(denominator, dtype=np.complex128))
        if np.max(np.abs(p)) == 0.0 or np.max(np.abs(q)) == 0.0:
            raise MapConstructionError("numerator and denominator must be nonzero")
        degree = max(len(p), len(q)) - 1
        if degree < 2:
            raise MapConstructionError(f"map degree is {degree}; need >= 2")
        res = _resultant_relative(p, q)
        if res <= COPRIMALITY_TOL:
            raise MapConstructionError(
                f"numerator and denominator share a factor (relative resultant {res:.3e})"
            )
        lead = q[-1]
        self.numer = p / lead
        self.denom = q / lead
        self.degree = degree
        self.numer.setflags(write=False)
        self.denom.setflags(write=False)

    # -- constructors ------------------------------------------------------

    @classmethod
    def polynomial(cls, coeffs) -> "RationalMap":
        return cls(coeffs, [1.0])

    @classmethod
    def newton(cls, poly_coeffs) -> "RationalMap":
        """Newton's method map z - p(z)/p'(z) of a polynomial p."""
        p = _trim(np.asarray(poly_coeffs, dtype=np.complex128))
        dp = polyder(p)
        # (z p' - p) / p'
        num = polyadd(polymul(np.array([0.0, 1.0], dtype=np.complex128), dp), -p)
        return cls(num, dp)

    @classmethod
    def from_dict(cls, d: dict) -> "RationalMap":
        try:
            num = [complex(re, im) for re, im in d["numerator"]]
            den = [complex(re, im) for re, im in d["denominator"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise MapConstructionError(f"bad map description: {exc}") from exc
        return cls(num, den)

    @classmethod
    def from_file(cls, path) -> "RationalMap":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise MapConstructionError(f"cannot read map file {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "numerator": [[c.real, c.imag] for c in self.numer],
            "denominator": [[c.real, c.imag] for c in self.denom],
        }

    # -- derived coefficient data -----------------------------------------

    def _padded(self, a: np.ndarray) -> np.ndarray:
        out = np.zeros(self.degree + 1, dtype=np.complex128)
        out[: len(a)] = a
        return out

    @cached_property
    def numer_rev(self) -> np.ndarray:
        """Coefficients of w^D P(1/w), ascending in w."""
        return self._padded(self.numer)[::-1].copy()

    @cached_property
    def denom_rev(self) -> np.ndarray:
        return self._padded(self.denom)[::-1].copy()

    @cached_property
    def dnumer(self) -> np.ndarray:
        return polyder(self.numer)

    @cached_property
    def ddenom(self) -> np.ndarray:
        return polyder(self.denom)

    @cached_property
    def dnumer_rev(self) -> np.ndarray:
        return polyder(self.numer_rev)

    @cached_property
    def ddenom_rev(self) -> np.ndarray:
        return polyder(self.denom_rev)

    @cached_property
    def wronskian(self) -> np.ndarray:
        """P'Q - PQ', the numerator of f'; its roots are the finite critical points."""
        w = polyadd(polymul(self.dnumer, self.denom), -polymul(self.numer, self.ddenom))
        return _trim(w, rel=1e-12)

    @cached_property
    def inverted(self) -> "RationalMap":
        """The conjugate map 1/f(1/w), i.e. f read in the chart at infinity."""
        return RationalMap(self.denom_rev, self.numer_rev)

    def __repr__(self) -> str:
        return f"RationalMap(degree={self.degree})"


# ---------------------------------------------------------------------------
# evaluation and derivatives

def _step_state(m: RationalMap, x: complex, inverted: bool) -> tuple[complex, bool]:
    """One application of the map in state form; output state has |x| <= 1."""
    if inverted:
        n = polyval(m.numer_rev, x)
        d = polyval(m.denom_rev, x)
    else:
        n = polyval(m.numer, x)
        d = polyval(m.denom, x)
    if abs(n) <= abs(d):
        if d == 0:
            # n == d == 0 is excluded by coprimality up to roundoff; treat as pole
            return 0j, True
        return n / d, False
    return d / n, True


def eval_map(m: RationalMap, p) -> SpherePoint:
    """Apply the rational map to a sphere point."""
    x, inv = _state_of(as_point(p))
    return _point_of(*_step_state(m, x, inv))


def _chart_arrays(m: RationalMap, in_inv: bool, out_inv: bool):
    if not in_inv and not out_inv:
        return m.numer, m.denom, m.dnumer, m.ddenom
    if not in_inv and out_inv:
        return m.denom, m.numer, m.ddenom, m.dnumer
    if in_inv and not out_inv:
        return m.numer_rev, m.denom_rev, m.dnumer_rev, m.ddenom_rev
    return m.denom_rev, m.numer_rev, m.ddenom_rev, m.dnumer_rev


def _chart_step_state(
    m: RationalMap, x: complex, in_inv: bool
) -> tuple[complex, bool, complex]:
    """One map application in state form with the chart derivative.

    Returns (x2, out_inverted, dw); dw is the complex derivative of the map
    written in the input/output charts, taken at the input coordinate.
    """
    if in_inv:
        n = polyval(m.numer_rev, x)
        d = polyval(m.denom_rev, x)
    else:
        n = polyval(m.numer, x)
        d = polyval(m.denom, x)
    out_inv = abs(n) > abs(d) or d == 0
    pc, qc, dpc, dqc = _chart_arrays(m, in_inv, out_inv)
    qv = polyval(qc, x)
    deriv = (polyval(dpc, x) * qv - polyval(pc, x) * polyval(dqc, x)) / (qv * qv)
    if out_inv:
        value = 0j if n == 0 else d / n
    else:
        value = n / d
    return value, out_inv, deriv


def chart_step(m: RationalMap, p) -> tuple[SpherePoint, complex, bool, bool]:
    """Value and chart derivative of one map application.

    Returns (value, dw, in_inverted, out_inverted).  Chaining chart_step
    along an orbit multiplies the dw factors into the derivative of the
    composed map (charts match between consecutive steps because values are
    chart-normalized), which is how cycle multipliers are computed even for
    cycles through infinity.
    """
    x, in_inv = _state_of(as_point(p))
    value, out_inv, deriv = _chart_step_state(m, x, in_inv)
    return _point_of(value, out_inv), deriv, in_inv, out_inv


def spherical_derivative(m: RationalMap, p) -> float:
    """Norm of the map derivative with respect to the spherical metric.

    Multiplicative along orbits: the spherical norm of (f^n)' is the product
    of this quantity along the orbit.
    """
    value, deriv, _, _ = chart_step(m, p)
    x, _ = _state_of(as_point(p))
    v, _ = _state_of(value)
    return abs(deriv) * (1.0 + abs(x) ** 2) / (1.0 + abs(v) ** 2)


# ---------------------------------------------------------------------------
# critical points / preimages

def critical_points(m: RationalMap) -> list[SpherePoint]:
    """All 2D-2 critical points, repeated per multiplicity.

    Finite critical points are the roots of the Wronskian P'Q - PQ'
    (a multiple pole of order k contributes k-1 of them); the degree
    deficiency of the Wronskian counts the multiplicity at infinity.
    """
    w = m.wronskian
    target = 2 * m.degree - 2
    points: list[SpherePoint] = []
    if len(w) > 1:
        pr = find_roots(w)
        points.extend(SpherePoint(complex(root)) for root in pr.roots)
    inf_mult = target - (len(w) - 1)
    points.extend([INFINITY] * inf_mult)
    return points


def preimages(m: RationalMap, target) -> list[SpherePoint]:
    """The D preimages of a sphere point, with multiplicity.

    Solves P - tQ = 0, rescaled as sP - Q = 0 (s = 1/t) when |t| > 1 so the
    coefficients stay bounded; degree deficiency of the resulting polynomial
    means infinity is a preimage with the missing multiplicity.
    """
    t = as_point(target)
    pn, pd = m._padded(m.numer), m._padded(m.denom)
    if t.infinite:
        poly = pd.copy()
    elif abs(t.z) <= 1.0:
        poly = pn - t.z * pd
    else:
        poly = (1.0 / t.z) * pn - pd
    poly = _trim(poly, rel=1e-13)
    result: list[SpherePoint] = []
    if len(poly) > 1:
        pr = find_roots(poly)
        result.extend(SpherePoint(complex(r)) for r in pr.roots)
    result.extend([INFINITY] * (m.degree - (len(poly) - 1)))
    return result
