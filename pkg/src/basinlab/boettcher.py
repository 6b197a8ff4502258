"""Local coordinates at superattracting fixed points.

At a fixed point a with local expansion f(a+u) = a + c u^d + ..., d >= 2,
there is a conformal coordinate in which f acts as zeta -> zeta^d.  This
module builds the truncated inverse series phi of that coordinate, solving
phi(zeta^d) = g(phi(zeta)) term by term, where g is the map written in the
local frame (u near 0, with the frame taken at infinity when a is the point
at infinity).  A reference radius is then shrunk until the functional
equation holds to 1e-9 on a sampled circle, which bounds the truncation
error actually incurred.
"""

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import ChartError
from .sphere import (
    INFINITY,
    RationalMap,
    SpherePoint,
    _point_of,
    as_point,
    critical_points,
    eval_map,
    spherical_distance,
)

_SERIES_ORDER = 8
_FUNCTIONAL_TOL = 1e-9
_MIN_REFERENCE_RADIUS = 1e-6
_CHECK_SAMPLES = 17


# ---------------------------------------------------------------------------
# truncated power series helpers (ascending coefficients, fixed length)

def _series_mul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.complex128)
    for i, ai in enumerate(a[:n]):
        if ai == 0:
            continue
        top = min(n - i, len(b))
        out[i : i + top] += ai * b[:top]
    return out


def _series_shift(p: np.ndarray, a: complex, n: int) -> np.ndarray:
    """Coefficients of p(a + u) as a series in u."""
    out = np.zeros(n, dtype=np.complex128)
    for c in p[::-1]:
        out = _series_mul(out, np.array([a, 1.0], dtype=np.complex128), n)
        out[0] += c
    return out


def _series_recip(q: np.ndarray, n: int) -> np.ndarray:
    if q[0] == 0:
        raise ChartError("local denominator vanishes at the attractor")
    out = np.zeros(n, dtype=np.complex128)
    out[0] = 1.0 / q[0]
    for k in range(1, n):
        acc = 0j
        for i in range(1, min(k, len(q) - 1) + 1):
            acc += q[i] * out[k - i]
        out[k] = -acc / q[0]
    return out


def _series_compose(g: np.ndarray, phi: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.complex128)
    for c in g[::-1]:
        out = _series_mul(out, phi, n)
        out[0] += c
    return out


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoettcherChart:
    """Inverse local coordinate at a superattracting fixed point.

    series holds the coefficients of phi (constant term zero), mapping the
    disk of radius reference_radius into the immediate basin so that
    phi(zeta^local_degree) = f(phi(zeta)).  When the attractor is infinity
    the series produces the coordinate w = 1/z.
    """

    attractor: SpherePoint
    local_degree: int
    normalization: complex
    reference_radius: float
    series: np.ndarray
    inverted_frame: bool

    def from_disk(self, zeta: complex) -> SpherePoint:
        """Point of the basin at disk coordinate zeta, |zeta| <= reference_radius."""
        u = 0j
        for c in self.series[::-1]:
            u = u * zeta + c
        if self.inverted_frame:
            return _point_of(u, True)
        return SpherePoint(self.attractor.z + u)

    def radius_point(self, t: float, r: float = None) -> SpherePoint:
        """Point on the internal ray at angle t (turns) and radius r."""
        if r is None:
            r = self.reference_radius
        return self.from_disk(r * cmath.exp(2j * cmath.pi * t))


def _local_series(m: RationalMap, attractor: SpherePoint, n: int):
    """Series of the map in the local frame u at the attractor (g(0) = 0)."""
    if attractor.infinite:
        frame = m.inverted
        a = 0j
    else:
        frame = m
        a = attractor.z
    num = _series_shift(frame.numer, a, n)
    den = _series_shift(frame.denom, a, n)
    num -= a * den
    g = _series_mul(num, _series_recip(den, n), n)
    return g


def functional_equation_residual(
    m: RationalMap, chart: BoettcherChart, r: float, samples: int = _CHECK_SAMPLES
) -> float:
    worst = 0.0
    d = chart.local_degree
    for k in range(samples):
        t = (k + 0.31) / samples
        z = chart.from_disk(r * cmath.exp(2j * cmath.pi * t))
        target = chart.from_disk((r**d) * cmath.exp(2j * cmath.pi * d * t))
        worst = max(worst, spherical_distance(eval_map(m, z), target))
    return worst


def build_chart(
    m: RationalMap,
    attractor,
    d: int,
    atlas=None,
    order: int = _SERIES_ORDER,
) -> BoettcherChart:
    """Build the local inverse coordinate of declared local degree d.

    The attractor must be a fixed point whose expansion starts exactly at
    order d.  With an atlas, the immediate component is additionally checked
    for critical points other than the attractor itself, since those would
    keep the coordinate from extending over the whole component.
    """
    a = as_point(attractor)
    if d < 2:
        raise ChartError(f"local degree must be >= 2, got {d}")
    if spherical_distance(eval_map(m, a), a) > 1e-10:
        raise ChartError("attractor is not a fixed point of the map")

    n = d + order + 1
    g = _local_series(m, a, n)
    scale = float(np.max(np.abs(g)))
    if abs(g[0]) > 1e-9 * scale:
        raise ChartError("local frame is not anchored at the fixed point")
    for k in range(1, d):
        if abs(g[k]) > 1e-8 * scale:
            raise ChartError(
                f"expansion has a nonzero order-{k} term; "
                f"the point is not superattracting of local degree {d}"
            )
    c = g[d]
    if abs(c) <= 1e-8 * scale:
        raise ChartError(f"expansion vanishes to order {d}; local degree is higher")

    if atlas is not None:
        from .basins import immediate_component

        idx = None
        for k, pp in enumerate(atlas.attractors):
            if spherical_distance(pp.point, a) < 1e-9:
                idx = k
                break
        if idx is None:
            raise ChartError("attractor is not part of the atlas")
        mask_a, mask_i = immediate_component(atlas, idx)
        for cp in critical_points(m):
            if spherical_distance(cp, a) < 1e-9:
                continue
            for grid, mask in ((atlas.affine, mask_a), (atlas.inverted_chart, mask_i)):
                if cp.infinite:
                    coord = 0j if grid.inverted else None
                else:
                    coord = 1.0 / cp.z if grid.inverted and abs(cp.z) > 1e-12 else (
                        None if grid.inverted else cp.z
                    )
                if coord is None:
                    continue
                px = grid.pixel_of(coord)
                if px is not None and mask[px]:
                    raise ChartError(
                        f"immediate component contains another critical point near {cp}"
                    )

    # normalization c^(1/(d-1)), principal branch; phi starts at its inverse
    normalization = cmath.exp(cmath.log(c) / (d - 1))
    phi = np.zeros(order + 1, dtype=np.complex128)
    phi[1] = 1.0 / normalization
    for mth in range(2, order + 1):
        nn = d + mth - 1
        comp = _series_compose(g[: nn + 1], phi, nn + 1)
        lhs = 0j
        if nn % d == 0:
            lhs = phi[nn // d]
        phi[mth] = (lhs - comp[nn]) / d

    chart = BoettcherChart(
        attractor=a,
        local_degree=d,
        normalization=normalization,
        reference_radius=0.3,
        series=phi,
        inverted_frame=a.infinite,
    )
    r = 0.3
    while r >= _MIN_REFERENCE_RADIUS:
        if functional_equation_residual(m, chart, r) < _FUNCTIONAL_TOL:
            return BoettcherChart(
                attractor=a,
                local_degree=d,
                normalization=normalization,
                reference_radius=r,
                series=phi,
                inverted_frame=a.infinite,
            )
        r *= 0.5
    raise ChartError("no reference radius passed the functional-equation check")
