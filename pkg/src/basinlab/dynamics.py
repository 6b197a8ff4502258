"""Orbits, periodic points, multipliers, postcritical sets.

Periodic points of period n are located through the fixed-point polynomial
of f^n (coefficient arrays composed with per-step rescaling so doubles never
overflow), then every root is re-polished by Newton on the iterated map
itself, so final accuracy does not depend on the conditioning of the
composed polynomial.  For degree^n beyond the symbolic threshold a seed grid
replaces the polynomial (results flagged as possibly incomplete).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import RootFindingError
from .roots import find_roots
from .sphere import (
    INFINITY,
    RationalMap,
    SpherePoint,
    _chart_step_state,
    _point_of,
    _state_of,
    as_point,
    critical_points,
    embed,
    eval_map,
    preimages,
    spherical_distance,
)

SYMBOLIC_DEGREE_LIMIT = 6561
PERIOD_POINT_LIMIT = 100_000
DEDUP_TOL = 1e-9
CYCLE_SNAP_TOL = 1e-10

CLASS_SUPERATTRACTING = "superattracting"
CLASS_ATTRACTING = "attracting"
CLASS_REPELLING = "repelling"
CLASS_PARABOLIC_SUSPECT = "parabolic-suspect"
CLASS_INDIFFERENT = "indifferent"

_SUPER_TOL = 1e-8
_PARABOLIC_TOL = 1e-6


@dataclass(frozen=True)
class PeriodicPoint:
    """A periodic point with its minimal period and cycle multiplier."""

    point: SpherePoint
    period: int
    multiplier: complex
    kind: str

    @property
    def abs_multiplier(self) -> float:
        return abs(self.multiplier)


@dataclass
class PostcriticalSet:
    """Forward orbits of the critical points, plus an optional backward tree."""

    depth: int
    forward: list[list[SpherePoint]]
    points: list[SpherePoint]
    backward_depth: int
    backward: list[SpherePoint]
    finite: bool


def orbit(m: RationalMap, p, n: int) -> list[SpherePoint]:
    """The forward orbit [z, f(z), ..., f^n(z)] (n+1 points)."""
    out = [as_point(p)]
    x, inv = _state_of(out[0])
    for _ in range(n):
        x, inv, _ = _chart_step_state(m, x, inv)
        out.append(_point_of(x, inv))
    return out


def classify_multiplier(mult: complex) -> str:
    """Stability class from |multiplier|.

    The parabolic-suspect band ||m| - 1| < 1e-6 subsumes numerically
    indifferent multipliers; CLASS_INDIFFERENT is kept in the vocabulary for
    callers but never produced by this function at double precision.
    """
    am = abs(mult)
    if am <= _SUPER_TOL:
        return CLASS_SUPERATTRACTING
    if abs(am - 1.0) < _PARABOLIC_TOL:
        return CLASS_PARABOLIC_SUSPECT
    if am < 1.0:
        return CLASS_ATTRACTING
    return CLASS_REPELLING


def multiplier(m: RationalMap, p, period: int) -> complex:
    """Multiplier of the cycle through p: the chart-chain derivative of f^period.

    Well-defined (chart-independent) when p is actually periodic with the
    given period; charts are matched between consecutive steps so cycles
    through infinity need no special casing.
    """
    x, inv = _state_of(as_point(p))
    acc = 1 + 0j
    for _ in range(period):
        x, inv, dw = _chart_step_state(m, x, inv)
        acc *= dw
    return acc


# ---------------------------------------------------------------------------
# Newton refinement onto periodic points

_NEWTON_MAX_ITER = 80


@njit(cache=True)
def _newton_fixed_affine(pn, pd, dpn, dpd, z0, period, tol, max_iter):
    """Newton for f^period(z) = z in plain affine arithmetic.

    Returns (z, ok); ok = False when the orbit blows up, crosses a pole, or
    Newton fails to settle.  Callers fall back to the chart-aware path then.
    """
    z = z0
    npn = len(pn)
    npd = len(pd)
    for _ in range(max_iter):
        w = z
        deriv = 1 + 0j
        ok = True
        for _step in range(period):
            pv = 0j
            for k in range(npn - 1, -1, -1):
                pv = pv * w + pn[k]
            qv = 0j
            for k in range(npd - 1, -1, -1):
                qv = qv * w + pd[k]
            if abs(qv) < 1e-250:
                ok = False
                break
            dpv = 0j
            for k in range(npn - 2, -1, -1):
                dpv = dpv * w + dpn[k]
            dqv = 0j
            for k in range(npd - 2, -1, -1):
                dqv = dqv * w + dpd[k]
            deriv *= (dpv * qv - pv * dqv) / (qv * qv)
            w = pv / qv
            if abs(w) > 1e8:
                ok = False
                break
        if not ok:
            return z, False
        g = w - z
        dg = deriv - 1.0
        if dg == 0:
            return z, False
        step = g / dg
        z = z - step
        if abs(step) < tol * (1.0 + abs(z)):
            return z, True
    return z, False


def newton_periodic(
    m: RationalMap, guess, period: int, tol: float = 1e-13, max_iter: int = _NEWTON_MAX_ITER
) -> SpherePoint | None:
    """Refine a guess onto a fixed point of f^period; None on failure.

    Works in the chart the guess lives in, so points at or near infinity
    refine cleanly; the orbit may cross charts in between.
    """
    x, inv = _state_of(as_point(guess))
    for _ in range(max_iter):
        xe, ie, deriv = x, inv, 1 + 0j
        for _step in range(period):
            xe, ie, dw = _chart_step_state(m, xe, ie)
            deriv *= dw
        if ie != inv:
            # express the return value in the starting chart
            if xe == 0:
                return None
            deriv = deriv * (-1.0 / (xe * xe))
            xe = 1.0 / xe
        g = xe - x
        dg = deriv - 1.0
        if dg == 0:
            return None
        step = g / dg
        x = x - step
        if abs(step) < tol * (1.0 + abs(x)):
            break
        if abs(x) > 2.0:
            x, inv = _state_of(_point_of(x, inv))
    else:
        return None
    refined = _point_of(x, inv)
    final = orbit(m, refined, period)[-1]
    if spherical_distance(final, refined) > 1e-10:
        return None
    return refined


def _minimal_period(m: RationalMap, p: SpherePoint, n: int, tol: float = DEDUP_TOL) -> int:
    orb = orbit(m, p, n)
    for q in range(1, n + 1):
        if n % q == 0 and spherical_distance(orb[q], p) < tol:
            return q
    return n


def dedupe_points(points: list[SpherePoint], tol: float, return_index: bool = False):
    """Keep the first of every cluster of points closer than tol.

    Bucketed on the sphere embedding so large sets (thousands of periodic
    points) stay linear instead of quadratic.  With return_index the
    positions of the kept points in the input list are returned instead.
    """
    kept: list[SpherePoint] = []
    kept_idx: list[int] = []
    buckets: dict[tuple[int, int, int], list[int]] = {}
    for pos, p in enumerate(points):
        e = embed(p)
        key = tuple(int(np.floor(c / (2.0 * tol))) for c in e)
        dup = False
        for dk in _NEIGHBOR_KEYS:
            cand = buckets.get((key[0] + dk[0], key[1] + dk[1], key[2] + dk[2]))
            if not cand:
                continue
            for idx in cand:
                if spherical_distance(p, kept[idx]) < tol:
                    dup = True
                    break
            if dup:
                break
        if not dup:
            buckets.setdefault(key, []).append(len(kept))
            kept.append(p)
            kept_idx.append(pos)
    return kept_idx if return_index else kept


_NEIGHBOR_KEYS = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)]


# ---------------------------------------------------------------------------
# fixed-point polynomial of f^n

def _compose_iterate(m: RationalMap, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient arrays (A, B) with f^n = A/B, rescaled to unit max modulus.

    Without the per-step rescaling the coefficients of degree-3 maps
    overflow doubles around n = 7.
    """
    base_p = np.zeros(m.degree + 1, dtype=np.complex128)
    base_p[: len(m.numer)] = m.numer
    base_q = np.zeros(m.degree + 1, dtype=np.complex128)
    base_q[: len(m.denom)] = m.denom
    a = base_p.copy()
    b = base_q.copy()
    for _ in range(n - 1):
        # powers of the current numerator/denominator up to the base degree
        apow = [np.array([1.0 + 0j])]
        bpow = [np.array([1.0 + 0j])]
        for _k in range(m.degree):
            apow.append(np.convolve(apow[-1], a))
            bpow.append(np.convolve(bpow[-1], b))
        deg_total = len(apow[-1])
        new_a = np.zeros(deg_total, dtype=np.complex128)
        new_b = np.zeros(deg_total, dtype=np.complex128)
        for k in range(m.degree + 1):
            term = np.convolve(apow[k], bpow[m.degree - k])
            new_a[: len(term)] += base_p[k] * term
            new_b[: len(term)] += base_q[k] * term
        scale = max(np.max(np.abs(new_a)), np.max(np.abs(new_b)))
        a = new_a / scale
        b = new_b / scale
    return a, b


def _fixed_point_polynomial(m: RationalMap, n: int) -> np.ndarray:
    a, b = _compose_iterate(m, n)
    zb = np.concatenate([[0.0 + 0j], b])
    size = max(len(a), len(zb))
    poly = np.zeros(size, dtype=np.complex128)
    poly[: len(a)] += a
    poly[: len(zb)] -= zb
    return poly


def _grid_seeds(resolution: int = 160) -> list[complex]:
    """Deterministic seed set covering both charts (|z| <= 1 and |z| >= 1)."""
    lin = np.linspace(-1.0, 1.0, resolution)
    seeds: list[complex] = []
    for re in lin:
        for im in lin:
            z = complex(re, im)
            seeds.append(z)
            if abs(z) > 1e-3:
                seeds.append(1.0 / z)
    return seeds


def _symbolic_seeds(m: RationalMap, n: int) -> list[complex] | None:
    """Roots of the fixed-point polynomial of f^n, or None if unusable.

    Repeated composition can drive the true coefficients of f^n below the
    double-precision floor (maps with poles near the action lose hundreds
    of orders of magnitude per level); such a polynomial no longer encodes
    the map, so both underflow and a failed root sweep mean: fall back.
    """
    poly = _fixed_point_polynomial(m, n)
    mags = np.abs(poly)
    nonzero = mags[mags > 0.0]
    if len(nonzero) and nonzero.min() < 1e-200 * nonzero.max():
        return None
    try:
        return [complex(r) for r in find_roots(poly).roots]
    except RootFindingError:
        return None


def periodic_points_from_seeds(
    m: RationalMap,
    n: int,
    seeds,
    dedup_tol: float = DEDUP_TOL,
) -> list[PeriodicPoint]:
    """Newton-refine fixed-point seeds of f^n into classified periodic points.

    Each seed is pushed onto a fixed point of f^n (affine fast path first,
    chart-aware retry second); successes are deduplicated and returned with
    minimal periods, multipliers and stability classes.  Completeness is
    the caller's concern: it depends entirely on the seed set.
    """
    pn = np.zeros(m.degree + 1, dtype=np.complex128)
    pn[: len(m.numer)] = m.numer
    pd = np.zeros(m.degree + 1, dtype=np.complex128)
    pd[: len(m.denom)] = m.denom
    dpn = (pn[1:] * np.arange(1, m.degree + 1)).astype(np.complex128)
    dpd = (pd[1:] * np.arange(1, m.degree + 1)).astype(np.complex128)

    refined: list[SpherePoint] = []
    for seed in seeds:
        z, ok = _newton_fixed_affine(pn, pd, dpn, dpd, complex(seed), n, 1e-13, _NEWTON_MAX_ITER)
        if ok:
            refined.append(SpherePoint(complex(z)))
        else:
            # orbit crossed a pole or left the affine range; retry chart-aware
            p = SpherePoint(complex(seed))
            cand = newton_periodic(m, p, n)
            if cand is not None:
                refined.append(cand)
            # at a degenerate (multiplier-1) root both Newton passes see a
            # vanishing derivative; keep the seed if its orbit already closes
            elif spherical_distance(orbit(m, p, n)[-1], p) < 1e-10:
                refined.append(p)
    # infinity is outside the affine polynomial; test it separately
    inf_back = orbit(m, INFINITY, n)[-1]
    if spherical_distance(inf_back, INFINITY) < 1e-6:
        cand = newton_periodic(m, INFINITY, n)
        if cand is not None:
            refined.append(cand)
        elif spherical_distance(inf_back, INFINITY) < 1e-10:
            refined.append(INFINITY)

    deduped = dedupe_points(refined, dedup_tol)

    result = []
    for p in deduped:
        q = _minimal_period(m, p, n, tol=dedup_tol)
        mult = multiplier(m, p, q)
        result.append(PeriodicPoint(point=p, period=q, multiplier=mult, kind=classify_multiplier(mult)))
    result.sort(key=_periodic_sort_key)
    return result


def periodic_points(
    m: RationalMap,
    n: int,
    n_max: int = 8,
    dedup_tol: float = DEDUP_TOL,
) -> list[PeriodicPoint]:
    """All fixed points of f^n with minimal periods, multipliers and classes.

    Points of minimal period strictly dividing n are included.  Below the
    symbolic degree threshold the fixed-point polynomial of f^n supplies one
    seed per root (complete); when that polynomial degenerates numerically,
    or above the threshold, a grid seeds Newton and the result may miss
    points.
    """
    if not 1 <= n <= n_max:
        raise ValueError(f"period {n} outside 1..{n_max}")
    count = m.degree**n + 1
    if count > PERIOD_POINT_LIMIT:
        raise ValueError(f"degree^n + 1 = {count} exceeds {PERIOD_POINT_LIMIT}")

    seeds = None
    if m.degree**n <= SYMBOLIC_DEGREE_LIMIT:
        seeds = _symbolic_seeds(m, n)
    if seeds is None:
        seeds = _grid_seeds()
    return periodic_points_from_seeds(m, n, seeds, dedup_tol=dedup_tol)


def _periodic_sort_key(pp: PeriodicPoint):
    p = pp.point
    if p.is_infinite:
        return (pp.period, 1, 0.0, 0.0)
    return (pp.period, 0, p.z.real, p.z.imag)


# ---------------------------------------------------------------------------
# postcritical sets

def postcritical(
    m: RationalMap,
    depth: int = 40,
    backward_depth: int = 0,
    cap: int = 100_000,
) -> PostcriticalSet:
    """Forward orbits of all critical points with cycle snapping.

    finite is True when every critical orbit entered a cycle (within
    CYCLE_SNAP_TOL) before the depth ran out, i.e. the map looks
    postcritically finite at this tolerance.
    """
    crits = critical_points(m)
    forward: list[list[SpherePoint]] = []
    all_cycled = True
    for c in crits:
        branch = [eval_map(m, c)]
        cycled = False
        while len(branch) < depth:
            nxt = eval_map(m, branch[-1])
            if any(spherical_distance(nxt, prev) < CYCLE_SNAP_TOL for prev in branch):
                cycled = True
                break
            branch.append(nxt)
        forward.append(branch)
        all_cycled = all_cycled and cycled
    points: list[SpherePoint] = []
    for branch in forward:
        for p in branch:
            if not any(spherical_distance(p, q) < CYCLE_SNAP_TOL for q in points):
                points.append(p)
    backward: list[SpherePoint] = []
    if backward_depth > 0:
        frontier = list(points)
        for _ in range(backward_depth):
            nxt_frontier: list[SpherePoint] = []
            for t in frontier:
                for p in preimages(m, t):
                    if len(backward) + len(nxt_frontier) >= cap:
                        break
                    nxt_frontier.append(p)
            backward.extend(nxt_frontier)
            frontier = nxt_frontier
            if len(backward) >= cap:
                break
    return PostcriticalSet(
        depth=depth,
        forward=forward,
        points=points,
        backward_depth=backward_depth,
        backward=backward,
        finite=all_cycled,
    )


# ---------------------------------------------------------------------------
# eventually periodic test

def eventually_periodic_test(
    m: RationalMap,
    p,
    tol: float = 1e-9,
    preperiod_max: int = 64,
    period_max: int = 64,
) -> tuple[int, int] | None:
    """Smallest (preperiod, period) with sigma(f^(l+q)(z), f^l(z)) < tol.

    Scans preperiods outward, shortest period first, and confirms each hit
    by refining f^l(z) onto an exact periodic point that must stay within
    10*tol.  Returns None when nothing within the horizon passes.
    """
    pts = orbit(m, p, preperiod_max + period_max)
    for ell in range(preperiod_max + 1):
        for q in range(1, period_max + 1):
            if spherical_distance(pts[ell + q], pts[ell]) < tol:
                refined = newton_periodic(m, pts[ell], q)
                if refined is not None and spherical_distance(refined, pts[ell]) < 10 * tol:
                    return ell, q
    return None


# ---------------------------------------------------------------------------
# export

def export_periodic_csv(points: list[PeriodicPoint], path) -> None:
    """CSV rows: period, re, im, |multiplier|, class (infinity as 'inf')."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "re", "im", "abs_multiplier", "class"])
        for pp in points:
            if pp.point.is_infinite:
                re_s, im_s = "inf", "inf"
            else:
                re_s = f"{pp.point.z.real:.17g}"
                im_s = f"{pp.point.z.imag:.17g}"
            w.writerow([pp.period, re_s, im_s, f"{abs(pp.multiplier):.17g}", pp.kind])
