"""Expansion certificates on sampled sets, near returns, and orbit closing.

mane_check tabulates, for each iterate count n, the minimum over a sample
set of the spherical norm of the n-fold derivative (a chain-rule product
along each orbit) and certifies the first n from which that minimum stays
above 1 for the whole tested range.  Before measuring anything it screens
the samples against critical points and parabolic-suspect cycles; claiming
expansion near either would be meaningless, so that is an error, not a
report.

distance_expanding_check tests the two-point form of the same property:
nearby sample pairs must be driven apart by a factor lambda after n_steps
iterations.  near_returns lists the near-coincidences within one orbit,
and closing_refine turns such a near-return into a certified periodic
point by Newton iteration on the return map.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .basins import BoundarySampleSet
from .dynamics import (
    CLASS_PARABOLIC_SUSPECT,
    PeriodicPoint,
    _minimal_period,
    classify_multiplier,
    multiplier,
    newton_periodic,
    orbit,
    periodic_points,
)
from .errors import ConvergenceError, ScreeningError
from .sphere import (
    RationalMap,
    SpherePoint,
    as_point,
    critical_points,
    embed,
    eval_map,
    spherical_derivative,
    spherical_distance,
)

SCREEN_TOL = 1e-6
SCREEN_PERIOD_BOUND = 4
RESIDUAL_TOL = 1e-10
DEFAULT_PAIR_BUDGET = 20_000


@dataclass
class ExpansionReport:
    """Per-n minima of the iterated spherical derivative over a sample set.

    per_n holds (n, min over samples of the chain-rule product along the
    n-orbit) for n = 1..n_max; certified_N is the least n such that the
    minimum exceeds 1 at every tested n on from there, None if the minimum
    at the horizon itself is <= 1.
    """

    samples: object
    per_n: list[tuple[int, float]]
    certified_N: int | None


@dataclass(frozen=True)
class ClosingResult:
    """A near-return refined into a certified periodic point."""

    seed: SpherePoint
    L: int
    refined: PeriodicPoint
    seed_distance: float


@dataclass(frozen=True)
class DistanceExpandingReport:
    """Outcome of the pairwise expansion test; fail is a result, not an error."""

    passed: bool
    lambda_: float
    eta: float
    n_steps: int
    pairs_checked: int
    worst_ratio: float | None
    worst_pair: tuple[SpherePoint, SpherePoint] | None


def _sample_points(samples) -> list[SpherePoint]:
    if isinstance(samples, BoundarySampleSet):
        return list(samples.points)
    return [as_point(p) for p in samples]


def _screen_samples(m: RationalMap, pts: list[SpherePoint]) -> None:
    """Reject samples near critical points or parabolic-suspect cycles."""
    hazards: list[tuple[SpherePoint, str]] = [
        (c, "critical point") for c in critical_points(m)
    ]
    for q in range(1, SCREEN_PERIOD_BOUND + 1):
        for pp in periodic_points(m, q):
            if pp.period == q and pp.kind == CLASS_PARABOLIC_SUSPECT:
                hazards.append((pp.point, f"parabolic-suspect period-{q} point"))
    for idx, p in enumerate(pts):
        for hazard, label in hazards:
            gap = spherical_distance(p, hazard)
            if gap < SCREEN_TOL:
                raise ScreeningError(
                    f"sample {idx} ({p}) lies {gap:.3e} from a {label} "
                    f"({hazard}); expansion statements exclude such points"
                )


def mane_check(m: RationalMap, samples, n_max: int) -> ExpansionReport:
    """Minimum spherical norm of the n-fold derivative over the samples.

    The norm at each n is the running product of spherical_derivative along
    the orbit, so per_n values are exact chain-rule products.  Samples may
    be a BoundarySampleSet or any iterable of points.
    """
    pts = _sample_points(samples)
    if not pts:
        raise ValueError("sample set is empty")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    _screen_samples(m, pts)
    mins = [float("inf")] * n_max
    for p in pts:
        x = p
        acc = 1.0
        for n in range(1, n_max + 1):
            acc *= spherical_derivative(m, x)
            x = eval_map(m, x)
            if acc < mins[n - 1]:
                mins[n - 1] = acc
    per_n = [(n, mins[n - 1]) for n in range(1, n_max + 1)]
    certified = None
    for n in range(n_max, 0, -1):
        if mins[n - 1] > 1.0:
            certified = n
        else:
            break
    return ExpansionReport(samples=samples, per_n=per_n, certified_N=certified)


def distance_expanding_check(
    m: RationalMap,
    samples,
    lambda_: float,
    eta: float,
    n_steps: int,
    pair_budget: int = DEFAULT_PAIR_BUDGET,
) -> DistanceExpandingReport:
    """Check sigma(f^n x, f^n y) >= lambda * sigma(x, y) on close sample pairs.

    Candidate pairs are those at spherical distance <= eta (found with a
    k-d tree on the R^3 embedding, where that distance is Euclidean),
    nearest first, up to pair_budget; coincident samples are skipped.  The
    worst pair is the one with the smallest image/source distance ratio.
    """
    if not lambda_ > 1.0:
        raise ValueError("lambda_ must exceed 1")
    if not eta > 0.0:
        raise ValueError("eta must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    pts = _sample_points(samples)
    pairs_checked = 0
    worst_ratio: float | None = None
    worst_pair: tuple[SpherePoint, SpherePoint] | None = None
    passed = True
    if len(pts) >= 2:
        emb = np.array([embed(p) for p in pts])
        raw = cKDTree(emb).query_pairs(eta, output_type="ndarray")
        if len(raw):
            dist = np.linalg.norm(emb[raw[:, 0]] - emb[raw[:, 1]], axis=1)
            keep = dist > 0.0
            raw, dist = raw[keep], dist[keep]
            order = np.lexsort((raw[:, 1], raw[:, 0], dist))[:pair_budget]
            ends: dict[int, SpherePoint] = {}
            for k in order:
                i, j = int(raw[k, 0]), int(raw[k, 1])
                for idx in (i, j):
                    if idx not in ends:
                        ends[idx] = orbit(m, pts[idx], n_steps)[-1]
                d0 = float(dist[k])
                d1 = spherical_distance(ends[i], ends[j])
                ratio = d1 / d0
                pairs_checked += 1
                if worst_ratio is None or ratio < worst_ratio:
                    worst_ratio = ratio
                    worst_pair = (pts[i], pts[j])
                if d1 < lambda_ * d0:
                    passed = False
    return DistanceExpandingReport(
        passed=passed,
        lambda_=lambda_,
        eta=eta,
        n_steps=n_steps,
        pairs_checked=pairs_checked,
        worst_ratio=worst_ratio,
        worst_pair=worst_pair,
    )


def near_returns(
    m: RationalMap, z, horizon: int, alpha: float
) -> list[tuple[int, int]]:
    """All index pairs Q < P <= horizon with sigma(f^Q z, f^P z) <= alpha.

    Sorted by the distance of the near-coincidence, ties by (Q, P); an
    empty list is a valid outcome for a poorly chosen start.
    """
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    orb = orbit(m, as_point(z), horizon)
    found: list[tuple[float, int, int]] = []
    for q in range(horizon):
        for p in range(q + 1, horizon + 1):
            d = spherical_distance(orb[q], orb[p])
            if d <= alpha:
                found.append((d, q, p))
    found.sort()
    return [(q, p) for _, q, p in found]


def closing_refine(m: RationalMap, seed, L: int) -> ClosingResult:
    """Refine a near-return seed into a certified fixed point of f^L.

    Newton iteration on the return map (chain-rule derivative, chart-aware
    so points near infinity refine cleanly); the result is certified at
    residual < 1e-10, carries its minimal period, multiplier and class, and
    reports how far the seed moved.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    start = as_point(seed)
    refined = newton_periodic(m, start, L)
    if refined is None:
        raise ConvergenceError(
            f"Newton on the L={L} return map did not converge from {start}"
        )
    residual = spherical_distance(orbit(m, refined, L)[-1], refined)
    if residual > RESIDUAL_TOL:
        raise ConvergenceError(
            f"refined point misses the residual bound: {residual:.3e}"
        )
    period = _minimal_period(m, refined, L)
    mult = multiplier(m, refined, period)
    pp = PeriodicPoint(refined, period, mult, classify_multiplier(mult))
    return ClosingResult(
        seed=start,
        L=L,
        refined=pp,
        seed_distance=spherical_distance(start, refined),
    )


# ---------------------------------------------------------------------------
# exports

def export_expansion_json(report: ExpansionReport, path) -> None:
    """JSON {per_n: [[n, min], ...], certified_N}."""
    payload = {
        "per_n": [[n, value] for n, value in report.per_n],
        "certified_N": report.certified_N,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _point_parts(p: SpherePoint) -> tuple[str, str]:
    if p.is_infinite:
        return "inf", "inf"
    return f"{p.z.real:.17g}", f"{p.z.imag:.17g}"


def export_closing_csv(results: list[ClosingResult], path) -> None:
    """CSV rows: seed, L, refined point, period, |multiplier|, class, distance."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "seed_re",
                "seed_im",
                "L",
                "point_re",
                "point_im",
                "period",
                "abs_multiplier",
                "class",
                "seed_distance",
            ]
        )
        for r in results:
            seed_re, seed_im = _point_parts(r.seed)
            pt_re, pt_im = _point_parts(r.refined.point)
            w.writerow(
                [
                    seed_re,
                    seed_im,
                    r.L,
                    pt_re,
                    pt_im,
                    r.refined.period,
                    f"{abs(r.refined.multiplier):.17g}",
                    r.refined.kind,
                    f"{r.seed_distance:.17g}",
                ]
            )
