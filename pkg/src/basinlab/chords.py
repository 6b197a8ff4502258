"""Chords: pairs of internal rays from two basins landing at a common
junction, plus the operations built on them.

Includes chord detection by landing proximity, multi-access queries,
isotopy-class tests rel a finite marked set (decided by winding parity after
rotating the sphere so the curve avoids infinity), chord lifting through the
map, the pullback-to-periodic construction, polyline Hausdorff distance, and
the periodic-angle boundary catalog.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .angles import Angle, angle_eventual_period, angle_step, periodic_angles
from .boettcher import BoettcherChart
from .dynamics import (
    PeriodicPoint,
    classify_multiplier,
    multiplier,
    newton_periodic,
)
from .errors import ConvergenceError, LiftError
from .rays import Ray, trace_ray
from .sphere import (
    RationalMap,
    SpherePoint,
    embed,
    eval_map,
    preimages,
    spherical_distance,
    unembed,
)

_POLE_CLEARANCE = 0.05


@dataclass
class Chord:
    """Two landed rays from distinct basins with a common landing point."""

    ray1: Ray
    ray2: Ray
    junction: SpherePoint


def _sphere_midpoint(p: SpherePoint, q: SpherePoint) -> SpherePoint:
    v = embed(p) + embed(q)
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        return p
    return unembed(v)


def make_chord(ray1: Ray, ray2: Ray, junction_tol: float) -> Chord:
    if not (ray1.landed and ray2.landed):
        raise ValueError("both rays of a chord must land")
    gap = spherical_distance(ray1.landing_point, ray2.landing_point)
    if gap >= junction_tol:
        raise ValueError(
            f"ray landings are {gap:.3e} apart, outside the junction tolerance"
        )
    return Chord(ray1, ray2, _sphere_midpoint(ray1.landing_point, ray2.landing_point))


def detect_chords(
    m: RationalMap,
    chart1: BoettcherChart,
    chart2: BoettcherChart,
    angle_set1,
    angle_set2,
    junction_tol: float = 1e-6,
    max_steps: int = 120,
    step_tol: float = 1e-9,
) -> list[Chord]:
    """Trace both angle sets and match landings greedily by distance."""
    set1 = sorted({a if isinstance(a, Angle) else Angle(a) for a in angle_set1})
    set2 = sorted({a if isinstance(a, Angle) else Angle(a) for a in angle_set2})
    rays1 = [trace_ray(m, chart1, a, max_steps, step_tol) for a in set1]
    rays2 = [trace_ray(m, chart2, a, max_steps, step_tol) for a in set2]
    pairs = []
    for i, r1 in enumerate(rays1):
        for j, r2 in enumerate(rays2):
            gap = spherical_distance(r1.landing_point, r2.landing_point)
            if gap < junction_tol:
                pairs.append((gap, i, j))
    pairs.sort()
    used1, used2 = set(), set()
    chords = []
    for gap, i, j in pairs:
        if i in used1 or j in used2:
            continue
        used1.add(i)
        used2.add(j)
        chords.append(make_chord(rays1[i], rays2[j], junction_tol))
    chords.sort(key=lambda c: c.ray1.angle.frac)
    return chords


def multi_access(
    m: RationalMap,
    chart: BoettcherChart,
    point: SpherePoint,
    angle_grid,
    tol: float = 1e-6,
    max_steps: int = 120,
    step_tol: float = 1e-9,
) -> list[Angle]:
    """Angles from the grid whose rays land within tol of the point."""
    hits = []
    grid = sorted({a if isinstance(a, Angle) else Angle(a) for a in angle_grid})
    for a in grid:
        ray = trace_ray(m, chart, a, max_steps, step_tol)
        if spherical_distance(ray.landing_point, point) < tol:
            hits.append(ray.angle)
    return hits


# ---------------------------------------------------------------------------
# isotopy classes rel a finite marked set


def chord_polyline(chord: Chord) -> list:
    """The chord as one open polyline from attractor 1 to attractor 2."""
    return (
        [chord.ray1.basin]
        + chord.ray1.polyline
        + [chord.junction]
        + chord.ray2.polyline[::-1]
        + [chord.ray2.basin]
    )


def _segment_distance(p: SpherePoint, a: SpherePoint, b: SpherePoint) -> float:
    """Distance from a point to the straight segment [a, b] in the embedding."""
    pv, av, bv = embed(p), embed(a), embed(b)
    ab = bv - av
    denom = float(ab @ ab)
    if denom < 1e-30:
        return float(np.linalg.norm(pv - av))
    t = float((pv - av) @ ab) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(pv - (av + t * ab)))


def _polyline_distance(p: SpherePoint, poly: list) -> float:
    return min(_segment_distance(p, a, b) for a, b in zip(poly, poly[1:]))


def _rotate_from_pole(pole: SpherePoint, p: SpherePoint) -> complex:
    """Coordinates after the sphere rotation sending the pole to infinity."""
    if pole.infinite:
        if p.infinite:
            raise ValueError("point at the pole")
        return p.z
    z0 = pole.z
    if p.infinite:
        return -z0.conjugate()
    den = z0 - p.z
    if abs(den) < 1e-15:
        raise ValueError("point at the pole")
    return (z0.conjugate() * p.z + 1.0) / den

_POLE_CANDIDATES = [
    np.array(v, dtype=float) / np.linalg.norm(v)
    for v in [
        (1, 1, 1), (-1, 1, 1), (1, -1, 1), (1, 1, -1),
        (-1, -1, 1), (-1, 1, -1), (1, -1, -1), (-1, -1, -1),
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
    ]
]


def _choose_pole(curve: list, marked: list) -> SpherePoint:
    """A deterministic sphere point well clear of the curve and marked set."""
    centroid = np.mean([embed(p) for p in curve], axis=0)
    candidates = []
    if np.linalg.norm(centroid) > 1e-9:
        candidates.append(unembed(-centroid))
    candidates.extend(unembed(v) for v in _POLE_CANDIDATES)
    edges = list(zip(curve, curve[1:] + curve[:1]))
    best, best_gap = None, -1.0
    for cand in candidates:
        gap = min(
            min(_segment_distance(cand, a, b) for a, b in edges),
            min((spherical_distance(cand, q) for q in marked), default=2.0),
        )
        if gap > _POLE_CLEARANCE:
            return cand
        if gap > best_gap:
            best, best_gap = cand, gap
    return best


def _even_odd_inside(vertices: list, p: complex) -> bool:
    """Even-odd crossing parity of a horizontal ray from p (closed polygon)."""
    inside = False
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i].real, vertices[i].imag
        x2, y2 = vertices[(i + 1) % n].real, vertices[(i + 1) % n].imag
        if (y1 > p.imag) != (y2 > p.imag):
            xint = x1 + (p.imag - y1) * (x2 - x1) / (y2 - y1)
            if xint > p.real:
                inside = not inside
    return inside


def same_isotopy_class(chordA: Chord, chordB: Chord, marked, tol: float = 1e-6) -> bool:
    """Whether the marked points all sit in one complementary component of the
    closed curve A followed by B reversed, decided by winding parity.

    Marked points within tol of either chord are rejected: parity would be
    meaningless there.  The attractor pair itself is excluded from the test.
    """
    for a, b in ((chordA, chordB), (chordB, chordA)):
        if (
            spherical_distance(a.ray1.basin, b.ray1.basin) > 1e-9
            or spherical_distance(a.ray2.basin, b.ray2.basin) > 1e-9
        ):
            raise ValueError("chords join different attractor pairs")
    attractors = (chordA.ray1.basin, chordA.ray2.basin)
    polyA = chord_polyline(chordA)
    polyB = chord_polyline(chordB)
    closed = polyA + polyB[::-1]
    points = []
    for q in marked:
        if min(spherical_distance(q, a) for a in attractors) < 1e-9:
            continue
        if _polyline_distance(q, polyA) < tol or _polyline_distance(q, polyB) < tol:
            raise ValueError("marked point lies on a chord within tolerance")
        points.append(q)
    if len(points) < 2:
        return True
    pole = _choose_pole(closed, points)
    verts = [_rotate_from_pole(pole, v) for v in closed]
    parities = {_even_odd_inside(verts, _rotate_from_pole(pole, q)) for q in points}
    return len(parities) == 1


# ---------------------------------------------------------------------------
# lifting and pullback


def lift_chord(
    m: RationalMap,
    chord: Chord,
    chart1: BoettcherChart,
    chart2: BoettcherChart,
    target_preimage: SpherePoint,
    tol: float = 1e-6,
    max_steps: int = 120,
    step_tol: float = 1e-9,
) -> Chord:
    """The unique chord over the given preimage of the junction.

    Candidate lifted angles are (t+j)/d1 and (t'+k)/d2; exactly one candidate
    per basin must land within tol of the target preimage.
    """
    if spherical_distance(eval_map(m, target_preimage), chord.junction) > max(
        tol, 1e-8
    ):
        raise LiftError("target does not map to the chord junction")
    lifted = []
    for chart, base in ((chart1, chord.ray1.angle), (chart2, chord.ray2.angle)):
        d = chart.local_degree
        hits = []
        for j in range(d):
            cand = Angle((base.frac + j) / d)
            ray = trace_ray(m, chart, cand, max_steps, step_tol)
            if spherical_distance(ray.landing_point, target_preimage) < tol:
                hits.append(ray)
        if not hits:
            raise LiftError(
                f"no lifted ray over angle {base} lands at the target preimage"
            )
        if len(hits) > 1:
            raise LiftError(
                f"{len(hits)} lifted rays over angle {base} land at the target; "
                "cannot choose"
            )
        assert angle_step(hits[0].angle, d) == base
        lifted.append(hits[0])
    return make_chord(lifted[0], lifted[1], 2.0 * tol)


def _preimage_targets(m: RationalMap, junction: SpherePoint, toward: SpherePoint) -> list:
    cands = preimages(m, junction)
    cands.sort(
        key=lambda c: (
            spherical_distance(c, toward),
            tuple(np.round(embed(c), 9)),
        )
    )
    return cands


def pullback_periodic(
    m: RationalMap,
    chord: Chord,
    chart1: BoettcherChart,
    chart2: BoettcherChart,
    Q: int,
    max_stages: int = 64,
    conv_tol: float = 1e-8,
    lift_tol: float = 1e-6,
    history: list | None = None,
):
    """Iterated Q-fold lifting of a chord along the backward orbit of its
    junction until the Hausdorff distance between stages stabilizes.

    Each lift targets the preimage nearest the junction's cycle predecessor
    (f^(Q-1-j) of the stage junction), falling back through the remaining
    preimages if no valid lift exists over the nearest; the backward orbit
    therefore shadows the junction's near-cycle and converges to the
    repelling cycle.  The limit junction is polished to an exact periodic
    point of period Q.  A caller-supplied history list receives the start
    chord and every accepted stage.
    """
    if Q < 1:
        raise ValueError("Q must be at least 1")
    current = chord
    if history is not None:
        history.append(current)
    gaps = []
    for _ in range(max_stages):
        stage = current
        shadow = [stage.junction]
        for _ in range(Q - 1):
            shadow.append(eval_map(m, shadow[-1]))
        for j in range(Q):
            pred = shadow[(Q - 1 - j) % Q]
            last_err = None
            lifted = None
            for target in _preimage_targets(m, stage.junction, pred):
                try:
                    lifted = lift_chord(
                        m, stage, chart1, chart2, target, lift_tol
                    )
                    break
                except LiftError as err:
                    last_err = err
            if lifted is None:
                raise LiftError(f"no liftable preimage at stage {len(gaps)}: {last_err}")
            stage = lifted
        gaps.append(hausdorff_distance(current, stage))
        current = stage
        if history is not None:
            history.append(current)
        if gaps[-1] < conv_tol:
            break
    else:
        raise ConvergenceError(
            f"pullback did not stabilize in {max_stages} stages; gaps {gaps}"
        )
    refined = newton_periodic(m, current.junction, Q)
    if refined is not None:
        current = Chord(current.ray1, current.ray2, refined)
    report = {
        "hausdorff_gaps": gaps,
        "stages": len(gaps),
        "junction_period": Q,
    }
    return current, report


def hausdorff_distance(chordA: Chord, chordB: Chord) -> float:
    """Symmetric polyline Hausdorff distance, point to segment, in the
    embedding metric."""
    pa, pb = chord_polyline(chordA), chord_polyline(chordB)
    d_ab = max(_polyline_distance(p, pb) for p in pa)
    d_ba = max(_polyline_distance(p, pa) for p in pb)
    return max(d_ab, d_ba)


# ---------------------------------------------------------------------------
# periodic boundary catalog


def boundary_periodic_catalog(
    m: RationalMap,
    chart1: BoettcherChart,
    chart2: BoettcherChart,
    denominator_bound: int,
    junction_tol: float = 1e-6,
    max_steps: int = 120,
    step_tol: float = 1e-9,
) -> list:
    """All chords over periodic angles of denominator d^q - 1, q up to the
    bound, with their junctions certified as periodic points.

    Rows are grouped by q; an angle of lower exact period reappears under
    every larger q, matching the period-q enumeration it belongs to.
    """
    rows = []
    for q in range(1, denominator_bound + 1):
        set1 = sorted(set(periodic_angles(chart1.local_degree, q)))
        set2 = sorted(set(periodic_angles(chart2.local_degree, q)))
        chords = detect_chords(
            m, chart1, chart2, set1, set2, junction_tol, max_steps, step_tol
        )
        for chord in chords:
            _, period = angle_eventual_period(chord.ray1.angle, chart1.local_degree)
            refined = newton_periodic(m, chord.junction, period)
            if refined is None:
                continue
            certified = Chord(chord.ray1, chord.ray2, refined)
            mult = multiplier(m, refined, period)
            rows.append(
                (
                    certified,
                    PeriodicPoint(refined, period, mult, classify_multiplier(mult)),
                )
            )
    return rows


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_catalog_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["angle1", "angle2", "junction_re", "junction_im", "period", "abs_multiplier"]
        )
        for chord, pp in rows:
            if pp.point.infinite:
                re, im = "inf", "0"
            else:
                re, im = _fmt(pp.point.z.real), _fmt(pp.point.z.imag)
            writer.writerow(
                [
                    str(chord.ray1.angle),
                    str(chord.ray2.angle),
                    re,
                    im,
                    pp.period,
                    _fmt(abs(pp.multiplier)),
                ]
            )
