"""Internal rays: outward continuation from a local coordinate, landing
detection, and landing-point refinement.

A ray at angle t is extended by pulling back the ray at angle d*t: the new
point solves f(z) = previous point of the neighbor ray, with the branch
chosen as the preimage nearest the ray's own tail.  All rays over the
forward orbit of t are therefore traced together in lockstep; since t is
rational the orbit is finite.  Branch ambiguity (a competing preimage within
twice the chosen one's distance) aborts the trace rather than guessing,
because it signals the continuation is passing near a critical value.
"""

import json
from dataclasses import dataclass

import numpy as np

from .angles import Angle, angle_eventual_period, angle_orbit
from .boettcher import BoettcherChart
from .dynamics import newton_periodic
from .errors import BranchAmbiguityError, ConvergenceError
from .sphere import (
    RationalMap,
    SpherePoint,
    embed,
    eval_map,
    preimages,
    spherical_distance,
    unembed,
)

_DOMINANCE_MARGIN = 2.0
_LANDED_STREAK = 3


@dataclass
class Ray:
    """One internal ray: polyline from near the attractor outward."""

    basin: SpherePoint
    angle: Angle
    polyline: list
    landed: bool
    landing_point: SpherePoint | None


def _extrapolate(prev: SpherePoint, last: SpherePoint) -> SpherePoint:
    """Linear continuation of the last step in the sphere embedding."""
    v = 2.0 * embed(last) - embed(prev)
    if np.linalg.norm(v) < 1e-9:
        return last
    return unembed(v)


def _branch_preimage(m: RationalMap, target: SpherePoint, predictor: SpherePoint) -> SpherePoint:
    cands = sorted(
        preimages(m, target), key=lambda c: spherical_distance(c, predictor)
    )
    best = spherical_distance(cands[0], predictor)
    if len(cands) > 1:
        runner = spherical_distance(cands[1], predictor)
        if runner < _DOMINANCE_MARGIN * best:
            raise BranchAmbiguityError(
                f"preimage branches at distances {best:.3e} and {runner:.3e} "
                "from the continuation point; passing too near a critical value"
            )
    return cands[0]


def _refine_landing(
    m: RationalMap, chart: BoettcherChart, t: Angle, last: SpherePoint, gap: float
):
    """Newton-polish the raw landing point onto the eventually periodic point
    the rational angle promises: forward-refine onto the cycle, then pull the
    refined point back along the recorded branch."""
    ell, q = angle_eventual_period(t, chart.local_degree)
    forward = [last]
    for _ in range(ell):
        forward.append(eval_map(m, forward[-1]))
    refined = newton_periodic(m, forward[-1], q)
    if refined is None:
        return None
    for j in range(ell - 1, -1, -1):
        cands = preimages(m, refined)
        refined = min(cands, key=lambda c: spherical_distance(c, forward[j]))
    # rays landing through a pole keep only half their digits in the raw
    # tail, so allow the polish to move up to 1e-3
    if spherical_distance(refined, last) > max(1e-3, 100.0 * gap):
        return None
    return refined


def trace_ray(
    m: RationalMap,
    chart: BoettcherChart,
    t,
    max_steps: int = 120,
    step_tol: float = 1e-9,
) -> Ray:
    """Trace the internal ray at rational angle t out of the chart's basin.

    Landing is declared after three consecutive steps shorter than step_tol;
    the landing point is then refined onto an exact (pre)periodic point.
    """
    t = t if isinstance(t, Angle) else Angle.parse(t) if isinstance(t, str) else Angle(t)
    d = chart.local_degree
    angles = angle_orbit(t, d)
    preperiod, _ = angle_eventual_period(t, d)
    k = len(angles)

    polylines = [[chart.radius_point(float(a))] for a in angles]
    streaks = [0] * k
    landed = [False] * k
    r = chart.reference_radius
    for step in range(max_steps):
        if all(landed):
            break
        r = r ** (1.0 / d)
        tails = [p[-1] for p in polylines]
        for i in range(k):
            if landed[i]:
                continue
            nxt = i + 1 if i + 1 < k else preperiod
            # predict the next position before choosing among preimages: the
            # local coordinate one radius step out on the first step, linear
            # extrapolation of the traced tail afterwards
            if step == 0:
                predictor = chart.radius_point(float(angles[i]), r)
            else:
                predictor = _extrapolate(polylines[i][-2], tails[i])
            new = _branch_preimage(m, tails[nxt], predictor)
            gap = spherical_distance(new, tails[i])
            polylines[i].append(new)
            streaks[i] = streaks[i] + 1 if gap < step_tol else 0
            if streaks[i] >= _LANDED_STREAK:
                landed[i] = True
    if not landed[0]:
        raise ConvergenceError(
            f"ray at angle {t} did not land within {max_steps} steps"
        )

    last = polylines[0][-1]
    gap = spherical_distance(last, polylines[0][-2])
    refined = _refine_landing(m, chart, t, last, gap)
    return Ray(
        basin=chart.attractor,
        angle=t,
        polyline=polylines[0],
        landed=True,
        landing_point=refined if refined is not None else last,
    )


def trace_rays(m, chart, angles, max_steps: int = 120, step_tol: float = 1e-9):
    return [trace_ray(m, chart, a, max_steps, step_tol) for a in angles]


def _json_point(p: SpherePoint):
    if p.infinite:
        return "inf"
    return [p.z.real, p.z.imag]


def ray_record(ray: Ray) -> dict:
    return {
        "basin": _json_point(ray.basin),
        "angle": str(ray.angle),
        "polyline": [_json_point(p) for p in ray.polyline],
        "landed": ray.landed,
        "landing": _json_point(ray.landing_point) if ray.landing_point else None,
    }


def export_rays_json(rays, path) -> None:
    with open(path, "w") as fh:
        json.dump([ray_record(r) for r in rays], fh, indent=1, sort_keys=True)
        fh.write("\n")
