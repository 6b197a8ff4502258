"""A circle-preserving degree-3 family: lifts, rotation numbers, locking.

The family rho * z^2 (z - 3) / (1 - 3z) with |rho| = 1 maps the unit circle
to itself (|z - 3| = |1 - 3z| on |z| = 1); 0 and infinity are fixed critical
points of local degree 2, and z = 1 is a critical point of local degree 3
sitting on the circle, so the restriction to the circle is a winding-1 map
with a cubic flat spot, and its rotation number moves monotonically with
arg(rho).  CircleMapLift realizes the continuous lift of that restriction,
rotation_number estimates the rotation number by a Birkhoff average with a
windowed error bound, solve_rho inverts theta -> rho by bisection, and
verify_no_circle_periodics scans low periods for periodic points left on
the circle (none when the rotation number is irrational).
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import (
    PeriodicPoint,
    dedupe_points,
    periodic_points,
    periodic_points_from_seeds,
)
from .errors import ConvergenceError, LiftError, MapConstructionError
from .sphere import RationalMap

UNIT_MODULUS_TOL = 1e-12
CIRCLE_SAMPLE_TOL = 1e-12
LIFT_RESOLUTION = 1e-4
MIN_ROTATION_ITER = 1000
MIN_SOLVE_TOL = 1e-7
_TWO_PI = 2.0 * math.pi


def _coerce_rho(rho) -> complex:
    r = complex(rho)
    if abs(abs(r) - 1.0) > UNIT_MODULUS_TOL:
        raise MapConstructionError(
            f"rho must lie on the unit circle; |rho| = {abs(r)!r}"
        )
    return r


def make_f_theta(rho) -> RationalMap:
    """The map rho * z^2 (z - 3) / (1 - 3z) for a unit-modulus rho."""
    r = _coerce_rho(rho)
    return RationalMap([0.0, 0.0, -3.0 * r, r], [1.0, -3.0])


@dataclass(frozen=True)
class RotationEstimate:
    """Birkhoff rotation-number estimate with an observed error bound.

    theta_hat is the mean lift displacement over the orbit, in [0, 1);
    error_bound is the max-min spread of the partial estimates over the
    second half of the orbit.
    """

    theta_hat: float
    iterations: int
    error_bound: float


class CircleMapLift:
    """Continuous real lift of the family's circle restriction.

    Built from a table of unwrapped angles at fixed resolution; evaluation
    computes the exact image angle and uses the table only to pick the
    continuous branch, so lift(s + 1) = lift(s) + 1 holds exactly.
    """

    def __init__(self, rho, resolution: float = LIFT_RESOLUTION):
        self.rho = _coerce_rho(rho)
        self.map = make_f_theta(self.rho)
        n = max(2, int(round(1.0 / resolution)))
        s = np.arange(n + 1) / n
        z = np.exp(2j * math.pi * s)
        w = self.rho * z * z * (z - 3.0) / (1.0 - 3.0 * z)
        drift = np.max(np.abs(np.abs(w) - 1.0))
        if drift > CIRCLE_SAMPLE_TOL:
            raise LiftError(f"restriction leaves the circle by {drift:.3e}")
        raw = np.mod(np.angle(w) / _TWO_PI, 1.0)
        shifts = np.concatenate(([0.0], np.cumsum(-np.round(np.diff(raw)))))
        table = raw + shifts
        jump = np.max(np.abs(np.diff(table)))
        if jump > 0.5 - 1e-9:
            raise LiftError(
                f"branch ambiguity: adjacent lift samples jump by {jump:.3f}; "
                f"increase the table resolution"
            )
        winding = table[-1] - table[0]
        if abs(winding - round(winding)) > 1e-9 or round(winding) != 1:
            raise LiftError(f"circle restriction winds {winding:.6f} times, not once")
        self.resolution = 1.0 / n
        self._segments = n
        self._table = table

    def __call__(self, s: float) -> float:
        base = math.floor(s)
        frac = s - base
        z = cmath.exp(2j * math.pi * frac)
        w = self.rho * z * z * (z - 3.0) / (1.0 - 3.0 * z)
        raw = (math.atan2(w.imag, w.real) / _TWO_PI) % 1.0
        pos = frac * self._segments
        j = min(int(pos), self._segments - 1)
        t = pos - j
        predicted = self._table[j] * (1.0 - t) + self._table[j + 1] * t
        # integer part added last: lift(s + 1) == lift(s) + 1.0 bit for bit
        return raw + math.floor(predicted - raw + 0.5) + base


@njit(cache=True)
def _lift_orbit(rho, table, segments, n, s0):
    s = s0
    half = n // 2
    est_min = 1e300
    est_max = -1e300
    for k in range(1, n + 1):
        base = math.floor(s)
        frac = s - base
        ang = 2.0 * math.pi * frac
        z = complex(math.cos(ang), math.sin(ang))
        w = rho * z * z * (z - 3.0) / (1.0 - 3.0 * z)
        raw = (math.atan2(w.imag, w.real) / (2.0 * math.pi)) % 1.0
        pos = frac * segments
        j = int(pos)
        if j > segments - 1:
            j = segments - 1
        t = pos - j
        predicted = table[j] * (1.0 - t) + table[j + 1] * t
        s = raw + math.floor(predicted - raw + 0.5) + base
        if k >= half:
            est = (s - s0) / k
            if est < est_min:
                est_min = est
            if est > est_max:
                est_max = est
    return s, est_min, est_max


def _displacement(lift: CircleMapLift, n: int, s0: float):
    s_end, est_min, est_max = _lift_orbit(
        lift.rho, lift._table, lift._segments, n, float(s0)
    )
    return (s_end - s0) / n, est_max - est_min


def rotation_number(rho, n: int = 10_000, s0: float = 0.0) -> RotationEstimate:
    """Rotation number of the circle restriction by lift-orbit averaging."""
    if n < MIN_ROTATION_ITER:
        raise ValueError(f"need n >= {MIN_ROTATION_ITER} iterations, got {n}")
    lift = CircleMapLift(rho)
    est, spread = _displacement(lift, n, s0)
    # orbits attracted to a circle fixed point can drift slightly negative
    theta = min(max(est, 0.0), math.nextafter(1.0, 0.0))
    return RotationEstimate(theta_hat=theta, iterations=n, error_bound=spread)


@dataclass(frozen=True)
class RhoSolveReport:
    """Bisection record for solve_rho: representative, arc, locking flag."""

    rho: complex
    theta_hat: float
    error_bound: float
    bracket: tuple[float, float]
    probes: int
    plateau: bool


def solve_rho(theta_target: float, tol: float, full: bool = False):
    """Find a unit rho whose rotation number matches theta_target within tol.

    Bisection on arg(rho)/2pi over [0, 1], using that the rotation number
    is monotone in the argument with value 0 at rho = 1 and 1 after a full
    turn.  Mode-locked (plateau) targets are still matched; the returned
    report flags them by probing the flatness of the rotation number on
    either side of the solution.  With full=True returns (rho, report).
    """
    if tol < MIN_SOLVE_TOL:
        raise ValueError(f"tol must be at least {MIN_SOLVE_TOL}")
    theta = float(theta_target) % 1.0
    n_probe = min(2_000_000, max(100_000, int(round(20.0 / tol))))
    s0 = 0.1

    def probe(t: float) -> tuple[float, float]:
        lift = CircleMapLift(cmath.exp(2j * math.pi * t))
        est, spread = _displacement(lift, n_probe, s0)
        return min(max(est, 0.0), 1.0), spread

    lo, hi = 0.0, 1.0
    probes = 0
    if theta == 0.0:
        mid, est, spread = 0.0, 0.0, 0.0
    else:
        mid = est = spread = None
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            est, spread = probe(mid)
            probes += 1
            if abs(est - theta) < tol:
                break
            if est < theta:
                lo = mid
            else:
                hi = mid
        else:
            mid = None
        if mid is None or abs(est - theta) >= tol:
            raise ConvergenceError(
                f"rotation number did not reach {theta} within {tol}; "
                f"bracketing arc arg/2pi in [{lo:.9f}, {hi:.9f}], "
                f"last estimate {est}"
            )
    rho = cmath.exp(2j * math.pi * mid)
    if not full:
        return rho
    delta = 1e-3
    flat = 0
    for side in (mid - delta, mid + delta):
        side_est, _ = probe(side % 1.0)
        probes += 1
        if abs(side_est - theta) < max(tol, 4.0 / n_probe):
            flat += 1
    report = RhoSolveReport(
        rho=rho,
        theta_hat=est,
        error_bound=spread,
        bracket=(lo, hi),
        probes=probes,
        plateau=flat == 2,
    )
    return rho, report


CIRCLE_SEED_COUNT = 512


def verify_no_circle_periodics(
    rho, period_max: int = 8, tol: float = 1e-6
) -> list[PeriodicPoint]:
    """Periodic points of periods <= period_max lying on the unit circle.

    Scans the full periodic-point catalog for each period and, because the
    relevant points sit on the circle, additionally refines a dense ring of
    circle seeds so near-circle cycles cannot slip through a coarse seed
    grid.  Empty when the circle restriction rotates irrationally; a
    nonempty report is the finding, not an error.
    """
    m = make_f_theta(_coerce_rho(rho))
    ring = [cmath.exp(2j * math.pi * k / CIRCLE_SEED_COUNT) for k in range(CIRCLE_SEED_COUNT)]
    candidates: list[PeriodicPoint] = []
    for n in range(1, period_max + 1):
        found = list(periodic_points(m, n, n_max=max(period_max, 8)))
        found.extend(periodic_points_from_seeds(m, n, ring))
        for pp in found:
            if pp.period != n or pp.point.is_infinite:
                continue
            if abs(abs(pp.point.z) - 1.0) < tol:
                candidates.append(pp)
    candidates.sort(key=lambda pp: (pp.period, pp.point.z.real, pp.point.z.imag))
    keep = dedupe_points([pp.point for pp in candidates], 1e-9, return_index=True)
    return [candidates[i] for i in keep]


def export_ftheta_json(rho, estimate: RotationEstimate, findings, path) -> None:
    """JSON {rho, theta_hat, error_bound, periodic_findings}."""
    r = complex(rho)
    payload = {
        "rho": [r.real, r.imag],
        "theta_hat": estimate.theta_hat,
        "error_bound": estimate.error_bound,
        "periodic_findings": [
            {
                "point": [pp.point.z.real, pp.point.z.imag],
                "period": pp.period,
                "abs_multiplier": abs(pp.multiplier),
            }
            for pp in findings
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
