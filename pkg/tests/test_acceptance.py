"""End-to-end checks exercising every public layer at fixed tolerances.

Each test drives one full pipeline, times itself against a stated budget,
and emits a single verdict line directly to the terminal.
"""

import cmath
import math
import time
from fractions import Fraction

import numpy as np
from scipy import ndimage

from basinlab.basins import boundary_intersection, classify
from basinlab.boettcher import build_chart
from basinlab.chords import (
    Angle,
    Chord,
    angle_eventual_period,
    angle_step,
    boundary_periodic_catalog,
    chord_polyline,
    hausdorff_distance,
    lift_chord,
    make_chord,
    pullback_periodic,
    same_isotopy_class,
)
from basinlab.circle_family import (
    make_f_theta,
    rotation_number,
    solve_rho,
    verify_no_circle_periodics,
)
from basinlab.dynamics import eventually_periodic_test
from basinlab.errors import BranchAmbiguityError, ConvergenceError, LiftError
from basinlab.expansion import closing_refine, mane_check
from basinlab.maps import GOLDEN_MEAN, load_builtin
from basinlab.rays import Ray, trace_ray
from basinlab.roots import find_roots
from basinlab.sphere import (
    INFINITY,
    RationalMap,
    as_point,
    critical_points,
    eval_map,
    preimages,
    spherical_derivative,
    spherical_distance,
)

ALPHA = (1.0 - math.sqrt(5.0)) / 2.0


def timed(name, budget):
    """Run the test body against a wall-clock budget and print one verdict.

    capsys.disabled() lifts the capture layers so the verdict reaches the
    terminal even while the suite is running.
    """

    def deco(fn):
        def wrapper(capsys):
            start = time.perf_counter()
            try:
                fn()
            except BaseException:
                elapsed = time.perf_counter() - start
                with capsys.disabled():
                    print(f"FAIL {name} ({elapsed:.1f}s)", flush=True)
                raise
            elapsed = time.perf_counter() - start
            if elapsed >= budget:
                with capsys.disabled():
                    print(
                        f"FAIL {name} ({elapsed:.1f}s over the {budget:.0f}s budget)",
                        flush=True,
                    )
                raise AssertionError(f"{name} took {elapsed:.1f}s, budget {budget:.0f}s")
            with capsys.disabled():
                print(f"PASS {name} ({elapsed:.1f}s < {budget:.0f}s)", flush=True)

        wrapper.__name__ = fn.__name__
        wrapper.__doc__ = fn.__doc__
        return wrapper

    return deco


def _two_adic_split(q):
    """q = 2**a * odd; returns (a, odd)."""
    a = 0
    while q % 2 == 0:
        q //= 2
        a += 1
    return a, q


def _multiplicative_order(base, mod):
    if mod == 1:
        return 1
    k, acc = 1, base % mod
    while acc != 1:
        acc = acc * base % mod
        k += 1
    return k


@timed("squaring-map pipeline", 10.0)
def test_squaring_map_pipeline():
    bundle = load_builtin("z2")
    m = bundle.map
    inner = build_chart(m, bundle.attractors[0], 2)
    outer = build_chart(m, bundle.attractors[1], 2)

    # internal rays at sevenths land on the matching seventh roots of unity
    for k in range(7):
        ray = trace_ray(m, inner, Angle.of(k, 7))
        root = cmath.exp(2j * math.pi * k / 7)
        assert ray.landed
        assert abs(ray.landing_point.z - root) < 1e-9

    rows = boundary_periodic_catalog(m, inner, outer, 3)
    assert len(rows) == 11

    # eventual angle periods against the multiplicative-order oracle
    for q in range(1, 64):
        for p in range(q):
            frac = Fraction(p, q)
            if frac.denominator != q:
                continue
            preperiod, odd = _two_adic_split(q)
            expected = (preperiod, _multiplicative_order(2, odd))
            assert angle_eventual_period(Angle(frac), 2) == expected


@timed("period-two basin pair", 60.0)
def test_period_two_basin_pair():
    bundle = load_builtin("basilica2")
    m = bundle.map
    atlas = classify(m, bundle.attractors, (-2.0, 2.0, -2.0, 2.0), 512, 256)

    samples = boundary_intersection(m, atlas, 0, 1, 1e-8)
    assert samples.points
    for p in samples.points:
        assert abs(p.z - ALPHA) < 1e-6

    # the shared boundary point is a fixed point of the underlying quadratic
    base = RationalMap([-1.0, 0.0, 1.0], [1.0])
    result = closing_refine(base, samples.points[0].z, 1)
    refined = result.refined
    assert spherical_distance(eval_map(base, refined.point), refined.point) < 1e-10
    assert abs(refined.multiplier - (1.0 - math.sqrt(5.0))) < 1e-6

    chart0 = build_chart(m, bundle.attractors[0], 2, atlas)
    chart1 = build_chart(m, bundle.attractors[1], 2, atlas)
    ray0 = trace_ray(m, chart0, Angle.of(0))
    ray1 = trace_ray(m, chart1, Angle.of(0))
    chord = make_chord(ray0, ray1, 1e-6)
    final, report = pullback_periodic(
        m, chord, chart0, chart1, 1, max_stages=4, conv_tol=1e-8
    )
    assert report["stages"] <= 2
    assert report["hausdorff_gaps"][-1] < 1e-8
    assert abs(final.junction.z - ALPHA) < 1e-6


@timed("newton cubic basins", 300.0)
def test_newton_cubic_basins():
    bundle = load_builtin("newton-cubic")
    m = bundle.map
    atlas = classify(m, bundle.attractors, (-2.0, 2.0, -2.0, 2.0), 1024, 256)
    charts = [build_chart(m, bundle.attractors[i], 2, atlas) for i in range(3)]

    # every root channel opens toward infinity
    for chart in charts:
        ray = trace_ray(m, chart, Angle.of(0))
        assert ray.landed
        assert spherical_distance(ray.landing_point, INFINITY) < 1e-6

    for i, j in ((0, 1), (0, 2), (1, 2)):
        samples = boundary_intersection(m, atlas, i, j, 1e-8)
        assert samples.points
        report = mane_check(m, samples, 20)
        assert report.certified_N is not None
        assert report.certified_N <= 20

    result = closing_refine(m, 10.0, 1)
    assert spherical_distance(result.refined.point, INFINITY) < 1e-6
    assert abs(result.refined.multiplier - 1.5) < 1e-6

    # a non-invariant chord pulls back onto the invariant one through infinity
    half0 = trace_ray(m, charts[0], Angle.of(1, 2))
    half1 = trace_ray(m, charts[1], Angle.of(1, 2))
    chord = make_chord(half0, half1, 1e-6)
    assert abs(chord.junction.z) < 1e-6
    final, report = pullback_periodic(m, chord, charts[0], charts[1], 1, conv_tol=1e-6)
    assert report["hausdorff_gaps"][-1] < 1e-6
    assert spherical_distance(final.junction, INFINITY) < 1e-6


@timed("shared landing points", 10.0)
def test_shared_landing_points():
    bundle = load_builtin("z2")
    m = bundle.map
    odd_qs = [3, 5, 7, 9, 11, 13, 15, 17, 21, 31, 33, 63]
    even_qs = [6, 10, 12, 14, 20, 24, 28, 40, 56]

    checked = 0
    for q in odd_qs + even_qs:
        for p in range(1, q):
            frac = Fraction(p, q)
            if frac.denominator != q:
                continue
            first = Angle(frac)
            second = Angle(1 - frac)
            assert first != second

            # two distinct rays land at this circle point; the orbit data of
            # the point must agree with the angle arithmetic of both rays
            z = as_point(cmath.exp(2j * math.pi * p / q))
            orbit = eventually_periodic_test(m, z)
            assert orbit is not None
            assert orbit == angle_eventual_period(first, 2)
            assert orbit == angle_eventual_period(second, 2)
            checked += 1
    assert checked > 200


@timed("circle rotation family", 120.0)
def test_circle_rotation_family():
    rho = solve_rho(GOLDEN_MEAN, 5e-7)
    estimate = rotation_number(rho, 4_000_000, 0.1)
    assert abs(estimate.theta_hat - GOLDEN_MEAN) < 1e-6

    m = make_f_theta(rho)
    assert spherical_derivative(m, 1.0) < 1e-10
    near_one = [
        c for c in critical_points(m) if not c.is_infinite and abs(c.z - 1.0) < 1e-6
    ]
    assert len(near_one) == 2

    assert verify_no_circle_periodics(rho, 8, 1e-6) == []

    # the degenerate parameter does produce circle periodics, so the probe
    # machinery is demonstrably able to find them when they exist
    found = verify_no_circle_periodics(1.0, 1, 1e-6)
    assert any(abs(f.point.z - 1.0) < 1e-6 for f in found)


def _arc_chord(amp, leg_points=40):
    """Synthetic chord joining -1 and 1 along y = amp * (1 - x*x)."""

    def leg(x0, x1):
        xs = np.linspace(x0, x1, leg_points + 2)[1:-1]
        return [as_point(complex(x, amp * (1.0 - x * x))) for x in xs]

    junction = as_point(complex(0.0, amp))
    ray1 = Ray(
        basin=as_point(-1.0),
        angle=Angle.of(0),
        polyline=leg(-1.0, 0.0),
        landed=True,
        landing_point=junction,
    )
    ray2 = Ray(
        basin=as_point(1.0),
        angle=Angle.of(0),
        polyline=leg(1.0, 0.0),
        landed=True,
        landing_point=junction,
    )
    return Chord(ray1=ray1, ray2=ray2, junction=junction)


def _raster_same_component(chord_a, chord_b, marked, res=700):
    """Flood-fill comparator: label the complement of the rasterized closed
    curve and ask whether every marked point falls in one component."""
    closed = chord_polyline(chord_a) + chord_polyline(chord_b)[::-1]
    pts = np.array([[v.z.real, v.z.imag] for v in closed])
    lo = pts.min(axis=0) - 0.3
    hi = pts.max(axis=0) + 0.3
    grid = np.zeros((res, res), dtype=bool)

    def cell(xy):
        c = np.clip(((xy - lo) / (hi - lo) * (res - 1)).astype(int), 0, res - 1)
        return c[1], c[0]

    step = (hi - lo).max() / res
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        n = max(2, int(np.linalg.norm(b - a) / (step / 2.0)) + 1)
        for s in np.linspace(0.0, 1.0, n):
            grid[cell(a + s * (b - a))] = True
    labels, _ = ndimage.label(~grid)
    components = {labels[cell(np.array([q.z.real, q.z.imag]))] for q in marked}
    assert 0 not in components
    return len(components) == 1


@timed("chord lifting and isotopy", 60.0)
def test_chord_lifting_and_isotopy():
    rng = np.random.default_rng(271828)

    # squaring map: random rational chords, lifted once over a random preimage
    bundle = load_builtin("z2")
    m = bundle.map
    inner = build_chart(m, bundle.attractors[0], 2)
    outer = build_chart(m, bundle.attractors[1], 2)
    for _ in range(130):
        q = int(rng.choice([3, 5, 7, 9, 11, 13, 15, 17]))
        p = int(rng.integers(1, q))
        t = Angle(Fraction(p, q))
        s = Angle(1 - Fraction(p, q))
        chord = make_chord(
            trace_ray(m, inner, t), trace_ray(m, outer, s), 1e-6
        )
        targets = preimages(m, chord.junction)
        lifted = lift_chord(m, chord, inner, outer, targets[int(rng.integers(len(targets)))])
        assert angle_step(lifted.ray1.angle, 2) == t
        assert angle_step(lifted.ray2.angle, 2) == s

    # newton map: chains of lifts climbing away from the invariant chord
    nb = load_builtin("newton-cubic")
    n = nb.map
    chart_a = build_chart(n, nb.attractors[0], 2)
    chart_b = build_chart(n, nb.attractors[1], 2)
    base = make_chord(
        trace_ray(n, chart_a, Angle.of(0)), trace_ray(n, chart_b, Angle.of(0)), 1e-6
    )
    chord = base
    depth = 0
    lifts = 0
    attempts = 0
    while lifts < 70 and attempts < 400:
        attempts += 1
        targets = preimages(n, chord.junction)
        order = rng.permutation(len(targets))
        lifted = None
        for idx in order:
            try:
                lifted = lift_chord(n, chord, chart_a, chart_b, targets[int(idx)])
                break
            except (LiftError, ConvergenceError, BranchAmbiguityError):
                continue
        if lifted is None or depth >= 8:
            chord = base
            depth = 0
            continue
        assert angle_step(lifted.ray1.angle, 2) == chord.ray1.angle
        assert angle_step(lifted.ray2.angle, 2) == chord.ray2.angle
        chord = lifted
        depth += 1
        lifts += 1
    assert lifts == 70

    # isotopy comparison against a rasterized flood-fill reference
    agreements = 0
    split_cases = 0
    for _ in range(50):
        amp_top = rng.uniform(0.15, 0.9)
        amp_bottom = rng.uniform(0.15, 0.9)
        top = _arc_chord(amp_top)
        bottom = _arc_chord(-amp_bottom)
        marked = []
        while len(marked) < 4:
            z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
            x, y = z.real, z.imag
            d_top = abs(y - amp_top * (1 - x * x)) if abs(x) <= 1 else 2.0
            d_bottom = abs(y + amp_bottom * (1 - x * x)) if abs(x) <= 1 else 2.0
            if min(d_top, d_bottom, abs(z - 1.0), abs(z + 1.0)) < 0.08:
                continue
            marked.append(as_point(z))
        got = same_isotopy_class(top, bottom, marked, tol=1e-3)
        want = _raster_same_component(top, bottom, marked)
        assert got == want
        agreements += 1
        split_cases += not want
    assert agreements == 50
    assert 0 < split_cases < 50

    # hausdorff distance behaves like a metric on chord point sets
    for _ in range(100):
        amps = rng.uniform(0.1, 1.0, 3) * rng.choice([-1.0, 1.0], 3)
        x, y, z = (_arc_chord(a, leg_points=16) for a in amps)
        dxy = hausdorff_distance(x, y)
        dxz = hausdorff_distance(x, z)
        dyz = hausdorff_distance(y, z)
        assert hausdorff_distance(x, x) == 0.0
        assert dxy == hausdorff_distance(y, x)
        assert dxz <= dxy + dyz + 1e-12


@timed("sphere substrate", 10.0)
def test_sphere_substrate():
    rng = np.random.default_rng(314159)

    # spherical derivative against a finite difference of chordal distances
    for name in ("z2", "basilica2", "newton-cubic"):
        bundle = load_builtin(name)
        crit = [c.z for c in critical_points(bundle.map) if not c.is_infinite]
        done = 0
        while done < 20:
            z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            if crit and min(abs(z - c) for c in crit) < 0.1:
                continue
            h = 1e-7 * cmath.exp(2j * math.pi * rng.uniform())
            p, ph = as_point(z), as_point(z + h)
            quotient = spherical_distance(
                eval_map(bundle.map, p), eval_map(bundle.map, ph)
            ) / spherical_distance(p, ph)
            derivative = spherical_derivative(bundle.map, z)
            assert abs(quotient - derivative) / derivative < 1e-5
            done += 1

    # chain rule through exact compositions
    base = RationalMap([-1.0, 0.0, 1.0], [1.0])
    twice = load_builtin("basilica2").map
    squaring = load_builtin("z2").map
    fourth = RationalMap([0.0, 0.0, 0.0, 0.0, 1.0], [1.0])
    for f, ff in ((base, twice), (squaring, fourth)):
        crit = [c.z for c in critical_points(f) if not c.is_infinite]
        done = 0
        while done < 20:
            z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            fz = eval_map(f, as_point(z))
            if min(abs(z - c) for c in crit) < 0.1 or fz.is_infinite:
                continue
            lhs = spherical_derivative(ff, z)
            rhs = spherical_derivative(f, fz.z) * spherical_derivative(f, z)
            assert abs(lhs - rhs) / rhs < 1e-9
            done += 1

    # root residuals on plain, repeated, and random well-separated spectra
    random_roots = rng.uniform(-1.5, 1.5, 8) + 1j * rng.uniform(-1.5, 1.5, 8)
    while min(
        abs(a - b) for i, a in enumerate(random_roots) for b in random_roots[i + 1 :]
    ) < 1e-2:
        random_roots = rng.uniform(-1.5, 1.5, 8) + 1j * rng.uniform(-1.5, 1.5, 8)
    polynomials = [
        [-1.0] + [0.0] * 11 + [1.0],
        [2.0, -3.0, 0.0, 1.0],
        list(np.poly(random_roots)[::-1]),
    ]
    for coeffs in polynomials:
        descending = np.array(coeffs, dtype=complex)[::-1]
        for r in find_roots(coeffs).roots:
            assert abs(np.polyval(descending, r)) < 1e-10

    # critical point counts saturate the degree bound on every builtin
    for name in ("z2", "basilica2", "newton-cubic", "ftheta:0"):
        bundle = load_builtin(name)
        assert len(critical_points(bundle.map)) == 2 * bundle.map.degree - 2
