"""Exact angle arithmetic and multiply-by-d dynamics."""

import math
from fractions import Fraction

import pytest

from basinlab.angles import (
    Angle,
    angle_eventual_period,
    angle_orbit,
    angle_step,
    periodic_angles,
)


def _mult_order(d: int, q: int) -> int:
    # oracle: multiplicative order of d modulo q (gcd(d, q) = 1)
    k, acc = 1, d % q
    while acc != 1:
        acc = (acc * d) % q
        k += 1
    return k


def test_angle_normalization():
    assert Angle.of(5, 3).frac == Fraction(2, 3)
    assert Angle.of(-1, 4).frac == Fraction(3, 4)
    assert Angle.parse("2/6").frac == Fraction(1, 3)
    assert str(Angle.of(1, 3)) == "1/3"
    assert float(Angle.of(1, 4)) == 0.25


def test_angle_step_examples():
    assert angle_step(Angle.of(1, 3), 2) == Angle.of(2, 3)
    assert angle_step(Angle.of(2, 3), 2) == Angle.of(1, 3)
    assert angle_step(Angle.of(1, 2), 2) == Angle.of(0)
    assert angle_step(Angle.of(3, 7), 3) == Angle.of(2, 7)


def test_eventual_period_examples():
    # 1/6 doubles to 1/3, then cycles 1/3 <-> 2/3
    assert angle_eventual_period(Angle.of(1, 6), 2) == (1, 2)
    assert angle_eventual_period(Angle.of(1, 3), 2) == (0, 2)
    assert angle_eventual_period(Angle.of(0), 2) == (0, 1)
    assert angle_eventual_period(Angle.of(1, 7), 2) == (0, 3)
    # 1/4 -> 1/2 -> 0 -> 0
    assert angle_eventual_period(Angle.of(1, 4), 2) == (2, 1)


def test_eventual_period_matches_multiplicative_order():
    # oracle: for odd q and doubling, preperiod 0 and period = ord_q(2)
    for q in range(3, 64, 2):
        want = _mult_order(2, q)
        for p in range(1, q):
            if math.gcd(p, q) != 1:
                continue
            assert angle_eventual_period(Angle.of(p, q), 2) == (0, want)


def test_orbit_structure():
    orb = angle_orbit(Angle.of(1, 6), 2)
    assert orb == [Angle.of(1, 6), Angle.of(1, 3), Angle.of(2, 3)]


def test_periodic_angles_doubling():
    assert periodic_angles(2, 1) == [Angle.of(0)]
    assert set(periodic_angles(2, 2)) == {Angle.of(0), Angle.of(1, 3), Angle.of(2, 3)}
    got = periodic_angles(2, 3)
    assert len(got) == 7
    for a in got:
        pre, per = angle_eventual_period(a, 2)
        assert pre == 0 and 3 % per == 0


def test_step_rejects_small_multiplier():
    with pytest.raises(ValueError):
        angle_step(Angle.of(1, 3), 1)
