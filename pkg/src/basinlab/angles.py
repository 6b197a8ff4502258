"""Exact rational angles in [0, 1) and their multiply-by-d dynamics.

Angles parametrize internal rays; all bookkeeping is exact rational
arithmetic (stdlib Fraction, so arbitrary-size integers), never floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True, order=True)
class Angle:
    """A reduced rational angle p/q in [0, 1)."""

    frac: Fraction

    def __post_init__(self):
        object.__setattr__(self, "frac", Fraction(self.frac) % 1)

    @classmethod
    def of(cls, numerator, denominator=None) -> "Angle":
        if denominator is None:
            return cls(Fraction(numerator))
        return cls(Fraction(numerator, denominator))

    @classmethod
    def parse(cls, text: str) -> "Angle":
        """Accepts 'p/q' or an integer string."""
        return cls(Fraction(text.strip()))

    @property
    def numerator(self) -> int:
        return self.frac.numerator

    @property
    def denominator(self) -> int:
        return self.frac.denominator

    def __float__(self) -> float:
        return float(self.frac)

    def __str__(self) -> str:
        return f"{self.frac.numerator}/{self.frac.denominator}"

    def __repr__(self) -> str:
        return f"Angle({self})"


def angle_step(angle: Angle, d: int) -> Angle:
    """The image d*t mod 1 of an angle under multiplication by d."""
    if d < 2:
        raise ValueError("multiplier must be at least 2")
    return Angle(angle.frac * d)


def angle_orbit(angle: Angle, d: int) -> list[Angle]:
    """The forward orbit until the first repeat (preperiod + one full cycle)."""
    seen: dict[Angle, int] = {}
    orbit: list[Angle] = []
    a = angle
    while a not in seen:
        seen[a] = len(orbit)
        orbit.append(a)
        a = angle_step(a, d)
    return orbit


def angle_eventual_period(angle: Angle, d: int) -> tuple[int, int]:
    """Smallest (preperiod, period) of an angle under multiplication by d.

    Every rational angle is eventually periodic: denominators can only lose
    factors shared with d, so the orbit is finite.  For gcd(q, d) = 1 the
    preperiod is 0 and the period is the multiplicative order of d mod q.
    """
    seen: dict[Angle, int] = {}
    a = angle
    k = 0
    while a not in seen:
        seen[a] = k
        a = angle_step(a, d)
        k += 1
    first = seen[a]
    return first, k - first


def periodic_angles(d: int, period: int) -> list[Angle]:
    """All angles fixed by multiplication by d^period: k/(d^period - 1).

    Includes angles of lower exact period (their denominators divide
    d^period - 1); the list has d^period - 1 entries.
    """
    q = d**period - 1
    return [Angle.of(k, q) for k in range(q)]
