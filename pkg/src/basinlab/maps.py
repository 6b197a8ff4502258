"""Named example maps and map-file ingestion.

A MapBundle packages a rational map with the bookkeeping every pipeline
needs: which attracting fixed points to build basins over, their local
degrees for the basin coordinates, and which two basins form the default
distinguished pair.  Builtins carry exact coefficient lists; user maps come
from a small JSON format (see load_map_file).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .dynamics import periodic_points
from .errors import ChartError, MapConstructionError
from .sphere import INFINITY, RationalMap, SpherePoint, as_point

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0

_THIRD_ROOT = complex(-0.5, math.sqrt(3.0) / 2.0)


@dataclass(frozen=True)
class MapBundle:
    """A rational map plus the attractor bookkeeping the pipelines use."""

    label: str
    map: RationalMap
    attractors: list[SpherePoint]
    local_degrees: list[int] = field(default_factory=list)
    pair: tuple[int, int] = (0, 1)

    def local_degree(self, i: int) -> int:
        if i < len(self.local_degrees) and self.local_degrees[i] > 0:
            return self.local_degrees[i]
        return _detect_local_degree(self.map, self.attractors[i])


def _detect_local_degree(m: RationalMap, a: SpherePoint) -> int:
    # order of vanishing of the local expansion at a superattracting point
    from .boettcher import build_chart

    last = None
    for d in range(2, 7):
        try:
            build_chart(m, a, d)
            return d
        except ChartError as exc:
            last = exc
            if "local degree is higher" in str(exc):
                continue
            raise
    raise ChartError(f"no local degree in 2..6 fits the attractor {a}: {last}")


def parse_theta(text: str) -> float:
    """Rotation-number target: a float, a fraction p/q, or 'golden'."""
    t = text.strip().lower()
    if t == "golden":
        return GOLDEN_MEAN
    try:
        if "/" in t:
            return float(Fraction(t))
        return float(t)
    except (ValueError, ZeroDivisionError) as exc:
        raise MapConstructionError(f"cannot parse rotation target {text!r}") from exc


def builtin_names() -> list[str]:
    return ["z2", "basilica2", "newton-cubic", "ftheta:<theta>"]


def load_builtin(name: str, theta_tol: float = 1e-5) -> MapBundle:
    """Resolve a named builtin to a MapBundle.

    ftheta:<theta> solves for the unit prefactor whose circle rotation
    number is <theta> (a float, a fraction, or the word 'golden').
    """
    if name == "z2":
        return MapBundle(
            label="z2",
            map=RationalMap([0, 0, 1], [1]),
            attractors=[as_point(0.0), INFINITY],
            local_degrees=[2, 2],
        )
    if name == "basilica2":
        # (z^2-1) o (z^2-1); 0 and -1 are superattracting fixed points
        return MapBundle(
            label="basilica2",
            map=RationalMap([0, 0, -2, 0, 1], [1]),
            attractors=[as_point(0.0), as_point(-1.0)],
            local_degrees=[2, 2],
        )
    if name == "newton-cubic":
        return MapBundle(
            label="newton-cubic",
            map=RationalMap.newton([-1, 0, 0, 1]),
            attractors=[
                as_point(1.0),
                as_point(_THIRD_ROOT),
                as_point(_THIRD_ROOT.conjugate()),
            ],
            local_degrees=[2, 2, 2],
        )
    if name.startswith("ftheta:"):
        from .circle_family import make_f_theta, solve_rho

        theta = parse_theta(name.split(":", 1)[1])
        rho = solve_rho(theta, theta_tol)
        return MapBundle(
            label=name,
            map=make_f_theta(rho),
            attractors=[as_point(0.0), INFINITY],
            local_degrees=[2, 2],
        )
    raise MapConstructionError(
        f"unknown builtin {name!r}; known: {', '.join(builtin_names())}"
    )


def _coeff(entry) -> complex:
    if isinstance(entry, (int, float)):
        return complex(entry)
    if (
        isinstance(entry, list)
        and len(entry) == 2
        and all(isinstance(x, (int, float)) for x in entry)
    ):
        return complex(entry[0], entry[1])
    raise MapConstructionError(f"coefficient must be a number or [re, im], got {entry!r}")


def _point(entry) -> SpherePoint:
    if entry == "inf":
        return INFINITY
    return as_point(_coeff(entry))


def load_map_file(path) -> MapBundle:
    """Read a map description from JSON.

    Schema: {"numerator": [...], "denominator": [...]} with ascending
    coefficients, each a number or [re, im]; optional "attractors" (each a
    number, [re, im], or "inf"; autodetected among fixed points when
    omitted), "local_degrees", "pair", "label".
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise MapConstructionError(f"cannot read map file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MapConstructionError(f"map file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MapConstructionError(f"map file {path} must hold a JSON object")
    for key in ("numerator", "denominator"):
        if key not in data or not isinstance(data[key], list) or not data[key]:
            raise MapConstructionError(f"map file {path} needs a nonempty {key!r} list")
    m = RationalMap(
        [_coeff(c) for c in data["numerator"]],
        [_coeff(c) for c in data["denominator"]],
    )
    if "attractors" in data:
        attractors = [_point(a) for a in data["attractors"]]
    else:
        attractors = _autodetect_attractors(m)
    degrees = data.get("local_degrees", [])
    if not isinstance(degrees, list) or not all(
        isinstance(d, int) and d >= 2 for d in degrees
    ):
        raise MapConstructionError("local_degrees must be a list of integers >= 2")
    pair = tuple(data.get("pair", (0, 1)))
    if len(pair) != 2 or not all(
        isinstance(i, int) and 0 <= i < len(attractors) for i in pair
    ):
        raise MapConstructionError(f"pair must index two of {len(attractors)} attractors")
    return MapBundle(
        label=str(data.get("label", path)),
        map=m,
        attractors=attractors,
        local_degrees=degrees,
        pair=pair,  # type: ignore[arg-type]
    )


def _autodetect_attractors(m: RationalMap) -> list[SpherePoint]:
    fixed = periodic_points(m, 1)
    found = [
        pp.point
        for pp in fixed
        if pp.kind in ("attracting", "superattracting")
    ]
    if len(found) < 2:
        raise MapConstructionError(
            f"found {len(found)} attracting fixed points; "
            f"list 'attractors' explicitly in the map file"
        )
    return found


def resolve_map(builtin: str | None, path=None, theta_tol: float = 1e-5) -> MapBundle:
    if (builtin is None) == (path is None):
        raise MapConstructionError("exactly one of builtin name or map file required")
    if builtin is not None:
        return load_builtin(builtin, theta_tol)
    return load_map_file(path)
