"""Command-line front end: one subcommand per pipeline, deterministic artifacts.

Every subcommand resolves the same scenario shape (map source, raster window,
tolerances, output directory), writes its artifacts under --out with fixed
number formatting so reruns are byte-identical, and with --json prints a
machine-readable summary on stdout.  Exit status: 0 on success, 2 when
hypothesis screening rejects the input, 1 on any other failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .angles import Angle, angle_eventual_period
from .basins import (
    UNRESOLVED,
    boundary_intersection,
    classify,
    export_boundary_csv,
    export_ppm,
)
from .boettcher import build_chart
from .chords import (
    Chord,
    boundary_periodic_catalog,
    chord_polyline,
    detect_chords,
    export_catalog_csv,
    make_chord,
    pullback_periodic,
)
from .circle_family import (
    export_ftheta_json,
    rotation_number,
    solve_rho,
    verify_no_circle_periodics,
)
from .dynamics import (
    PeriodicPoint,
    classify_multiplier,
    multiplier,
    newton_periodic,
    orbit,
)
from .errors import BasinlabError, ConvergenceError, MapConstructionError, ScreeningError
from .expansion import (
    closing_refine,
    export_closing_csv,
    export_expansion_json,
    mane_check,
    near_returns,
)
from .maps import MapBundle, builtin_names, parse_theta, resolve_map
from .rays import export_rays_json, trace_ray, trace_rays
from .sphere import INFINITY, SpherePoint, as_point

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_SCREENING = 2

_NEEDS_MAP = {
    "basins", "rays", "chords", "boundary", "mane", "closing", "pullback", "catalog",
}


# ---------------------------------------------------------------------------
# scenario plumbing

def _parse_window(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"window must be x0,x1,y0,y1, got {text!r}")
    x0, x1, y0, y1 = (float(p) for p in parts)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"window {text!r} is empty")
    return (x0, x1, y0, y1)


def _parse_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"pair must be i,j, got {text!r}")
    i, j = (int(p) for p in parts)
    if i == j:
        raise ValueError("pair must name two distinct basins")
    return (i, j)


def _parse_angles(text: str) -> list[Angle]:
    return [Angle.parse(tok) for tok in text.split(",") if tok.strip()]


def _parse_point(text: str) -> SpherePoint:
    t = text.strip().lower()
    if t == "inf":
        return INFINITY
    parts = text.split(",")
    if len(parts) == 1:
        return as_point(complex(float(parts[0]), 0.0))
    if len(parts) == 2:
        return as_point(complex(float(parts[0]), float(parts[1])))
    raise ValueError(f"point must be 're', 're,im', or 'inf', got {text!r}")


def _jpoint(p: SpherePoint):
    if p.infinite:
        return "inf"
    return [p.z.real, p.z.imag]


def _csv_parts(p: SpherePoint) -> tuple[str, str]:
    if p.infinite:
        return "inf", "0"
    return f"{p.z.real:.17g}", f"{p.z.imag:.17g}"


@dataclass
class Scenario:
    """Resolved run configuration shared by every subcommand."""

    bundle: MapBundle | None
    source: dict
    window: tuple[float, float, float, float]
    resolution: int
    max_iter: int
    pair: tuple[int, int]
    angles: list[Angle]
    max_steps: int
    step_tol: float
    junction_tol: float
    boundary_tol: float
    closing_alpha: float
    out: Path
    threads: int | None

    def config(self) -> dict:
        src = dict(self.source)
        if self.bundle is not None:
            m = self.bundle.map
            src["label"] = self.bundle.label
            src["numerator"] = [[c.real, c.imag] for c in m.numer.tolist()]
            src["denominator"] = [[c.real, c.imag] for c in m.denom.tolist()]
            src["attractors"] = [_jpoint(a) for a in self.bundle.attractors]
        return {
            "map": src,
            "window": list(self.window),
            "resolution": self.resolution,
            "max_iter": self.max_iter,
            "pair": list(self.pair),
            "angles": [str(a) for a in self.angles],
            "max_steps": self.max_steps,
            "tolerances": {
                "step": self.step_tol,
                "junction": self.junction_tol,
                "boundary": self.boundary_tol,
                "closing_alpha": self.closing_alpha,
            },
            "out": str(self.out),
            "threads": self.threads,
        }


def _scenario(args) -> Scenario:
    for name in ("tol_step", "tol_junction", "tol_boundary", "closing_alpha"):
        if getattr(args, name) <= 0.0:
            raise ValueError(f"--{name.replace('_', '-')} must be positive")
    if args.res < 8:
        raise ValueError("--res must be at least 8")
    if args.threads is not None and args.threads < 1:
        raise ValueError("--threads must be at least 1")

    source: dict = {}
    bundle = None
    if args.builtin is not None:
        source["builtin"] = args.builtin
    elif args.map is not None:
        source["file"] = args.map
    needs_map = args.cmd in _NEEDS_MAP
    defer = args.dry_run and (args.builtin or "").startswith("ftheta:")
    if needs_map and not defer:
        bundle = resolve_map(args.builtin, args.map)
    elif defer:
        # validate the rotation target without solving for the prefactor
        source["theta"] = parse_theta(args.builtin.split(":", 1)[1])
        source["resolved"] = False
    if args.cmd == "ftheta" and getattr(args, "theta", None) is not None:
        source["theta"] = parse_theta(args.theta)

    pair = _parse_pair(args.pair)
    if bundle is not None:
        n = len(bundle.attractors)
        if not all(0 <= k < n for k in pair):
            raise ValueError(f"pair {pair} out of range for {n} attractors")
    return Scenario(
        bundle=bundle,
        source=source,
        window=_parse_window(args.window),
        resolution=args.res,
        max_iter=args.max_iter,
        pair=pair,
        angles=_parse_angles(args.angles),
        max_steps=args.max_steps,
        step_tol=args.tol_step,
        junction_tol=args.tol_junction,
        boundary_tol=args.tol_boundary,
        closing_alpha=args.closing_alpha,
        out=Path(args.out),
        threads=args.threads,
    )


def _atlas_for(sc: Scenario):
    return classify(
        sc.bundle.map, sc.bundle.attractors, sc.window, sc.resolution, sc.max_iter
    )


def _charts_for(sc: Scenario, atlas=None):
    i, j = sc.pair
    b = sc.bundle
    c1 = build_chart(b.map, b.attractors[i], b.local_degree(i), atlas)
    c2 = build_chart(b.map, b.attractors[j], b.local_degree(j), atlas)
    return c1, c2


# ---------------------------------------------------------------------------
# subcommands

def _cmd_basins(sc: Scenario, args) -> dict:
    atlas = _atlas_for(sc)
    p_aff = sc.out / "basins_affine.ppm"
    p_inv = sc.out / "basins_inverted.ppm"
    export_ppm(atlas.affine, p_aff)
    export_ppm(atlas.inverted_chart, p_inv)
    lines = ["attractor,re,im,kind,cells_affine,cells_inverted"]
    for k, pp in enumerate(atlas.attractors):
        re, im = _csv_parts(pp.point)
        ca = int(np.count_nonzero(atlas.affine.labels == k))
        ci = int(np.count_nonzero(atlas.inverted_chart.labels == k))
        lines.append(f"{k},{re},{im},{pp.kind},{ca},{ci}")
    ua = int(np.count_nonzero(atlas.affine.labels == UNRESOLVED))
    ui = int(np.count_nonzero(atlas.inverted_chart.labels == UNRESOLVED))
    lines.append(f"unresolved,,,,{ua},{ui}")
    p_csv = sc.out / "basins.csv"
    p_csv.write_text("\n".join(lines) + "\n")
    return {
        "summary": (
            f"{len(atlas.attractors)} basins rasterized at "
            f"{sc.resolution}x{sc.resolution}; {ua + ui} unresolved cells"
        ),
        "artifacts": [str(p_aff), str(p_inv), str(p_csv)],
        "attractors": [_jpoint(pp.point) for pp in atlas.attractors],
        "unresolved": [ua, ui],
    }


def _cmd_rays(sc: Scenario, args) -> dict:
    m = sc.bundle.map
    c1, c2 = _charts_for(sc)
    rays = trace_rays(m, c1, sc.angles, sc.max_steps, sc.step_tol)
    rays += trace_rays(m, c2, sc.angles, sc.max_steps, sc.step_tol)
    path = sc.out / "rays.json"
    export_rays_json(rays, path)
    return {
        "summary": f"{len(rays)} rays traced, all landed",
        "artifacts": [str(path)],
        "rays": [
            {
                "basin": _jpoint(r.basin),
                "angle": str(r.angle),
                "landing": _jpoint(r.landing_point),
            }
            for r in rays
        ],
    }


def _certified_rows(m, chords, degree):
    rows, skipped = [], 0
    for ch in chords:
        _, period = angle_eventual_period(ch.ray1.angle, degree)
        refined = newton_periodic(m, ch.junction, period)
        if refined is None:
            skipped += 1
            continue
        mult = multiplier(m, refined, period)
        rows.append(
            (
                Chord(ch.ray1, ch.ray2, refined),
                PeriodicPoint(refined, period, mult, classify_multiplier(mult)),
            )
        )
    return rows, skipped


def _cmd_chords(sc: Scenario, args) -> dict:
    m = sc.bundle.map
    c1, c2 = _charts_for(sc)
    found = detect_chords(
        m, c1, c2, sc.angles, sc.angles, sc.junction_tol, sc.max_steps, sc.step_tol
    )
    rows, skipped = _certified_rows(m, found, c1.local_degree)
    path = sc.out / "chords.csv"
    export_catalog_csv(rows, path)
    return {
        "summary": f"{len(rows)} chords certified over {len(sc.angles)} angles"
        + (f" ({skipped} junctions uncertified, dropped)" if skipped else ""),
        "artifacts": [str(path)],
        "chords": [
            {
                "angle1": str(ch.ray1.angle),
                "angle2": str(ch.ray2.angle),
                "junction": _jpoint(pp.point),
                "period": pp.period,
            }
            for ch, pp in rows
        ],
    }


def _cmd_boundary(sc: Scenario, args) -> dict:
    atlas = _atlas_for(sc)
    i, j = sc.pair
    samples = boundary_intersection(sc.bundle.map, atlas, i, j, sc.boundary_tol)
    path = sc.out / "boundary.csv"
    export_boundary_csv(samples, path)
    return {
        "summary": (
            f"{len(samples.points)} common boundary samples for basins "
            f"{i} and {j} at tol {sc.boundary_tol:g}"
        ),
        "artifacts": [str(path)],
        "samples": len(samples.points),
        "pair": [i, j],
    }


def _cmd_mane(sc: Scenario, args) -> dict:
    atlas = _atlas_for(sc)
    i, j = sc.pair
    samples = boundary_intersection(sc.bundle.map, atlas, i, j, sc.boundary_tol)
    report = mane_check(sc.bundle.map, samples, args.n_max)
    path = sc.out / "mane.json"
    export_expansion_json(report, path)
    return {
        "summary": (
            f"expansion certified from iterate {report.certified_N} "
            f"over {len(samples.points)} samples"
            if report.certified_N is not None
            else f"no expansion certificate up to n_max={args.n_max}"
        ),
        "artifacts": [str(path)],
        "certified_N": report.certified_N,
        "samples": len(samples.points),
        "per_n": [[n, v] for n, v in report.per_n],
    }


def _cmd_closing(sc: Scenario, args) -> dict:
    m = sc.bundle.map
    seed = _parse_point(args.seed)
    pairs = near_returns(m, seed, args.horizon, sc.closing_alpha)
    orb = orbit(m, seed, args.horizon)
    results, failed = [], 0
    for q, p in pairs:
        try:
            results.append(closing_refine(m, orb[q], p - q))
        except (ConvergenceError, ScreeningError, ValueError):
            failed += 1
    path = sc.out / "closing.csv"
    export_closing_csv(results, path)
    best = min(results, key=lambda r: r.seed_distance) if results else None
    return {
        "summary": (
            f"{len(pairs)} near returns within alpha={sc.closing_alpha:g}; "
            f"{len(results)} closed, {failed} failed"
        ),
        "artifacts": [str(path)],
        "near_returns": len(pairs),
        "closed": len(results),
        "failed": failed,
        "best": (
            {
                "point": _jpoint(best.refined.point),
                "period": best.refined.period,
                "abs_multiplier": abs(best.refined.multiplier),
                "class": best.refined.kind,
                "seed_distance": best.seed_distance,
            }
            if best
            else None
        ),
    }


def _cmd_pullback(sc: Scenario, args) -> dict:
    m = sc.bundle.map
    c1, c2 = _charts_for(sc)
    start_angles = _parse_angles(args.start)
    if len(start_angles) != 2:
        raise ValueError(f"--start must give two angles, got {args.start!r}")
    a1, a2 = start_angles
    r1 = trace_ray(m, c1, a1, sc.max_steps, sc.step_tol)
    r2 = trace_ray(m, c2, a2, sc.max_steps, sc.step_tol)
    start = make_chord(r1, r2, sc.junction_tol)
    Q = args.q if args.q is not None else angle_eventual_period(a1, c1.local_degree)[1]
    history: list[Chord] = []
    final, report = pullback_periodic(
        m,
        start,
        c1,
        c2,
        Q,
        max_stages=args.stages,
        conv_tol=args.tol_conv,
        lift_tol=args.tol_lift,
        history=history,
    )
    payload = {
        "start_angles": [str(a1), str(a2)],
        "period": Q,
        "stages": report["stages"],
        "hausdorff_gaps": report["hausdorff_gaps"],
        "junctions": [_jpoint(c.junction) for c in history],
        "final_junction": _jpoint(final.junction),
        "final_polyline": [_jpoint(p) for p in chord_polyline(final)],
    }
    path = sc.out / "pullback.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    log = sc.out / "pullback_gaps.txt"
    log.write_text(
        "".join(f"{g:.17g}\n" for g in report["hausdorff_gaps"])
    )
    return {
        "summary": (
            f"pullback stabilized after {report['stages']} stages; "
            f"final gap {report['hausdorff_gaps'][-1]:.3e}"
        ),
        "artifacts": [str(path), str(log)],
        "period": Q,
        "stages": report["stages"],
        "final_gap": report["hausdorff_gaps"][-1],
        "final_junction": _jpoint(final.junction),
    }


def _cmd_ftheta(sc: Scenario, args) -> dict:
    if args.theta is not None:
        theta = parse_theta(args.theta)
    elif sc.source.get("builtin", "").startswith("ftheta:"):
        theta = parse_theta(sc.source["builtin"].split(":", 1)[1])
    else:
        raise MapConstructionError("ftheta needs --theta or --builtin ftheta:<theta>")
    rho, report = solve_rho(theta, args.theta_tol, full=True)
    estimate = rotation_number(rho, args.verify_n, 0.1)
    findings = verify_no_circle_periodics(rho, args.period_max, args.tol_circle)
    path = sc.out / "ftheta.json"
    export_ftheta_json(rho, estimate, findings, path)
    return {
        "summary": (
            f"rho = {rho.real:.12g}{rho.imag:+.12g}i; rotation number "
            f"{estimate.theta_hat:.9f} (target {theta:.9f}); "
            f"{len(findings)} circle periodic points up to period {args.period_max}"
        ),
        "artifacts": [str(path)],
        "rho": [rho.real, rho.imag],
        "theta_hat": estimate.theta_hat,
        "error_bound": estimate.error_bound,
        "plateau": report.plateau,
        "periodic_findings": len(findings),
    }


def _cmd_catalog(sc: Scenario, args) -> dict:
    m = sc.bundle.map
    c1, c2 = _charts_for(sc)
    rows = boundary_periodic_catalog(
        m, c1, c2, args.bound, sc.junction_tol, sc.max_steps, sc.step_tol
    )
    path = sc.out / "catalog.csv"
    export_catalog_csv(rows, path)
    return {
        "summary": f"{len(rows)} periodic boundary junctions up to period {args.bound}",
        "artifacts": [str(path)],
        "rows": len(rows),
        "junctions": [_jpoint(pp.point) for _, pp in rows],
    }


_COMMANDS = {
    "basins": _cmd_basins,
    "rays": _cmd_rays,
    "chords": _cmd_chords,
    "boundary": _cmd_boundary,
    "mane": _cmd_mane,
    "closing": _cmd_closing,
    "pullback": _cmd_pullback,
    "ftheta": _cmd_ftheta,
    "catalog": _cmd_catalog,
}


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; 2 is reserved for
    # hypothesis-screening outcomes here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INTERNAL, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_mutually_exclusive_group()
    g.add_argument("--map", metavar="FILE", help="JSON map description file")
    g.add_argument(
        "--builtin",
        metavar="NAME",
        help="named map: " + ", ".join(builtin_names()),
    )
    common.add_argument(
        "--window", default="-2,2,-2,2", help="affine raster window x0,x1,y0,y1"
    )
    common.add_argument("--res", type=int, default=512, help="raster resolution")
    common.add_argument(
        "--max-iter", type=int, default=256, help="iteration cap per raster cell"
    )
    common.add_argument(
        "--pair", default="0,1", help="indices i,j of the two distinguished basins"
    )
    common.add_argument(
        "--angles", default="0", help="comma-separated rational angles, e.g. 0,1/7,2/7"
    )
    common.add_argument(
        "--max-steps", type=int, default=120, help="radius-doubling steps per ray"
    )
    common.add_argument("--tol-step", type=float, default=1e-9, help="ray landing step")
    common.add_argument(
        "--tol-junction", type=float, default=1e-6, help="chord junction matching"
    )
    common.add_argument(
        "--tol-boundary", type=float, default=1e-8, help="boundary sample tightening"
    )
    common.add_argument(
        "--closing-alpha", type=float, default=1e-3, help="near-return threshold"
    )
    common.add_argument("--out", default="out", help="artifact directory")
    common.add_argument("--threads", type=int, help="cap worker threads")
    common.add_argument(
        "--json", action="store_true", help="machine-readable stdout summary"
    )
    common.add_argument(
        "--dry-run",
        action="store_true",
        help="validate and print the resolved scenario without computing",
    )

    parser = _Parser(
        prog="basinlab",
        description=(
            "Attracting basins, internal rays, boundary chords and expansion "
            "checks for rational maps on the Riemann sphere."
        ),
    )
    subs = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    subs.add_parser(
        "basins", parents=[common], help="raster both charts; PPM images + CSV summary"
    )
    subs.add_parser(
        "rays", parents=[common], help="trace internal rays at the given angles; JSON"
    )
    subs.add_parser(
        "chords",
        parents=[common],
        help="detect and certify chords over the angle grid; CSV",
    )
    subs.add_parser(
        "boundary", parents=[common], help="sample the common boundary of a pair; CSV"
    )
    p = subs.add_parser(
        "mane", parents=[common], help="expansion certificate on boundary samples; JSON"
    )
    p.add_argument("--n-max", type=int, default=20, help="iterate horizon")
    p = subs.add_parser(
        "closing", parents=[common], help="refine near returns into periodic points; CSV"
    )
    p.add_argument("--seed", required=True, help="start point: 're', 're,im', or 'inf'")
    p.add_argument("--horizon", type=int, default=24, help="orbit length scanned")
    p = subs.add_parser(
        "pullback", parents=[common], help="iterate chord lifting to its periodic limit; JSON"
    )
    p.add_argument("--start", default="0,0", help="two starting angles a1,a2")
    p.add_argument("--q", type=int, help="junction period (default: period of a1)")
    p.add_argument("--stages", type=int, default=64, help="stage cap")
    p.add_argument("--tol-conv", type=float, default=1e-8, help="stage gap to stop at")
    p.add_argument("--tol-lift", type=float, default=1e-6, help="lift endpoint matching")
    p = subs.add_parser(
        "ftheta",
        parents=[common],
        help="solve the circle family for a rotation number and scan for circle periodics; JSON",
    )
    p.add_argument("--theta", help="rotation target: float, p/q, or 'golden'")
    p.add_argument("--theta-tol", type=float, default=1e-5, help="rotation matching")
    p.add_argument(
        "--verify-n", type=int, default=200_000, help="iterations for the verification estimate"
    )
    p.add_argument("--period-max", type=int, default=8, help="periods scanned")
    p.add_argument(
        "--tol-circle", type=float, default=1e-6, help="distance-to-circle threshold"
    )
    p = subs.add_parser(
        "catalog",
        parents=[common],
        help="periodic chords over all angles up to a period bound; CSV",
    )
    p.add_argument("--bound", type=int, default=3, help="period bound")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads >= 1:
            import numba

            # a cap, not a demand: never exceed what the runtime offers
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        sc = _scenario(args)
        if args.dry_run:
            print(json.dumps({"subcommand": args.cmd, **sc.config()}, sort_keys=True))
            return EXIT_OK
        sc.out.mkdir(parents=True, exist_ok=True)
        result = _COMMANDS[args.cmd](sc, args)
        if args.json:
            print(json.dumps(result, sort_keys=True))
        else:
            print(result["summary"])
            for artifact in result.get("artifacts", []):
                print(f"wrote {artifact}")
        return EXIT_OK
    except ScreeningError as exc:
        print(f"screening: {exc}", file=sys.stderr)
        return EXIT_SCREENING
    except BasinlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - anything else is an internal error
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
