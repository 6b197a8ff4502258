"""Basins, internal rays, boundary chords and expansion certificates for
rational maps on the Riemann sphere, plus a circle-preserving family with
controllable rotation number."""

from .angles import (
    Angle,
    angle_eventual_period,
    angle_orbit,
    angle_step,
    periodic_angles,
)
from .basins import (
    BasinAtlas,
    BoundarySampleSet,
    ChartGrid,
    UNRESOLVED,
    boundary_intersection,
    classify,
    classify_point,
    export_boundary_csv,
    export_ppm,
    immediate_component,
)
from .boettcher import BoettcherChart, build_chart, functional_equation_residual
from .chords import (
    Chord,
    boundary_periodic_catalog,
    chord_polyline,
    detect_chords,
    export_catalog_csv,
    hausdorff_distance,
    lift_chord,
    make_chord,
    multi_access,
    pullback_periodic,
    same_isotopy_class,
)
from .circle_family import (
    CircleMapLift,
    RhoSolveReport,
    RotationEstimate,
    export_ftheta_json,
    make_f_theta,
    rotation_number,
    solve_rho,
    verify_no_circle_periodics,
)
from .dynamics import (
    PeriodicPoint,
    PostcriticalSet,
    classify_multiplier,
    dedupe_points,
    eventually_periodic_test,
    export_periodic_csv,
    multiplier,
    newton_periodic,
    orbit,
    periodic_points,
    periodic_points_from_seeds,
    postcritical,
)
from .errors import (
    AtlasError,
    BasinlabError,
    BranchAmbiguityError,
    ChartError,
    ConvergenceError,
    LiftError,
    MapConstructionError,
    RootFindingError,
    ScreeningError,
)
from .expansion import (
    ClosingResult,
    DistanceExpandingReport,
    ExpansionReport,
    closing_refine,
    distance_expanding_check,
    export_closing_csv,
    export_expansion_json,
    mane_check,
    near_returns,
)
from .maps import (
    MapBundle,
    builtin_names,
    load_builtin,
    load_map_file,
    parse_theta,
    resolve_map,
)
from .rays import Ray, export_rays_json, trace_ray, trace_rays
from .roots import PolyRoots, find_roots
from .sphere import (
    INFINITY,
    RationalMap,
    SpherePoint,
    as_point,
    critical_points,
    embed,
    eval_map,
    preimages,
    spherical_derivative,
    spherical_distance,
    unembed,
)

__version__ = "0.1.0"
