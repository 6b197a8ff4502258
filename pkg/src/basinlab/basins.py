"""Attracting-basin rasters over two sphere charts, immediate components,
and sampling of shared basin boundaries.

The sphere is covered by an affine-chart window and an inverted-chart
window (coordinate w = 1/z), so basins of or near infinity are handled the
same way as finite ones.  Cell centers are iterated until they enter a
certified capture ball of an attracting cycle; the capture radius is the
largest tested ball on which the cycle return map both contracts toward the
cycle point and keeps the spherical norm of its derivative below 0.9.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy import ndimage

from .dynamics import (
    PeriodicPoint,
    classify_multiplier,
    dedupe_points,
    multiplier,
    orbit,
)
from .errors import AtlasError
from .sphere import (
    INFINITY,
    RationalMap,
    SpherePoint,
    _point_of,
    _state_of,
    _trim,
    as_point,
    embed,
    eval_map,
    spherical_derivative,
    spherical_distance,
    unembed,
)

UNRESOLVED = -1

_CONTRACTION_BOUND = 0.9
_RING_DIRECTIONS = 16
_MIN_CAPTURE_RADIUS = 1e-9
_BISECTION_DEPTH = 60
_DEFAULT_SEED_CAP = 4000
_MAX_BACKWARD_STEPS = 200

_PALETTE = [
    (204, 51, 51),
    (51, 102, 204),
    (51, 204, 119),
    (229, 196, 46),
    (153, 85, 221),
    (70, 200, 200),
    (240, 130, 40),
    (140, 140, 140),
]


# ---------------------------------------------------------------------------
# compiled per-point classification

@njit(cache=True)
def _poly_nb(c, x):
    acc = 0j
    for k in range(len(c) - 1, -1, -1):
        acc = acc * x + c[k]
    return acc


@njit(cache=True)
def _sigma_nb(x1, inv1, x2, inv2):
    if inv1 == inv2:
        num = 2.0 * abs(x1 - x2)
    else:
        num = 2.0 * abs(x1 * x2 - 1.0)
    return num / math.sqrt((1.0 + abs(x1) ** 2) * (1.0 + abs(x2) ** 2))


@njit(cache=True)
def _step_nb(pn, pd, rpn, rpd, x, inv):
    if inv:
        n = _poly_nb(rpn, x)
        d = _poly_nb(rpd, x)
    else:
        n = _poly_nb(pn, x)
        d = _poly_nb(pd, x)
    if abs(n) <= abs(d):
        if d == 0j:
            return 0j, True
        return n / d, False
    return d / n, True


@njit(cache=True)
def _classify_state_nb(pn, pd, rpn, rpd, x, inv, cx, cinv, cowner, crad, max_iter):
    for it in range(max_iter):
        for j in range(len(cx)):
            if _sigma_nb(x, inv, cx[j], cinv[j]) < crad[j]:
                return cowner[j], it
        x, inv = _step_nb(pn, pd, rpn, rpd, x, inv)
    return -1, max_iter


@njit(cache=True, parallel=True)
def _classify_grid_nb(
    pn, pd, rpn, rpd, xs, ys, chart_inv, cx, cinv, cowner, crad, max_iter, labels, iters
):
    for r in prange(len(ys)):
        for c in range(len(xs)):
            lab, used = _classify_state_nb(
                pn, pd, rpn, rpd, complex(xs[c], ys[r]), chart_inv,
                cx, cinv, cowner, crad, max_iter,
            )
            labels[r, c] = lab
            iters[r, c] = used


# ---------------------------------------------------------------------------
# grids and the atlas

@dataclass
class ChartGrid:
    """A square raster over one chart coordinate.

    Row r, column c covers the cell with center x0+(c+0.5)dx, y0+(r+0.5)dy;
    rows run bottom-up in the chart plane.
    """

    inverted: bool
    window: tuple[float, float, float, float]
    resolution: int
    labels: np.ndarray = field(default=None, repr=False)
    iterations: np.ndarray = field(default=None, repr=False)

    @property
    def xs(self) -> np.ndarray:
        x0, x1, _, _ = self.window
        step = (x1 - x0) / self.resolution
        return x0 + step * (np.arange(self.resolution) + 0.5)

    @property
    def ys(self) -> np.ndarray:
        _, _, y0, y1 = self.window
        step = (y1 - y0) / self.resolution
        return y0 + step * (np.arange(self.resolution) + 0.5)

    def pixel_of(self, x: complex):
        x0, x1, y0, y1 = self.window
        c = int(math.floor((x.real - x0) / (x1 - x0) * self.resolution))
        r = int(math.floor((x.imag - y0) / (y1 - y0) * self.resolution))
        if 0 <= r < self.resolution and 0 <= c < self.resolution:
            return r, c
        return None

    def center(self, r: int, c: int) -> complex:
        x0, x1, y0, y1 = self.window
        return complex(
            x0 + (x1 - x0) * (c + 0.5) / self.resolution,
            y0 + (y1 - y0) * (r + 0.5) / self.resolution,
        )

    def point(self, r: int, c: int) -> SpherePoint:
        return _point_of(self.center(r, c), self.inverted)


@dataclass
class BasinAtlas:
    map: RationalMap
    attractors: list[PeriodicPoint]
    cycles: list[list[SpherePoint]]
    capture_radii: list[float]
    affine: ChartGrid
    inverted_chart: ChartGrid
    max_iter: int
    _kernel_args: tuple = field(default=None, repr=False)
    _components_cache: dict = field(default=None, repr=False)

    @property
    def charts(self) -> tuple[ChartGrid, ChartGrid]:
        return self.affine, self.inverted_chart

    @property
    def immediate_masks(self) -> dict:
        return {k: immediate_component(self, k) for k in range(len(self.attractors))}


def _as_attractor(m: RationalMap, a) -> PeriodicPoint:
    if isinstance(a, PeriodicPoint):
        return a
    p = as_point(a)
    mult = multiplier(m, p, 1)
    return PeriodicPoint(point=p, period=1, multiplier=mult, kind=classify_multiplier(mult))


def _tangent_basis(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pole = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u1 = np.cross(v, pole)
    u1 /= np.linalg.norm(u1)
    return u1, np.cross(v, u1)


def _ring_points(center: SpherePoint, radius: float) -> list[SpherePoint]:
    v = embed(center)
    u1, u2 = _tangent_basis(v)
    t = 2.0 * math.asin(min(radius, 1.999) / 2.0)
    out = []
    for k in range(_RING_DIRECTIONS):
        phi = 2.0 * math.pi * (k + 0.5) / _RING_DIRECTIONS
        w = math.cos(t) * v + math.sin(t) * (math.cos(phi) * u1 + math.sin(phi) * u2)
        out.append(unembed(w))
    return out


def _capture_radius(m: RationalMap, cycle: list[SpherePoint]) -> float:
    """Largest tested ball radius on which the cycle return map is certified
    contracting (sampled rings: derivative norm < 0.9 and images pulled in)."""
    period = len(cycle)
    r = 0.1
    while r >= _MIN_CAPTURE_RADIUS:
        ok = True
        for a in cycle:
            for frac in (1.0, 0.5):
                for p in _ring_points(a, r * frac):
                    rho = 1.0
                    q = p
                    for _ in range(period):
                        rho *= spherical_derivative(m, q)
                        q = eval_map(m, q)
                    if rho >= _CONTRACTION_BOUND or spherical_distance(q, a) >= r * frac:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return r
        r *= 0.5
    raise AtlasError("cannot certify a contraction ball around the attracting cycle")


def classify(
    m: RationalMap,
    attractors,
    window: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0),
    resolution: int = 512,
    max_iter: int = 256,
    inverted_window: tuple[float, float, float, float] = (-1.05, 1.05, -1.05, 1.05),
) -> BasinAtlas:
    """Label every cell of both chart rasters with the attractor its center
    converges to, or UNRESOLVED when max_iter runs out first."""
    if not attractors:
        raise AtlasError("no attracting cycle supplied")
    attrs = [_as_attractor(m, a) for a in attractors]
    cycles = []
    for pp in attrs:
        if pp.kind not in ("attracting", "superattracting"):
            raise AtlasError(f"attractor at {pp.point} is {pp.kind}, not attracting")
        cyc = orbit(m, pp.point, pp.period - 1) if pp.period > 1 else [pp.point]
        back = eval_map(m, cyc[-1])
        if spherical_distance(back, cyc[0]) > 1e-8:
            raise AtlasError("attractor cycle does not close up under the map")
        cycles.append(cyc)

    radii = [_capture_radius(m, cyc) for cyc in cycles]
    # keep capture balls of distinct attractors well separated
    for i in range(len(cycles)):
        for j in range(i + 1, len(cycles)):
            gap = min(
                spherical_distance(p, q) for p in cycles[i] for q in cycles[j]
            )
            while radii[i] + radii[j] >= gap / 2.0:
                if radii[i] >= radii[j]:
                    radii[i] *= 0.5
                else:
                    radii[j] *= 0.5
                if min(radii[i], radii[j]) < _MIN_CAPTURE_RADIUS:
                    raise AtlasError("attracting cycles too close to separate")

    cx, cinv, cowner, crad = [], [], [], []
    for k, cyc in enumerate(cycles):
        for p in cyc:
            x, inv = _state_of(p)
            cx.append(x)
            cinv.append(inv)
            cowner.append(k)
            crad.append(radii[k])
    kernel_args = (
        np.ascontiguousarray(m.numer),
        np.ascontiguousarray(m.denom),
        np.ascontiguousarray(m.numer_rev),
        np.ascontiguousarray(m.denom_rev),
        np.array(cx, dtype=np.complex128),
        np.array(cinv, dtype=np.bool_),
        np.array(cowner, dtype=np.int64),
        np.array(crad, dtype=np.float64),
    )

    grids = (
        ChartGrid(inverted=False, window=tuple(float(v) for v in window), resolution=resolution),
        ChartGrid(inverted=True, window=tuple(float(v) for v in inverted_window), resolution=resolution),
    )
    pn, pd, rpn, rpd, acx, acinv, acowner, acrad = kernel_args
    for g in grids:
        labels = np.empty((resolution, resolution), dtype=np.int16)
        iters = np.empty((resolution, resolution), dtype=np.int32)
        _classify_grid_nb(
            pn, pd, rpn, rpd, g.xs, g.ys, g.inverted,
            acx, acinv, acowner, acrad, max_iter, labels, iters,
        )
        g.labels = labels
        g.iterations = iters

    return BasinAtlas(
        map=m,
        attractors=attrs,
        cycles=cycles,
        capture_radii=radii,
        affine=grids[0],
        inverted_chart=grids[1],
        max_iter=max_iter,
        _kernel_args=kernel_args,
    )


def classify_point(atlas: BasinAtlas, p, max_iter: int = None) -> int:
    """Attractor id the single point converges to, or UNRESOLVED."""
    pn, pd, rpn, rpd, cx, cinv, cowner, crad = atlas._kernel_args
    x, inv = _state_of(as_point(p))
    lab, _ = _classify_state_nb(
        pn, pd, rpn, rpd, x, inv, cx, cinv, cowner, crad,
        atlas.max_iter if max_iter is None else max_iter,
    )
    return int(lab)


# ---------------------------------------------------------------------------
# connected components across the two charts

class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _chart_components(grid: ChartGrid, n_attr: int, offset: int):
    comp = np.zeros(grid.labels.shape, dtype=np.int32)
    owners = []
    next_id = offset
    for k in range(n_attr):
        mask = grid.labels == k
        lab, n = ndimage.label(mask)
        comp[mask] = lab[mask] + (next_id - 1)
        owners.extend([k] * n)
        next_id += n
    return comp, owners, next_id


def _cross_chart_pairs(src: ChartGrid, dst: ChartGrid, comp_src, comp_dst):
    """Component-id pairs where a source cell center lands in a destination
    cell of the same attractor (the charts overlap on an annulus)."""
    xs, ys = src.xs, src.ys
    zz = xs[None, :] + 1j * ys[:, None]
    good = (comp_src > 0) & (np.abs(zz) > 1e-12)
    ww = np.zeros_like(zz)
    ww[good] = 1.0 / zz[good]
    x0, x1, y0, y1 = dst.window
    res = dst.resolution
    cc = np.floor((ww.real - x0) / (x1 - x0) * res).astype(np.int64)
    rr = np.floor((ww.imag - y0) / (y1 - y0) * res).astype(np.int64)
    good &= (cc >= 0) & (cc < res) & (rr >= 0) & (rr < res)
    if not good.any():
        return np.empty((0, 2), dtype=np.int64)
    src_ids = comp_src[good]
    dst_ids = comp_dst[rr[good], cc[good]]
    same = (dst_ids > 0) & (
        src.labels[good] == dst.labels[rr[good], cc[good]]
    )
    pairs = np.stack([src_ids[same], dst_ids[same]], axis=1)
    return np.unique(pairs, axis=0)


def _stitched_components(atlas: BasinAtlas):
    if atlas._components_cache is not None:
        return atlas._components_cache
    n_attr = len(atlas.attractors)
    comp_a, owners_a, next_id = _chart_components(atlas.affine, n_attr, 1)
    comp_i, owners_i, next_id = _chart_components(atlas.inverted_chart, n_attr, next_id)
    owners = [-1] + owners_a + owners_i
    uf = _UnionFind(next_id)
    for a, b in _cross_chart_pairs(atlas.affine, atlas.inverted_chart, comp_a, comp_i):
        uf.union(int(a), int(b))
    for a, b in _cross_chart_pairs(atlas.inverted_chart, atlas.affine, comp_i, comp_a):
        uf.union(int(a), int(b))
    roots = np.array([uf.find(i) for i in range(next_id)], dtype=np.int32)
    atlas._components_cache = (comp_a, comp_i, roots, owners)
    return atlas._components_cache


def _attractor_component(atlas: BasinAtlas, attractor_id: int) -> int:
    comp_a, comp_i, roots, _ = _stitched_components(atlas)
    rep = atlas.attractors[attractor_id].point
    x, inv = _state_of(rep)
    candidates = []
    for grid, comp in ((atlas.inverted_chart, comp_i), (atlas.affine, comp_a)) if inv else (
        (atlas.affine, comp_a), (atlas.inverted_chart, comp_i)
    ):
        coord = x
        if grid.inverted != inv:
            if abs(x) < 1e-12:
                continue
            coord = 1.0 / x
        px = grid.pixel_of(coord)
        if px is None:
            continue
        r, c = px
        if grid.labels[r, c] == attractor_id:
            candidates.append(int(roots[comp[r, c]]))
    if not candidates:
        raise AtlasError(
            f"attractor {attractor_id} cell is unresolved or outside the windows; "
            "raise the resolution or max_iter"
        )
    return candidates[0]


def immediate_component(atlas: BasinAtlas, attractor_id: int):
    """Boolean masks (affine chart, inverted chart) of the connected basin
    component containing the attractor, stitched across the chart overlap."""
    comp_a, comp_i, roots, _ = _stitched_components(atlas)
    target = _attractor_component(atlas, attractor_id)
    mask_a = (comp_a > 0) & (roots[comp_a] == target) & (atlas.affine.labels == attractor_id)
    mask_i = (comp_i > 0) & (roots[comp_i] == target) & (
        atlas.inverted_chart.labels == attractor_id
    )
    return mask_a, mask_i


# ---------------------------------------------------------------------------
# boundary intersection sampling

@dataclass
class BoundarySampleSet:
    """Sampled points where two basin boundaries meet.

    Each sample carries a witness pair: a nearby point of each basin within
    tol, which is what "on both boundaries" means at tolerance scale.
    """

    pair: tuple[int, int]
    points: list[SpherePoint]
    witnesses: list[tuple[SpherePoint, SpherePoint]]
    tol: float


def _sphere_midpoint(p: SpherePoint, q: SpherePoint) -> SpherePoint:
    v = embed(p) + embed(q)
    n = float(np.linalg.norm(v))
    if n < 1e-9:
        return p
    return unembed(v / n)


_SEED_OFFSETS = sorted(
    ((dr, dc) for dr in range(-2, 3) for dc in range(-2, 3) if (dr, dc) != (0, 0)),
    key=lambda o: (max(abs(o[0]), abs(o[1])), o),
)


def _adjacency_seeds(grid: ChartGrid, mask_i, mask_j):
    """Cell-center pairs straddling the two masks.

    Every j-cell within two cells of the i-mask is paired with its nearest
    i-cell; the cells in between may be unresolved or belong to a third
    basin (at a junction of three basins they usually do).
    """
    seeds = []
    struct = np.ones((3, 3), dtype=bool)
    near = ndimage.binary_dilation(
        ndimage.binary_dilation(mask_i, struct), struct
    ) & mask_j
    res = grid.resolution
    for r, c in np.argwhere(near):
        for dr, dc in _SEED_OFFSETS:
            ri, ci = r + dr, c + dc
            if 0 <= ri < res and 0 <= ci < res and mask_i[ri, ci]:
                seeds.append((grid.point(ri, ci), grid.point(r, c)))
                break
    return seeds


def _preimage_candidates(m: RationalMap, p: SpherePoint) -> list[SpherePoint]:
    """All preimages via the companion-matrix solver; adequate for the small
    degrees met in backward refinement."""
    if p.infinite:
        poly = m.denom.copy()
    else:
        t = p.z
        n = max(len(m.numer), len(m.denom))
        poly = np.zeros(n, dtype=np.complex128)
        if abs(t) <= 1.0:
            poly[: len(m.numer)] += m.numer
            poly[: len(m.denom)] -= t * m.denom
        else:
            poly[: len(m.numer)] += (1.0 / t) * m.numer
            poly[: len(m.denom)] -= m.denom
    poly = _trim(poly)
    out = [SpherePoint(complex(z)) for z in np.roots(poly[::-1])]
    deficiency = m.degree - (len(poly) - 1)
    out.extend([INFINITY] * deficiency)
    return out


def _nearest_preimage(m: RationalMap, p: SpherePoint) -> SpherePoint:
    return min(_preimage_candidates(m, p), key=lambda c: spherical_distance(c, p))


def boundary_intersection(
    m: RationalMap,
    atlas: BasinAtlas,
    i: int,
    j: int,
    tol: float = 1e-8,
    seed_cap: int = _DEFAULT_SEED_CAP,
    max_backward: int = _MAX_BACKWARD_STEPS,
) -> BoundarySampleSet:
    """Sample points lying on the boundaries of both basins i and j.

    Seeds come from raster cells where the two immediate components meet;
    each seed pair is tightened by bisection along the geodesic while the
    midpoints keep resolving to i or j.  Junctions reached through a third
    basin (or through cells too slow to resolve) are finished by backward
    refinement: both witnesses are replaced by their nearest preimages,
    which stay in their full basins and contract toward the common boundary.
    """
    mask_i = immediate_component(atlas, i)
    mask_j = immediate_component(atlas, j)
    seeds = []
    for g, mi, mj in (
        (atlas.affine, mask_i[0], mask_j[0]),
        (atlas.inverted_chart, mask_i[1], mask_j[1]),
    ):
        seeds.extend(_adjacency_seeds(g, mi, mj))
    if len(seeds) > seed_cap:
        stride = -(-len(seeds) // seed_cap)
        seeds = seeds[::stride][:seed_cap]

    probe_iter = 4 * atlas.max_iter
    points, witnesses = [], []
    for a, b in seeds:
        converged = False
        for _ in range(_BISECTION_DEPTH):
            if spherical_distance(a, b) < tol:
                converged = True
                break
            mid = _sphere_midpoint(a, b)
            lab = classify_point(atlas, mid, probe_iter)
            if lab == i:
                a = mid
            elif lab == j:
                b = mid
            else:
                break
        if not converged:
            # bisection blocked by a third basin or unresolved cells between
            # the witnesses; contract the pair backward instead
            sep = spherical_distance(a, b)
            grew = 0
            for _ in range(max_backward):
                if sep < tol:
                    converged = True
                    break
                a = _nearest_preimage(m, a)
                b = _nearest_preimage(m, b)
                new_sep = spherical_distance(a, b)
                grew = grew + 1 if new_sep >= sep else 0
                sep = new_sep
                if grew >= 2:
                    break
            converged = converged or sep < tol
        if not converged:
            continue
        if classify_point(atlas, a, probe_iter) != i:
            continue
        if classify_point(atlas, b, probe_iter) != j:
            continue
        points.append(_sphere_midpoint(a, b))
        witnesses.append((a, b))

    if not points:
        raise AtlasError(
            f"no shared boundary of basins {i} and {j} found at this resolution"
        )
    order = sorted(
        range(len(points)), key=lambda k: tuple(np.round(embed(points[k]), 12))
    )
    points = [points[k] for k in order]
    witnesses = [witnesses[k] for k in order]
    keep = dedupe_points(points, tol, return_index=True)
    return BoundarySampleSet(
        pair=(i, j),
        points=[points[k] for k in keep],
        witnesses=[witnesses[k] for k in keep],
        tol=tol,
    )


# ---------------------------------------------------------------------------
# exports

def export_ppm(grid: ChartGrid, path) -> None:
    """Write the label raster as a binary PPM, one color per attractor,
    black for unresolved cells; rows top-down."""
    res = grid.resolution
    img = np.zeros((res, res, 3), dtype=np.uint8)
    for k in range(int(grid.labels.max()) + 1):
        img[grid.labels == k] = _PALETTE[k % len(_PALETTE)]
    img = img[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{res} {res}\n255\n".encode())
        fh.write(img.tobytes())


def _fmt_parts(p: SpherePoint) -> tuple[str, str]:
    if p.infinite:
        return "inf", "0"
    return "%.17g" % p.z.real, "%.17g" % p.z.imag


def export_boundary_csv(samples: BoundarySampleSet, path) -> None:
    rows = ["re,im,witness_i_re,witness_i_im,witness_j_re,witness_j_im"]
    for p, (wa, wb) in zip(samples.points, samples.witnesses):
        parts = _fmt_parts(p) + _fmt_parts(wa) + _fmt_parts(wb)
        rows.append(",".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
