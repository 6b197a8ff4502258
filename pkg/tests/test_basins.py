"""Basin rasters, immediate components, boundary intersection sampling."""

import cmath
import math

import numpy as np
import pytest

from basinlab.basins import (
    BasinAtlas,
    boundary_intersection,
    classify,
    classify_point,
    export_boundary_csv,
    export_ppm,
    immediate_component,
)
from basinlab.errors import AtlasError
from basinlab.sphere import INFINITY, eval_map, spherical_distance

ALPHA = (1.0 - math.sqrt(5.0)) / 2.0
OMEGA = cmath.exp(2j * cmath.pi / 3)


@pytest.fixture(scope="module")
def z2_atlas(z2):
    return classify(z2, [0.0, INFINITY], window=(-2, 2, -2, 2), resolution=96, max_iter=300)


@pytest.fixture(scope="module")
def basilica_atlas(basilica2):
    return classify(
        basilica2, [0.0, -1.0, INFINITY],
        window=(-2.2, 2.2, -2.2, 2.2), resolution=160, max_iter=400,
    )


@pytest.fixture(scope="module")
def newton_atlas(newton_cubic):
    return classify(
        newton_cubic, [1.0 + 0j, OMEGA, OMEGA.conjugate()],
        window=(-2.5, 2.5, -2.5, 2.5), resolution=256, max_iter=120,
    )


def test_z2_labels_match_modulus(z2_atlas):
    aff = z2_atlas.affine
    zz = aff.xs[None, :] + 1j * aff.ys[:, None]
    assert np.all(aff.labels[np.abs(zz) < 0.95] == 0)
    assert np.all(aff.labels[np.abs(zz) > 1.05] == 1)
    assert (aff.labels == -1).mean() < 0.02
    inv = z2_atlas.inverted_chart
    ww = inv.xs[None, :] + 1j * inv.ys[:, None]
    assert np.all(inv.labels[np.abs(ww) < 0.95] == 1)


def test_z2_capture_radii(z2_atlas):
    assert all(r >= 1e-3 for r in z2_atlas.capture_radii)


def test_z2_immediate_mask_area(z2_atlas):
    mask_a, mask_i = immediate_component(z2_atlas, 0)
    # the unit disk fills pi/16 of the [-2,2]^2 window
    assert mask_a.mean() == pytest.approx(math.pi / 16.0, abs=0.01)
    # in the inverted chart the same component shows up as the window
    # corners outside |w| = 1, stitched across the chart seam
    corner_frac = 1.0 - math.pi / (4.0 * 1.05**2)
    assert mask_i.mean() == pytest.approx(corner_frac, abs=0.02)


def test_classify_point_matches_grid(z2_atlas, rng):
    aff = z2_atlas.affine
    for _ in range(50):
        r = int(rng.integers(0, aff.resolution))
        c = int(rng.integers(0, aff.resolution))
        lab = aff.labels[r, c]
        if lab >= 0:
            assert classify_point(z2_atlas, aff.point(r, c)) == lab


def test_label_stability_under_doubling(z2):
    coarse = classify(z2, [0.0, INFINITY], resolution=64, max_iter=300)
    fine = classify(z2, [0.0, INFINITY], resolution=128, max_iter=300)
    ca, fa = coarse.affine.labels, fine.affine.labels
    sub = fa[::2, ::2]
    both = (ca >= 0) & (sub >= 0)
    assert (ca[both] == sub[both]).mean() >= 0.99


def test_classify_errors(z2):
    with pytest.raises(AtlasError):
        classify(z2, [])
    with pytest.raises(AtlasError):
        classify(z2, [1.0])  # repelling fixed point
    atlas = classify(z2, [0.0, INFINITY], window=(5, 6, 5, 6), resolution=32, max_iter=50)
    with pytest.raises(AtlasError):
        immediate_component(atlas, 0)


def test_basilica_masks(basilica_atlas):
    m0 = immediate_component(basilica_atlas, 0)
    m1 = immediate_component(basilica_atlas, 1)
    aff = basilica_atlas.affine
    assert m0[0][aff.pixel_of(0.0 + 0j)]
    assert m0[0][aff.pixel_of(0.3 + 0j)]
    assert m1[0][aff.pixel_of(-1.0 + 0j)]
    assert not m0[0][aff.pixel_of(-1.0 + 0j)]
    assert not (m0[0] & m1[0]).any()


def test_basilica_boundary_clusters_at_alpha(basilica2, basilica_atlas):
    s = boundary_intersection(basilica2, basilica_atlas, 0, 1, tol=1e-9)
    assert s.points
    assert all(abs(p.to_complex() - ALPHA) < 1e-6 for p in s.points)
    assert all(spherical_distance(a, b) < 1e-9 for a, b in s.witnesses)


def test_witnesses_really_converge(basilica2, basilica_atlas):
    s = boundary_intersection(basilica2, basilica_atlas, 0, 1, tol=1e-9)
    for a, b in s.witnesses[:3]:
        assert classify_point(basilica_atlas, a) == 0
        assert classify_point(basilica_atlas, b) == 1


def test_newton_threefold_symmetry(newton_atlas, rng):
    hits = 0
    for _ in range(200):
        z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        l1 = classify_point(newton_atlas, z)
        l2 = classify_point(newton_atlas, OMEGA * z)
        if l1 >= 0 and l2 >= 0:
            hits += 1
            assert l2 == (l1 + 1) % 3
    assert hits > 150


def test_newton_channel_reaches_infinity_chart(newton_atlas):
    mask_a, mask_i = immediate_component(newton_atlas, 0)
    assert mask_a[:, -1].any()  # unbounded along the positive real axis
    assert mask_i[newton_atlas.inverted_chart.pixel_of(0.02 + 0j)]


def test_newton_boundary_near_zero_and_infinity(newton_cubic, newton_atlas):
    tol = 2e-2
    s = boundary_intersection(newton_cubic, newton_atlas, 0, 1, tol=tol)
    assert min(spherical_distance(p, 0.0) for p in s.points) < 2 * tol
    assert min(spherical_distance(p, INFINITY) for p in s.points) < 2 * tol
    fine = boundary_intersection(newton_cubic, newton_atlas, 0, 1, tol=1e-8)
    assert min(spherical_distance(p, INFINITY) for p in fine.points) < 1e-6


def test_forward_near_invariance(z2, z2_atlas):
    tol = 5e-3
    s = boundary_intersection(z2, z2_atlas, 0, 1, tol=tol)
    for p in s.points[::5]:
        image = eval_map(z2, p)
        assert min(spherical_distance(image, q) for q in s.points) < 10 * tol


def test_ppm_export(tmp_path, z2_atlas):
    path = tmp_path / "atlas.ppm"
    export_ppm(z2_atlas.affine, path)
    data = path.read_bytes()
    assert data.startswith(b"P6\n96 96\n255\n")
    assert len(data) == len(b"P6\n96 96\n255\n") + 3 * 96 * 96
    export_ppm(z2_atlas.affine, tmp_path / "again.ppm")
    assert (tmp_path / "again.ppm").read_bytes() == data


def test_boundary_csv_export(tmp_path, basilica2, basilica_atlas):
    s = boundary_intersection(basilica2, basilica_atlas, 0, 1, tol=1e-9)
    path = tmp_path / "boundary.csv"
    export_boundary_csv(s, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "re,im,witness_i_re,witness_i_im,witness_j_re,witness_j_im"
    assert len(lines) == len(s.points) + 1
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(ALPHA, abs=1e-6)
