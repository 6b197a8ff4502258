"""Local superattracting coordinates and their functional equation."""

import cmath
import math

import numpy as np
import pytest

from basinlab.basins import classify
from basinlab.boettcher import (
    BoettcherChart,
    build_chart,
    functional_equation_residual,
)
from basinlab.errors import ChartError
from basinlab.sphere import (
    INFINITY,
    RationalMap,
    eval_map,
    spherical_distance,
)


def test_z2_chart_is_identity(z2):
    chart = build_chart(z2, 0.0, 2)
    assert chart.normalization == pytest.approx(1.0)
    assert chart.local_degree == 2
    # phi is exactly zeta
    assert abs(chart.series[1] - 1.0) < 1e-12
    assert np.max(np.abs(chart.series[2:])) < 1e-12
    p = chart.from_disk(0.2 + 0.1j)
    assert p.to_complex() == pytest.approx(0.2 + 0.1j, abs=1e-12)


def test_z2_chart_at_infinity(z2):
    chart = build_chart(z2, INFINITY, 2)
    assert chart.inverted_frame
    assert chart.normalization == pytest.approx(1.0)
    p = chart.from_disk(0.25)
    assert p.to_complex() == pytest.approx(4.0, abs=1e-12)
    assert chart.from_disk(0j).is_infinite


def test_basilica2_normalization(basilica2):
    # local expansion at 0 is -2u^2 + u^4, so the coordinate scale is -2
    chart = build_chart(basilica2, 0.0, 2)
    assert chart.normalization == pytest.approx(-2.0, abs=1e-10)
    assert functional_equation_residual(basilica2, chart, chart.reference_radius) < 1e-9


def test_newton_normalization(newton_cubic):
    # second derivative 2 at the root gives leading coefficient 1
    chart = build_chart(newton_cubic, 1.0, 2)
    assert chart.normalization == pytest.approx(1.0, abs=1e-10)
    assert chart.reference_radius >= 1e-4


def test_ftheta_charts(ftheta_one):
    chart0 = build_chart(ftheta_one, 0.0, 2)
    assert chart0.normalization == pytest.approx(-3.0, abs=1e-10)
    chart_inf = build_chart(ftheta_one, INFINITY, 2)
    assert chart_inf.normalization == pytest.approx(-3.0, abs=1e-10)


def test_functional_equation_everywhere(z2, basilica2, newton_cubic):
    for m, a in ((z2, 0.0), (z2, INFINITY), (basilica2, 0.0), (basilica2, -1.0),
                 (newton_cubic, 1.0)):
        chart = build_chart(m, a, 2)
        res = functional_equation_residual(m, chart, chart.reference_radius)
        assert res < 1e-9
        # images under the map stay in the basin frame: pulling the radius
        # in by the degree matches iterating once
        z = chart.radius_point(0.37)
        w = eval_map(m, z)
        back = chart.from_disk(
            chart.reference_radius**2 * cmath.exp(2j * cmath.pi * 2 * 0.37)
        )
        assert spherical_distance(w, back) < 1e-9


def test_chart_rejects_bad_input(z2, basilica):
    with pytest.raises(ChartError):
        build_chart(z2, 1.0, 2)  # repelling fixed point
    with pytest.raises(ChartError):
        build_chart(basilica, 0.0, 2)  # 0 is not fixed under z^2 - 1
    with pytest.raises(ChartError):
        build_chart(z2, 0.0, 3)  # wrong local degree
    with pytest.raises(ChartError):
        build_chart(z2, 0.0, 1)


def test_chart_rejects_extra_critical_point_with_atlas():
    # z^3 + 0.3 z^2: 0 is superattracting of local degree 2 and the second
    # finite critical point -0.2 lies in its immediate basin
    m = RationalMap([0, 0, 0.3, 1], [1])
    atlas = classify(m, [0.0, INFINITY], resolution=96, max_iter=200)
    with pytest.raises(ChartError):
        build_chart(m, 0.0, 2, atlas=atlas)
    # without the atlas the purely local construction still succeeds
    chart = build_chart(m, 0.0, 2)
    assert functional_equation_residual(m, chart, chart.reference_radius) < 1e-9


def test_chart_with_atlas_accepts_clean_basins(basilica2):
    atlas = classify(
        basilica2, [0.0, -1.0, INFINITY],
        window=(-2.2, 2.2, -2.2, 2.2), resolution=160, max_iter=300,
    )
    chart = build_chart(basilica2, 0.0, 2, atlas=atlas)
    assert chart.normalization == pytest.approx(-2.0, abs=1e-10)
    chart1 = build_chart(basilica2, -1.0, 2, atlas=atlas)
    assert chart1.normalization == pytest.approx(4.0, abs=1e-10)
