import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_afr import geom2d as g2
from hybrid_afr.errors import GeometryError


def shoelace(pts):
    n = len(pts)
    return 0.5 * sum(pts[k][0] * pts[(k + 1) % n][1] - pts[(k + 1) % n][0] * pts[k][1] for k in range(n))


def test_rectangle_moments():
    A, (cx, cy) = g2.region_moments([g2.rectangle(1, 2, 5, 4)])
    assert A == pytest.approx(8.0)
    assert (cx, cy) == pytest.approx((3.0, 3.0))


def test_circle_with_hole_area():
    outer = [g2.Circle((0.0, 0.0), 3.0, True)]
    hole = [g2.Circle((0.0, 0.0), 1.0, False)]
    A, c = g2.region_moments([outer, hole])
    assert A == pytest.approx(math.pi * 8.0, rel=1e-12)
    assert c == pytest.approx((0.0, 0.0), abs=1e-12)


def test_stadium_area():
    r, L = 1.5, 4.0
    A = g2.loop_area(g2.stadium((0.0, 0.0), (L, 0.0), r))
    assert A == pytest.approx(2 * r * L + math.pi * r * r, rel=1e-12)


def test_reversed_loop_negates_area():
    loop = g2.stadium((0.0, 0.0), (2.0, 1.0), 0.5)
    assert g2.loop_area(g2.reverse_loop(loop)) == pytest.approx(-g2.loop_area(loop))


def test_point_in_region_hole():
    region = [g2.rectangle(0, 0, 10, 10), g2.reverse_loop(g2.rectangle(3, 3, 6, 6))]
    assert g2.point_in_region((1.0, 1.0), region)
    assert not g2.point_in_region((4.0, 4.0), region)
    assert not g2.point_in_region((11.0, 4.0), region)


def test_zero_area_region_rejected():
    with pytest.raises(GeometryError):
        g2.region_moments([])


def test_rect_minus_area_adds_up():
    rect = g2.Rect(0.0, 0.0, 10.0, 6.0)
    bite = [[g2.Circle((10.0, 3.0), 2.0, True)]]
    parts = g2.rect_minus(rect, [bite])
    total = sum(g2.region_moments(p)[0] for p in parts)
    assert total == pytest.approx(60.0 - 0.5 * math.pi * 4.0, rel=1e-12)


def test_line_section_of_annulus():
    region = [[g2.Circle((0.0, 0.0), 2.0, True)], [g2.Circle((0.0, 0.0), 1.0, False)]]
    iv = g2.line_section(region, 1, 0.0)
    assert iv == [pytest.approx((-2.0, -1.0)), pytest.approx((1.0, 2.0))]


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(3, 8),
    r=st.floats(0.5, 20.0),
    rot=st.floats(0.0, 6.28),
    cx=st.floats(-50, 50),
    cy=st.floats(-50, 50),
)
def test_polygon_area_matches_shoelace(n, r, rot, cx, cy):
    pts = g2.regular_polygon((cx, cy), r, n, rot)
    A, c = g2.region_moments([g2.polygon(pts)])
    assert A == pytest.approx(shoelace(pts), rel=1e-9)
    assert A == pytest.approx(0.5 * n * r * r * math.sin(2 * math.pi / n), rel=1e-9)
    assert c == pytest.approx((cx, cy), abs=1e-7)
