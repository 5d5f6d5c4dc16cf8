import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import binary_images, brute_raster, histograms
from maskforge.errors import DataError
from maskforge.geometry import (Orientation, Polygon, Rect, fills_cleanly, is_simple, pixel_winding, simplify_loop,
                                trace_loops, transform_polygon)
from maskforge.raster import fill_loops


def test_rect_rejects_degenerate_and_huge():
    with pytest.raises(DataError):
        Rect(0, 0, 0, 5)
    with pytest.raises(DataError):
        Rect(0, 0, 2**31, 5)
    assert Rect(-3, -4, 5, 6).area == 80


def test_polygon_validation():
    with pytest.raises(DataError):
        Polygon(((0, 0), (4, 0), (4, 4)))
    with pytest.raises(DataError):
        Polygon(((0, 0), (4, 1), (4, 4), (0, 4)))   # diagonal edge
    p = Polygon(((0, 0), (4, 0), (4, 4), (0, 4), (0, 0)))   # closing duplicate dropped
    assert len(p.vertices) == 4 and p.area == 16 and p.signed_area2 > 0


def test_orientations_form_group_of_order_8():
    group = list(Orientation)
    assert len(group) == 8
    for a, b in itertools.product(group, group):
        assert a.compose(b) in group
    for o in group:
        assert o.compose(o.inverse()) is Orientation.R0
    # the rotations are generated by R90
    r = Orientation.R0
    seen = []
    for _ in range(4):
        r = Orientation.R90.compose(r)
        seen.append(r)
    assert seen == [Orientation.R90, Orientation.R180, Orientation.R270, Orientation.R0]


@given(histograms(), st.sampled_from(list(Orientation)), st.integers(-50, 50), st.integers(-50, 50))
def test_transform_then_inverse_restores_vertices(p, o, dx, dy):
    q = transform_polygon(p, o, (dx, dy))
    back = transform_polygon(q.translate(-dx, -dy), o.inverse(), (0, 0))
    assert back.vertices == p.vertices
    assert q.area == p.area


def test_simplify_keeps_spikes_but_drops_collinear_points():
    assert simplify_loop([(0, 0), (2, 0), (4, 0), (4, 4), (0, 4)]) == [(0, 0), (4, 0), (4, 4), (0, 4)]
    spike = [(0, 0), (4, 0), (4, 2), (6, 2), (4, 2), (4, 4), (0, 4)]
    assert len(simplify_loop(spike)) > 4


def test_is_simple():
    assert is_simple(Rect(0, 0, 3, 3).to_polygon())
    bowtie = Polygon(((0, 0), (4, 0), (4, 4), (2, 4), (2, -2), (0, -2)))
    assert not is_simple(bowtie)
    touching = Polygon(((0, 0), (4, 0), (4, 2), (2, 2), (2, 4), (4, 4), (4, 6), (0, 6)))
    assert is_simple(touching)


@given(histograms())
def test_winding_fill_matches_point_in_polygon(p):
    q = p.translate(40, 40)
    for poly in (q, q.reversed()):
        sign = 1 if poly.signed_area2 > 0 else -1
        got = pixel_winding([poly.vertices], 100, 100, [sign]) > 0
        assert np.array_equal(got, brute_raster([q], 100, 100))


@settings(max_examples=200)
@given(binary_images())
def test_trace_then_fill_reproduces_image(img):
    loops = trace_loops(img)
    assert np.array_equal(fill_loops(loops, img.shape[1], img.shape[0]), img)
    for loop in loops:
        assert fills_cleanly(loop)


def test_trace_loops_separates_diagonal_pinch_and_orients_holes():
    pinch = np.array([[1, 0], [0, 1]], dtype=bool)
    assert len(trace_loops(pinch)) == 2
    ring = np.ones((5, 5), dtype=bool)
    ring[2, 2] = False
    loops = trace_loops(ring)
    areas = sorted(Polygon(tuple(l)).signed_area2 for l in loops)
    assert areas == [-2, 50]   # hole wound clockwise, outer counter-clockwise


def test_fills_cleanly_accepts_vertex_touch_rejects_crossing():
    pinched = [(1, 2), (3, 2), (3, 5), (0, 5), (0, 3), (1, 3), (1, 4), (2, 4), (2, 3), (1, 3)]
    assert fills_cleanly(pinched) and not is_simple(Polygon(tuple(pinched)))
    figure8 = [(0, 0), (4, 0), (4, 4), (2, 4), (2, -2), (0, -2)]
    assert not fills_cleanly(figure8)
    # a loop winding twice around its core
    double = [(0, 0), (6, 0), (6, 6), (1, 6), (1, 1), (5, 1), (5, 5), (0, 5)]
    assert not fills_cleanly(double)
