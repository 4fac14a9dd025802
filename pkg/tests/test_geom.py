"""Geometry kernel checks against brute-force oracles."""

import math

import numpy as np
import pytest

from hardylab._geom import (
    Box,
    PolylineIndex,
    box_segment_dist,
    point_box_dist,
    point_segment_dist,
    polygon_area,
)


def brute_segment_dist(p, a, b, m=2001):
    t = np.linspace(0.0, 1.0, m)
    pts = np.asarray(a) + t[:, None] * (np.asarray(b) - np.asarray(a))
    return float(np.min(np.sqrt(np.sum((pts - p) ** 2, axis=1))))


def test_point_segment_exact_cases():
    a, b = (0.0, 0.0), (1.0, 0.0)
    d = point_segment_dist(np.array([[0.5, 0.3], [2.0, 0.0], [-1.0, 0.0], [0.25, 0.0]]), a, b)
    assert d == pytest.approx([0.3, 1.0, 1.0, 0.0])


def test_point_segment_degenerate():
    d = point_segment_dist(np.array([[1.0, 1.0]]), (0.0, 0.0), (0.0, 0.0))
    assert d[0] == pytest.approx(math.sqrt(2.0))


def test_point_segment_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a, b = rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2)
        p = rng.uniform(-3, 3, 2)
        exact = point_segment_dist(p[None, :], a, b)[0]
        brute = brute_segment_dist(p, a, b)
        assert exact <= brute + 1e-12
        assert brute - exact < 5e-3


def test_box_segment_dist_disjoint():
    lo, hi = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    # horizontal segment above the box
    assert box_segment_dist(lo, hi, (0.2, 2.0), (0.8, 2.0)) == pytest.approx(1.0)
    # diagonal pointing away from the corner
    d = box_segment_dist(lo, hi, (2.0, 2.0), (3.0, 3.0))
    assert d == pytest.approx(math.sqrt(2.0))


def test_box_segment_dist_crossing_and_inside():
    lo, hi = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    assert box_segment_dist(lo, hi, (-1.0, 0.5), (2.0, 0.5)) == 0.0
    assert box_segment_dist(lo, hi, (0.4, 0.4), (0.6, 0.6)) == 0.0
    # endpoint exactly on the box edge
    assert box_segment_dist(lo, hi, (1.0, 0.5), (2.0, 0.5)) == 0.0


def test_box_segment_dist_random_vs_brute():
    rng = np.random.default_rng(11)
    for _ in range(60):
        lo = rng.uniform(-2, 0, 2)
        hi = lo + rng.uniform(0.1, 2, 2)
        a, b = rng.uniform(-4, 4, 2), rng.uniform(-4, 4, 2)
        exact = float(np.min(box_segment_dist(lo, hi, a, b)))
        # sample the segment, measure to the box
        t = np.linspace(0, 1, 801)
        pts = a + t[:, None] * (b - a)
        brute = float(np.min(point_box_dist(pts, lo, hi)))
        assert exact <= brute + 1e-12
        assert brute - exact < 2e-2


def test_polygon_area_square():
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert polygon_area(sq) == pytest.approx(1.0)
    assert polygon_area(sq[::-1]) == pytest.approx(-1.0)


# -- polyline index ----------------------------------------------------


def zigzag(n=40, seed=3):
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 4, n)
    y = rng.uniform(-0.3, 0.3, n)
    return np.column_stack([x, y])


def test_index_distance_matches_direct_scan():
    part = zigzag()
    idx = PolylineIndex([part])
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1, 5, size=(200, 2))
    got = idx.distance(pts)
    direct = np.full(len(pts), np.inf)
    for a, b in zip(part[:-1], part[1:]):
        direct = np.minimum(direct, point_segment_dist(pts, a, b))
    assert np.allclose(got, direct, atol=1e-12)


def test_index_mixed_segment_lengths():
    # one very long segment next to many short ones must not break
    # the certified candidate search
    short = zigzag(60)
    long_part = np.array([[0.0, 5.0], [100.0, 5.0]])
    idx = PolylineIndex([short, long_part])
    pts = np.array([[2.0, 4.9], [2.0, 0.35], [50.0, 5.2], [2.0, 2.0]])
    got = idx.distance(pts)
    direct = np.full(len(pts), np.inf)
    for part in (short, long_part):
        for a, b in zip(part[:-1], part[1:]):
            direct = np.minimum(direct, point_segment_dist(pts, a, b))
    assert np.allclose(got, direct, atol=1e-12)


def test_index_box_distance_matches_direct_scan():
    part = zigzag()
    idx = PolylineIndex([part])
    rng = np.random.default_rng(9)
    lo = rng.uniform(-1, 4, size=(100, 2))
    hi = lo + rng.uniform(0.05, 0.8, size=(100, 2))
    got = idx.box_distance(lo, hi)
    direct = np.full(len(lo), np.inf)
    for a, b in zip(part[:-1], part[1:]):
        direct = np.minimum(direct, box_segment_dist(lo, hi, a, b))
    assert np.allclose(got, direct, atol=1e-12)


def test_nearest_reports_minimizing_segment():
    part = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    idx = PolylineIndex([part])
    d, seg = idx.nearest(np.array([[0.5, -0.2], [1.3, 0.5]]))
    assert d == pytest.approx([0.2, 0.3])
    assert seg[0] == 0 and seg[1] == 1


def crossing_number_inside(loop, pts):
    """Even-odd ray casting oracle, independent of the index."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(loop)
    for i in range(n):
        x1, y1 = loop[i]
        x2, y2 = loop[(i + 1) % n]
        cond = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
        inside ^= cond & (x < xs)
    return inside


def test_inside_matches_crossing_number():
    # wobbly closed loop around the origin
    t = np.linspace(0, 2 * math.pi, 60, endpoint=False)
    r = 1.0 + 0.25 * np.sin(5 * t)
    loop = np.column_stack([r * np.cos(t), r * np.sin(t)])
    idx = PolylineIndex([loop], closed=[True])
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1.6, 1.6, size=(500, 2))
    got = idx.inside(pts)
    want = crossing_number_inside(loop, pts)
    # disagreements may only happen within float noise of the boundary
    bad = got != want
    if np.any(bad):
        d = idx.distance(pts[bad])
        assert np.all(d < 1e-9)


def test_inside_square_loop():
    loop = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    idx = PolylineIndex([loop], closed=[True])
    pts = np.array([[0.5, 0.5], [1.5, 0.5], [-0.1, 0.5], [0.5, 1.2]])
    assert list(idx.inside(pts)) == [True, False, False, False]


def test_box_helpers():
    b = Box((0.0, 0.0), (2.0, 1.0))
    assert b.volume == pytest.approx(2.0)
    assert b.center == (1.0, 0.5)
    assert b.diam == pytest.approx(math.sqrt(5.0))
    assert b.contains_point((1.0, 0.5))
    assert not b.contains_point((3.0, 0.5))
    s = b.scaled_about_center(2.0)
    assert s.lo == (-1.0, -0.5) and s.hi == (3.0, 1.5)
    with pytest.raises(ValueError):
        Box((1.0, 0.0), (0.0, 1.0))
