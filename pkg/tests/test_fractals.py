"""Koch curve and fat Cantor tree oracles.

Reference values are computed here from first principles (closed-form
ratios, exact Fraction recursions, brute-force cell scans) so that the
library implementations are checked against independent arithmetic.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from hardylab.fractals import (
    CantorTree,
    EpsilonSchedule,
    UndecidableMembership,
    cantor_ball_density,
    cantor_build,
    cantor_density,
    koch_angle,
    koch_curve,
    koch_ratio,
    schedule_composite,
    schedule_constant,
    schedule_scaled_corner,
)

LOG43 = math.log(4) / math.log(3)


# -- generator calibration ---------------------------------------------


def test_ratio_recovers_one_third():
    # lam = log4/log3 must reproduce the classical quartic generator
    assert koch_ratio(LOG43) == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert math.degrees(koch_angle(LOG43)) == pytest.approx(60.0, abs=1e-12)


def test_ratio_flat_curve():
    assert koch_ratio(1.0) == pytest.approx(0.25, abs=1e-15)
    assert koch_angle(1.0) == pytest.approx(0.0, abs=1e-7)


def test_ratio_intermediate_dimension():
    r = koch_ratio(1.5)
    # defining relation: four copies scaled by r tile a lam-set, r = 4**(-1/lam)
    assert r == pytest.approx(4.0 ** (-1.0 / 1.5), abs=1e-15)
    th = koch_angle(1.5)
    # generator closes: 2r + 2r*cos(theta) = 1
    assert 2 * r + 2 * r * math.cos(th) == pytest.approx(1.0, abs=1e-12)


def test_ratio_validation():
    with pytest.raises(ValueError):
        koch_ratio(0.9)
    with pytest.raises(ValueError):
        koch_ratio(2.0)


# -- curve construction ------------------------------------------------


def test_curve_vertex_count_and_endpoints():
    for g in range(0, 5):
        c = koch_curve(LOG43, g)
        assert c.n_segments == 4**g
        assert len(c.vertices) == 4**g + 1
        np.testing.assert_allclose(c.vertices[0], [0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(c.vertices[-1], [1.0, 0.0], atol=1e-14)


def test_curve_segment_lengths_uniform():
    c = koch_curve(1.5, 4)
    seg = np.diff(c.vertices, axis=0)
    lens = np.sqrt(np.sum(seg**2, axis=1))
    r = koch_ratio(1.5)
    assert np.allclose(lens, r**4, rtol=1e-12)
    assert c.segment_length == pytest.approx(r**4, rel=1e-12)


def test_curve_total_length_scaling():
    # length grows like 4**(g*(1 - 1/lam))
    for lam in (LOG43, 1.5, 1.0):
        c = koch_curve(lam, 5)
        assert c.total_length == pytest.approx(4.0 ** (5 * (1 - 1 / lam)), rel=1e-12)


def test_curve_apex_height():
    # generation 1: the apex sits at height r*sin(theta) over the midpoint
    for lam in (LOG43, 1.5):
        c = koch_curve(lam, 1)
        r, th = koch_ratio(lam), koch_angle(lam)
        apex = c.vertices[2]
        assert apex[0] == pytest.approx(0.5, abs=1e-12)
        assert apex[1] == pytest.approx(r * math.sin(th), abs=1e-12)


def test_curve_classical_third_points():
    c = koch_curve(LOG43, 1)
    np.testing.assert_allclose(c.vertices[1], [1 / 3, 0.0], atol=1e-12)
    np.testing.assert_allclose(c.vertices[3], [2 / 3, 0.0], atol=1e-12)


def test_curve_base_and_orientation():
    base = ((1.0, 2.0), (3.0, 2.0))
    up = koch_curve(LOG43, 2, base, orientation=1)
    down = koch_curve(LOG43, 2, base, orientation=-1)
    assert up.vertices[:, 1].max() > 2.0
    assert down.vertices[:, 1].min() < 2.0
    np.testing.assert_allclose(up.vertices[0], base[0])
    np.testing.assert_allclose(up.vertices[-1], base[1])


def test_refinement_stays_within_margin():
    # the limit curve lies within approx_margin of every generation
    lam = 1.4
    coarse = koch_curve(lam, 3)
    fine = koch_curve(lam, 8)
    from hardylab._geom import PolylineIndex

    idx = PolylineIndex([coarse.vertices])
    d = idx.distance(fine.vertices)
    assert float(np.max(d)) <= coarse.approx_margin * (1 + 1e-9)


def test_subtree_boxes_cover_descendants():
    lam = LOG43
    c = koch_curve(lam, 2)
    fine = koch_curve(lam, 7)
    lo, hi = c.subtree_boxes(2)
    assert len(lo) == 16
    # every fine vertex must fall in at least one padded box
    inside_any = np.zeros(len(fine.vertices), dtype=bool)
    for k in range(len(lo)):
        m = np.all((fine.vertices >= lo[k]) & (fine.vertices <= hi[k]), axis=1)
        inside_any |= m
    assert np.all(inside_any)


# -- epsilon schedules -------------------------------------------------


def test_schedule_constant_values():
    s = schedule_constant(Fraction(1, 8))
    assert s.value(0) == Fraction(1, 8)
    assert s.value(3) == Fraction(1, 64)
    assert s.tail(0) == Fraction(1, 4)
    # tail dominates the actual sum
    assert sum(s.value(k) for k in range(40)) < s.tail(0)


def test_schedule_composite_split():
    s = schedule_composite(Fraction(1, 4))
    total = sum(s.value(k) for k in range(60))
    assert total < s.tail(0) <= Fraction(1, 8)


def test_schedule_scaled_corner_integer_case():
    # sp = 1 gives the exact 2**-(3k)/4 sequence
    s = schedule_scaled_corner(1.0)
    assert s.exact_tail
    assert s.value(0) == Fraction(1, 4)
    assert s.value(2) == Fraction(1, 256)
    assert s.value(1) / s.value(0) == Fraction(1, 8)


def test_schedule_validation():
    with pytest.raises(ValueError):
        EpsilonSchedule(
            value=lambda k: Fraction(3, 4), tail=lambda k: Fraction(3, 2), exact_tail=True
        )


def test_zero_schedule_is_plain_quadrisection():
    z = EpsilonSchedule(value=lambda k: Fraction(0), tail=lambda k: Fraction(0), exact_tail=True)
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), z)
    assert t.side(4) == Fraction(1, 16)
    assert t.product_measure(8) == 1
    b = t.measure_bracket(8)
    assert b.lower == b.upper == 1.0


# -- cantor tree geometry ----------------------------------------------


def ref_sides(schedule, depth):
    """Independent side-length recursion l_{k+1} = (1 - eps_k) l_k / 2."""
    sides = [Fraction(1)]
    for k in range(depth):
        sides.append((1 - schedule.value(k)) * sides[-1] / 2)
    return sides


def test_side_recursion_matches_reference():
    s = schedule_constant(Fraction(1, 10))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    ref = ref_sides(s, 6)
    for k in range(7):
        assert t.side(k) == ref[k]
        # halving window
        if k:
            assert ref[k - 1] / 4 <= ref[k] <= ref[k - 1] / 2


def test_measure_exact_product():
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    for depth in range(5):
        want = Fraction(1)
        for k in range(depth):
            want *= (1 - s.value(k)) ** 2
        assert t.product_measure(depth) == want
        # consistency: 4**depth cells of area side(depth)**2
        assert t.product_measure(depth) == 4**depth * t.side(depth) ** 2


def test_measure_bracket_encloses_limit():
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    limit = Fraction(1)
    for k in range(200):
        limit *= (1 - s.value(k)) ** 2
    for depth in (2, 5, 9):
        b = t.measure_bracket(depth)
        assert b.lower <= float(limit) <= b.upper
    # brackets tighten with depth
    assert t.measure_bracket(9).width < t.measure_bracket(2).width


def test_cell_corners_and_count():
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    assert t.cell_count(0) == 1
    assert t.cell_count(3) == 64
    lo, side = t.cells(2)
    assert len(lo) == 16
    assert side == pytest.approx(float(t.side(2)))
    # the root corners persist at every depth
    for corner in ([0.0, 0.0], [1.0 - side, 0.0], [0.0, 1.0 - side], [1.0 - side, 1.0 - side]):
        assert np.any(np.all(np.isclose(lo, corner, atol=1e-15), axis=1))


def test_corridor_rects_tile_the_gap():
    s = schedule_constant(Fraction(1, 6))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    los, his = t.corridor_rects(0)
    assert len(los) == 3
    areas = (his - los).prod(axis=1)
    eps = 1.0 / 6.0
    # cross of width eps: area eps*(2 - eps) of the unit cell
    assert float(np.sum(areas)) == pytest.approx(eps * (2 - eps), abs=1e-12)
    # rects are pairwise disjoint
    for i in range(3):
        for j in range(i + 1, 3):
            overlap_x = min(his[i][0], his[j][0]) - max(los[i][0], los[j][0])
            overlap_y = min(his[i][1], his[j][1]) - max(los[i][1], los[j][1])
            assert overlap_x <= 1e-15 or overlap_y <= 1e-15


def test_membership_statuses():
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    # corridor center leaves at depth 0
    res = t.membership(np.array([0.5, 0.5]), max_depth=6)
    assert res.status == "outside" and res.depth == 0
    # the origin corner never leaves
    res = t.membership(np.array([0.0, 0.0]), max_depth=12)
    assert res.status == "undecided" and res.depth == 12
    # outside the root box
    res = t.membership(np.array([1.7, 0.3]), max_depth=6)
    assert res.status == "outside" and res.depth == -1


def test_contains_decided():
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    assert not t.contains_decided(np.array([0.5, 0.5]), max_depth=6)
    with pytest.raises(UndecidableMembership):
        t.contains_decided(np.array([0.0, 0.0]), max_depth=6)


def test_distance_bracket_against_cell_scan():
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    depth = 5
    lo_cells, side = t.cells(depth)
    hi_cells = lo_cells + side
    rng = np.random.default_rng(4)
    pts = rng.uniform(-0.3, 1.3, size=(60, 2))
    lo, up = t.distance_bracket(pts, depth=depth)
    # oracle: distance to the depth-5 cell union brackets dist(x, K)
    for i, p in enumerate(pts):
        gap = np.maximum(np.maximum(lo_cells - p, p - hi_cells), 0.0)
        d_cells = float(np.min(np.sqrt(np.sum(gap**2, axis=1))))
        corner = np.min(
            [
                np.min(np.sqrt(np.sum((lo_cells - p) ** 2, axis=1))),
                np.min(np.sqrt(np.sum((np.column_stack([lo_cells[:, 0] + side, lo_cells[:, 1]]) - p) ** 2, axis=1))),
                np.min(np.sqrt(np.sum((np.column_stack([lo_cells[:, 0], lo_cells[:, 1] + side]) - p) ** 2, axis=1))),
                np.min(np.sqrt(np.sum((hi_cells - p) ** 2, axis=1))),
            ]
        )
        assert lo[i] <= d_cells + 1e-12
        assert up[i] <= corner + 1e-12
        assert lo[i] <= up[i]


def test_distance_bracket_at_persistent_corner():
    # the root corner stays in K forever, so its distance is exactly zero
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    lo, up = t.distance_bracket(np.array([[0.0, 0.0]]), depth=6)
    assert lo[0] == 0.0
    assert up[0] == 0.0
    # the center of a depth-6 cell is unresolved: zero lower, open upper
    c = float(t.side(6)) / 2
    lo2, up2 = t.distance_bracket(np.array([[c, c]]), depth=6)
    assert lo2[0] == 0.0
    assert up2[0] > 0.0


def test_density_lower_formula():
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    # 1 - sum_{k' >= k} 2 eps_{k'} with the exact tail
    for k in (0, 2, 4):
        want = 1 - 2 * s.tail(k)
        assert t.density_lower(k) == pytest.approx(float(want))
    assert cantor_density(t, 3) == pytest.approx(
        float(t.side(3) ** 2 * (1 - 2 * s.tail(3)))
    )


def axis_offsets(schedule, depth):
    """Independent recursion for the 1-D cell offsets at a depth."""
    sides = ref_sides(schedule, depth)
    offs = [Fraction(0)]
    for k in range(depth):
        shift = sides[k] - sides[k + 1]
        offs = offs + [o + shift for o in offs]
    return np.sort(np.array([float(o) for o in offs])), float(sides[depth])


def test_ball_density_monte_carlo():
    s = schedule_constant(Fraction(1, 12))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    rng = np.random.default_rng(17)
    x = (0.0, 0.0)
    depth = 9
    offs, side = axis_offsets(s, depth)

    def in_union_1d(v):
        # the cell union is a product set, so test each axis separately
        i = np.clip(np.searchsorted(offs, v, side="right") - 1, 0, len(offs) - 1)
        return (v >= offs[i]) & (v <= offs[i] + side)

    for r in (0.05, 0.2):
        lower = cantor_ball_density(t, x, r)
        # Monte Carlo estimate of |K meet B(x, r)| via the depth-9 cover
        m = 40_000
        pts = np.asarray(x) + rng.uniform(-r, r, size=(m, 2))
        keep = np.sum(pts**2, axis=1) <= r * r
        pts = pts[keep]
        in_cell = in_union_1d(pts[:, 0]) & in_union_1d(pts[:, 1])
        mc_estimate = np.mean(in_cell) * (2 * r) ** 2
        noise = 4 * (2 * r) ** 2 / math.sqrt(len(pts))
        assert lower <= mc_estimate + noise


def test_ball_density_rejects_outside_center():
    s = schedule_constant(Fraction(1, 8))
    t = CantorTree((Fraction(0), Fraction(0)), Fraction(1), s)
    with pytest.raises(UndecidableMembership):
        cantor_ball_density(t, (3.0, 3.0), 0.1)


def test_cantor_build_from_cube():
    from hardylab.dyadic import DyadicCube

    cube = DyadicCube(1, 1, 0)
    s = schedule_constant(Fraction(1, 8))
    t = cantor_build(cube, s)
    assert t.lo == (Fraction(1, 2), Fraction(0))
    assert t.side0 == Fraction(1, 2)
    assert t.product_measure(2) == Fraction(1, 4) * (Fraction(7, 8) * Fraction(15, 16)) ** 2
