import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab.domains import CoreMinusCantor, HalfPlaneAboveCurve, square_domain
from hardylab.fractals import EpsilonSchedule
from hardylab.quadrature import TestFunction
from hardylab.testfns import (
    RampFamily,
    Trapezoid,
    make_core_family,
    make_local_family,
    make_scaled_family,
    make_shell_family,
    modulus_check,
    mollification_check,
    smoothstep,
)


@pytest.fixture(scope="module")
def curve_dom():
    # coarse generation keeps the segment index small; the collar
    # geometry the family relies on is the same
    return HalfPlaneAboveCurve(generation=5)


@pytest.fixture(scope="module")
def dust_dom():
    return CoreMinusCantor(tree_depth=12)


def test_smoothstep_shape():
    t = np.array([-1.0, 0.0, 0.25, 0.5, 1.0, 3.0])
    s = smoothstep(t)
    assert s[0] == 0.0 and s[1] == 0.0
    assert s[3] == 0.5
    assert s[4] == 1.0 and s[5] == 1.0
    fine = smoothstep(np.linspace(0, 1, 1001))
    assert np.all(np.diff(fine) >= 0.0)
    # peak slope of the cubic is exactly 1.5 at the midpoint
    assert np.max(np.diff(fine)) <= 1.5 * 1e-3 + 1e-12


def test_trapezoid_eval_and_interval():
    tr = Trapezoid(-2.0, -1.0, 1.0, 2.0)
    vals = tr.eval(np.array([-3.0, -2.0, -1.5, -1.0, 0.0, 1.5, 2.0, 5.0]))
    np.testing.assert_allclose(vals, [0.0, 0.0, 0.5, 1.0, 1.0, 0.5, 0.0, 0.0])
    assert tr.interval(-1.5, 0.0) == (0.5, 1.0)
    assert tr.interval(-3.0, -2.5) == (0.0, 0.0)
    assert tr.interval(1.25, 1.75) == (0.25, 0.75)
    lo, hi = tr.interval(-3.0, 3.0)
    assert (lo, hi) == (0.0, 1.0)
    assert tr.lip(-3.0, -2.5) == 0.0
    assert tr.lip(-1.5, 0.0) == 1.0
    assert tr.lip(0.0, 0.5) == 0.0
    assert tr.slope == 1.0


def test_trapezoid_one_sided():
    tr = Trapezoid(-math.inf, -math.inf, 1.5, 2.0)
    np.testing.assert_allclose(tr.eval(np.array([-50.0, 1.5, 1.75, 2.0])), [1.0, 1.0, 0.5, 0.0])
    assert tr.interval(-10.0, 0.0) == (1.0, 1.0)
    assert tr.lip(-10.0, 0.0) == 0.0
    assert tr.lip(1.6, 1.9) == 2.0
    assert tr.slope == 2.0


def test_trapezoid_validation():
    with pytest.raises(ValueError):
        Trapezoid(0.0, 2.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        Trapezoid(1.0, 1.0, 2.0, 3.0)
    with pytest.raises(ValueError):
        Trapezoid(0.0, 1.0, 2.0, 2.0)


def test_core_family_values_on_square():
    sq = square_domain()
    u = make_core_family(sq, 2)
    assert isinstance(u, TestFunction)
    assert u.exact_values
    # dist 0.5 >= plateau 0.25 -> 1; dist at mid-band 3/16 -> exactly 1/2;
    # dist at vanish 1/8 -> 0
    pts = np.array([[0.5, 0.5], [0.5, 3.0 / 16.0], [0.5, 0.125], [0.5, 0.01]])
    np.testing.assert_allclose(u.value(pts), [1.0, 0.5, 0.0, 0.0])
    assert u.sup_bound == 1.0
    assert u.lip_bound == pytest.approx(1.5 / u.band)
    assert u.lip_outside_band == 0.0
    assert u.support is None


def test_family_index_validation():
    sq = square_domain()
    for factory in (make_core_family, make_shell_family, make_local_family):
        with pytest.raises(ValueError):
            factory(sq, 0)
    with pytest.raises(ValueError):
        RampFamily(sq, 1, vanish=0.5, plateau=0.5)
    with pytest.raises(ValueError):
        RampFamily(sq, 1, vanish=-0.1, plateau=0.5)


def test_families_monotone_in_index():
    sq = square_domain()
    rng = np.random.default_rng(3)
    pts = rng.random((256, 2))
    for factory in (make_core_family, make_shell_family):
        prev = factory(sq, 1).value(pts)
        for m in range(2, 7):
            cur = factory(sq, m).value(pts)
            assert np.all(cur >= prev - 1e-15)
            assert np.all(cur >= 0.0) and np.all(cur <= 1.0)
            prev = cur


def test_value_box_containment_square():
    sq = square_domain()
    u = make_core_family(sq, 2)
    rng = np.random.default_rng(11)
    for _ in range(200):
        lo = rng.random(2) * 0.8
        hi = lo + rng.random(2) * 0.19 + 0.01
        vlo, vhi = u.value_box(lo, hi)
        pts = lo + (hi - lo) * rng.random((32, 2))
        vals = u.value(pts)
        assert np.all(vals >= vlo - 1e-12)
        assert np.all(vals <= vhi + 1e-12)


@settings(max_examples=40, deadline=None)
@given(
    x0=st.floats(0.0, 0.7),
    y0=st.floats(0.0, 0.7),
    w=st.floats(0.01, 0.3),
    h=st.floats(0.01, 0.3),
    m=st.integers(1, 5),
)
def test_value_box_containment_shell(x0, y0, w, h, m):
    sq = square_domain()
    u = make_shell_family(sq, m)
    lo = np.array([x0, y0])
    hi = np.array([min(x0 + w, 1.0), min(y0 + h, 1.0)])
    vlo, vhi = u.value_box(lo, hi)
    ts = np.linspace(0.0, 1.0, 5)
    gx, gy = np.meshgrid(lo[0] + ts * (hi[0] - lo[0]), lo[1] + ts * (hi[1] - lo[1]))
    vals = u.value(np.stack([gx.ravel(), gy.ravel()], axis=1))
    assert np.all(vals >= vlo - 1e-12)
    assert np.all(vals <= vhi + 1e-12)


def test_modulus_check_core():
    sq = square_domain()
    u = make_core_family(sq, 3)
    from hardylab._geom import Box

    rep = modulus_check(u, box=Box((0.0, 0.0), (1.0, 1.0)), pairs=400)
    assert rep["ok"]
    assert rep["sup"] <= 1.0


def test_local_family_collar_is_bare_ramp(curve_dom):
    G = curve_dom
    u = make_local_family(G, 3)
    assert u.exact_values
    h = G.curve_height_bound()
    assert h + 1.0 <= 1.5
    # plateau region: central strip, above the curve by more than 2^-3
    rng = np.random.default_rng(5)
    pts = np.stack([rng.uniform(-1, 1, 300), rng.uniform(h + 0.125 + 0.01, 1.4, 300)], axis=1)
    dlo, _ = G.dist_boundary(pts)
    on_plateau = dlo >= u.plateau
    assert on_plateau.sum() > 100
    np.testing.assert_array_equal(u.value(pts[on_plateau]), 1.0)


def test_local_family_vanishes_outside_box(curve_dom):
    u = make_local_family(curve_dom, 2)
    pts = np.array(
        [
            [2.0, 1.0],
            [2.5, 1.0],
            [-2.1, 0.5],
            [0.0, 2.0],
            [0.0, 2.3],
            [1.0, -0.1],
            [-3.0, -1.0],
        ]
    )
    np.testing.assert_array_equal(u.value(pts), 0.0)
    from hardylab._geom import Box

    assert u.support == Box((-2.0, 0.0), (2.0, 2.0))


def test_local_family_gradient_scales(curve_dom):
    for m in (1, 3, 5):
        u = make_local_family(curve_dom, m)
        assert u.lip_bound <= 6.0 * 2.0**m
        assert u.lip_outside_band == 3.0
        rep = modulus_check(u, pairs=400)
        assert rep["ok"]


def test_local_family_flat_off_band(curve_dom):
    u = make_local_family(curve_dom, 4)
    # a central plateau box: distance range sits above the band
    lo = np.array([-0.5, 0.5])
    hi = np.array([-0.3, 0.7])
    assert u.lip_box(lo, hi) <= u.lip_outside_band
    rng = np.random.default_rng(9)
    a = lo + (hi - lo) * rng.random((200, 2))
    b = lo + (hi - lo) * rng.random((200, 2))
    diff = np.abs(u.value(a) - u.value(b))
    sep = np.sqrt(np.sum((a - b) ** 2, axis=1))
    assert np.all(diff <= u.lip_outside_band * sep + 1e-12)


def test_scaled_family_geometry(dust_dom):
    C = dust_dom
    u0 = make_scaled_family(C, 0)
    sb = u0.support
    assert sb.lo == pytest.approx((1.0 / 6.0, 1.0))
    assert sb.hi == pytest.approx((5.0 / 6.0, 4.0 / 3.0))
    stage = C.scaled_box(0)
    assert stage.lo[0] <= sb.lo[0] and sb.hi[0] <= stage.hi[0]
    for k in (2, 4):
        uk = make_scaled_family(C, k)
        stage = C.scaled_box(k)
        assert uk.support.hi[0] <= stage.hi[0] + 1e-15
        assert uk.support.hi[1] <= stage.hi[1] + 1e-15
        assert not uk.exact_values
        center = np.array(uk.support.center)
        assert uk.value(center[None, :])[0] == 1.0


def test_scaled_family_zero_on_floor(dust_dom):
    C = dust_dom
    for k in (1, 3):
        u = make_scaled_family(C, k)
        sigma = float(C.tree.side(k)) / 6.0
        xs = np.linspace(sigma, 5.0 * sigma, 41)
        pts = np.stack([xs, np.ones_like(xs)], axis=1)
        np.testing.assert_array_equal(u.value(pts), 0.0)
        below = np.stack([xs, np.full_like(xs, 0.999)], axis=1)
        np.testing.assert_array_equal(u.value(below), 0.0)


def test_scaled_family_depth_guard(dust_dom):
    C = dust_dom
    with pytest.raises(ValueError, match="too shallow"):
        make_scaled_family(C, 5)
    with pytest.raises(ValueError):
        make_scaled_family(C, -1)


def test_scaled_family_corridor_guard():
    # a schedule whose third corridor is fatter than its dyadic scale
    sched = EpsilonSchedule(
        value=lambda k: Fraction(1, 5) if k == 3 else Fraction(1, 2 ** (k + 10)),
        tail=lambda k: Fraction(1, 5) + Fraction(1, 2 ** (k + 8)),
        exact_tail=False,
    )
    C = CoreMinusCantor(tree_depth=12, schedule=sched)
    make_scaled_family(C, 2)
    with pytest.raises(ValueError, match="corridor"):
        make_scaled_family(C, 3)


def test_mollification_matches_ramp_sets():
    sq = square_domain()
    u = make_core_family(sq, 2)
    rng = np.random.default_rng(17)
    pts = rng.random((120, 2))
    rep = mollification_check(u, pts, nodes=32)
    assert rep["ok"]
    assert rep["plateau_mask"].sum() > 10
    assert rep["vanish_mask"].sum() > 10
    assert np.all(rep["conv_lo"] <= rep["conv_hi"] + 1e-15)
    assert np.all(rep["conv_lo"][rep["plateau_mask"]] >= 1.0 - 1e-12)
    assert np.all(rep["conv_hi"][rep["vanish_mask"]] <= 1e-12)
    # plateau and vanishing sets agree exactly with the ramp's
    np.testing.assert_array_equal(rep["ramp"][rep["plateau_mask"]], 1.0)
    np.testing.assert_array_equal(rep["ramp"][rep["vanish_mask"]], 0.0)


def test_hard_floor_reports_infinite_lip(curve_dom):
    u = make_local_family(curve_dom, 2)
    # box dipping below the floor while holding live values above it
    assert u.lip_box(np.array([0.4, -0.05]), np.array([0.6, 0.5])) == math.inf
    # fully below the floor there is nothing left
    assert u.value_box(np.array([0.4, -0.5]), np.array([0.6, -0.2])) == (0.0, 0.0)
    assert u.lip_box(np.array([0.4, -0.5]), np.array([0.6, -0.2])) == 0.0
