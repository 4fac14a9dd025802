"""Wolff potentials and capacity bounds against quadrature oracles."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from hardylab.capacity import (
    DiscreteMeasure,
    atomize,
    capacity_upper_content,
    fatness_lower,
    kappa_normalization,
    wolff_certificate,
    wolff_exponent,
    wolff_point_mass,
    wolff_potential,
)
from hardylab.content import mass_lower
from hardylab.core import Params
from hardylab.fractals import CantorTree, koch_curve, schedule_constant

LAM_KOCH = math.log(4) / math.log(3)
P2 = Params(n=2, s=0.5, p=2.0, lam=LAM_KOCH)


def test_wolff_exponent_sign():
    assert wolff_exponent(P2) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        wolff_exponent(Params(n=1, s=0.6, p=2.0, lam=1.0))


def test_point_mass_closed_form():
    dm = DiscreteMeasure(np.array([[0.0, 0.0]]), np.array([1.0]))
    for d in (0.05, 0.3, 1.7):
        got = wolff_potential(dm, (d, 0.0), P2)
        assert got == pytest.approx(wolff_point_mass(d, P2), rel=1e-12)
    # atom point diverges without a cutoff
    assert math.isinf(wolff_potential(dm, (0.0, 0.0), P2))
    assert math.isfinite(wolff_potential(dm, (0.0, 0.0), P2, t_min=0.01))


def test_point_mass_scaling_in_mass():
    # W scales like m^{p'-1}
    d = 0.4
    base = wolff_point_mass(d, P2, mass=1.0)
    assert wolff_point_mass(d, P2, mass=3.0) == pytest.approx(3.0 * base)


@pytest.mark.parametrize(
    "p,s", [(2.0, 0.5), (3.0, 0.3), (1.5, 0.6)]
)
def test_wolff_vs_quadrature_oracle(p, s):
    prm = Params(n=2, s=s, p=p, lam=LAM_KOCH)
    dm = DiscreteMeasure(
        np.array([[0.0, 0.0], [0.3, 0.4], [-0.2, 0.1]]), np.array([0.7, 0.5, 0.25])
    )
    y = np.array([0.1, -0.2])
    q = prm.p_conj - 1.0

    def integrand(t):
        mu = float(np.sum(dm.weights[np.sum((dm.points - y) ** 2, axis=1) <= t * t]))
        return (t ** (prm.sp - prm.n) * mu) ** q / t if mu > 0 else 0.0

    ds = np.sort(np.sqrt(np.sum((dm.points - y) ** 2, axis=1)))
    ref = 0.0
    knots = list(ds) + [50.0]
    for a, b in zip(knots, knots[1:]):
        ref += quad(integrand, a, b, limit=200)[0]
    ref += quad(lambda t: (t ** (prm.sp - prm.n) * dm.total) ** q / t, 50.0, np.inf)[0]
    assert wolff_potential(dm, y, prm) == pytest.approx(ref, rel=1e-7)


def test_wolff_cutoff_monotone():
    dm = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([1.0, 1.0]))
    y = (0.4, 0.1)
    vals = [wolff_potential(dm, y, P2, t_min=t) for t in (0.0, 0.05, 0.2, 1.0)]
    assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))


def test_discrete_measure_validation_and_restriction():
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 2)), np.array([1.0]))
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((1, 2)), np.array([-1.0]))
    dm = DiscreteMeasure(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([1.0, 3.0]))
    near = dm.restricted((0.0, 0.0), 1.0)
    assert near.total == pytest.approx(1.0)


def test_kappa_positive_and_blows_up_at_critical():
    k = kappa_normalization(P2, LAM_KOCH)
    assert k > 0
    # lam -> n - sp makes the first piece blow up
    almost = kappa_normalization(P2, P2.n - P2.sp + 1e-6)
    assert almost > 100 * k
    with pytest.raises(ValueError):
        kappa_normalization(P2, P2.n - P2.sp)


@pytest.fixture(scope="module")
def koch_setup():
    km, cf = mass_lower(koch_curve(LAM_KOCH, 6, ((0.0, 0.0), (1.0, 0.0))), LAM_KOCH)
    return km, cf


def test_wolff_certificate_koch(koch_setup):
    km, cf = koch_setup
    for x, r in (((0.25, 0.0), 0.2), ((0.5, 0.28), 0.1)):
        rep = wolff_certificate(km, cf, x, r, P2, LAM_KOCH, n_probe=64)
        assert rep["ok"], rep
        assert rep["bound"] <= 1.0
        assert rep["sup_probe"] > 0


def test_fatness_scaling_koch(koch_setup):
    km, cf = koch_setup
    target = 2.0 ** (P2.n - P2.sp)
    ratios = []
    for x in ((0.25, 0.0), (0.5, 0.28), (0.75, 0.0)):
        v1 = fatness_lower(km, cf, x, 0.1, P2, LAM_KOCH)
        v2 = fatness_lower(km, cf, x, 0.2, P2, LAM_KOCH)
        assert v1 > 0 and v2 > v1
        ratios.append(v2 / v1)
    geo = float(np.exp(np.mean(np.log(ratios))))
    assert abs(geo / target - 1.0) < 0.1


def test_wolff_certificate_cantor():
    tree = CantorTree((0, 0), 1, schedule_constant(0.125))
    cm, cf = mass_lower(tree, 2.0)
    prm = Params(n=2, s=0.5, p=2.0, lam=2.0)
    rep = wolff_certificate(cm, cf, (0.5, 0.5), 0.5, prm, 2.0, n_probe=64)
    assert rep["ok"], rep
    # corner balls stay in the fine density regime; corridor-straddling
    # centers would skew the ratio
    v1 = fatness_lower(cm, cf, (0.0, 0.0), 0.05, prm, 2.0)
    v2 = fatness_lower(cm, cf, (0.0, 0.0), 0.1, prm, 2.0)
    assert v1 > 0 and v2 / v1 == pytest.approx(2.0 ** (prm.n - prm.sp), rel=0.1)


def test_atomize_mass_dominates(koch_setup):
    km, _ = koch_setup
    x = np.array([0.25, 0.0])
    dm, res = atomize(km, x, 0.2)
    assert res > 0
    # majorant property at the center ball
    assert dm.total >= km.ball_lower(x, 0.2) - 1e-12
    # all atoms near the ball
    d = np.sqrt(np.sum((dm.points - x) ** 2, axis=1))
    assert np.max(d) <= 0.2 + 4 * res


def test_capacity_upper_segment():
    seg = [np.array([[0.0, 0.0], [1.0, 0.0]])]
    cu = capacity_upper_content(seg, P2, [1 / (2 * m) for m in (1, 2, 4, 8)])
    assert cu.upper == pytest.approx(0.5)
    assert not cu.certified


def test_capacity_upper_needs_subcritical():
    prm = Params(n=1, s=0.6, p=2.0, lam=1.0)
    with pytest.raises(ValueError):
        capacity_upper_content([np.array([[0.0, 0.0], [1.0, 0.0]])], prm, [0.1])
