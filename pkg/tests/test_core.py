import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab.core import (
    Bracket,
    InfeasibleParameters,
    Params,
    bracket_sum,
    choose_exponents,
    proof_identities,
    validate_exponents,
)

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False)
sample = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def make_bracket(a, b):
    return Bracket(min(a, b), max(a, b))


@given(finite, finite, finite, finite, sample, sample)
def test_add_contains_pointwise_sum(a, b, c, d, t1, t2):
    x = make_bracket(a, b)
    y = make_bracket(c, d)
    px = x.lower + t1 * (x.upper - x.lower)
    py = y.lower + t2 * (y.upper - y.lower)
    assert x.add(y).contains(px + py)


@given(finite, finite, finite, finite, sample, sample)
def test_mul_contains_pointwise_product(a, b, c, d, t1, t2):
    x = make_bracket(a, b)
    y = make_bracket(c, d)
    px = x.lower + t1 * (x.upper - x.lower)
    py = y.lower + t2 * (y.upper - y.lower)
    assert x.mul(y).contains(px * py)


@given(finite, finite, finite, finite, sample, sample)
def test_sub_contains_pointwise_difference(a, b, c, d, t1, t2):
    x = make_bracket(a, b)
    y = make_bracket(c, d)
    px = x.lower + t1 * (x.upper - x.lower)
    py = y.lower + t2 * (y.upper - y.lower)
    assert x.sub(y).contains(px - py)


@given(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
    st.floats(min_value=0.1, max_value=8.0, allow_nan=False),
    sample,
)
def test_power_contains_pointwise(a, b, e, t):
    x = make_bracket(a, b)
    px = x.lower + t * (x.upper - x.lower)
    assert x.power(e).contains(px**e)


@given(finite, finite, st.floats(min_value=-100.0, max_value=100.0, allow_nan=False))
def test_scale_contains_endpoints(a, b, t):
    x = make_bracket(a, b)
    y = x.scale(t)
    assert y.contains(t * x.lower)
    assert y.contains(t * x.upper)


def test_divide_rejects_zero_straddle():
    with pytest.raises(ZeroDivisionError):
        Bracket(1.0, 2.0).divide(Bracket(-1.0, 1.0))


def test_divide_basic():
    q = Bracket(1.0, 2.0).divide(Bracket(4.0, 8.0))
    assert q.lower <= 0.125 and q.upper >= 0.5


def test_certification_propagates():
    a = Bracket.heuristic(0.0, 1.0)
    b = Bracket.exact(2.0)
    assert not a.add(b).certified
    assert not b.mul(a).certified
    assert b.add(b).certified


def test_hull_and_intersect():
    a = Bracket(0.0, 2.0)
    b = Bracket(1.0, 3.0)
    h = a.hull(b)
    assert h.lower == 0.0 and h.upper == 3.0
    i = a.intersect(b)
    assert i.lower == 1.0 and i.upper == 2.0
    with pytest.raises(ValueError):
        Bracket(0.0, 1.0).intersect(Bracket(2.0, 3.0))


def test_empty_bracket_rejected():
    with pytest.raises(ValueError):
        Bracket(2.0, 1.0)
    with pytest.raises(ValueError):
        Bracket(float("nan"), 1.0)


def test_bracket_sum_large_accumulation():
    # 1e5 terms of 1e-5: the pairwise tree must keep 1.0 inside
    parts = [Bracket.exact(1e-5)] * 100_000
    total = bracket_sum(parts)
    assert total.contains(1.0)
    assert total.width < 1e-9


def test_bracket_sum_empty():
    z = bracket_sum([])
    assert z.lower == 0.0 and z.upper == 0.0


@settings(max_examples=200)
@given(
    st.lists(
        st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=1, max_size=50
    )
)
def test_bracket_sum_contains_fsum(xs):
    total = bracket_sum([Bracket.exact(x) for x in xs])
    assert total.lower <= math.fsum(xs) <= total.upper


# -- exponent selection ------------------------------------------------


@pytest.mark.parametrize(
    "n,s,p,lam",
    [
        (2, 0.5, 2.0, 1.5),
        (2, 0.5, 2.0, 2.0),
        (2, 0.7, 1.5, 1.9),
        (2, 0.9, 3.0, 1.0),
        (1, 0.5, 2.0, 1.0),
        (2, 0.6, 2.5, math.log(4) / math.log(3)),
    ],
)
def test_choose_exponents_constraints(n, s, p, lam):
    q, beta = choose_exponents(n, s, p, lam)
    sp = s * p
    assert 1.0 <= q < p
    assert n - lam < beta * q < sp
    assert 0.0 < 1.0 / q - 1.0 / p < beta / n


@pytest.mark.parametrize(
    "n,s,p,lam",
    [
        (2, 0.5, 2.0, 1.5),
        (2, 0.7, 1.5, 1.9),
        (1, 0.5, 2.0, 1.0),
        (2, 0.6, 2.5, math.log(4) / math.log(3)),
    ],
)
def test_proof_identities_exact(n, s, p, lam):
    pr = Params(n=n, s=s, p=p, lam=lam).with_exponents()
    first, second = proof_identities(pr)
    # 1 + p*beta/n + p/q - s*p/n == 2 and p(n + beta q)/q == n + sp,
    # algebraically forced by beta = n(1/p - 1/q) + s
    assert first == pytest.approx(2.0, abs=1e-12)
    assert second == pytest.approx(n + s * p, abs=1e-12)


def test_infeasible_at_critical_lambda():
    # lam = n - s*p sits exactly on the boundary: no admissible q
    lam = math.log(4) / math.log(3)
    s = (2.0 - lam) / 2.0
    with pytest.raises(InfeasibleParameters):
        choose_exponents(2, s, 2.0, lam)


def test_infeasible_below_critical():
    with pytest.raises(InfeasibleParameters):
        choose_exponents(2, 0.3, 2.0, 1.3)


def test_feasible_just_above_critical():
    lam = math.log(4) / math.log(3)
    s = (2.0 - lam) / 2.0 + 0.01
    q, beta = choose_exponents(2, s, 2.0, lam)
    assert 1.0 <= q < 2.0


def test_param_validation():
    with pytest.raises(InfeasibleParameters):
        Params(n=2, s=1.5, p=2.0, lam=1.5)
    with pytest.raises(InfeasibleParameters):
        Params(n=2, s=0.5, p=0.9, lam=1.5)
    with pytest.raises(InfeasibleParameters):
        Params(n=2, s=0.5, p=2.0, lam=2.5)


def test_derived_quantities():
    pr = Params(n=2, s=0.5, p=2.0, lam=1.5).with_exponents()
    assert pr.sp == 1.0
    assert pr.p_conj == 2.0
    assert pr.kappa == pytest.approx(pr.p / pr.q)
    assert pr.delta == pytest.approx((pr.lam - 2 + pr.beta * pr.q) / pr.q)
    assert pr.delta > 0.0
    validate_exponents(pr)
