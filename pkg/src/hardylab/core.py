"""Exponent bookkeeping and certified interval arithmetic.

Every numerical estimate in this package is reported as a two-sided
bound rather than a point value; ``Bracket`` is the common currency.
``Params`` collects the exponent tuple (n, s, p) together with the
dimension parameter ``lam`` and the auxiliary pair (q, beta) used by
the cube-wise Poincare route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

__all__ = [
    "Bracket",
    "InfeasibleParameters",
    "Params",
    "bracket_sum",
    "choose_exponents",
    "proof_identities",
    "validate_exponents",
]


class InfeasibleParameters(ValueError):
    """Raised when an exponent tuple violates one of its constraints."""


def _down(x: float) -> float:
    if math.isinf(x) or math.isnan(x):
        return x
    return math.nextafter(x, -math.inf)


def _up(x: float) -> float:
    if math.isinf(x) or math.isnan(x):
        return x
    return math.nextafter(x, math.inf)


@dataclass(frozen=True, slots=True)
class Bracket:
    """Closed interval [lower, upper] with a certification flag.

    ``certified`` is True when both endpoints come from rigorous
    envelopes (outward-rounded arithmetic, analytic tail bounds) and
    False when a heuristic step entered somewhere along the way.
    Arithmetic rounds outward, so operating on brackets always
    contains the result of operating on any enclosed reals.
    """

    lower: float
    upper: float
    certified: bool = True

    def __post_init__(self) -> None:
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("bracket endpoints must not be NaN")
        if self.lower > self.upper:
            raise ValueError(f"empty bracket: [{self.lower}, {self.upper}]")

    @classmethod
    def exact(cls, x: float) -> "Bracket":
        return cls(x, x, True)

    @classmethod
    def heuristic(cls, lower: float, upper: float) -> "Bracket":
        return cls(lower, upper, False)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def encloses(self, other: "Bracket") -> bool:
        return self.lower <= other.lower and other.upper <= self.upper

    def add(self, other: "Bracket") -> "Bracket":
        return Bracket(
            _down(self.lower + other.lower),
            _up(self.upper + other.upper),
            self.certified and other.certified,
        )

    __add__ = add

    def sub(self, other: "Bracket") -> "Bracket":
        return Bracket(
            _down(self.lower - other.upper),
            _up(self.upper - other.lower),
            self.certified and other.certified,
        )

    __sub__ = sub

    def scale(self, t: float) -> "Bracket":
        if t >= 0:
            return Bracket(_down(t * self.lower), _up(t * self.upper), self.certified)
        return Bracket(_down(t * self.upper), _up(t * self.lower), self.certified)

    def mul(self, other: "Bracket") -> "Bracket":
        prods = (
            self.lower * other.lower,
            self.lower * other.upper,
            self.upper * other.lower,
            self.upper * other.upper,
        )
        cert = self.certified and other.certified
        return Bracket(_down(min(prods)), _up(max(prods)), cert)

    __mul__ = mul

    def power(self, e: float) -> "Bracket":
        # monotone powers only; callers keep brackets nonnegative
        if self.lower < 0:
            raise ValueError("power requires a nonnegative bracket")
        lo, hi = self.lower**e, self.upper**e
        if e < 0:
            lo, hi = hi, lo
        return Bracket(_down(lo), _up(hi), self.certified)

    def divide(self, other: "Bracket") -> "Bracket":
        if other.lower <= 0:
            raise ZeroDivisionError(
                "bracket division requires a strictly positive denominator"
            )
        if self.lower < 0:
            raise ValueError("bracket division requires a nonnegative numerator")
        cert = self.certified and other.certified
        return Bracket(_down(self.lower / other.upper), _up(self.upper / other.lower), cert)

    def hull(self, other: "Bracket") -> "Bracket":
        return Bracket(
            min(self.lower, other.lower),
            max(self.upper, other.upper),
            self.certified and other.certified,
        )

    def intersect(self, other: "Bracket") -> "Bracket":
        lo = max(self.lower, other.lower)
        hi = min(self.upper, other.upper)
        if lo > hi:
            raise ValueError("brackets do not intersect")
        return Bracket(lo, hi, self.certified and other.certified)

    def widen(self, margin: float) -> "Bracket":
        if margin < 0:
            raise ValueError("margin must be nonnegative")
        return Bracket(_down(self.lower - margin), _up(self.upper + margin), self.certified)

    def uncertified(self) -> "Bracket":
        return replace(self, certified=False)


def bracket_sum(brackets: Iterable[Bracket]) -> Bracket:
    """Sum brackets by pairwise tree reduction in index order.

    The reduction order is a function of the input length only, so
    repeated runs over identical inputs reproduce the result bit for
    bit regardless of how the caller produced the sequence.
    """
    items: Sequence[Bracket] = list(brackets)
    if not items:
        return Bracket.exact(0.0)
    items = list(items)
    while len(items) > 1:
        merged = [items[i].add(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0]


@dataclass(frozen=True, slots=True)
class Params:
    """Exponent tuple for the (s, p)-Hardy machinery.

    n, s, p are the ambient dimension and smoothness/integrability
    exponents, lam the dimension parameter of the boundary part under
    study.  q and beta are the auxiliary exponents of the cube-wise
    Poincare route; they may be left unset for uses that never invoke
    that route (capacity estimates, counterexample bookkeeping).
    john_c, content_c0, fatness_sigma carry the geometric constants.
    """

    n: int
    s: float
    p: float
    lam: float
    q: float | None = None
    beta: float | None = None
    john_c: float = 2.0
    content_c0: float = 1.0
    fatness_sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1 or int(self.n) != self.n:
            raise InfeasibleParameters(f"n must be a positive integer, got {self.n}")
        if not 0.0 < self.s < 1.0:
            raise InfeasibleParameters(f"s must lie in (0, 1), got {self.s}")
        if not self.p > 1.0:
            raise InfeasibleParameters(f"p must exceed 1, got {self.p}")
        if not 0.0 < self.lam <= self.n:
            raise InfeasibleParameters(f"lam must lie in (0, n], got {self.lam}")
        if self.q is not None:
            if not 1.0 <= self.q < self.p:
                raise InfeasibleParameters(f"q must lie in [1, p), got {self.q}")
        if self.beta is not None:
            if not 0.0 < self.beta < self.s:
                raise InfeasibleParameters(f"beta must lie in (0, s), got {self.beta}")
        if self.john_c < 1.0:
            raise InfeasibleParameters(f"john_c must be >= 1, got {self.john_c}")
        if self.content_c0 <= 0.0:
            raise InfeasibleParameters(f"content_c0 must be positive, got {self.content_c0}")

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def kappa(self) -> float:
        if self.q is None:
            raise InfeasibleParameters("kappa requires q")
        return self.p / self.q

    @property
    def delta(self) -> float:
        if self.q is None or self.beta is None:
            raise InfeasibleParameters("delta requires q and beta")
        return (self.lam - self.n + self.beta * self.q) / self.q

    def with_exponents(self) -> "Params":
        """Return a copy with (q, beta) filled by the midpoint rule."""
        q, beta = choose_exponents(self.n, self.s, self.p, self.lam)
        return replace(self, q=q, beta=beta)


def choose_exponents(n: int, s: float, p: float, lam: float) -> tuple[float, float]:
    """Pick (q, beta) with beta = n(1/p - 1/q) + s satisfying the
    visibility-route constraints

        n - lam < beta*q < s*p      and      0 < 1/q - 1/p < beta/n.

    In q these constraints cut out an open interval whose right
    endpoint is p; q is taken as the interval midpoint.  Raises
    InfeasibleParameters when the interval is empty, which happens
    exactly when lam <= n - s*p.
    """
    if not 0.0 < s < 1.0 or p <= 1.0:
        raise InfeasibleParameters(f"need 0 < s < 1 and p > 1, got s={s}, p={p}")
    sp = s * p
    if lam <= n - sp:
        raise InfeasibleParameters(
            f"lam must exceed n - s*p for a feasible pair (lam={lam}, n-sp={n - sp})"
        )
    if lam > n:
        raise InfeasibleParameters(f"lam must not exceed n, got {lam}")
    # all three lower bounds on q are strict; the upper bound is q < p
    bound_lam = p * (2.0 * n - lam) / (n + sp)  # beta*q > n - lam
    bound_beta = n * p / (n + sp)  # beta > 0
    bound_gap = 2.0 * n * p / (2.0 * n + sp)  # 1/q - 1/p < beta/n
    q_lo = max(1.0, bound_lam, bound_beta, bound_gap)
    if q_lo >= p:
        raise InfeasibleParameters(
            f"empty q-interval: lower bound {q_lo} meets p={p} (lam={lam})"
        )
    q = 0.5 * (q_lo + p)
    beta = n * (1.0 / p - 1.0 / q) + s
    pair = Params(n=n, s=s, p=p, lam=lam, q=q, beta=beta)
    validate_exponents(pair)
    return q, beta


def validate_exponents(params: Params) -> None:
    """Check the full constraint set on (q, beta); raise naming the
    first violated constraint."""
    if params.q is None or params.beta is None:
        raise InfeasibleParameters("q and beta must both be set")
    n, s, p, lam = params.n, params.s, params.p, params.lam
    q, beta = params.q, params.beta
    expected_beta = n * (1.0 / p - 1.0 / q) + s
    if abs(beta - expected_beta) > 1e-12 * max(1.0, abs(beta)):
        raise InfeasibleParameters(
            f"beta={beta} is not n(1/p - 1/q) + s = {expected_beta}"
        )
    bq = beta * q
    if not n - lam < bq:
        raise InfeasibleParameters(f"constraint n - lam < beta*q violated: {n - lam} >= {bq}")
    if not bq < s * p:
        raise InfeasibleParameters(f"constraint beta*q < s*p violated: {bq} >= {s * p}")
    gap = 1.0 / q - 1.0 / p
    if not 0.0 < gap:
        raise InfeasibleParameters(f"constraint 1/q > 1/p violated: q={q}, p={p}")
    if not gap < beta / n:
        raise InfeasibleParameters(f"constraint 1/q - 1/p < beta/n violated: {gap} >= {beta / n}")


def proof_identities(params: Params) -> tuple[float, float]:
    """The two exact exponent identities used by the main estimate.

    Returns (1 + p*beta/n + p/q - s*p/n, p*(n + beta*q)/q); the first
    must equal 2 and the second n + s*p, both exactly in real
    arithmetic for any beta = n(1/p - 1/q) + s.
    """
    if params.q is None or params.beta is None:
        raise InfeasibleParameters("identities require q and beta")
    n, s, p = params.n, params.s, params.p
    q, beta = params.q, params.beta
    first = 1.0 + p * beta / n + p / q - s * p / n
    second = p * (n + beta * q) / q
    return first, second
