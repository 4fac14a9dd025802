"""Koch-type curves and fat Cantor trees.

The Koch generator replaces a segment by four segments of relative
length r = 4**(-1/lam) with bump angle theta, cos(theta) = (1-2r)/(2r),
so the limit curve has similarity dimension lam.  The Cantor trees keep
four corner squares of side (1-eps_k)*l_k/2 per cell and remove a
centered cross of corridors of width eps_k*l_k; all cell coordinates
are exact rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Literal

import numpy as np

from ._geom import PolylineIndex
from .core import Bracket

__all__ = [
    "CantorTree",
    "EpsilonSchedule",
    "KochPolyline",
    "MembershipResult",
    "UndecidableMembership",
    "cantor_ball_density",
    "cantor_build",
    "cantor_density",
    "koch_angle",
    "koch_curve",
    "koch_ratio",
    "schedule_composite",
    "schedule_constant",
    "schedule_scaled_corner",
]


class UndecidableMembership(ValueError):
    """Point membership could not be decided within the depth bound."""


# ---------------------------------------------------------------------------
# Koch-type curves


def koch_ratio(lam: float) -> float:
    if not 1.0 <= lam < 2.0:
        raise ValueError(f"lam must lie in [1, 2), got {lam}")
    return 4.0 ** (-1.0 / lam)


def koch_angle(lam: float) -> float:
    r = koch_ratio(lam)
    return math.acos((1.0 - 2.0 * r) / (2.0 * r))


@dataclass(frozen=True)
class KochPolyline:
    """Generation-g polyline approximation of a Koch-type curve.

    vertices runs from base start to base end; orientation +1 bumps to
    the left of the base direction.  approx_margin bounds the Hausdorff
    distance between this polyline and the limit curve, so any distance
    to the polyline is within approx_margin of the distance to the true
    fractal.
    """

    lam: float
    generation: int
    vertices: np.ndarray
    base: tuple[tuple[float, float], tuple[float, float]]
    orientation: int = 1

    @property
    def ratio(self) -> float:
        return koch_ratio(self.lam)

    @property
    def angle(self) -> float:
        return koch_angle(self.lam)

    @property
    def n_segments(self) -> int:
        return len(self.vertices) - 1

    @property
    def base_length(self) -> float:
        (ax, ay), (bx, by) = self.base
        return math.hypot(bx - ax, by - ay)

    @property
    def segment_length(self) -> float:
        return self.ratio**self.generation * self.base_length

    @property
    def total_length(self) -> float:
        # 4**g segments of length r**g * |base| = 4**(g(1-1/lam)) * |base|
        return 4.0**self.generation * self.segment_length

    @property
    def approx_margin(self) -> float:
        r = self.ratio
        bump = r * math.sin(self.angle)
        return self.segment_length * bump / (1.0 - r)

    @property
    def height_bound(self) -> float:
        """Upper bound on deviation of the limit curve from the base line."""
        r = self.ratio
        return self.base_length * r * math.sin(self.angle) / (1.0 - r)

    def subtree_boxes(self, depth: int) -> tuple[np.ndarray, np.ndarray]:
        """Bounding boxes of the 4**depth subtrees of the limit curve.

        Boxes of the generation-g polyline groups, widened by the
        approximation margin so they contain the corresponding pieces
        of the true fractal.
        """
        if not 0 <= depth <= self.generation:
            raise ValueError("depth must lie in [0, generation]")
        groups = 4**depth
        per = self.n_segments // groups
        v = self.vertices
        # segment k spans vertices [k, k+1]; group j spans [j*per, (j+1)*per]
        lo = np.empty((groups, 2))
        hi = np.empty((groups, 2))
        for j in range(groups):
            chunk = v[j * per : (j + 1) * per + 1]
            lo[j] = chunk.min(axis=0)
            hi[j] = chunk.max(axis=0)
        m = self.approx_margin
        return lo - m, hi + m

    def index(self) -> PolylineIndex:
        return PolylineIndex([self.vertices])


def koch_curve(
    lam: float,
    generation: int,
    base: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 0.0), (1.0, 0.0)),
    orientation: int = 1,
) -> KochPolyline:
    """Iterate the four-segment generator to the requested generation."""
    if generation < 0:
        raise ValueError("generation must be nonnegative")
    if orientation not in (-1, 1):
        raise ValueError("orientation must be +1 or -1")
    r = koch_ratio(lam)
    theta = koch_angle(lam)
    c, s = math.cos(theta), orientation * math.sin(theta)
    rot_plus = np.array([[c, -s], [s, c]])
    rot_minus = np.array([[c, s], [-s, c]])
    pts = np.array([base[0], base[1]], dtype=float)
    for _ in range(generation):
        a = pts[:-1]
        d = r * (pts[1:] - a)
        d_plus = d @ rot_plus.T
        d_minus = d @ rot_minus.T
        v1 = a + d
        v2 = v1 + d_plus
        v3 = v2 + d_minus
        out = np.empty((4 * len(a) + 1, 2))
        out[0:-1:4] = a
        out[1::4] = v1
        out[2::4] = v2
        out[3::4] = v3
        out[-1] = pts[-1]
        pts = out
    return KochPolyline(lam=lam, generation=generation, vertices=pts, base=base, orientation=orientation)


# ---------------------------------------------------------------------------
# Fat Cantor trees


@dataclass(frozen=True)
class EpsilonSchedule:
    """Corridor width fractions eps_k with certified tail sums.

    value(k) is exact; tail(k) >= sum_{k' >= k} value(k'), with
    equality when exact_tail is set.  Every value must lie in (0, 1/2)
    and the full sum must stay below 1/2 so density lower bounds stay
    positive.
    """

    value: Callable[[int], Fraction]
    tail: Callable[[int], Fraction]
    exact_tail: bool = True
    label: str = ""

    def __post_init__(self) -> None:
        # eps == 0 is the degenerate quadrisection tree, allowed
        if not Fraction(0) <= self.tail(0) < Fraction(1, 2):
            raise ValueError(f"schedule tail sum must lie in [0, 1/2), got {self.tail(0)}")
        for k in range(4):
            v = self.value(k)
            if not Fraction(0) <= v < Fraction(1, 2):
                raise ValueError(f"eps_{k} = {v} outside [0, 1/2)")


def schedule_composite(eps_j: Fraction | float) -> EpsilonSchedule:
    """eps_k = eps_j * 2**(-k) / 4, summing to eps_j / 2."""
    e = Fraction(eps_j)
    if not Fraction(0) < e < Fraction(1, 2):
        raise ValueError(f"eps_j must lie in (0, 1/2), got {e}")

    def value(k: int) -> Fraction:
        return e * Fraction(1, 2**k) / 4

    def tail(k: int) -> Fraction:
        return e * Fraction(1, 2**k) / 2

    return EpsilonSchedule(value, tail, exact_tail=True, label=f"composite[{e}]")


def schedule_scaled_corner(sp: Fraction | float = 1) -> EpsilonSchedule:
    """eps_k = 2**(-k(2+sp)) / 4 for the scaled corner construction.

    Exact when (2+sp) is an integer; otherwise each value is the exact
    dyadic rational of the evaluated float and the tail is a certified
    geometric upper bound.
    """
    sp_frac = Fraction(sp)
    expo = 2 + sp_frac
    if expo.denominator == 1:
        m = int(expo)

        def value(k: int) -> Fraction:
            return Fraction(1, 2 ** (k * m)) / 4

        def tail(k: int) -> Fraction:
            # geometric with ratio 2**-m: first / (1 - ratio)
            first = value(k)
            return first / (1 - Fraction(1, 2**m))

        return EpsilonSchedule(value, tail, exact_tail=True, label=f"scaled-corner[sp={sp_frac}]")

    def value(k: int) -> Fraction:
        return Fraction(2.0 ** (-k * float(expo))) / 4

    # successive float ratios are ~2**-(2+sp) < 1/4; pad to 26/100
    pad_ratio = Fraction(26, 100)

    def tail(k: int) -> Fraction:
        return value(k) / (1 - pad_ratio)

    return EpsilonSchedule(value, tail, exact_tail=False, label=f"scaled-corner[sp={float(sp)}]")


def schedule_constant(eps: Fraction | float, length_hint: int = 64) -> EpsilonSchedule:
    """Geometrically damped near-constant schedule for ad hoc trees."""
    e = Fraction(eps)

    def value(k: int) -> Fraction:
        return e * Fraction(1, 2**k)

    def tail(k: int) -> Fraction:
        return e * Fraction(2, 2**k)

    return EpsilonSchedule(value, tail, exact_tail=True, label=f"constant[{e}]")


@dataclass(frozen=True)
class MembershipResult:
    """Outcome of a cell-tree descent.

    For "outside", depth is the generation whose corridor contains the
    point (-1 when the point misses the root square entirely); for
    "undecided", the point stayed inside cells through depth levels.
    """

    status: Literal["outside", "undecided"]
    depth: int


class CantorTree:
    """Fat Cantor set K inside a root square, in exact rational arithmetic.

    Each cell of side l_k spawns four corner children of side
    l_{k+1} = (1 - eps_k) * l_k / 2; the removed set is a centered
    cross of two perpendicular corridors of width eps_k * l_k.  The
    retained limit set has measure l_0**2 * prod (1-eps_k)**2 > 0.
    """

    def __init__(self, lo: tuple[Fraction, Fraction], side: Fraction, schedule: EpsilonSchedule):
        self.lo = (Fraction(lo[0]), Fraction(lo[1]))
        self.side0 = Fraction(side)
        if self.side0 <= 0:
            raise ValueError("root side must be positive")
        self.schedule = schedule
        self._sides: list[Fraction] = [self.side0]
        self._axis_offsets: list[list[Fraction]] = [[Fraction(0)]]

    # -- exact layout --------------------------------------------------

    def side(self, k: int) -> Fraction:
        while len(self._sides) <= k:
            i = len(self._sides) - 1
            eps = self.schedule.value(i)
            self._sides.append((1 - eps) * self._sides[i] / 2)
        return self._sides[k]

    def _offsets(self, k: int) -> list[Fraction]:
        """Per-axis lower-corner offsets of depth-k cells (2**k values)."""
        while len(self._axis_offsets) <= k:
            i = len(self._axis_offsets) - 1
            shift = self.side(i) - self.side(i + 1)
            prev = self._axis_offsets[i]
            self._axis_offsets.append(prev + [o + shift for o in prev])
        return self._axis_offsets[k]

    def cell_count(self, k: int) -> int:
        return 4**k

    def cells_exact(self, k: int) -> tuple[list[Fraction], list[Fraction], Fraction]:
        """(x-offsets, y-offsets, side): cells are the offset product grid."""
        offs = self._offsets(k)
        xs = [self.lo[0] + o for o in offs]
        ys = [self.lo[1] + o for o in offs]
        return xs, ys, self.side(k)

    def cells(self, k: int) -> tuple[np.ndarray, float]:
        """Float lower corners (4**k, 2) in row-major (y outer) order."""
        xs, ys, side = self.cells_exact(k)
        xf = np.array([float(x) for x in xs])
        yf = np.array([float(y) for y in ys])
        gx, gy = np.meshgrid(xf, yf, indexing="ij")
        lo = np.column_stack([gx.ravel(), gy.ravel()])
        return lo, float(side)

    def product_measure(self, depth: int) -> Fraction:
        """Exact total area of the depth-level cells, l0^2 prod (1-eps)^2."""
        acc = self.side0 * self.side0
        for k in range(depth):
            e = self.schedule.value(k)
            acc *= (1 - e) * (1 - e)
        return acc

    def measure_bracket(self, depth: int) -> Bracket:
        """Two-sided bound on the limit measure |K|."""
        upper = self.product_measure(depth)
        lower = upper * max(Fraction(0), 1 - 2 * self.schedule.tail(depth))
        return Bracket(float(lower), float(upper), self.schedule.exact_tail)

    def density_lower(self, k: int) -> Fraction:
        """Lemma-style bound: |K meet cell_k| >= |cell_k| * density_lower(k)."""
        return max(Fraction(0), 1 - 2 * self.schedule.tail(k))

    def subtree_measure_lower(self, k: int) -> Fraction:
        return self.side(k) ** 2 * self.density_lower(k)

    # -- membership ----------------------------------------------------

    def membership(self, x: tuple[float, float], max_depth: int = 24) -> MembershipResult:
        """Descend the cell tree; exact for Fraction inputs.

        Returns "outside" with the corridor generation, or "undecided"
        when the point stays inside cells through max_depth (it is then
        within diam(cell) of K).
        """
        fx = Fraction(x[0]) - self.lo[0]
        fy = Fraction(x[1]) - self.lo[1]
        if not (0 <= fx <= self.side0 and 0 <= fy <= self.side0):
            return MembershipResult("outside", -1)
        for k in range(max_depth):
            child = self.side(k + 1)
            cur = self.side(k)
            bits = []
            for v in (fx, fy):
                if v <= child:
                    bits.append(0)
                elif v >= cur - child:
                    bits.append(1)
                else:
                    return MembershipResult("outside", k)
            fx = fx - bits[0] * (cur - child)
            fy = fy - bits[1] * (cur - child)
        return MembershipResult("undecided", max_depth)

    def contains_decided(self, x: tuple[float, float], max_depth: int = 24) -> bool:
        res = self.membership(x, max_depth)
        if res.status == "undecided":
            raise UndecidableMembership(
                f"point {x} undecided at depth {max_depth}: within {float(self.side(max_depth))} of K"
            )
        return False

    # -- corridors (the complement inside the root square) --------------

    def corridor_rects(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Disjoint rectangles removed at generation k, float corners.

        Per depth-k cell: a full-width horizontal corridor plus two
        vertical stubs, jointly the centered cross of width eps_k*l_k.
        """
        lo_cells, side = self.cells(k)
        child = float(self.side(k + 1))
        los, his = [], []
        x0, y0 = lo_cells[:, 0], lo_cells[:, 1]
        # horizontal band, full width
        los.append(np.column_stack([x0, y0 + child]))
        his.append(np.column_stack([x0 + side, y0 + side - child]))
        # vertical stubs below and above
        los.append(np.column_stack([x0 + child, y0]))
        his.append(np.column_stack([x0 + side - child, y0 + child]))
        los.append(np.column_stack([x0 + child, y0 + side - child]))
        his.append(np.column_stack([x0 + side - child, y0 + side]))
        return np.vstack(los), np.vstack(his)

    # -- distance ------------------------------------------------------

    def distance_bracket(self, pts: np.ndarray, depth: int = 8) -> tuple[np.ndarray, np.ndarray]:
        """Certified [lower, upper] on dist(x, K) for points (N, 2).

        Lower: distance to the depth-level cell boxes (K is inside
        them).  Upper: distance to retained corner points (cell corners
        lie in K at every depth).
        """
        if depth < 1:
            raise ValueError("depth must be at least 1")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = len(pts)
        lower = np.empty(n)
        upper = np.empty(n)
        for i in range(n):
            lower[i], upper[i] = self._distance_one(pts[i], depth)
        return lower, upper

    def _distance_one(self, x: np.ndarray, depth: int) -> tuple[float, float]:
        lo = np.array([[float(self.lo[0]), float(self.lo[1])]])
        side = float(self.side0)
        cells = lo
        best_upper = math.inf
        for k in range(depth):
            child = float(self.side(k + 1))
            shift = side - child
            # expand each candidate cell into its four children
            base = np.repeat(cells, 4, axis=0)
            off = np.tile(np.array([[0.0, 0.0], [shift, 0.0], [0.0, shift], [shift, shift]]), (len(cells), 1))
            cells = base + off
            side = child
            gap = np.maximum(np.maximum(cells - x, x - (cells + side)), 0.0)
            d_lo = np.sqrt(np.sum(gap * gap, axis=1))
            # corners of each cell are in K
            for cx in (0.0, side):
                for cy in (0.0, side):
                    corner = cells + np.array([cx, cy])
                    d_c = np.sqrt(np.sum((corner - x) ** 2, axis=1))
                    m = float(np.min(d_c))
                    if m < best_upper:
                        best_upper = m
            keep = d_lo <= best_upper
            cells = cells[keep]
            if len(cells) == 0:
                break
            d_lo = d_lo[keep]
        lower = float(np.min(d_lo)) if len(cells) else best_upper
        return min(lower, best_upper), best_upper


def cantor_density(tree: CantorTree, k: int) -> Fraction:
    """Guaranteed lower bound on |K meet Q_k| for any depth-k cell.

    Equals |Q_k| * (1 - 2 * tail(k)), never above the exact limit
    measure |Q_k| * prod_{k' >= k} (1 - eps_{k'})**2.
    """
    return tree.subtree_measure_lower(k)


def cantor_build(cube, schedule: EpsilonSchedule) -> CantorTree:
    """Build a tree on a dyadic cube (anything with lo_exact/side_exact)."""
    return CantorTree(cube.lo_exact, cube.side_exact, schedule)


def cantor_ball_density(
    tree: CantorTree, x: tuple[float, float], r: float, max_depth: int = 40
) -> float:
    """Certified lower bound on |B(x, r) meet K| for x in K.

    Valid for 0 < r <= 10*sqrt(2)*l_0: pick k with l_k/4 < r/(10*sqrt(2))
    <= l_k; the depth-k cell through x has diameter sqrt(2)*l_k < 0.4*r,
    so it sits inside B(x, r) and carries measure at least
    l_k^2 * (1 - 2*tail(k)) >= r^2 * (10*sqrt(2))**-2 * (1 - 2*tail(k)).
    The point must stay inside cells down to depth k.
    """
    s = 10.0 * math.sqrt(2.0)
    if r <= 0 or r > s * float(tree.side0):
        raise ValueError(f"need 0 < r <= 10*sqrt(2)*root side, got r={r}")
    target = r / s
    k = 0
    while float(tree.side(k)) >= target:
        k += 1
        if k > max_depth:
            raise ValueError("schedule shrank too slowly for the requested radius")
    k -= 1  # now l_k/4 < target <= l_k by the side recursion
    res = tree.membership(x, max_depth=max(k, 1))
    if res.status == "outside" and res.depth < k:
        raise UndecidableMembership(
            f"point {x} leaves the cell tree at depth {res.depth} < {k}"
        )
    # full-sum density: weaker than the depth-k tail but uniform in r
    return r * r / (s * s) * float(tree.density_lower(0))
