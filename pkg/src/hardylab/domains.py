"""Concrete planar domains: boxes, snowflakes, curve graphs, and the
complement constructions built from fat Cantor trees.

Distance queries return certified (lower, upper) arrays.  Polygon-type
domains are exact for their polyline boundary; the attribute
`boundary_margin` carries the Hausdorff gap to the underlying limit
fractal, which quadrature adds when a result must hold for the true
curve.  Whitney construction and the inside test always refer to the
polyline boundary itself, so those verdicts are exact.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from fractions import Fraction

import numpy as np

from ._geom import Box, PolylineIndex, box_segment_dist, point_segment_dist
from .core import Bracket
from .fractals import (
    CantorTree,
    EpsilonSchedule,
    KochPolyline,
    koch_curve,
    schedule_composite,
    schedule_scaled_corner,
)

__all__ = [
    "BoxDomain",
    "BoxExterior",
    "CompositeComplement",
    "CoreMinusCantor",
    "Domain",
    "HalfPlaneAboveCurve",
    "HalfPlaneDomain",
    "PolylineComplement",
    "SnowflakeDomain",
    "square_domain",
]


class Domain(ABC):
    """Proper open subset of the plane with certified distance oracles."""

    boundary_margin: float = 0.0

    @abstractmethod
    def inside(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask for points (N, 2)."""

    @abstractmethod
    def dist_boundary(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Certified (lower, upper) on dist(x, boundary) for points (N, 2)."""

    @abstractmethod
    def dist_box(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Certified (lower, upper) on inf over the box of dist(., boundary)."""

    @property
    @abstractmethod
    def bbox(self) -> Box | None:
        """Bounding box, or None for unbounded domains."""

    @property
    def is_bounded(self) -> bool:
        return self.bbox is not None

    @abstractmethod
    def boundary_sample(self, k: int) -> tuple[np.ndarray, float]:
        """k points within certified distance eta of the boundary; returns (pts, eta)."""

    @abstractmethod
    def domain_key(self) -> str:
        """Stable identity string for caching."""

    def dist_bracket(self, x: tuple[float, float]) -> Bracket:
        lo, up = self.dist_boundary(np.asarray([x], dtype=float))
        return Bracket(float(lo[0]), float(up[0]))


def _as_pts(pts: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(pts, dtype=float))


def _edges_of_box(lo: tuple[float, float], hi: tuple[float, float]):
    (x0, y0), (x1, y1) = lo, hi
    return [
        ((x0, y0), (x1, y0)),
        ((x1, y0), (x1, y1)),
        ((x1, y1), (x0, y1)),
        ((x0, y1), (x0, y0)),
    ]


class BoxDomain(Domain):
    """Open axis-aligned box; all distances exact."""

    def __init__(self, lo: tuple[float, float], hi: tuple[float, float]):
        self._box = Box(lo, hi)
        self._edges = _edges_of_box(lo, hi)

    def inside(self, pts: np.ndarray) -> np.ndarray:
        p = _as_pts(pts)
        lo, hi = self._box.lo, self._box.hi
        return (
            (p[:, 0] > lo[0]) & (p[:, 0] < hi[0]) & (p[:, 1] > lo[1]) & (p[:, 1] < hi[1])
        )

    def _edge_dist(self, p: np.ndarray) -> np.ndarray:
        d = np.full(len(p), np.inf)
        for a, b in self._edges:
            d = np.minimum(d, point_segment_dist(p, a, b))
        return d

    def dist_boundary(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self._edge_dist(_as_pts(pts))
        return d, d.copy()

    def dist_box(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        d = np.full(len(lo), np.inf)
        for a, b in self._edges:
            d = np.minimum(d, box_segment_dist(lo, hi, a, b))
        return d, d.copy()

    @property
    def bbox(self) -> Box:
        return self._box

    def boundary_sample(self, k: int) -> tuple[np.ndarray, float]:
        segs = np.array([[a, b] for a, b in self._edges])
        return _polyline_sample(segs, k), 0.0

    def domain_key(self) -> str:
        return f"box[{self._box.lo},{self._box.hi}]"

    @property
    def center(self) -> tuple[float, float]:
        return self._box.center


def square_domain(side: float = 1.0, lo: tuple[float, float] = (0.0, 0.0)) -> BoxDomain:
    return BoxDomain(lo, (lo[0] + side, lo[1] + side))


class BoxExterior(Domain):
    """Open complement of a closed axis box; same exact edge distances."""

    def __init__(self, lo: tuple[float, float], hi: tuple[float, float]):
        self._inner = BoxDomain(lo, hi)

    def inside(self, pts: np.ndarray) -> np.ndarray:
        p = _as_pts(pts)
        lo, hi = self._inner._box.lo, self._inner._box.hi
        return (
            (p[:, 0] < lo[0]) | (p[:, 0] > hi[0]) | (p[:, 1] < lo[1]) | (p[:, 1] > hi[1])
        )

    def dist_boundary(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._inner.dist_boundary(pts)

    def dist_box(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._inner.dist_box(lo, hi)

    @property
    def bbox(self) -> None:
        return None

    def boundary_sample(self, k: int) -> tuple[np.ndarray, float]:
        return self._inner.boundary_sample(k)

    def domain_key(self) -> str:
        return "exterior-" + self._inner.domain_key()


class HalfPlaneDomain(Domain):
    """{x : x2 > level}; distance to the line is exact."""

    def __init__(self, level: float = 0.0, sample_span: tuple[float, float] = (-10.0, 10.0)):
        self.level = float(level)
        self.sample_span = sample_span

    def inside(self, pts: np.ndarray) -> np.ndarray:
        return _as_pts(pts)[:, 1] > self.level

    def dist_boundary(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = np.abs(_as_pts(pts)[:, 1] - self.level)
        return d, d.copy()

    def dist_box(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        below = self.level - hi[:, 1]
        above = lo[:, 1] - self.level
        d = np.maximum(np.maximum(below, above), 0.0)
        return d, d.copy()

    @property
    def bbox(self) -> None:
        return None

    def boundary_sample(self, k: int) -> tuple[np.ndarray, float]:
        x = np.linspace(self.sample_span[0], self.sample_span[1], k)
        return np.column_stack([x, np.full(k, self.level)]), 0.0

    def domain_key(self) -> str:
        return f"halfplane[{self.level}]"


def _polyline_sample(segs: np.ndarray, k: int) -> np.ndarray:
    """k arclength-uniform points on segments (M, 2, 2), midpoint offset."""
    a = segs[:, 0]
    b = segs[:, 1]
    lens = np.sqrt(np.sum((b - a) ** 2, axis=1))
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    total = cum[-1]
    t = (np.arange(k) + 0.5) / k * total
    idx = np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(lens) - 1)
    frac = (t - cum[idx]) / np.where(lens[idx] > 0, lens[idx], 1.0)
    return a[idx] + frac[:, None] * (b[idx] - a[idx])


class PolygonDomain(Domain):
    """Open region bounded by one closed polyline loop, CCW orientation."""

    def __init__(self, loop: np.ndarray, margin: float = 0.0, key: str = "polygon"):
        self.loop = np.asarray(loop, dtype=float)
        self.index = PolylineIndex([self.loop], closed=[True])
        self.boundary_margin = float(margin)
        self._key = key
        lo = self.loop.min(axis=0)
        hi = self.loop.max(axis=0)
        pad = self.boundary_margin
        self._bbox = Box((lo[0] - pad, lo[1] - pad), (hi[0] + pad, hi[1] + pad))

    def inside(self, pts: np.ndarray) -> np.ndarray:
        return self.index.inside(_as_pts(pts))

    def dist_boundary(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.index.distance(_as_pts(pts))
        return d, d.copy()

    def dist_box(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        d = self.index.box_distance(lo, hi)
        return d, d.copy()

    @property
    def bbox(self) -> Box:
        return self._bbox

    def boundary_sample(self, k: int) -> tuple[np.ndarray, float]:
        segs = np.stack([self.loop, np.roll(self.loop, -1, axis=0)], axis=1)
        return _polyline_sample(segs, k), 0.0

    def domain_key(self) -> str:
        return self._key


class SnowflakeDomain(PolygonDomain):
    """Region bounded by three Koch-type curves on an equilateral triangle.

    Bumps point outward, so the triangle itself is contained in the
    domain.  The polyline is the boundary this object is exact for;
    boundary_margin bounds the gap to the limit curve.
    """

    def __init__(
        self,
        lam: float = math.log(4) / math.log(3),
        generation: int = 8,
        side: float = 1.0,
        center: tuple[float, float] = (0.0, 0.0),
    ):
        self.lam = float(lam)
        self.generation = int(generation)
        self.side = float(side)
        self.center = (float(center[0]), float(center[1]))
        R = self.side / math.sqrt(3.0)
        cx, cy = self.center
        tri = [
            (cx + R * math.cos(math.pi / 2), cy + R * math.sin(math.pi / 2)),
            (cx + R * math.cos(math.pi * 7 / 6), cy + R * math.sin(math.pi * 7 / 6)),
            (cx + R * math.cos(math.pi * 11 / 6), cy + R * math.sin(math.pi * 11 / 6)),
        ]
        self.pieces: list[KochPolyline] = []
        verts: list[np.ndarray] = []
        for i in range(3):
            # CCW traversal with bumps to the right = outward
            piece = koch_curve(self.lam, self.generation, (tri[i], tri[(i + 1) % 3]), orientation=-1)
            self.pieces.append(piece)
            verts.append(piece.vertices[:-1])
        loop = np.vstack(verts)
        margin = self.pieces[0].approx_margin
        super().__init__(
            loop,
            margin=margin,
            key=f"snowflake[lam={self.lam:.12g},g={self.generation},side={self.side},c={self.center}]",
        )
        self.triangle = tri

    @property
    def suggested_center(self) -> tuple[float, float]:
        return self.center

    def curve_index(self) -> PolylineIndex:
        return self.index


class HalfPlaneAboveCurve(PolygonDomain):
    """Region above a graph-like Koch curve joining (-3,0) to (3,0).

    The curve is six concatenated unit-span generators bumping upward,
    closed off by a box through (+-3.5, 3.5), so the boundary inside
    the window [-3,3] x [0,3] is exactly the curve and the strip
    [-3,3] x [-1,-margin] lies outside the domain.
    """

    def __init__(self, lam: float = math.log(4) / math.log(3), generation: int = 7):
        self.lam = float(lam)
        self.generation = int(generation)
        self.pieces = []
        verts = []
        box_part = np.array(
            [[3.0, 0.0], [3.5, 0.0], [3.5, 3.5], [-3.5, 3.5], [-3.5, 0.0], [-3.0, 0.0]]
        )
        verts.append(box_part)
        for i in range(6):
            a = (-3.0 + i, 0.0)
            b = (-2.0 + i, 0.0)
            piece = koch_curve(self.lam, self.generation, (a, b), orientation=1)
            self.pieces.append(piece)
            verts.append(piece.vertices[:-1])
        loop = np.vstack(verts)
        margin = self.pieces[0].approx_margin
        super().__init__(
            loop, margin=margin, key=f"curvegraph[lam={self.lam:.12g},g={self.generation}]"
        )
        self._curve_index: PolylineIndex | None = None

    @property
    def suggested_center(self) -> tuple[float, float]:
        return (0.0, 1.75)

    def curve_index(self) -> PolylineIndex:
        """Index over the fractal part only (the boundary in the window)."""
        if self._curve_index is None:
            self._curve_index = PolylineIndex([p.vertices for p in self.pieces])
        return self._curve_index

    def curve_height_bound(self) -> float:
        return self.pieces[0].height_bound

    def outside_strip(self) -> Box:
        """A box certified inside the complement (below the curve)."""
        m = self.boundary_margin
        return Box((-3.0, -1.0), (3.0, -m if m > 0 else 0.0))


class PolylineComplement(Domain):
    """Open complement of a polyline curve; the removed set has zero area."""

    def __init__(self, parts: list[np.ndarray], key: str = "curve-complement"):
        self.parts = [np.asarray(p, dtype=float) for p in parts]
        self.index = PolylineIndex(self.parts)
        self._key = key
        self.complement_area = Bracket.exact(0.0)

    def inside(self, pts: np.ndarray) -> np.ndarray:
        return self.index.distance(_as_pts(pts)) > 0.0

    def dist_boundary(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = self.index.distance(_as_pts(pts))
        return d, d.copy()

    def dist_box(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        d = self.index.box_distance(lo, hi)
        return d, d.copy()

    @property
    def bbox(self) -> None:
        return None

    def boundary_sample(self, k: int) -> tuple[np.ndarray, float]:
        segs = []
        for p in self.parts:
            segs.append(np.stack([p[:-1], p[1:]], axis=1))
        return _polyline_sample(np.vstack(segs), k), 0.0

    def domain_key(self) -> str:
        return self._key


def default_epsilon_budget(j: int, sp: float) -> Fraction:
    """Per-level corridor budget eps_j for the composite construction.

    Fine levels follow eps_j = 2**-j * min(1/4, 2**-j*sp); coarse
    levels get an extra 2**j factor so the weighted complement series
    stays geometrically summable even at sp <= 1, where the plain
    2**-|j| choice makes coarse terms order one.
    """
    if j >= 0:
        cap = Fraction(1, 4)
        decay = _dyadic_pow(-j * sp)
        return Fraction(1, 2**j) * min(cap, decay)
    depth = -j
    return Fraction(1, 4 ** depth) * Fraction(1, 4)


def _dyadic_pow(e: float) -> Fraction:
    """Exact Fraction for 2**e when e is integral, float-exact otherwise."""
    if float(e) == int(e):
        ei = int(e)
        return Fraction(2**ei) if ei >= 0 else Fraction(1, 2**-ei)
    return Fraction(2.0 ** float(e))


class CompositeComplement(Domain):
    """G = plane minus K, K = core boundary plus Cantor dust in every
    exterior Whitney cube of a level window.

    The core square is (-1,1)^2.  For points of the core, dist(x, K)
    equals the exact distance to the core boundary because the dust
    lies beyond it (any segment leaving the core crosses the boundary
    first).  Exterior queries combine the edge distance with nearby
    tree brackets by branch and bound.
    """

    def __init__(
        self,
        sp: float = 1.0,
        j_fine: int = 8,
        j_coarse: int = -6,
        tree_depth: int = 10,
        epsilon_budget=None,
    ):
        from .dyadic import whitney_decompose  # local import avoids a cycle

        self.sp = float(sp)
        self.j_fine = int(j_fine)
        self.j_coarse = int(j_coarse)
        self.tree_depth = int(tree_depth)
        self.core = BoxDomain((-1.0, -1.0), (1.0, 1.0))
        self._budget = epsilon_budget or (lambda j: default_epsilon_budget(j, self.sp))
        half = float(2.0 ** (-self.j_coarse))
        window = Box((-half, -half), (half, half))
        exterior = BoxExterior((-1.0, -1.0), (1.0, 1.0))
        self.whitney = whitney_decompose(exterior, window, self.j_coarse, self.j_fine)
        self.trees: list[CantorTree] = []
        self._tree_levels = self.whitney.levels.copy()
        for i in range(len(self.whitney)):
            cube = self.whitney.cube(i)
            sched = schedule_composite(self._budget(cube.j))
            self.trees.append(CantorTree(cube.lo_exact, cube.side_exact, sched))
        self._roots_lo = self.whitney.lo.copy()
        self._roots_hi = self.whitney.hi.copy()

    # -- geometry -------------------------------------------------------

    def _tree_dist(self, x: np.ndarray, upper0: float) -> tuple[float, float]:
        """Branch-and-bound min distance to any tree, given an upper bound."""
        gap = np.maximum(np.maximum(self._roots_lo - x, x - self._roots_hi), 0.0)
        rough = np.sqrt(np.sum(gap * gap, axis=1))
        lo_best, up_best = math.inf, upper0
        order = np.argsort(rough, kind="stable")
        for i in order:
            if rough[i] >= up_best:
                break
            lo, up = self.trees[i]._distance_one(x, self.tree_depth)
            if up < up_best:
                up_best = up
            if lo < lo_best:
                lo_best = lo
        return min(lo_best, up_best), up_best

    def dist_boundary(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = _as_pts(pts)
        edge, _ = self.core.dist_boundary(p)
        ins_core = self.core.inside(p)
        n = len(p)
        lo = np.empty(n)
        up = np.empty(n)
        for i in range(n):
            if ins_core[i]:
                # dust lies beyond the core boundary
                lo[i] = up[i] = edge[i]
            else:
                tl, tu = self._tree_dist(p[i], edge[i])
                lo[i] = min(edge[i], tl)
                up[i] = min(edge[i], tu)
        return lo, up

    def dist_box(self, lo_in: np.ndarray, hi_in: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo_in = np.atleast_2d(np.asarray(lo_in, dtype=float))
        hi_in = np.atleast_2d(np.asarray(hi_in, dtype=float))
        edge, _ = self.core.dist_box(lo_in, hi_in)
        n = len(lo_in)
        out_lo = np.empty(n)
        out_up = np.empty(n)
        for i in range(n):
            blo, bhi = lo_in[i], hi_in[i]
            # fully inside the open core: the dust cannot be closer
            if (
                blo[0] > -1.0 and blo[1] > -1.0 and bhi[0] < 1.0 and bhi[1] < 1.0
            ):
                out_lo[i] = out_up[i] = edge[i]
                continue
            gap_lo = np.maximum(np.maximum(self._roots_lo - bhi[None, :], blo[None, :] - self._roots_hi), 0.0)
            rough = np.sqrt(np.sum(gap_lo * gap_lo, axis=1))
            up_best = edge[i]
            lo_best = edge[i]
            center = 0.5 * (blo + bhi)
            half = 0.5 * (bhi - blo)
            rad = float(math.hypot(half[0], half[1]))
            order = np.argsort(rough, kind="stable")
            for t in order:
                if rough[t] >= up_best:
                    break
                clo, cup = self.trees[t]._distance_one(center, self.tree_depth)
                lo_t = max(rough[t], clo - rad)
                up_t = cup + rad
                if up_t < up_best:
                    up_best = up_t
                if lo_t < lo_best:
                    lo_best = lo_t
            out_lo[i] = max(min(lo_best, up_best), 0.0)
            out_up[i] = up_best
        return out_lo, out_up

    def inside(self, pts: np.ndarray) -> np.ndarray:
        p = _as_pts(pts)
        lo, _ = self.dist_boundary(p)
        return lo > 0.0

    @property
    def bbox(self) -> None:
        return None

    def boundary_sample(self, k: int) -> tuple[np.ndarray, float]:
        """Half on the core boundary, half on dust corner points."""
        k_core = k // 2
        pts_core, _ = self.core.boundary_sample(max(k_core, 1))
        k_dust = k - len(pts_core)
        dust = []
        n_trees = len(self.trees)
        for m in range(max(k_dust, 0)):
            tree = self.trees[(m * 2654435761) % n_trees]
            lo_cells, side = tree.cells(min(3, self.tree_depth))
            cell = lo_cells[m % len(lo_cells)]
            dust.append([cell[0], cell[1]])
        if dust:
            return np.vstack([pts_core, np.asarray(dust)]), 0.0
        return pts_core, 0.0

    def domain_key(self) -> str:
        return f"composite[sp={self.sp},J={self.j_fine},coarse={self.j_coarse}]"

    # -- the weighted complement series ---------------------------------

    def cube_gap_fraction(self, i: int) -> Bracket:
        """Exact bracket on |Q meet G| / |Q| for Whitney cube i."""
        tree = self.trees[i]
        upper_prod = tree.product_measure(self.tree_depth) / (tree.side0 * tree.side0)
        lower_prod = upper_prod * tree.density_lower(self.tree_depth)
        return Bracket(float(1 - upper_prod), float(1 - lower_prod))

    def level_gap_fraction(self, j: int) -> Bracket:
        """Gap fraction of one level-j cube; depends only on the schedule."""
        from .fractals import CantorTree

        sched = schedule_composite(self._budget(j))
        probe = CantorTree((Fraction(0), Fraction(0)), Fraction(1), sched)
        upper_prod = probe.product_measure(self.tree_depth)
        lower_prod = upper_prod * probe.density_lower(self.tree_depth)
        return Bracket(float(1 - upper_prod), float(1 - lower_prod))

    def level_count(self, j: int) -> int:
        """Exact number of level-j cubes in the full (unwindowed)
        decomposition of the core exterior.

        A cube is selected exactly when it satisfies the distance
        criterion and its parent does not; the criterion is monotone
        under subdivision, so no global recursion is needed.  Selected
        cubes sit within distance 4*diam of the core, which bounds the
        enumeration range.
        """
        from .dyadic import DIAM_UP, level_side

        side = level_side(j)
        reach = 1.0 + 6.0 * side  # 1 + (4*sqrt2 + 1)*side, rounded up
        a_min = math.floor(-reach / side) - 1
        a_max = math.ceil(reach / side) + 1
        ax = np.arange(a_min, a_max + 1)
        AX, AY = np.meshgrid(ax, ax, indexing="ij")
        lo = np.column_stack([AX.ravel() * side, AY.ravel() * side])
        hi = lo + side
        # keep only cubes fully outside the closed core (a cube meeting
        # the core has distance zero and is never selected anyway)
        outside = (
            (hi[:, 0] <= -1.0) | (lo[:, 0] >= 1.0) | (hi[:, 1] <= -1.0) | (lo[:, 1] >= 1.0)
        )
        dlo, _ = self.core.dist_box(lo, hi)
        crit = outside & (dlo >= DIAM_UP * side)
        par_side = 2.0 * side
        plo = np.column_stack([np.floor_divide(AX.ravel(), 2) * par_side, np.floor_divide(AY.ravel(), 2) * par_side])
        phi = plo + par_side
        pdlo, _ = self.core.dist_box(plo, phi)
        par_out = (
            (phi[:, 0] <= -1.0) | (plo[:, 0] >= 1.0) | (phi[:, 1] <= -1.0) | (plo[:, 1] >= 1.0)
        )
        par_crit = par_out & (pdlo >= DIAM_UP * par_side)
        return int(np.count_nonzero(crit & ~par_crit))

    def series_terms(self, j_lo: int = -40, j_hi: int | None = None) -> dict[int, Bracket]:
        """Exact per-level terms 2**(j*sp) * sum_Q |Q meet G|.

        All cubes of one level share a schedule, so the term is
        count * |Q| * gap fraction; counts come from the exact local
        selection rule and are not limited to the stored window.
        """
        if j_hi is None:
            j_hi = self.j_fine
        out: dict[int, Bracket] = {}
        for j in range(j_lo, j_hi + 1):
            count = self.level_count(j)
            cell_area = float(4.0 ** (-j))
            weight = float(2.0 ** (j * self.sp))
            out[j] = self.level_gap_fraction(j).scale(count * cell_area * weight)
        return out

    def series_tail_bounds(self, j_lo: int = -40, j_hi: int | None = None) -> dict[str, float]:
        """Analytic bounds on the series outside computed levels [j_lo, j_hi].

        Coarse side: level-j cubes (side S=2**-j) fit in a box of
        half-width 1+8.5*S around the core, so at most 290 disjoint
        cubes per level.  Fine side: they fit in an annulus of area
        below 114*2**-j.  The gap fraction of one cube is at most
        2*sum_k eps_{j,k} = eps_j, making both series geometric.
        """
        if j_hi is None:
            j_hi = self.j_fine
        coarse = 0.0
        for j in range(j_lo - 80, j_lo):
            eps = float(self._budget(j))
            coarse += 290.0 * (2.0 ** (j * self.sp)) * (4.0 ** (-j)) * min(eps, 1.0)
        fine = 0.0
        for j in range(j_hi + 1, j_hi + 80):
            eps = float(self._budget(j))
            fine += 114.0 * (2.0**j) * (2.0 ** (j * self.sp)) * (4.0 ** (-j)) * min(eps, 1.0)
        return {"coarse": coarse, "fine": fine}


class CoreMinusCantor(Domain):
    """G = snowflake core minus a fat Cantor set on [0,1]^2.

    The snowflake is large enough that the unit square keeps distance
    at least 1 from its boundary, so near the dust the boundary
    distance is governed by the tree alone.
    """

    def __init__(
        self,
        sp: float = 1.0,
        lam: float = math.log(4) / math.log(3),
        generation: int = 6,
        tree_depth: int = 12,
        schedule: EpsilonSchedule | None = None,
    ):
        self.sp = float(sp)
        self.snowflake = SnowflakeDomain(lam=lam, generation=generation, side=8.0, center=(0.5, 0.5))
        self.schedule = schedule or schedule_scaled_corner(sp)
        self.tree = CantorTree((Fraction(0), Fraction(0)), Fraction(1), self.schedule)
        self.tree_depth = int(tree_depth)
        self.boundary_margin = self.snowflake.boundary_margin

    def inside(self, pts: np.ndarray) -> np.ndarray:
        p = _as_pts(pts)
        ins = self.snowflake.inside(p)
        tlo, _ = self.tree.distance_bracket(p, depth=self.tree_depth)
        return ins & (tlo > 0.0)

    def dist_boundary(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = _as_pts(pts)
        slo, sup = self.snowflake.dist_boundary(p)
        tlo, tup = self.tree.distance_bracket(p, depth=self.tree_depth)
        return np.minimum(slo, tlo), np.minimum(sup, tup)

    def dist_box(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        slo, sup = self.snowflake.dist_box(lo, hi)
        n = len(lo)
        tlo = np.empty(n)
        tup = np.empty(n)
        for i in range(n):
            center = 0.5 * (lo[i] + hi[i])
            half = 0.5 * (hi[i] - lo[i])
            rad = float(math.hypot(half[0], half[1]))
            clo, cup = self.tree._distance_one(center, self.tree_depth)
            tlo[i] = max(clo - rad, 0.0)
            tup[i] = cup + rad
        return np.minimum(slo, tlo), np.minimum(sup, tup)

    @property
    def bbox(self) -> Box:
        return self.snowflake.bbox

    def boundary_sample(self, k: int) -> tuple[np.ndarray, float]:
        k_snow = k // 2
        pts_a, _ = self.snowflake.boundary_sample(max(k_snow, 1))
        depth = 4
        lo_cells, side = self.tree.cells(depth)
        take = max(k - len(pts_a), 0)
        stride = max(len(lo_cells) // max(take, 1), 1)
        corners = lo_cells[::stride][:take]
        if len(corners):
            return np.vstack([pts_a, corners]), 0.0
        return pts_a, 0.0

    def domain_key(self) -> str:
        return f"core-minus-cantor[sp={self.sp},{self.snowflake.domain_key()}]"

    # -- the diagonal cells of the scaled construction -------------------

    def diagonal_cell(self, k: int) -> tuple[tuple[Fraction, Fraction], Fraction]:
        """Exact (lo, side) of the generation-k cell containing (0,1)."""
        side = self.tree.side(k)
        return ((Fraction(0), 1 - side), side)

    def scaled_box(self, k: int) -> Box:
        """The [0, l_k] x [1, 1 + l_k/2] stage for the k-th test function."""
        side = float(self.tree.side(k))
        return Box((0.0, 1.0), (side, 1.0 + side / 2.0))
