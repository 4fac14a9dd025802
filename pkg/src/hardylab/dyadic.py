"""Dyadic cubes and Whitney decompositions inside a computational window.

A cube at level j has side exactly 2**-j and integer anchor (ax, ay):
its corners are dyadic rationals, exact in float64 for every level this
package uses.  The Whitney construction selects a cube at the coarsest
level where diam(Q) <= dist(Q, boundary) holds with the certified side
of the distance bracket; straddling cubes subdivide, so every selected
cube is guaranteed valid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from ._geom import Box
from .core import Bracket

__all__ = [
    "DIAM_UP",
    "DyadicCube",
    "WhitneyDecomposition",
    "WindowDisjoint",
    "cube_diam_upper",
    "dilate",
    "whitney_decompose",
]

# sqrt(2) rounded up: diam bounds stay exact under power-of-two scaling
DIAM_UP = float(np.nextafter(math.sqrt(2.0), 2.0))
DIAM_LO = float(np.nextafter(math.sqrt(2.0), 1.0))

CACHE_VERSION = 1


class WindowDisjoint(ValueError):
    """The window does not meet the domain."""


def level_side(j: int) -> float:
    return float(2.0**-j)


def cube_diam_upper(side: float) -> float:
    """Certified upper bound on sqrt(2)*side, exact for dyadic sides."""
    return DIAM_UP * side


def _exact_coord(a: int, j: int) -> Fraction:
    return Fraction(a, 1 << j) if j >= 0 else Fraction(a * (1 << -j))


@dataclass(frozen=True)
class DyadicCube:
    """Closed dyadic cube [ax, ax+1] x [ay, ay+1] in units of 2**-j."""

    j: int
    ax: int
    ay: int

    @property
    def side(self) -> float:
        return level_side(self.j)

    @property
    def diam(self) -> float:
        return math.sqrt(2.0) * self.side

    @property
    def lo(self) -> tuple[float, float]:
        s = self.side
        return (self.ax * s, self.ay * s)

    @property
    def hi(self) -> tuple[float, float]:
        s = self.side
        return ((self.ax + 1) * s, (self.ay + 1) * s)

    @property
    def center(self) -> tuple[float, float]:
        s = self.side
        return ((self.ax + 0.5) * s, (self.ay + 0.5) * s)

    @property
    def lo_exact(self) -> tuple[Fraction, Fraction]:
        return (_exact_coord(self.ax, self.j), _exact_coord(self.ay, self.j))

    @property
    def side_exact(self) -> Fraction:
        return Fraction(1, 1 << self.j) if self.j >= 0 else Fraction(1 << -self.j)

    def box(self) -> Box:
        return Box(self.lo, self.hi)

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.j - 1, self.ax >> 1, self.ay >> 1)

    def children(self) -> list["DyadicCube"]:
        j, ax, ay = self.j + 1, self.ax * 2, self.ay * 2
        return [DyadicCube(j, ax + dx, ay + dy) for dy in (0, 1) for dx in (0, 1)]


def dilate(cube: DyadicCube, L: float) -> Box:
    """Axis box with the cube's center and side L*side."""
    if L < 1:
        raise ValueError("dilation factor must be >= 1")
    cx, cy = cube.center
    h = 0.5 * L * cube.side
    return Box((cx - h, cy - h), (cx + h, cy + h))


class WhitneyDecomposition:
    """Selected Whitney cubes plus the cover bookkeeping.

    Flat arrays sorted by (level, ax, ay): levels, anchors, dist_lo,
    dist_up.  far holds interior cubes at the coarsest level whose
    certified distance exceeds 4*diam (cover members, not Whitney
    cubes); unresolved holds depth-exhausted boxes whose total measure
    is the uncovered bound.
    """

    def __init__(
        self,
        domain,
        window: Box,
        j_min: int,
        j_max: int,
        levels: np.ndarray,
        anchors: np.ndarray,
        dist_lo: np.ndarray,
        dist_up: np.ndarray,
        far: list[DyadicCube],
        unresolved: list[DyadicCube],
    ):
        self.domain = domain
        self.window = window
        self.j_min = j_min
        self.j_max = j_max
        self.levels = levels
        self.anchors = anchors
        self.dist_lo = dist_lo
        self.dist_up = dist_up
        self.far = far
        self.unresolved = unresolved
        self.uncovered_bound = float(sum(c.side * c.side for c in unresolved))
        self._adjacency: tuple[np.ndarray, np.ndarray] | None = None
        self._index: dict[tuple[int, int, int], int] = {
            (int(j), int(ax), int(ay)): i
            for i, (j, (ax, ay)) in enumerate(zip(levels, anchors))
        }

    def __len__(self) -> int:
        return len(self.levels)

    def cube(self, i: int) -> DyadicCube:
        return DyadicCube(int(self.levels[i]), int(self.anchors[i, 0]), int(self.anchors[i, 1]))

    def cubes(self) -> Iterable[DyadicCube]:
        return (self.cube(i) for i in range(len(self)))

    @property
    def sides(self) -> np.ndarray:
        return 2.0 ** (-self.levels.astype(float))

    @property
    def lo(self) -> np.ndarray:
        return self.anchors * self.sides[:, None]

    @property
    def hi(self) -> np.ndarray:
        return (self.anchors + 1) * self.sides[:, None]

    @property
    def centers(self) -> np.ndarray:
        return (self.anchors + 0.5) * self.sides[:, None]

    def level_counts(self) -> dict[int, int]:
        vals, counts = np.unique(self.levels, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def find(self, j: int, ax: int, ay: int) -> int:
        return self._index.get((j, ax, ay), -1)

    def dist_bracket(self, i: int) -> Bracket:
        return Bracket(float(self.dist_lo[i]), float(self.dist_up[i]))

    # -- adjacency ------------------------------------------------------

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, indices) of cubes sharing a boundary point.

        Built on exact integer anchors.  A levels-apart-by-3-or-more
        touching pair would break the Whitney distance estimate, so the
        probe extends to +-4 levels and raises if it ever finds one.
        """
        if self._adjacency is not None:
            return self._adjacency
        n = len(self)
        neigh: list[list[int]] = [[] for _ in range(n)]
        for i in range(n):
            j = int(self.levels[i])
            ax = int(self.anchors[i, 0])
            ay = int(self.anchors[i, 1])
            for dj in range(-4, 5):
                j2 = j + dj
                if j2 < self.j_min or j2 > self.j_max:
                    continue
                found = self._ring_lookup(i, j, ax, ay, j2)
                for k in found:
                    if abs(dj) > 2:
                        raise AssertionError(
                            f"touching cubes {self.cube(i)} and {self.cube(k)} differ by {abs(dj)} levels"
                        )
                    if k > i:
                        neigh[i].append(k)
                        neigh[k].append(i)
        indptr = np.zeros(n + 1, dtype=np.int64)
        for i in range(n):
            neigh[i].sort()
            indptr[i + 1] = indptr[i] + len(neigh[i])
        indices = np.concatenate([np.asarray(v, dtype=np.int64) for v in neigh]) if n else np.empty(0, np.int64)
        self._adjacency = (indptr, indices)
        return self._adjacency

    def _ring_lookup(self, i: int, j: int, ax: int, ay: int, j2: int) -> list[int]:
        """Indices of level-j2 cubes touching cube i, via integer anchors."""
        out: list[int] = []
        if j2 >= j:
            f = 1 << (j2 - j)
            # our cube spans [ax*f, (ax+1)*f] in level-j2 units
            x0, x1 = ax * f - 1, (ax + 1) * f
            y0, y1 = ay * f - 1, (ay + 1) * f
            for bx in range(x0, x1 + 1):
                for by in range(y0, y1 + 1):
                    if x0 < bx < x1 and y0 < by < y1:
                        continue  # interior overlap is impossible; skip non-ring
                    k = self.find(j2, bx, by)
                    if k >= 0 and k != i:
                        out.append(k)
        else:
            f = 1 << (j - j2)
            # level-j2 cube containing or adjacent to ours
            bx0 = (ax - 1) // f if (ax - 1) < 0 else (ax - 1) // f
            for bx in {(ax - 1) // f, ax // f, (ax + 1) // f}:
                for by in {(ay - 1) // f, ay // f, (ay + 1) // f}:
                    k = self.find(j2, bx, by)
                    if k >= 0 and k != i:
                        # confirm actual touching in fine units
                        fx0, fx1 = bx * f, (bx + 1) * f
                        fy0, fy1 = by * f, (by + 1) * f
                        if fx0 <= ax + 1 and ax <= fx1 and fy0 <= ay + 1 and ay <= fy1:
                            out.append(k)
        return out

    # -- serialization --------------------------------------------------

    def to_json(self, domain_key: str) -> str:
        payload = {
            "version": CACHE_VERSION,
            "domain_key": domain_key,
            "window": [list(self.window.lo), list(self.window.hi)],
            "j_min": self.j_min,
            "j_max": self.j_max,
            "selected": [[int(j), int(a[0]), int(a[1])] for j, a in zip(self.levels, self.anchors)],
            "far": [[c.j, c.ax, c.ay] for c in self.far],
            "unresolved": [[c.j, c.ax, c.ay] for c in self.unresolved],
        }
        return json.dumps(payload, separators=(",", ":"), sort_keys=True)


def _aligned_window(window: Box, j_min: int) -> tuple[int, int, int, int]:
    """Expand window outward to the level-j_min anchor lattice."""
    s = level_side(j_min)
    x0 = math.floor(window.lo[0] / s)
    y0 = math.floor(window.lo[1] / s)
    x1 = math.ceil(window.hi[0] / s)
    y1 = math.ceil(window.hi[1] / s)
    return x0, y0, x1, y1


def whitney_decompose(domain, window: Box, j_min: int, j_max: int) -> WhitneyDecomposition:
    """Canonical Whitney decomposition of domain within window.

    A cube is selected at the coarsest level where the certified
    distance lower bound reaches diam(Q) and its center lies inside;
    cubes whose closed box certifiably misses the boundary with the
    center outside are dropped with their whole subtree; everything
    else subdivides.  Cubes selected with certified distance above
    4*diam land in `far` (cover members, not Whitney cubes).
    """
    if j_min > j_max:
        raise ValueError("j_min must not exceed j_max")
    x0, y0, x1, y1 = _aligned_window(window, j_min)
    if x0 >= x1 or y0 >= y1:
        raise WindowDisjoint(f"window {window} is empty at level {j_min}")

    axs, ays = np.meshgrid(np.arange(x0, x1), np.arange(y0, y1), indexing="ij")
    active = np.column_stack([axs.ravel(), ays.ravel()]).astype(np.int64)

    sel_levels: list[np.ndarray] = []
    sel_anchors: list[np.ndarray] = []
    sel_dlo: list[np.ndarray] = []
    sel_dup: list[np.ndarray] = []
    far: list[DyadicCube] = []
    unresolved: list[DyadicCube] = []

    for j in range(j_min, j_max + 1):
        if len(active) == 0:
            break
        side = level_side(j)
        lo = active * side
        hi = (active + 1) * side
        dlo, dup = domain.dist_box(lo, hi)
        centers = (active + 0.5) * side
        ins = domain.inside(centers)
        diam_up = cube_diam_upper(side)

        crit = dlo >= diam_up
        sel = crit & ins
        drop = (dlo > 0.0) & ~ins
        subdiv = ~sel & ~drop

        if np.any(sel):
            far_mask = sel & (dlo > 4.0 * diam_up)
            keep_mask = sel & ~far_mask
            for ax, ay in active[far_mask]:
                far.append(DyadicCube(j, int(ax), int(ay)))
            k = int(np.count_nonzero(keep_mask))
            if k:
                sel_levels.append(np.full(k, j, dtype=np.int64))
                sel_anchors.append(active[keep_mask])
                sel_dlo.append(dlo[keep_mask])
                sel_dup.append(dup[keep_mask])

        if j == j_max:
            for ax, ay in active[subdiv]:
                unresolved.append(DyadicCube(j, int(ax), int(ay)))
            break
        parents = active[subdiv]
        if len(parents) == 0:
            active = parents
            continue
        base = parents * 2
        children = np.concatenate(
            [base + np.array(off, dtype=np.int64) for off in ((0, 0), (1, 0), (0, 1), (1, 1))]
        )
        active = children

    if not sel_levels:
        if not unresolved and not far:
            raise WindowDisjoint("no cube of the window meets the domain")
        levels = np.empty(0, dtype=np.int64)
        anchors = np.empty((0, 2), dtype=np.int64)
        dist_lo = np.empty(0)
        dist_up = np.empty(0)
    else:
        levels = np.concatenate(sel_levels)
        anchors = np.vstack(sel_anchors)
        dist_lo = np.concatenate(sel_dlo)
        dist_up = np.concatenate(sel_dup)
        order = np.lexsort((anchors[:, 1], anchors[:, 0], levels))
        levels = levels[order]
        anchors = anchors[order]
        dist_lo = dist_lo[order]
        dist_up = dist_up[order]

    return WhitneyDecomposition(
        domain, window, j_min, j_max, levels, anchors, dist_lo, dist_up, far, unresolved
    )


def load_decomposition(text: str, domain, domain_key: str) -> WhitneyDecomposition:
    """Rebuild a cached decomposition and revalidate every cube."""
    payload = json.loads(text)
    if payload.get("version") != CACHE_VERSION:
        raise ValueError("cache version mismatch")
    if payload.get("domain_key") != domain_key:
        raise ValueError("cache was built for a different domain")
    window = Box(tuple(payload["window"][0]), tuple(payload["window"][1]))
    sel = np.asarray(payload["selected"], dtype=np.int64).reshape(-1, 3)
    levels = sel[:, 0]
    anchors = sel[:, 1:]
    sides = 2.0 ** (-levels.astype(float))
    lo = anchors * sides[:, None]
    hi = (anchors + 1) * sides[:, None]
    dlo, dup = domain.dist_box(lo, hi)
    diam_up = DIAM_UP * sides
    if not np.all(dlo >= diam_up):
        raise ValueError("cached cube fails the certified Whitney lower bound")
    if not np.all(dlo <= 4.0 * diam_up):
        raise ValueError("cached cube certifiably exceeds 4*diam")
    far = [DyadicCube(int(j), int(x), int(y)) for j, x, y in payload["far"]]
    unresolved = [DyadicCube(int(j), int(x), int(y)) for j, x, y in payload["unresolved"]]
    return WhitneyDecomposition(
        domain, window, payload["j_min"], payload["j_max"], levels, anchors, dlo, dup, far, unresolved
    )
