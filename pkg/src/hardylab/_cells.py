"""Integration cells: boxes with certified measures.

Plain boxes carry exact areas.  Complements of fat Cantor sets refine
into exact corridor rectangles plus fuzzy subcells whose measures
telescope, so the total stays exact at every refinement depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Bracket
from .fractals import CantorTree

__all__ = ["QCell", "cantor_complement_cells", "grid_cells", "interval_cells", "split_cell"]


@dataclass(frozen=True)
class QCell:
    """Axis box with a measure bracket for |cell meet G|.

    lo and hi are n-vectors; measure defaults to the full box volume.
    """

    lo: np.ndarray
    hi: np.ndarray
    measure: Bracket

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi < lo):
            raise ValueError("inverted cell")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def box(cls, lo, hi) -> "QCell":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return cls(lo, hi, Bracket.exact(float(np.prod(hi - lo))))

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_diag(self) -> float:
        return 0.5 * float(np.sqrt(np.sum((self.hi - self.lo) ** 2)))

    @property
    def diam(self) -> float:
        return 2.0 * self.half_diag

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))


def split_cell(cell: QCell) -> list[QCell]:
    """Halve along the longest axis; exact only for full-box measures."""
    if not cell.measure.certified or cell.measure.upper != cell.volume:
        raise ValueError("only full boxes split exactly")
    ax = int(np.argmax(cell.hi - cell.lo))
    mid = 0.5 * (cell.lo[ax] + cell.hi[ax])
    hi1 = cell.hi.copy()
    hi1[ax] = mid
    lo2 = cell.lo.copy()
    lo2[ax] = mid
    return [QCell.box(cell.lo, hi1), QCell.box(lo2, cell.hi)]


def grid_cells(lo, hi, m: int) -> list[QCell]:
    """m x m (or m in 1-d) exact subdivision of a box."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    edges = [np.linspace(lo[d], hi[d], m + 1) for d in range(len(lo))]
    cells = []
    if len(lo) == 1:
        for i in range(m):
            cells.append(QCell.box([edges[0][i]], [edges[0][i + 1]]))
        return cells
    for i in range(m):
        for j in range(m):
            cells.append(
                QCell.box([edges[0][i], edges[1][j]], [edges[0][i + 1], edges[1][j + 1]])
            )
    return cells


def interval_cells(a: float, b: float, m: int) -> list[QCell]:
    return grid_cells([a], [b], m)


def cantor_complement_cells(
    tree: CantorTree, root_lo, root_hi, depth: int
) -> tuple[list[QCell], Bracket]:
    """Cells covering (root box) minus K, refined to a tree depth.

    Corridor rectangles are exactly outside K and carry exact areas;
    the four child cells at the cutoff depth are fuzzy (they still
    contain deep K) and carry [volume - |K meet cell| upper, volume -
    |K meet cell| lower] brackets.  Also returns the exact total
    complement measure bracket as a cross-check: corridor areas plus
    fuzzy brackets telescope to |root| - |K|.
    """
    root_lo = np.asarray(root_lo, dtype=float)
    root_hi = np.asarray(root_hi, dtype=float)
    t_lo = np.array([float(tree.lo[0]), float(tree.lo[1])])
    t_side = float(tree.side(0))
    if np.any(np.abs(root_lo - t_lo) > 1e-12) or abs(
        float(root_hi[0] - root_lo[0]) - t_side
    ) > 1e-12:
        raise ValueError("root box must coincide with the tree root")

    cells: list[QCell] = []

    def corridor_cells(k: int, lo_x: Fraction, lo_y: Fraction):
        s = tree.side(k)
        child = tree.side(k + 1)
        eps_w = s - 2 * child
        if eps_w <= 0:
            return
        # vertical corridor full height, horizontal corridor split in two
        vx0 = lo_x + child
        hy0 = lo_y + child
        rects = [
            ((vx0, lo_y), (vx0 + eps_w, lo_y + s)),
            ((lo_x, hy0), (lo_x + child, hy0 + eps_w)),
            ((vx0 + eps_w, hy0), (lo_x + s, hy0 + eps_w)),
        ]
        for (ax, ay), (bx, by) in rects:
            area = (bx - ax) * (by - ay)
            cells.append(
                QCell(
                    np.array([float(ax), float(ay)]),
                    np.array([float(bx), float(by)]),
                    Bracket.exact(float(area)),
                )
            )

    def descend(k: int, lo_x: Fraction, lo_y: Fraction):
        if k == depth:
            s = tree.side(k)
            vol = s * s
            k_up = tree.product_measure(k + 20) / 4**k
            k_lo = k_up * tree.density_lower(k + 20)
            lo_m = float(vol - k_up)
            hi_m = float(vol - k_lo)
            cells.append(
                QCell(
                    np.array([float(lo_x), float(lo_y)]),
                    np.array([float(lo_x + s), float(lo_y + s)]),
                    Bracket(max(lo_m, 0.0), hi_m),
                )
            )
            return
        corridor_cells(k, lo_x, lo_y)
        shift = tree.side(k) - tree.side(k + 1)
        for dx in (Fraction(0), shift):
            for dy in (Fraction(0), shift):
                descend(k + 1, lo_x + dx, lo_y + dy)

    descend(0, tree.lo[0], tree.lo[1])
    total = Bracket.exact(0.0)
    for c in cells:
        total = total.add(c.measure)
    return cells, total
