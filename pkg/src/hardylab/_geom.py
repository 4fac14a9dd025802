"""Planar geometry kernels: boxes, segments, polyline distance queries.

Internal plumbing shared by the domain, fractal and quadrature modules.
All distance routines are exact up to floating point; callers widen by
a stated margin when the polyline only approximates a fractal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "Box",
    "PolylineIndex",
    "box_box_maxdist",
    "box_box_mindist",
    "box_segment_dist",
    "point_box_dist",
    "point_segment_dist",
    "polygon_area",
]


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box given by corner tuples."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi):
            raise ValueError("corner dimensions differ")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"inverted box: {self.lo} .. {self.hi}")

    @property
    def ndim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        v = 1.0
        for w in self.sides:
            v *= w
        return v

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(0.5 * (a + b) for a, b in zip(self.lo, self.hi))

    @property
    def diam(self) -> float:
        return float(np.hypot.reduce(np.asarray(self.sides))) if self.ndim == 2 else float(
            np.linalg.norm(self.sides)
        )

    def contains_point(self, x) -> bool:
        return all(a <= xi <= b for a, b, xi in zip(self.lo, self.hi, x))

    def contains_box(self, other: "Box") -> bool:
        return all(a <= c for a, c in zip(self.lo, other.lo)) and all(
            d <= b for b, d in zip(self.hi, other.hi)
        )

    def intersects(self, other: "Box") -> bool:
        return all(a <= d and c <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def scaled_about_center(self, factor: float) -> "Box":
        c = self.center
        return Box(
            tuple(ci - 0.5 * factor * w for ci, w in zip(c, self.sides)),
            tuple(ci + 0.5 * factor * w for ci, w in zip(c, self.sides)),
        )


def point_box_dist(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Distance from points (N, d) to one or N boxes."""
    gap = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
    return np.sqrt(np.sum(gap * gap, axis=-1))


def box_box_mindist(alo, ahi, blo, bhi) -> np.ndarray:
    gap = np.maximum(np.maximum(blo - ahi, alo - bhi), 0.0)
    return np.sqrt(np.sum(gap * gap, axis=-1))


def box_box_maxdist(alo, ahi, blo, bhi) -> np.ndarray:
    span = np.maximum(np.abs(bhi - alo), np.abs(ahi - blo))
    return np.sqrt(np.sum(span * span, axis=-1))


def point_segment_dist(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points (N, 2) to segments (broadcasting a, b)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    denom = np.sum(d * d, axis=-1)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.sum((pts - a) * d, axis=-1) / denom
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * d
    return np.sqrt(np.sum((pts - proj) ** 2, axis=-1))


def _orient(a, b, c) -> np.ndarray:
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (
        b[..., 1] - a[..., 1]
    ) * (c[..., 0] - a[..., 0])


def _segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    proper = ((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0)) & (d1 != 0) & (d2 != 0)
    touch = (d1 == 0) | (d2 == 0) | (d3 == 0) | (d4 == 0)
    # collinear touches are caught by the endpoint-distance terms anyway
    return proper | (touch & (np.minimum(d1 * d2, d3 * d4) <= 0) & _bbox_overlap(p1, p2, q1, q2))


def _bbox_overlap(p1, p2, q1, q2) -> np.ndarray:
    plo = np.minimum(p1, p2)
    phi = np.maximum(p1, p2)
    qlo = np.minimum(q1, q2)
    qhi = np.maximum(q1, q2)
    return np.all((plo <= qhi) & (qlo <= phi), axis=-1)


def box_segment_dist(lo: np.ndarray, hi: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact distance between axis boxes and segments (broadcast shapes).

    The minimum is attained at a segment endpoint against the box, at a
    box corner against the segment, or is zero when they meet; parallel
    edge cases reduce to the corner terms.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = np.broadcast_shapes(lo.shape[:-1], hi.shape[:-1], a.shape[:-1], b.shape[:-1])
    lo, hi = np.broadcast_to(lo, shape + (2,)), np.broadcast_to(hi, shape + (2,))
    a, b = np.broadcast_to(a, shape + (2,)), np.broadcast_to(b, shape + (2,))

    d_end = np.minimum(point_box_dist(a, lo, hi), point_box_dist(b, lo, hi))
    corners = [
        np.stack([lo[..., 0], lo[..., 1]], axis=-1),
        np.stack([hi[..., 0], lo[..., 1]], axis=-1),
        np.stack([hi[..., 0], hi[..., 1]], axis=-1),
        np.stack([lo[..., 0], hi[..., 1]], axis=-1),
    ]
    d_corner = np.minimum.reduce([point_segment_dist(c, a, b) for c in corners])
    best = np.minimum(d_end, d_corner)

    inside = np.all((a >= lo) & (a <= hi), axis=-1) | np.all((b >= lo) & (b <= hi), axis=-1)
    crosses = np.zeros(shape, dtype=bool)
    for c1, c2 in zip(corners, corners[1:] + corners[:1]):
        crosses |= _segments_intersect(a, b, c1, c2)
    return np.where(inside | crosses, 0.0, best)


def polygon_area(vertices: np.ndarray) -> float:
    """Signed area (positive for counterclockwise loops)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class PolylineIndex:
    """Nearest-feature queries against a collection of polylines.

    Candidate segments come from a KD-tree over segment midpoints and
    are then checked exactly; a candidate set is accepted only once it
    provably contains the minimizing segment, so reported distances are
    exact up to floating point.
    """

    def __init__(self, parts: list[np.ndarray], closed: list[bool] | None = None):
        if not parts:
            raise ValueError("need at least one polyline")
        self.parts = [np.asarray(p, dtype=float) for p in parts]
        self.closed = list(closed) if closed is not None else [False] * len(parts)
        if len(self.closed) != len(self.parts):
            raise ValueError("closed flags do not match parts")
        seg_a, seg_b, part_id = [], [], []
        for k, pts in enumerate(self.parts):
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise ValueError("each polyline needs shape (m, 2) with m >= 2")
            av, bv = pts[:-1], pts[1:]
            if self.closed[k]:
                av = np.vstack([av, pts[-1:]])
                bv = np.vstack([bv, pts[:1]])
            seg_a.append(av)
            seg_b.append(bv)
            part_id.append(np.full(len(av), k))
        self.seg_a = np.vstack(seg_a)
        self.seg_b = np.vstack(seg_b)
        self.part_id = np.concatenate(part_id)
        seg_vec = self.seg_b - self.seg_a
        self.seg_len = np.sqrt(np.sum(seg_vec * seg_vec, axis=1))
        self.n_segments = len(self.seg_a)

        # the KD-tree indexes short pieces of the segments, so the
        # certification radius stays tight even when a few segments are
        # much longer than the rest (exact distances are still taken
        # against the parent segment)
        med = float(np.median(self.seg_len))
        total = float(np.sum(self.seg_len))
        chunk = max(med, total / (4.0 * self.n_segments + 1000.0), 1e-12)
        counts = np.maximum(np.ceil(self.seg_len / chunk).astype(int), 1)
        parent = np.repeat(np.arange(self.n_segments), counts)
        offs = np.concatenate([[0], np.cumsum(counts)])
        local = np.arange(len(parent)) - offs[parent]
        frac = (local + 0.5) / counts[parent]
        self.piece_parent = parent
        mid = self.seg_a[parent] + frac[:, None] * (self.seg_b[parent] - self.seg_a[parent])
        self.max_half_len = 0.5 * float(np.max(self.seg_len / counts))
        self.tree = cKDTree(mid)
        self.n_pieces = len(parent)

    # -- point queries -------------------------------------------------

    def _candidates(self, pts: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """k nearest piece midpoints; returns (midpoint dists, parent segs)."""
        k = min(k, self.n_pieces)
        dmid, idx = self.tree.query(pts, k=k)
        if k == 1:
            dmid = dmid[:, None]
            idx = idx[:, None]
        return dmid, self.piece_parent[idx]

    def distance(self, pts: np.ndarray, k: int = 8) -> np.ndarray:
        return self.nearest(pts, k=k)[0]

    def nearest(self, pts: np.ndarray, k: int = 8) -> tuple[np.ndarray, np.ndarray]:
        """Exact distance and the index of a minimizing segment."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        best, best_idx, bad = self._nearest_pass(pts, k)
        if len(bad):
            b2, i2, bad2 = self._nearest_pass(pts[bad], max(8 * k, 64))
            best[bad] = b2
            best_idx[bad] = i2
            bad = bad[bad2]
        for i in bad:
            hits = self.tree.query_ball_point(pts[i], best[i] + self.max_half_len + 1e-12)
            cand = np.unique(self.piece_parent[np.asarray(hits, dtype=int)])
            d_all = point_segment_dist(pts[i], self.seg_a[cand], self.seg_b[cand])
            jj = int(np.argmin(d_all))
            best[i] = d_all[jj]
            best_idx[i] = cand[jj]
        return best, best_idx

    def _nearest_pass(self, pts: np.ndarray, k: int):
        dmid, idx = self._candidates(pts, k)
        dseg = point_segment_dist(pts[:, None, :], self.seg_a[idx], self.seg_b[idx])
        j = np.argmin(dseg, axis=1)
        rows = np.arange(len(pts))
        best = dseg[rows, j]
        best_idx = idx[rows, j]
        # every segment is covered by pieces, so a segment with no
        # candidate piece has all piece midpoints at >= the k-th hit and
        # hence distance >= that minus half a piece length
        safe = dmid[:, -1] - self.max_half_len >= best
        if min(k, self.n_pieces) >= self.n_pieces:
            safe = np.ones(len(pts), dtype=bool)
        return best, best_idx, np.flatnonzero(~safe)

    def box_distance(self, lo: np.ndarray, hi: np.ndarray, k: int = 8) -> np.ndarray:
        """Exact distance from axis boxes (N, 2) arrays to the polylines."""
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        centers = 0.5 * (lo + hi)
        radius = 0.5 * np.sqrt(np.sum((hi - lo) ** 2, axis=1))
        best, bad = self._box_pass(lo, hi, centers, radius, k)
        if len(bad):
            b2, bad2 = self._box_pass(lo[bad], hi[bad], centers[bad], radius[bad], max(8 * k, 64))
            best[bad] = b2
            bad = bad[bad2]
        for i in bad:
            r = best[i] + self.max_half_len + radius[i] + 1e-12
            hits = self.tree.query_ball_point(centers[i], r)
            cand = np.unique(self.piece_parent[np.asarray(hits, dtype=int)])
            d_all = box_segment_dist(lo[i], hi[i], self.seg_a[cand], self.seg_b[cand])
            best[i] = float(np.min(d_all))
        return best

    def _box_pass(self, lo, hi, centers, radius, k: int):
        dmid, idx = self._candidates(centers, k)
        dbox = box_segment_dist(lo[:, None, :], hi[:, None, :], self.seg_a[idx], self.seg_b[idx])
        best = np.min(dbox, axis=1)
        safe = dmid[:, -1] - self.max_half_len - radius >= best
        if min(k, self.n_pieces) >= self.n_pieces:
            safe = np.ones(len(lo), dtype=bool)
        return best, np.flatnonzero(~safe)

    # -- interior test -------------------------------------------------

    def _loop_neighbors(self, seg_idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Previous segment index within the same closed loop."""
        prev = seg_idx - 1
        part = self.part_id[seg_idx]
        starts = np.searchsorted(self.part_id, part, side="left")
        ends = np.searchsorted(self.part_id, part, side="right")
        prev = np.where(prev < starts, ends - 1, prev)
        return prev, part

    def inside(self, pts: np.ndarray, loops: list[int] | None = None, k: int = 8) -> np.ndarray:
        """Membership in the region bounded by the closed loops.

        Loops must be oriented counterclockwise around the region.  The
        test uses the nearest feature: left of the nearest segment, with
        vertex hits resolved by the convex/reflex rule.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dist, seg = self.nearest(pts, k=k)
        a, b = self.seg_a[seg], self.seg_b[seg]
        d = b - a
        denom = np.sum(d * d, axis=1)
        denom = np.where(denom == 0.0, 1.0, denom)
        t = np.sum((pts - a) * d, axis=1) / denom
        side = _orient(a, b, pts)
        res = side > 0
        # endpoint hits: resolve against both incident segments
        at_start = t <= 1e-12
        at_end = t >= 1.0 - 1e-12
        if np.any(at_start | at_end):
            prev_idx, _ = self._loop_neighbors(seg)
            nxt = seg + 1
            part = self.part_id[seg]
            starts = np.searchsorted(self.part_id, part, side="left")
            ends = np.searchsorted(self.part_id, part, side="right")
            nxt = np.where(nxt >= ends, starts, nxt)
            for mask, other in ((at_start, prev_idx), (at_end, nxt)):
                if not np.any(mask):
                    continue
                oa, ob = self.seg_a[other], self.seg_b[other]
                side2 = _orient(oa, ob, pts)
                turn = _orient(oa, ob, b) if other is prev_idx else _orient(a, b, ob)
                convex = turn > 0
                both = (side > 0) & (side2 > 0)
                either = (side > 0) | (side2 > 0)
                res = np.where(mask, np.where(convex, both, either), res)
        if loops is not None:
            keep = np.isin(self.part_id[seg], loops)
            res = res & keep
        return res
