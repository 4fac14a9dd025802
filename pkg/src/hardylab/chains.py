"""Cube chains along John curves and sampled visual-boundary mass.

A John curve is discovered as a clearance-weighted shortest path
through the Whitney adjacency graph, then certified by sampling: the
reported constant is a sup of t/dist over a refined arclength grid,
with interval bounds from the 1-Lipschitz distance wherever the grid
is dense enough to support them.  Chains follow the greedy exit rule
along the discretized curve and every structural inequality is checked
hard, with finer discretization retried before giving up.

Visibility is only ever witnessed, never disproved: a found curve puts
its endpoint in the visual boundary, a failed search proves nothing.
The mass bound built from witnessed points is labeled accordingly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _sparse_dijkstra

from .content import UnionMeasure, covering_count, mass_lower
from .domains import BoxDomain
from .dyadic import DyadicCube, WhitneyDecomposition, dilate
from .quadrature import complement_cells

__all__ = [
    "ChainInvariantError",
    "ComplementNotNull",
    "CubeChain",
    "JohnCurve",
    "build_chain",
    "build_nested_chain",
    "john_search",
    "visual_content",
]


class ChainInvariantError(ValueError):
    """A structural chain inequality failed; .which names it."""

    def __init__(self, which: str, detail: str = ""):
        self.which = which
        super().__init__(f"chain invariant {which} failed{': ' + detail if detail else ''}")


class ComplementNotNull(ValueError):
    """The complement-measure certificate for a nested chain failed."""


@dataclass
class JohnCurve:
    """Polyline from a boundary point w to an interior point x.

    Arclength runs from w: gamma(0) = w, gamma(length) = x.  The
    achieved constant is the sup of t/dist(gamma(t)) certified over
    [t_floor, length]; below t_floor the curve sits within t_floor of
    w and the ratio is only sampled, not bounded.
    """

    points: np.ndarray
    length: float
    c_achieved: float
    t_floor: float
    sample_t: np.ndarray
    sample_dist: np.ndarray

    def __post_init__(self):
        seg = np.sqrt(np.sum(np.diff(self.points, axis=0) ** 2, axis=1))
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def w(self) -> np.ndarray:
        return self.points[0]

    @property
    def x(self) -> np.ndarray:
        return self.points[-1]

    def point_at(self, t) -> np.ndarray:
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), 0.0, self._cum[-1])
        xs = np.interp(t, self._cum, self.points[:, 0])
        ys = np.interp(t, self._cum, self.points[:, 1])
        return np.stack([xs, ys], axis=1)


@dataclass
class CubeChain:
    """Ordered cubes with exit parameters and the terminal witness.

    kind "john": Whitney cubes walked along a curve, t decreasing.
    kind "nested": Q, LQ, then exact halving boxes closing on w.
    """

    kind: str
    lo: np.ndarray
    hi: np.ndarray
    t: np.ndarray | None
    w: np.ndarray
    c: float
    dilation: float
    witness_radius: float
    delta: float | None = None
    delta_sum: float | None = None
    delta_cap: float | None = None

    def __len__(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> np.ndarray:
        return self.hi[:, 0] - self.lo[:, 0]

    def level_counts(self) -> dict[int, int]:
        j = np.round(-np.log2(self.sides)).astype(int)
        vals, counts = np.unique(j, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def to_json(self) -> str:
        out = {
            "kind": self.kind,
            "cubes": [
                {"lo": list(map(float, a)), "hi": list(map(float, b))}
                for a, b in zip(self.lo, self.hi)
            ],
            "t": None if self.t is None else [float(v) for v in self.t],
            "w": [float(v) for v in self.w],
            "c": self.c,
            "dilation": self.dilation,
            "witness_radius": self.witness_radius,
        }
        if self.delta is not None:
            out["delta"] = self.delta
            out["delta_sum"] = self.delta_sum
            out["delta_cap"] = self.delta_cap
        return json.dumps(out)


# ---------------------------------------------------------------------------
# graph plumbing


def _graph(W: WhitneyDecomposition) -> dict:
    cache = getattr(W, "_chain_graph", None)
    if cache is None:
        indptr, indices = W.adjacency()
        n = len(W)
        centers = W.centers
        rows = np.repeat(np.arange(n), np.diff(indptr))
        seg = np.sqrt(np.sum((centers[rows] - centers[indices]) ** 2, axis=1))
        clear = np.minimum(W.dist_lo[rows], W.dist_lo[indices])
        weights = seg / np.maximum(clear, 1e-300)
        mat = csr_matrix((weights, indices, indptr), shape=(n, n))
        cache = {"mat": mat, "sssp": {}}
        W._chain_graph = cache
    return cache


def _sssp(W: WhitneyDecomposition, src: int) -> tuple[np.ndarray, np.ndarray]:
    g = _graph(W)
    hit = g["sssp"].get(src)
    if hit is None:
        dist, pred = _sparse_dijkstra(
            g["mat"], directed=False, indices=src, return_predecessors=True
        )
        hit = (dist, pred)
        g["sssp"][src] = hit
    return hit


def _locate(W: WhitneyDecomposition, p: np.ndarray) -> int:
    """Index of the (level, ax, ay)-smallest cube whose closure holds p."""
    best = -1
    best_key = None
    for j in sorted({int(v) for v in np.unique(W.levels)}):
        f = 2.0**j
        fx, fy = p[0] * f, p[1] * f
        for ax in {int(math.floor(fx)), int(math.ceil(fx)) - 1}:
            for ay in {int(math.floor(fy)), int(math.ceil(fy)) - 1}:
                i = W.find(j, ax, ay)
                if i < 0:
                    continue
                s = 2.0**-j
                if not (ax * s <= p[0] <= (ax + 1) * s and ay * s <= p[1] <= (ay + 1) * s):
                    continue
                key = (j, ax, ay)
                if best_key is None or key < best_key:
                    best, best_key = i, key
    return best


def _target_cubes(W: WhitneyDecomposition, w: np.ndarray, reach: float, k: int) -> np.ndarray:
    d = np.sqrt(np.sum((W.centers - w[None, :]) ** 2, axis=1))
    ok = d <= reach * W.sides
    if not np.any(ok):
        return np.empty(0, dtype=int)
    idx = np.nonzero(ok)[0]
    order = np.lexsort((d[idx], W.sides[idx]))
    return idx[order[:k]]


def _approach_point(domain, w: np.ndarray, radius: float) -> np.ndarray | None:
    """Point at the given radius from w in the clearest inward direction."""
    theta = np.linspace(0.0, 2.0 * math.pi, 24, endpoint=False)
    ring = w[None, :] + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    ins = domain.inside(ring)
    if not np.any(ins):
        return None
    dlo, _ = domain.dist_boundary(ring[ins])
    best = int(np.argmax(dlo))
    if dlo[best] <= 0.05 * radius:
        return None
    return ring[ins][best]


def _approach_ladder(domain, w: np.ndarray, radius: float) -> list[np.ndarray]:
    """Clearest points at halving radii, ordered from w outward.

    A single straight leg into a boundary point clips the boundary
    whenever w sits in a pocket narrower than the leg; chasing the
    distance maximum scale by scale walks the leg down the pocket
    instead.  Purely a path heuristic; verification decides soundness.
    """
    out: list[np.ndarray] = []
    r = radius
    for _ in range(7):
        p = _approach_point(domain, w, r)
        if p is not None:
            out.append(p)
        r *= 0.5
    out.reverse()
    return out


# ---------------------------------------------------------------------------
# curve certification


def _verify_curve(domain, pts: np.ndarray, c_max: float, floor_frac: float = 1e-4) -> JohnCurve | None:
    seg = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
    keep = seg > 0.0
    if not np.all(keep):
        pts = np.vstack([pts[0], pts[1:][keep]])
        seg = seg[keep]
    if len(pts) < 2:
        return None
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    length = float(cum[-1])
    floor = floor_frac * length

    ts = [np.linspace(cum[i], cum[i + 1], 9)[1:] for i in range(len(seg))]
    ts.append(np.geomspace(floor, length, 48))
    t = np.unique(np.concatenate(ts))
    t = t[t >= floor * (1.0 - 1e-12)]
    curve = JohnCurve(pts, length, math.inf, floor, np.empty(0), np.empty(0))
    for _ in range(16):
        sample = curve.point_at(t)
        if not np.all(domain.inside(sample)):
            return None
        dlo, _ = domain.dist_boundary(sample)
        with np.errstate(divide="ignore"):
            ratios = np.where(dlo > 0.0, t / np.maximum(dlo, 1e-300), math.inf)
        c_samples = float(np.max(ratios))
        if not math.isfinite(c_samples) or c_samples > c_max:
            return None
        # interval sup via 1-Lipschitz distance: on [t1, t2] the
        # distance stays above (d1 + d2 - (t2 - t1)) / 2
        d1, d2 = dlo[:-1], dlo[1:]
        gap = np.diff(t)
        denom = 0.5 * (d1 + d2 - gap)
        pos = denom > 0.0
        need = ~pos
        loose = np.zeros_like(need)
        loose[pos] = (t[1:][pos] / denom[pos] > c_samples * 1.05) & (gap[pos] > floor)
        flags = need | loose
        if not np.any(flags):
            bounds = t[1:][pos] / denom[pos]
            c_cert = max(c_samples, float(np.max(bounds)) if len(bounds) else c_samples)
            if c_cert > c_max:
                return None
            return JohnCurve(pts, length, c_cert, floor, t, dlo)
        mids = 0.5 * (t[:-1][flags] + t[1:][flags])
        t = np.unique(np.concatenate([t, mids]))
    return None


# ---------------------------------------------------------------------------
# operations


def john_search(
    domain,
    W: WhitneyDecomposition,
    x,
    w,
    c_max: float,
    target_reach: float = 6.0,
) -> JohnCurve | None:
    """Clearance-weighted path from x to the boundary point w.

    Returns a curve carrying its certified constant, or None when no
    path stays within c_max.  A None is a limit of the search, not a
    proof that no John curve exists.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if not bool(domain.inside(x[None, :])[0]):
        return None
    src = _locate(W, x)
    if src < 0:
        return None
    candidates = _target_cubes(W, w, target_reach, 4)
    if len(candidates) == 0:
        return None
    dist, pred = _sssp(W, src)
    centers = W.centers
    for tgt in candidates:
        if not math.isfinite(dist[tgt]):
            continue
        path = [int(tgt)]
        while path[-1] != src:
            nxt = int(pred[path[-1]])
            if nxt < 0:
                break
            path.append(nxt)
        if path[-1] != src:
            continue
        gap = float(np.hypot(*(centers[path[0]] - w)))
        ladder = _approach_ladder(domain, w, gap)
        head = [w[None, :]] + [p[None, :] for p in ladder]
        pts = np.vstack(head + [centers[path], x[None, :]])
        curve = _verify_curve(domain, pts, c_max)
        if curve is not None:
            return curve
    return None


def _chain_walk(
    W: WhitneyDecomposition, i0: int, curve: JohnCurve, refine: int
) -> tuple[list[int], list[float]]:
    lo_all, hi_all = W.lo, W.hi
    sides = W.sides
    idx = i0
    t = curve.length
    chain = [i0]
    ts = [t]
    for _ in range(100_000):
        lo_i, hi_i = lo_all[idx], hi_all[idx]
        step = sides[idx] / (20.0 * refine)
        m = int(t / step) + 1
        grid = t - step * np.arange(m + 1)
        grid = np.append(grid[grid > 0.0], 0.0)
        p = curve.point_at(grid)
        inb = np.all((p >= lo_i - 0.0) & (p <= hi_i + 0.0), axis=1)
        if not inb[0]:
            raise ChainInvariantError("containment", f"gamma(t_{len(ts) - 1}) left its cube")
        last = int(np.nonzero(inb)[0][-1])
        if last == len(grid) - 1:
            break
        t_next = float(grid[last + 1])
        nxt = _locate(W, p[last + 1])
        if nxt < 0 or t_next < W.sides[nxt] * math.sqrt(2.0):
            # below the resolution of the decomposition; the terminal
            # cube already carries the witness ball
            break
        chain.append(nxt)
        ts.append(t_next)
        idx = nxt
        t = t_next
    return chain, ts


def _check_chain(
    W: WhitneyDecomposition,
    chain: list[int],
    ts: list[float],
    curve: JohnCurve,
    c: float,
    delta: float | None,
) -> CubeChain:
    sqrt_n = math.sqrt(2.0)
    sides = W.sides[chain]
    diams = sides * sqrt_n
    t = np.asarray(ts)
    drops = t[:-1] - t[1:]
    if len(t) > 1 and np.any(drops < sides[:-1] / 5.0 - 1e-12):
        i = int(np.argmin(drops - sides[:-1] / 5.0))
        raise ChainInvariantError("drop", f"t_{i}-t_{i + 1}={drops[i]:.3g} < side/5={sides[i] / 5:.3g}")
    if np.any(t < diams - 1e-12):
        i = int(np.argmin(t - diams))
        raise ChainInvariantError("scale-low", f"t_{i}={t[i]:.3g} < diam={diams[i]:.3g}")
    if np.any(t > 5.0 * c * diams + 1e-12):
        i = int(np.argmax(t - 5.0 * c * diams))
        raise ChainInvariantError("scale-high", f"t_{i}={t[i]:.3g} > 5c diam={5 * c * diams[i]:.3g}")
    decay = 1.0 - 1.0 / (25.0 * c * sqrt_n)
    caps = t[0] * decay ** np.arange(len(t))
    if np.any(t > caps * (1.0 + 1e-12)):
        i = int(np.argmax(t / caps))
        raise ChainInvariantError("decay", f"t_{i}={t[i]:.3g} > {caps[i]:.3g}")
    L = 30.0 * c * sqrt_n
    big = dilate(W.cube(chain[0]), L)
    blo = np.asarray(big.lo)
    bhi = np.asarray(big.hi)
    lo3 = W.lo[chain] - W.sides[chain][:, None]
    hi3 = W.hi[chain] + W.sides[chain][:, None]
    if np.any(lo3 < blo[None, :] - 1e-12) or np.any(hi3 > bhi[None, :] + 1e-12):
        raise ChainInvariantError("dilation", "3Q_i escapes LQ_0")
    rho = 11.0 * c * sqrt_n
    wc = np.asarray(W.centers[chain[-1]])
    if float(np.hypot(*(curve.w - wc))) > rho * sides[-1] + 1e-12:
        raise ChainInvariantError("witness", "w outside the terminal witness ball")
    out = CubeChain(
        kind="john",
        lo=W.lo[chain].copy(),
        hi=W.hi[chain].copy(),
        t=t,
        w=curve.w.copy(),
        c=c,
        dilation=L,
        witness_radius=rho,
    )
    if delta is not None:
        if delta <= 0:
            raise ValueError(f"delta must be positive, got {delta}")
        s = float(np.sum(sides**delta))
        cap = (5.0 * c) ** delta / (1.0 - decay**delta) * sides[0] ** delta
        if s > cap * (1.0 + 1e-9):
            raise ChainInvariantError("delta-sum", f"{s:.3g} > {cap:.3g}")
        out.delta = float(delta)
        out.delta_sum = s
        out.delta_cap = cap
    return out


def build_chain(
    W: WhitneyDecomposition,
    start,
    curve: JohnCurve,
    delta: float | None = None,
    c: float | None = None,
    retries: int = 3,
) -> CubeChain:
    """Greedy cube chain along the curve, all inequalities checked.

    start is the cube holding the curve's interior endpoint (index or
    DyadicCube).  Discretization begins at side/20 per cube and is
    doubled on invariant failure, up to `retries` attempts.
    """
    if isinstance(start, DyadicCube):
        i0 = W.find(start.j, start.ax, start.ay)
        if i0 < 0:
            raise ValueError(f"{start} is not a cube of this decomposition")
    else:
        i0 = int(start)
        if not 0 <= i0 < len(W):
            raise ValueError(f"cube index {i0} out of range")
    x_end = curve.points[-1]
    lo0, hi0 = W.lo[i0], W.hi[i0]
    if not (np.all(x_end >= lo0) and np.all(x_end <= hi0)):
        raise ChainInvariantError("containment", "curve does not end in the start cube")
    cc = max(curve.c_achieved, 1.0) if c is None else float(c)
    last: ChainInvariantError | None = None
    for attempt in range(max(retries, 1)):
        try:
            chain, ts = _chain_walk(W, i0, curve, 2**attempt)
            return _check_chain(W, chain, ts, curve, cc, delta)
        except ChainInvariantError as err:
            last = err
    assert last is not None
    raise last


def build_nested_chain(
    W: WhitneyDecomposition,
    start,
    L: float,
    w,
    depth: int = 16,
) -> CubeChain:
    """Q, LQ, then exact halving boxes closing on the point w.

    Only valid when the domain's complement is certified null inside
    LQ; domains that cannot certify that are rejected.
    """
    if isinstance(start, DyadicCube):
        cube = start
    else:
        i0 = int(start)
        if not 0 <= i0 < len(W):
            raise ValueError(f"cube index {i0} out of range")
        cube = W.cube(i0)
    w = np.asarray(w, dtype=float)
    big = dilate(cube, L)
    blo = np.asarray(big.lo)
    bhi = np.asarray(big.hi)
    area = getattr(W.domain, "complement_area", None)
    if area is None:
        _, _, area = complement_cells(W.domain, blo, bhi, max_depth=7)
    if area.upper != 0.0:
        raise ComplementNotNull(
            f"|G^c meet LQ| in [{area.lower:.3g}, {area.upper:.3g}], not certified null"
        )
    if np.any(w < blo) or np.any(w > bhi):
        raise ValueError("witness point outside the dilated cube")
    lo_list = [np.asarray(cube.lo, dtype=float), blo]
    hi_list = [np.asarray(cube.hi, dtype=float), bhi]
    side = float(bhi[0] - blo[0])
    plo, phi = blo, bhi
    for _ in range(depth):
        side *= 0.5
        nlo = np.minimum(np.maximum(w - side / 2.0, plo), phi - side)
        nhi = nlo + side
        assert np.all(w >= nlo) and np.all(w <= nhi)
        assert np.all(nlo >= plo) and np.all(nhi <= phi)
        lo_list.append(nlo)
        hi_list.append(nhi)
        plo, phi = nlo, nhi
    return CubeChain(
        kind="nested",
        lo=np.asarray(lo_list),
        hi=np.asarray(hi_list),
        t=None,
        w=w,
        c=0.0,
        dilation=float(L),
        witness_radius=0.0,
    )


def _default_measure(domain, lam: float):
    pieces = getattr(domain, "pieces", None)
    if pieces is not None:
        return mass_lower(pieces, lam)
    if isinstance(domain, BoxDomain):
        if abs(lam - 1.0) > 1e-12:
            raise ValueError("a box boundary carries arclength; pass a measure for lam != 1")
        (x0, y0), (x1, y1) = domain.bbox.lo, domain.bbox.hi
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
        parts = []
        cf = 0.0
        for a, b in zip(corners[:-1], corners[1:]):
            m, c = mass_lower(np.asarray([a, b], dtype=float), lam)
            parts.append(m)
            cf += c
        return UnionMeasure(parts), cf
    raise TypeError(f"no default boundary measure for {type(domain).__name__}; pass one")


def visual_content(
    domain,
    W: WhitneyDecomposition,
    x,
    c: float,
    lam: float,
    n_targets: int = 100,
    targets: np.ndarray | None = None,
    measure=None,
    ball_radius: float | None = None,
) -> dict:
    """Witnessed lower bound on the mass of the visible boundary.

    Each target with a certified c-John curve from x is a visibility
    witness; disjoint measure balls around a greedy separated subset of
    the witnesses give the bound.  Appending further targets never
    lowers it.  Sampling can only spot-check visibility, so the result
    is reported as coverage statistics, never a verified universal.
    """
    x = np.asarray(x, dtype=float)
    if targets is None:
        targets, _ = domain.boundary_sample(n_targets)
        targets = targets[:n_targets]
    if measure is None:
        mu, cf = _default_measure(domain, lam)
    else:
        mu, cf = measure
    dlo, _ = domain.dist_boundary(x[None, :])
    dist_x = float(dlo[0])
    r = 0.25 * dist_x if ball_radius is None else float(ball_radius)
    kept = []
    worst = 0.0
    for wpt in np.atleast_2d(targets):
        curve = john_search(domain, W, x, wpt, c_max=c)
        if curve is not None:
            kept.append(wpt)
            worst = max(worst, curve.c_achieved)
    bound = 0.0
    separated = 0
    if kept and r > 0.0:
        separated, centers = covering_count(np.asarray(kept), 2.0 * r)
        mass = sum(float(mu.ball_lower(p, r)) for p in centers)
        bound = mass / cf
    return {
        "bound": bound,
        "kept": len(kept),
        "total": int(len(np.atleast_2d(targets))),
        "separated": separated,
        "fraction": len(kept) / max(len(np.atleast_2d(targets)), 1),
        "worst_c": worst if kept else None,
        "c_max": float(c),
        "lam": float(lam),
        "ball_radius": r,
        "dist_x": dist_x,
        "certified": False,
    }
