"""Distance-ramp test functions with declared Lipschitz data.

Every family here follows one recipe: a cubic smoothstep of the
certified boundary distance between a vanishing threshold and a
plateau threshold, optionally multiplied by per-axis trapezoid
cutoffs and zeroed outside a hard floor box.  The smoothstep pins the
slope at exactly 1.5 over the band width, so the Lipschitz constants
reported by lip_box are arithmetic facts about the construction, not
estimates.  A quadrature over these families therefore inherits
certified envelopes for free.

The classical way to build such functions is mollification of an
indicator; the explicit ramp replaces that while keeping the same
support and plateau sets, and `mollification_check` verifies the set
identities against a genuine discrete convolution when wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._geom import Box
from .quadrature import TestFunction

__all__ = [
    "RampFamily",
    "Trapezoid",
    "make_core_family",
    "make_local_family",
    "make_scaled_family",
    "make_shell_family",
    "modulus_check",
    "mollification_check",
    "smoothstep",
]

# peak slope of the cubic smoothstep on [0, 1]
SMOOTHSTEP_SLOPE = 1.5


def smoothstep(t: np.ndarray) -> np.ndarray:
    """Cubic ramp 3t^2 - 2t^3 clipped to [0, 1], slope at most 1.5."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class Trapezoid:
    """Piecewise-linear cutoff profile along one axis.

    Rises 0 -> 1 on [x0, x1], holds 1 on [x1, x2], falls back on
    [x2, x3].  A side with infinite knots contributes no taper.
    """

    x0: float
    x1: float
    x2: float
    x3: float

    def __post_init__(self) -> None:
        if not self.x1 <= self.x2:
            raise ValueError("trapezoid plateau is inverted")
        if math.isfinite(self.x1) and not self.x0 < self.x1:
            raise ValueError("left taper needs positive width")
        if math.isfinite(self.x2) and not self.x2 < self.x3:
            raise ValueError("right taper needs positive width")

    def eval(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        if math.isfinite(self.x1):
            out = np.minimum(out, np.clip((t - self.x0) / (self.x1 - self.x0), 0.0, 1.0))
        if math.isfinite(self.x2):
            out = np.minimum(out, np.clip((self.x3 - t) / (self.x3 - self.x2), 0.0, 1.0))
        return out

    def interval(self, lo: float, hi: float) -> tuple[float, float]:
        """Exact range over [lo, hi]; min sits at an endpoint."""
        a = float(self.eval(np.array(lo)))
        b = float(self.eval(np.array(hi)))
        top = max(a, b)
        if hi >= self.x1 and lo <= self.x2:
            top = 1.0
        return min(a, b), top

    def lip(self, lo: float, hi: float) -> float:
        out = 0.0
        if math.isfinite(self.x1) and hi > self.x0 and lo < self.x1:
            out = 1.0 / (self.x1 - self.x0)
        if math.isfinite(self.x2) and hi > self.x2 and lo < self.x3:
            out = max(out, 1.0 / (self.x3 - self.x2))
        return out

    @property
    def slope(self) -> float:
        out = 0.0
        if math.isfinite(self.x1):
            out = 1.0 / (self.x1 - self.x0)
        if math.isfinite(self.x2):
            out = max(out, 1.0 / (self.x3 - self.x2))
        return out


def _probe_exact(domain, box: Box | None) -> bool:
    # decide whether pointwise distances are float-exact by probing the
    # region the function lives on; a fuzzy oracle shows up as a
    # nonzero bracket somewhere off the symmetric axes, so the probe
    # mixes both diagonals with a golden-ratio lattice
    if box is None:
        box = domain.bbox
    if box is None:
        pts = np.array([[0.0, 0.0], [0.31, 0.77], [1.3, 2.1]])
    else:
        lo = np.asarray(box.lo, dtype=float)
        hi = np.asarray(box.hi, dtype=float)
        t = np.linspace(0.05, 0.95, 7)[:, None]
        diag = lo[None, :] + t * (hi - lo)[None, :]
        anti = np.stack(
            [lo[0] + t[:, 0] * (hi[0] - lo[0]), hi[1] - t[:, 0] * (hi[1] - lo[1])],
            axis=1,
        )
        k = np.arange(1, 8, dtype=float)
        lat = np.stack([(k * 0.6180339887498949) % 1.0, (k * 0.7548776662466927) % 1.0], axis=1)
        pts = np.vstack([diag, anti, lo[None, :] + lat * (hi - lo)[None, :]])
    dlo, dup = domain.dist_boundary(pts)
    return bool(np.all(dup == dlo))


class RampFamily(TestFunction):
    """u(x) = S((d(x) - a) / (b - a)) * prod_i psi_i(x_i), floored.

    S is the cubic smoothstep, d the certified boundary distance of
    `domain`, a < b the vanishing and plateau thresholds, psi_i the
    optional per-axis trapezoids, and the optional hard box zeroes the
    formula outside itself.  The formula is defined on the whole
    plane; its restriction to the domain is what the Hardy functionals
    see, and the constructors arrange the cutoffs so that restriction
    is continuous.

    Lipschitz data is declared, not sampled: the ramp contributes at
    most 1.5/(b - a) and only where the box meets the band, each
    trapezoid its own slope, and a box that straddles the hard floor
    with nonzero values reports an infinite constant rather than a
    guess.

    When the distance oracle is itself a bracket, value() ramps the
    bracket midpoint and is only a surrogate; value_box stays certified
    for the true function, and exact_values is False so quadratures
    skip the midpoint rules.
    """

    def __init__(
        self,
        domain,
        m: int,
        vanish: float,
        plateau: float,
        profiles: dict[int, Trapezoid] | None = None,
        hard_box: tuple[np.ndarray, np.ndarray] | None = None,
        label: str = "",
    ):
        if not 0.0 <= vanish < plateau:
            raise ValueError(f"need 0 <= vanish < plateau, got {vanish}, {plateau}")
        if m < 0:
            raise ValueError(f"family index must be nonnegative, got {m}")
        self.domain = domain
        self.m = int(m)
        self.vanish = float(vanish)
        self.plateau = float(plateau)
        self.band = self.plateau - self.vanish
        self.profiles = dict(profiles or {})
        if hard_box is not None:
            hard_box = (
                np.asarray(hard_box[0], dtype=float),
                np.asarray(hard_box[1], dtype=float),
            )
        self.hard_box = hard_box
        self.label = label
        self.exact_values = _probe_exact(domain, self.support)

    def __repr__(self) -> str:
        name = self.label or "ramp"
        return f"RampFamily({name}, m={self.m}, band=[{self.vanish:g},{self.plateau:g}])"

    # -- evaluation -----------------------------------------------------

    def value(self, pts: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        dlo, dup = self.domain.dist_boundary(p)
        d = 0.5 * (dlo + dup)
        out = smoothstep((d - self.vanish) / self.band)
        for ax, prof in self.profiles.items():
            out = out * prof.eval(p[:, ax])
        if self.hard_box is not None:
            blo, bhi = self.hard_box
            ok = np.all((p >= blo) & (p <= bhi), axis=1)
            out = np.where(ok, out, 0.0)
        return out

    def _dist_range(self, lo: np.ndarray, hi: np.ndarray) -> tuple[float, float]:
        dlo, dup = self.domain.dist_box(lo[None, :], hi[None, :])
        diam = float(math.sqrt(float(np.sum((hi - lo) ** 2))))
        return float(dlo[0]), float(dup[0]) + diam

    def value_box(self, lo, hi) -> tuple[float, float]:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.hard_box is not None:
            blo, bhi = self.hard_box
            if np.any(hi < blo) or np.any(lo > bhi):
                return 0.0, 0.0
        d_min, d_max = self._dist_range(lo, hi)
        v_lo = float(smoothstep(np.array((d_min - self.vanish) / self.band)))
        v_hi = float(smoothstep(np.array((d_max - self.vanish) / self.band)))
        for ax, prof in self.profiles.items():
            plo, phi = prof.interval(float(lo[ax]), float(hi[ax]))
            v_lo *= plo
            v_hi *= phi
        if self.hard_box is not None:
            blo, bhi = self.hard_box
            if not (np.all(lo >= blo) and np.all(hi <= bhi)):
                v_lo = 0.0
        return v_lo, v_hi

    def lip_box(self, lo, hi) -> float:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        _, v_hi = self.value_box(lo, hi)
        if v_hi == 0.0:
            return 0.0
        if self.hard_box is not None:
            blo, bhi = self.hard_box
            if not (np.all(lo >= blo) and np.all(hi <= bhi)):
                # hard edge inside the box with live values above it
                return math.inf
        d_min, d_max = self._dist_range(lo, hi)
        out = 0.0
        if d_max > self.vanish and d_min < self.plateau:
            out = SMOOTHSTEP_SLOPE / self.band
        for ax, prof in self.profiles.items():
            out += prof.lip(float(lo[ax]), float(hi[ax]))
        return out

    # -- declared constants ---------------------------------------------

    @property
    def sup_bound(self) -> float:
        return 1.0

    @property
    def lip_bound(self) -> float:
        """Global Lipschitz constant of the formula away from the floor."""
        return SMOOTHSTEP_SLOPE / self.band + sum(p.slope for p in self.profiles.values())

    @property
    def lip_outside_band(self) -> float:
        """Lipschitz constant where the distance ramp is locally constant."""
        return sum(p.slope for p in self.profiles.values())

    @property
    def support(self) -> Box | None:
        n = 2
        lo = [-math.inf] * n
        hi = [math.inf] * n
        for ax, prof in self.profiles.items():
            if math.isfinite(prof.x0):
                lo[ax] = max(lo[ax], prof.x0)
            if math.isfinite(prof.x3):
                hi[ax] = min(hi[ax], prof.x3)
        if self.hard_box is not None:
            blo, bhi = self.hard_box
            for ax in range(n):
                lo[ax] = max(lo[ax], float(blo[ax]))
                hi[ax] = min(hi[ax], float(bhi[ax]))
        if all(math.isfinite(v) for v in lo + hi):
            return Box(tuple(lo), tuple(hi))
        return None


# ---------------------------------------------------------------------------
# constructors


def make_core_family(domain, m: int) -> RampFamily:
    """Ramp of boundary distance with thresholds 1/(4m) and 1/(2m).

    Monotone in m, Lipschitz constant exactly 6m, flat outside the
    band.  No cutoff: meant for bounded domains where the whole
    window is integrated.
    """
    if m < 1:
        raise ValueError(f"core family needs m >= 1, got {m}")
    return RampFamily(
        domain,
        m,
        vanish=1.0 / (4.0 * m),
        plateau=1.0 / (2.0 * m),
        label=f"core({m})",
    )


def make_shell_family(domain, m: int) -> RampFamily:
    """Ramp with dyadic thresholds 2^-(m+1) and 2^-m, no cutoff.

    Successive members add one dyadic shell of plateau each, which is
    what makes level sums grow linearly in m on scale-regular
    boundaries.
    """
    if m < 1:
        raise ValueError(f"shell family needs m >= 1, got {m}")
    return RampFamily(
        domain,
        m,
        vanish=2.0 ** (-m - 1),
        plateau=2.0 ** (-m),
        label=f"shell({m})",
    )


def make_local_family(domain, m: int) -> RampFamily:
    """Dyadic distance ramp localized over the fractal stretch.

    The x-trapezoid is 1 on [-1, 1] and dies at +-2; the y-profile
    tapers between 1.5 and 2 and the hard floor sits at y = 0.  Points
    of the domain with boundary distance at most 1 stay well below the
    y-taper, so the function equals the bare ramp on the unit-scale
    collar where the inequality is tested.
    """
    if m < 1:
        raise ValueError(f"local family needs m >= 1, got {m}")
    height = getattr(domain, "curve_height_bound", lambda: 0.0)()
    if height + 1.0 > 1.5:
        raise ValueError(f"boundary reaches height {height:.3f}, y-taper would cut the collar")
    return RampFamily(
        domain,
        m,
        vanish=2.0 ** (-m - 1),
        plateau=2.0 ** (-m),
        profiles={
            0: Trapezoid(-2.0, -1.0, 1.0, 2.0),
            1: Trapezoid(-math.inf, -math.inf, 1.5, 2.0),
        },
        hard_box=(np.array([-2.0, 0.0]), np.array([2.0, 2.0])),
        label=f"local({m})",
    )


def make_scaled_family(domain, k: int) -> RampFamily:
    """Local family shrunk onto the k-th corner stage of the dust.

    The stage box [0, l_k] x [1, 1 + l_k/2] plays the role of the
    ambient [-3, 3] x [0, 3] window under z -> (sigma (z1 + 3),
    1 + sigma z2) with sigma = l_k / 6, and the thresholds scale the
    same way.  The hard floor at y = 1 is continuous on the domain
    because the corridor half-widths below it are thinner than the
    vanishing threshold.  Needs the dust tree resolved to depth about
    2k + 4 so the distance brackets can see the band.
    """
    if k < 0:
        raise ValueError(f"scaled family needs k >= 0, got {k}")
    need = 2 * k + 4
    if domain.tree_depth < need:
        raise ValueError(
            f"tree depth {domain.tree_depth} too shallow for stage {k}; need at least {need}"
        )
    eps_k = domain.schedule.value(k)
    if not 2.0 ** (-k) >= float(eps_k):
        raise ValueError(f"corridor budget {float(eps_k):g} exceeds dyadic scale 2^-{k}")
    sigma = float(domain.tree.side(k)) / 6.0
    return RampFamily(
        domain,
        k,
        vanish=sigma * 2.0 ** (-k - 1),
        plateau=sigma * 2.0 ** (-k),
        profiles={
            0: Trapezoid(sigma, 2.0 * sigma, 4.0 * sigma, 5.0 * sigma),
            1: Trapezoid(-math.inf, -math.inf, 1.0 + 1.5 * sigma, 1.0 + 2.0 * sigma),
        },
        hard_box=(np.array([sigma, 1.0]), np.array([5.0 * sigma, 1.0 + 2.0 * sigma])),
        label=f"scaled({k})",
    )


# ---------------------------------------------------------------------------
# validation


def modulus_check(
    u,
    box: Box | None = None,
    pairs: int = 1000,
    rng: np.random.Generator | None = None,
    tol: float = 1e-9,
) -> dict:
    """Finite-difference audit of the declared bounds.

    Samples random point pairs in `box` (default: the support) and
    checks |u(x) - u(y)| against lip_box of the pair's hull times the
    separation, and |u| against sup_bound.  Returns the worst ratios;
    ok means no declared bound was beaten beyond tol.
    """
    if rng is None:
        rng = np.random.default_rng(7)
    if box is None:
        box = u.support
    if box is None:
        raise ValueError("no box to sample; pass one explicitly")
    lo = np.asarray(box.lo, dtype=float)
    hi = np.asarray(box.hi, dtype=float)
    a = lo + (hi - lo) * rng.random((pairs, len(lo)))
    b = lo + (hi - lo) * rng.random((pairs, len(lo)))
    ua = u.value(a)
    ub = u.value(b)
    sep = np.sqrt(np.sum((a - b) ** 2, axis=1))
    keep = sep > 0
    hull_lo = np.minimum(a, b)
    hull_hi = np.maximum(a, b)
    worst = 0.0
    for i in np.nonzero(keep)[0]:
        lip = u.lip_box(hull_lo[i], hull_hi[i])
        diff = abs(float(ua[i]) - float(ub[i]))
        if diff == 0.0:
            continue
        if lip == 0.0:
            worst = math.inf
            break
        if math.isinf(lip):
            continue
        worst = max(worst, diff / (lip * float(sep[i])))
    sup = float(np.max(np.abs(np.concatenate([ua, ub])))) if pairs else 0.0
    return {
        "lip_ratio": worst,
        "sup": sup,
        "ok": worst <= 1.0 + tol and sup <= u.sup_bound + tol,
    }


def mollification_check(
    u: RampFamily,
    pts: np.ndarray,
    nodes: int = 40,
) -> dict:
    """Compare the ramp with a discrete mollified indicator.

    The reference is the indicator of {d >= 3/(8m')} convolved with a
    normalized quartic bump of radius r, where the radius and offset
    are chosen so the convolution is exactly 1 wherever d >= plateau
    and exactly 0 wherever d <= vanish, matching the ramp's plateau
    and vanishing sets with no quadrature tolerance.  Membership in
    the indicator uses the certified distance brackets, so the
    returned convolution values are themselves brackets.
    """
    mid = 0.5 * (u.vanish + u.plateau)
    r = 0.5 * (u.plateau - mid)
    grid = np.linspace(-r, r, nodes)
    zx, zy = np.meshgrid(grid, grid, indexing="ij")
    rad2 = zx**2 + zy**2
    w = np.where(rad2 < r * r, (1.0 - rad2 / (r * r)) ** 2, 0.0).ravel()
    w = w / np.sum(w)
    offsets = np.stack([zx.ravel(), zy.ravel()], axis=1)

    p = np.atleast_2d(np.asarray(pts, dtype=float))
    shifted = (p[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    dlo, dup = u.domain.dist_boundary(shifted)
    thresh = mid + r
    chi_lo = dlo.reshape(len(p), -1) >= thresh
    chi_hi = dup.reshape(len(p), -1) >= thresh
    conv_lo = chi_lo.astype(float) @ w
    conv_hi = chi_hi.astype(float) @ w

    dlo_p, dup_p = u.domain.dist_boundary(p)
    plateau_mask = dlo_p >= u.plateau
    vanish_mask = dup_p <= u.vanish
    # set identities are exact on the indicators; the float dot product
    # only reports them to within roundoff
    carrier = w > 0.0
    ok = bool(
        np.all(chi_lo[plateau_mask][:, carrier])
        and not np.any(chi_hi[vanish_mask][:, carrier])
    )
    return {
        "conv_lo": conv_lo,
        "conv_hi": conv_hi,
        "ramp": u.value(p),
        "plateau_mask": plateau_mask,
        "vanish_mask": vanish_mask,
        "ok": ok,
    }
