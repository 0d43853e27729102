"""Pair potentials of Potts type and their smooth/small decomposition.

A radial interaction is "well behaved" when it is +infinity below a first
breakpoint r0, identically zero beyond the last breakpoint rn, and piecewise
polynomial (degree <= 3) with finite one-sided limits in between.  A Potts
type potential assigns one such function to every spin pair through a norm on
the plane.  The decomposition splits U into a finite-range part Ubar with two
continuous radial derivatives and a nonnegative small part u = Ubar - U, via
tent functions over the jump radii followed by mollification with a compactly
supported bump kernel.  The module also provides the smooth [0,1] cutoff that
vanishes on the hard core and equals one outside the twice-enlarged core, the
constants that the deformed-translation machinery consumes, and Hamiltonians.

Extended-real values use IEEE infinities: exp(-inf) = 0 and the construction
never forms inf - inf (u is defined as 0 on the hard core).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CellGrid, Norm, Window

INF = math.inf


# ---------------------------------------------------------------------------
# well-behaved radial functions


class WellBehavedFn:
    """Piecewise-polynomial radial interaction.

    breakpoints: increasing radii [r0, ..., rn]; the function is +inf below
    r0 and 0 beyond rn.  pieces[i] are polynomial coefficients (low order
    first, degree <= 3) on the open interval (r_i, r_{i+1}).  point_values[i]
    is the value taken exactly at r_i (extended real).
    """

    MAX_DEGREE = 3

    def __init__(self, breakpoints, pieces, point_values):
        self.breakpoints = np.asarray(breakpoints, dtype=float).reshape(-1)
        if len(self.breakpoints) == 0:
            raise ValueError("need at least one breakpoint")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if self.breakpoints[0] < 0:
            raise ValueError("breakpoints must be nonnegative")
        if len(pieces) != len(self.breakpoints) - 1:
            raise ValueError("need one piece per gap between breakpoints")
        self.pieces = []
        for c in pieces:
            c = np.asarray(c, dtype=float).reshape(-1)
            if len(c) > self.MAX_DEGREE + 1:
                raise ValueError("piece degree exceeds 3")
            if not np.all(np.isfinite(c)):
                raise ValueError("piece coefficients must be finite")
            self.pieces.append(np.pad(c, (0, self.MAX_DEGREE + 1 - len(c))))
        self.point_values = [float(v) for v in point_values]
        if len(self.point_values) != len(self.breakpoints):
            raise ValueError("need one point value per breakpoint")
        for v in self.point_values[1:]:
            if not math.isfinite(v):
                raise ValueError("interior/last point values must be finite")

    @property
    def r0(self):
        return float(self.breakpoints[0])

    @property
    def support_radius(self):
        """Radius beyond which the function vanishes identically."""
        return float(self.breakpoints[-1])

    def _poly(self, i, r):
        c = self.pieces[i]
        return ((c[3] * r + c[2]) * r + c[1]) * r + c[0]

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        scalar = r_arr.ndim == 0
        r_arr = np.atleast_1d(r_arr)
        out = np.zeros_like(r_arr)
        out[r_arr < self.breakpoints[0]] = INF
        if len(self.pieces):
            idx = np.searchsorted(self.breakpoints, r_arr, side="right") - 1
            for i in range(len(self.pieces)):
                m = (idx == i) & (r_arr > self.breakpoints[i]) & (r_arr < self.breakpoints[i + 1])
                if np.any(m):
                    out[m] = self._poly(i, r_arr[m])
        for i, ri in enumerate(self.breakpoints):
            out[r_arr == ri] = self.point_values[i]
        return float(out[0]) if scalar else out

    def limit(self, i, side):
        """One-sided limit at breakpoint i ('left' or 'right')."""
        ri = self.breakpoints[i]
        if side == "left":
            if i == 0:
                return INF
            return float(self._poly(i - 1, ri))
        if i == len(self.breakpoints) - 1:
            return 0.0
        return float(self._poly(i, ri))

    def is_zero(self):
        """True when the finite part (at and beyond r0) vanishes identically."""
        if any(np.any(c != 0.0) for c in self.pieces):
            return False
        return all(v == 0.0 for v in self.point_values[1:]) and (
            self.point_values[0] in (0.0, INF))

    def to_json(self):
        return {
            "breakpoints": [float(b) for b in self.breakpoints],
            "pieces": [[float(c) for c in p] for p in self.pieces],
            "point_values": ["inf" if v == INF else float(v) for v in self.point_values],
        }

    @classmethod
    def from_json(cls, obj):
        pv = [INF if v == "inf" else float(v) for v in obj["point_values"]]
        return cls(obj["breakpoints"], obj["pieces"], pv)

    @classmethod
    def zero(cls):
        """No hard core, no interaction."""
        return cls([0.0], [], [0.0])

    @classmethod
    def hard_core(cls, radius):
        """Pure exclusion disc of the given radius (value +inf up to and
        including the radius, zero beyond)."""
        return cls([radius], [], [INF])


# tent of height m peaked at s, sloping to zero over width eps on both sides
def _hat(r, s, m, eps):
    return m - (m / eps) * np.abs(r - s)


class ContinuousRadialPart:
    """Continuous envelope of a well-behaved function on (r0, infinity).

    Equal to the pointwise maximum of the function with one tent per jump
    radius; the tent peaks exceed every one-sided limit by one, which makes
    the envelope continuous across the jumps.  Below r0 the envelope is
    extended by its right limit at r0 so that mollification near the hard
    core sees no infinities.
    """

    def __init__(self, fn, eps):
        self.fn = fn
        self.eps = float(eps)
        self.hats = []
        for i in range(1, len(fn.breakpoints)):
            m = max(fn.point_values[i], fn.limit(i, "left"), fn.limit(i, "right")) + 1.0
            self.hats.append((float(fn.breakpoints[i]), m))
        self._ext_value = fn.limit(0, "right") if len(fn.breakpoints) > 1 else 0.0

    def _finite_fn(self, r):
        """The underlying function with the +inf head replaced by constant
        extension (only meaningful for r <= r0)."""
        r = np.asarray(r, dtype=float)
        vals = np.atleast_1d(np.asarray(self.fn(np.maximum(r, self.fn.r0)), dtype=float))
        below = np.atleast_1d(r) <= self.fn.r0
        vals[below] = self._ext_value
        return vals.reshape(np.shape(r)) if np.shape(r) else float(vals[0])

    def eval_extended(self, r):
        """Envelope with constant extension below r0 (used for smoothing)."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.atleast_1d(np.asarray(self._finite_fn(r_arr), dtype=float)).copy()
        for s, m in self.hats:
            np.maximum(out, np.maximum(_hat(r_arr, s, m, self.eps), 0.0), out=out)
        return out.reshape(np.shape(r)) if np.shape(r) else float(out[0])

    def __call__(self, r):
        """Envelope value; +inf below r0 like the original function."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.atleast_1d(np.asarray(self.eval_extended(r_arr), dtype=float)).copy()
        out[r_arr < self.fn.r0] = INF
        return out.reshape(np.shape(r)) if np.shape(r) else float(out[0])

    @property
    def support_radius(self):
        """Radius beyond which the envelope vanishes."""
        ends = [self.fn.support_radius]
        ends += [s + self.eps for s, _ in self.hats]
        return max(ends)

    def is_zero(self):
        return self.fn.is_zero() and not any(m > 0 for _, m in self.hats)


def decompose_well_behaved(fn, eps):
    """Split a well-behaved function into a continuous envelope and the
    nonnegative remainder (envelope minus function, zero below r0)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    cont = ContinuousRadialPart(fn, eps)

    def small(r):
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        diff = np.atleast_1d(np.asarray(cont(r_arr), dtype=float)) - \
            np.atleast_1d(np.asarray(fn(r_arr), dtype=float))
        diff[r_arr < fn.r0] = 0.0
        diff[~np.isfinite(diff)] = 0.0
        return diff.reshape(np.shape(r)) if np.shape(r) else float(diff[0])

    return cont, small


# ---------------------------------------------------------------------------
# Potts type potentials


REGION_HARD_CORE = "hard_core"
REGION_CORE_MARGIN = "core_margin"   # K minus the hard core: empty (K = hard core)
REGION_RING1 = "ring1"               # first enlargement shell (r, r+eps]
REGION_RING2 = "ring2"               # second enlargement shell (r+eps, r+2eps]
REGION_OUTSIDE = "outside"


class PottsPotential:
    """Pair potential phi[s1][s2](|x1-x2|_h) with hard discs.

    The table is a symmetric nspins x nspins grid of WellBehavedFn.  The hard
    core of the potential is taken as the closed disc of radius r0 for each
    spin pair (the value exactly at r0 is +inf whenever r0 > 0), together with
    the diagonal x1 == x2, so coincident positions always cost +inf.  The
    enlarged cores add eps and 2*eps to every disc radius.
    """

    def __init__(self, norm, table, eps):
        self.norm = norm
        self.nspins = len(table)
        if self.nspins < 1:
            raise ValueError("need a nonempty spin space")
        self.table = table
        if not eps > 0:
            raise ValueError("enlargement eps must be positive")
        self.eps = float(eps)
        self._validate()
        self.hard_core_radii = np.array(
            [[table[i][j].r0 for j in range(self.nspins)] for i in range(self.nspins)])

    def _validate(self):
        for i in range(self.nspins):
            if len(self.table[i]) != self.nspins:
                raise ValueError("table must be square")
            for j in range(self.nspins):
                fn = self.table[i][j]
                fj = self.table[j][i]
                if fn.to_json() != fj.to_json():
                    raise ValueError(f"table not symmetric at spins ({i},{j})")
                if fn.r0 > 0 and fn.point_values[0] != INF:
                    raise ValueError(
                        "value at the hard-core radius must be +inf (closed disc)")
                self._check_nonnegative(fn, i, j)

    @staticmethod
    def _check_nonnegative(fn, i, j):
        grid = []
        bp = fn.breakpoints
        for k in range(len(bp) - 1):
            grid.append(np.linspace(bp[k], bp[k + 1], 257)[1:-1])
        if grid:
            vals = fn(np.concatenate(grid))
            if np.min(vals) < 0:
                raise ValueError(f"interaction for spins ({i},{j}) is negative")
        finite_pv = [v for v in fn.point_values if math.isfinite(v)]
        if finite_pv and min(finite_pv) < 0:
            raise ValueError(f"point value for spins ({i},{j}) is negative")

    @property
    def interaction_range(self):
        """Largest radius at which any spin pair still interacts."""
        return max(self.table[i][j].support_radius
                   for i in range(self.nspins) for j in range(self.nspins))

    @property
    def max_hard_core_radius(self):
        return float(np.max(self.hard_core_radii))

    def min_positive_hard_core_radius(self):
        r = self.hard_core_radii[self.hard_core_radii > 0]
        return float(np.min(r)) if r.size else None

    # -- evaluation

    def energy_radial(self, s1, s2, d):
        """Vectorized potential value for spin arrays and distances.  The
        closed hard core and the diagonal force +inf."""
        s1 = np.atleast_1d(np.asarray(s1, dtype=np.int64))
        s2 = np.atleast_1d(np.asarray(s2, dtype=np.int64))
        d = np.atleast_1d(np.asarray(d, dtype=float))
        out = np.zeros(np.broadcast_shapes(s1.shape, s2.shape, d.shape))
        s1, s2, d = np.broadcast_arrays(s1, s2, d)
        for i in range(self.nspins):
            for j in range(self.nspins):
                m = (s1 == i) & (s2 == j)
                if np.any(m):
                    out[m] = self.table[i][j](d[m])
        out[d <= 0.0] = INF
        rcore = self.hard_core_radii[s1, s2]
        out[d <= rcore] = INF
        return out

    def pair_energy(self, y1, y2):
        d = self.norm.dist(np.asarray(y2.x, dtype=float) - np.asarray(y1.x, dtype=float))
        return float(self.energy_radial(y1.spin, y2.spin, d)[0])

    def in_hard_core_radial(self, s1, s2, d):
        s1 = np.asarray(s1, dtype=np.int64)
        s2 = np.asarray(s2, dtype=np.int64)
        d = np.asarray(d, dtype=float)
        return (d <= self.hard_core_radii[s1, s2]) | (d <= 0.0)

    def pair_region(self, y1, y2):
        """Classify a pair against the hard core and its two enlargements."""
        d = self.norm.dist(np.asarray(y2.x, dtype=float) - np.asarray(y1.x, dtype=float))
        r = self.hard_core_radii[y1.spin, y2.spin]
        if d <= r or d <= 0.0:
            return REGION_HARD_CORE
        if d <= r + self.eps:
            return REGION_RING1
        if d <= r + 2.0 * self.eps:
            return REGION_RING2
        return REGION_OUTSIDE

    def to_json(self):
        entries = []
        for i in range(self.nspins):
            for j in range(i, self.nspins):
                entries.append({"spins": [i, j], **self.table[i][j].to_json()})
        return {
            "norm": self.norm.to_json(),
            "spin_count": self.nspins,
            "enlargement": self.eps,
            "entries": entries,
        }

    @classmethod
    def from_json(cls, obj):
        n = int(obj["spin_count"])
        table = [[None] * n for _ in range(n)]
        for entry in obj["entries"]:
            i, j = entry["spins"]
            fn = WellBehavedFn.from_json(entry)
            if table[i][j] is not None and table[i][j].to_json() != fn.to_json():
                raise ValueError(f"conflicting entries for spins ({i},{j})")
            table[i][j] = fn
            table[j][i] = fn
        for i in range(n):
            for j in range(n):
                if table[i][j] is None:
                    table[i][j] = WellBehavedFn.zero()
        return cls(Norm.from_json(obj["norm"]), table, float(obj["enlargement"]))


def eval_well_behaved(fn, r):
    """Functional form of WellBehavedFn.__call__."""
    return fn(r)


def eval_pair_potential(pot, y1, y2):
    return pot.pair_energy(y1, y2)


def pair_region(pot, y1, y2):
    return pot.pair_region(y1, y2)


# ---------------------------------------------------------------------------
# mollifier


# integral of exp(-1/(1-x^2)) over (-1, 1); normalizes the bump kernel
_BUMP_MASS = 0.44399381616807357745


def _bump(x, order):
    """The bump exp(-1/(1-x^2)) on (-1, 1) and its first two derivatives;
    zero outside (the polynomial blowup is dominated by the vanishing bump).
    """
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0 - 1e-12
    out = np.zeros_like(x)
    xs = x[inside]
    one = 1.0 - xs * xs
    b = np.exp(-1.0 / one)
    if order == 0:
        out[inside] = b
        return out
    g = -2.0 * xs / one ** 2
    if order == 1:
        out[inside] = b * g
        return out
    gp = -2.0 / one ** 2 - 8.0 * xs * xs / one ** 3
    out[inside] = b * (g * g + gp)
    return out


def _collect_kinks(cont):
    """Radii where the extended envelope can lose smoothness: breakpoints,
    tent corners and peaks, and every crossing between branches.  A superset
    is fine; splitting a smooth integrand costs nothing."""
    fn = cont.fn
    eps = cont.eps
    pts = set(float(b) for b in fn.breakpoints)
    branches = []  # (lo, hi, coeffs low->high) finite polynomial branches
    bp = fn.breakpoints
    for i in range(len(bp) - 1):
        branches.append((float(bp[i]), float(bp[i + 1]), fn.pieces[i]))
    branches.append((float(bp[-1]), INF, np.zeros(4)))
    branches.append((-INF, float(bp[0]), np.array([cont._ext_value, 0, 0, 0])))
    hat_branches = []
    for s, m in cont.hats:
        pts.update((s, s - eps, s + eps))
        hat_branches.append((s - eps, s, np.array([m - m / eps * s, m / eps, 0, 0])))
        hat_branches.append((s, s + eps, np.array([m + m / eps * s, -m / eps, 0, 0])))
    def crossings(lo, hi, ca, cb):
        diff = np.asarray(ca, dtype=float) - np.asarray(cb, dtype=float)
        if np.allclose(diff, 0.0):
            return
        roots = np.roots(diff[::-1][np.argmax(diff[::-1] != 0):])
        for root in roots:
            if abs(root.imag) < 1e-9 and lo - 1e-12 < root.real < hi + 1e-12:
                pts.add(float(root.real))
    for hlo, hhi, hc in hat_branches:
        for blo, bhi, bc in branches:
            lo, hi = max(hlo, blo), min(hhi, bhi)
            if lo < hi:
                crossings(lo, hi, hc, bc)
        for hlo2, hhi2, hc2 in hat_branches:
            lo, hi = max(hlo, hlo2), min(hhi, hhi2)
            if lo < hi:
                crossings(lo, hi, hc, hc2)
    return np.array(sorted(pts))


class SmoothRadialPart:
    """Twice continuously differentiable radial profile: the continuous
    envelope convolved with a compact bump kernel, plus an optional constant
    lift tapered to zero beyond the interaction range.

    Evaluation integrates the kernel with Gauss-Legendre quadrature, split at
    the envelope's kink radii so every sub-integrand is smooth; this keeps
    the profile exact to near machine precision, so the small part u =
    Ubar - U vanishes identically wherever nothing was smoothed.  The lift
    covers the genuine smoothing deficit of curved pieces (piecewise-linear
    shapes need none, keeping u local to the jump radii).
    """

    GL_NODES = 20

    def __init__(self, cont, delta_prime):
        self.delta_prime = float(delta_prime)
        if not self.delta_prime > 0:
            raise ValueError("delta_prime must be positive")
        self.zero = cont.is_zero()
        self.lift = 0.0
        self.moll_end = 0.0
        self.lift_end = 0.0
        if self.zero:
            return
        self.cont = cont
        self.moll_end = cont.support_radius + self.delta_prime
        self._kinks = _collect_kinks(cont)
        gx, gw = np.polynomial.legendre.leggauss(self.GL_NODES)
        self._gx = (gx + 1.0) / 2.0
        self._gw = gw / 2.0
        # lift against the original function on a dense grid
        step = self.delta_prime / 8.0
        fine = np.arange(0.0, self.moll_end + step, step)
        orig = np.atleast_1d(np.asarray(cont.fn(fine), dtype=float))
        orig[fine < cont.fn.r0] = -INF
        orig[~np.isfinite(orig)] = -INF
        deficit = float(np.max(orig - self._moll(fine, 0)))
        self.lift = deficit * 1.05 if deficit > 1e-10 else 0.0
        self.lift_end = self.moll_end + 1.0 if self.lift > 0 else self.moll_end

    def _moll(self, r, order):
        """Kernel smoothing of the extended envelope (or its derivative of
        the given order), one split Gauss-Legendre pass per point."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        dp = self.delta_prime
        live = np.flatnonzero(r < self.moll_end)
        if len(live) == 0:
            return out
        seg_t = []
        seg_w = []
        seg_owner = []
        panels = np.linspace(-dp, dp, 9)
        for idx in live:
            ri = float(r[idx])
            lo, hi = ri - dp, ri + dp
            a = np.searchsorted(self._kinks, lo, side="right")
            b = np.searchsorted(self._kinks, hi, side="left")
            pts = np.unique(np.concatenate([ri + panels, self._kinks[a:b]]))
            for k in range(len(pts) - 1):
                width = pts[k + 1] - pts[k]
                if width <= 0:
                    continue
                t = pts[k] + width * self._gx
                seg_t.append(t)
                seg_w.append(width * self._gw)
                seg_owner.append(np.full(len(t), idx))
        t_all = np.concatenate(seg_t)
        w_all = np.concatenate(seg_w)
        owner = np.concatenate(seg_owner)
        vals = self.cont.eval_extended(t_all)
        kern = _bump((r[owner] - t_all) / dp, order) / (_BUMP_MASS * dp ** (order + 1))
        np.add.at(out, owner, w_all * vals * kern)
        return out

    @property
    def support_end(self):
        """Radius beyond which the smooth part vanishes identically."""
        if self.zero:
            return 0.0
        return self.lift_end if self.lift > 0 else self.moll_end

    def _lift_profile(self, r, order=0):
        if self.lift == 0.0:
            return np.zeros_like(r)
        t = np.clip((r - self.moll_end), 0.0, 1.0)
        if order == 0:
            s = ((6.0 * t - 15.0) * t + 10.0) * t ** 3
            return self.lift * (1.0 - s)
        if order == 1:
            ds = ((30.0 * t - 60.0) * t + 30.0) * t ** 2
            ds[(r < self.moll_end) | (r > self.moll_end + 1.0)] = 0.0
            return -self.lift * ds
        dds = ((120.0 * t - 180.0) * t + 60.0) * t
        dds[(r < self.moll_end) | (r > self.moll_end + 1.0)] = 0.0
        return -self.lift * dds

    def _eval(self, r, order):
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        if self.zero:
            out = np.zeros_like(r_arr)
        else:
            out = self._moll(r_arr, order) + self._lift_profile(r_arr, order)
        return out.reshape(np.shape(r)) if np.shape(r) else float(out[0])

    def __call__(self, r):
        return self._eval(r, 0)

    def deriv1(self, r):
        return self._eval(r, 1)

    def deriv2(self, r):
        return self._eval(r, 2)


# ---------------------------------------------------------------------------
# decomposed potential


@dataclass(frozen=True)
class PsiBox:
    """Domination function: constant on a disc of the pair norm, 0 outside."""

    constant: float
    radius: float

    def radial(self, d):
        d = np.asarray(d, dtype=float)
        return np.where(d <= self.radius, self.constant, 0.0)


class DecomposedPotential:
    """A Potts potential together with its smooth/small decomposition and the
    derived constants used by bond sampling and the deformed translation.

    Attributes
    ----------
    base : PottsPotential
    smooth : grid of SmoothRadialPart, one per spin pair (symmetric)
    psi : PsiBox dominating the second radial derivative of the smooth part
    c_core_span : sup max-norm distance inside the twice-enlarged core
    c_cutoff_slope : sup |d/dt cutoff| along the translation direction
    c_psi, c_u, c_xi : integral constants of the decomposition
    """

    def __init__(self, base, delta_prime, z, xi=1.0):
        self.base = base
        self.norm = base.norm
        self.eps = base.eps
        self.delta_prime = float(delta_prime)
        self.z = float(z)
        self.xi = float(xi)
        n = base.nspins
        self.smooth = [[None] * n for _ in range(n)]
        self._small_support = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                cont = ContinuousRadialPart(base.table[i][j], base.eps)
                part = SmoothRadialPart(cont, self.delta_prime)
                self.smooth[i][j] = part
                self.smooth[j][i] = part
                self._small_support[i, j] = self._small_support[j, i] = part.support_end
        self._compute_constants()
        if self.c_xi >= 1.0 / (self.z * self.xi):
            raise ValueError(
                "activity too large for decomposition: "
                f"c_xi = {self.c_xi:.6g} >= 1/(z*xi) = {1.0 / (self.z * self.xi):.6g}")

    # -- evaluation

    @property
    def nspins(self):
        return self.base.nspins

    def smooth_radial(self, s1, s2, d):
        """Value of the smooth part Ubar for spin scalars/arrays."""
        s1 = np.atleast_1d(np.asarray(s1, dtype=np.int64))
        s2 = np.atleast_1d(np.asarray(s2, dtype=np.int64))
        d = np.atleast_1d(np.asarray(d, dtype=float))
        s1, s2, d = np.broadcast_arrays(s1, s2, d)
        out = np.zeros(s1.shape)
        for i in range(self.nspins):
            for j in range(i, self.nspins):
                m = ((s1 == i) & (s2 == j)) | ((s1 == j) & (s2 == i))
                if np.any(m):
                    out[m] = self.smooth[i][j](d[m])
        return out

    def small_radial(self, s1, s2, d):
        """Small part u = Ubar - U off the core, extended by zero on it."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        ubar = self.smooth_radial(s1, s2, d)
        base = self.base.energy_radial(s1, s2, d)
        core = self.base.in_hard_core_radial(
            np.atleast_1d(s1), np.atleast_1d(s2), d)
        core, ubar, base = np.broadcast_arrays(core, ubar, base)
        u = np.where(core, 0.0, ubar - base)
        return np.maximum(u, 0.0)

    def bond_probability_radial(self, s1, s2, d):
        """utilde = 1 - exp(-u) <= min(u, 1)."""
        return -np.expm1(-self.small_radial(s1, s2, d))

    def u_support_radius(self, s1, s2):
        return float(self._small_support[s1, s2])

    @property
    def max_u_support(self):
        return float(np.max(self._small_support))

    @property
    def smooth_range(self):
        """Radius beyond which the smooth part of every pair vanishes."""
        return float(np.max(self._small_support))

    # -- cutoff (0 on the core, 1 outside the twice-enlarged core)

    def cutoff_radial(self, s1, s2, d):
        rcore = self.base.hard_core_radii[
            np.asarray(s1, dtype=np.int64), np.asarray(s2, dtype=np.int64)]
        s = np.clip((np.asarray(d, dtype=float) - rcore) / (2.0 * self.eps), 0.0, 1.0)
        return (3.0 - 2.0 * s) * s * s

    def cutoff(self, y1, y2):
        d = self.norm.dist(np.asarray(y2.x, dtype=float) - np.asarray(y1.x, dtype=float))
        return float(np.atleast_1d(self.cutoff_radial(y1.spin, y2.spin, d))[0])

    def cutoff_e_deriv(self, y1, y2):
        """Derivative of the cutoff when the second particle moves along e."""
        dx = np.asarray(y2.x, dtype=float) - np.asarray(y1.x, dtype=float)
        d = float(self.norm.dist(dx))
        return float(self.cutoff_slope_radial(y1.spin, y2.spin, d)
                     * self.norm.e_deriv(dx))

    def cutoff_slope_radial(self, s1, s2, d):
        rcore = self.base.hard_core_radii[
            np.asarray(s1, dtype=np.int64), np.asarray(s2, dtype=np.int64)]
        s = (np.asarray(d, dtype=float) - rcore) / (2.0 * self.eps)
        inside = (s > 0.0) & (s < 1.0)
        slope = 6.0 * s * (1.0 - s) / (2.0 * self.eps)
        return np.where(inside, slope, 0.0)

    # -- constants

    def _pair_iter(self):
        for i in range(self.nspins):
            for j in range(i, self.nspins):
                yield i, j

    def _grid_integral(self, integrand_radial, radius):
        """Integral over the plane of a radial-in-h-norm integrand, by
        midpoint quadrature on a square covering the h-ball of `radius`."""
        if radius <= 0:
            return 0.0
        half = radius * self.norm.maxnorm_bound() * 1.01
        m = 481
        xs = (np.arange(m) + 0.5) / m * 2 * half - half
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        d = self.norm.dist(np.stack([gx, gy], axis=-1))
        cell = (2 * half / m) ** 2
        return float(np.sum(integrand_radial(d, gx, gy)) * cell)

    def _maxnorm_sq_ball_mass(self):
        """Integral of the squared max norm over the unit ball of the pair
        norm; the same integral over the radius-R ball is R^4 times this."""
        m = 801
        xs = (np.arange(m) + 0.5) / m * 2 - 1.0
        half = self.norm.maxnorm_bound()
        gx, gy = np.meshgrid(xs * half, xs * half, indexing="ij")
        d = self.norm.dist(np.stack([gx, gy], axis=-1))
        w = np.maximum(np.abs(gx), np.abs(gy)) ** 2
        cell = (2 * half / m) ** 2
        return float(np.sum(np.where(d <= 1.0, w, 0.0)) * cell)

    def _compute_constants(self):
        base = self.base
        nsp = self.nspins
        ball = self.norm.unit_ball_area()
        mb = self.norm.maxnorm_bound()

        self.c_core_span = (base.max_hard_core_radius + 2 * self.eps) * mb
        self.c_cutoff_slope = (1.5 / (2.0 * self.eps)) * self.norm.e_slope_bound()

        # psi: constant box dominating the second e-derivative of Ubar
        psi_radius = max(p.support_end for row in self.smooth for p in row) + 1.0
        max_second = 0.0
        if self.norm.kind == "max":
            curv_a, curv_b = 1.0, 0.0
        elif self.norm.kind == "euclidean":
            curv_a, curv_b = 1.0, 1.0
        else:
            w1 = self.norm.weights[0]
            curv_a, curv_b = w1, w1
        for i, j in self._pair_iter():
            part = self.smooth[i][j]
            if part.zero:
                continue
            rmin = base.hard_core_radii[i, j]
            rs = np.linspace(max(rmin, 1e-6), part.support_end + 1e-9, 4001)
            bound = curv_a * np.abs(part.deriv2(rs)) + \
                curv_b * np.abs(part.deriv1(rs)) / rs
            max_second = max(max_second, float(np.max(bound)))
        self.psi = PsiBox(constant=1.1 * max_second, radius=psi_radius)

        # c_psi = max(sup psi, sup_y1 int psi * (dist^2 v 1))
        def psi_weight(d, gx, gy):
            w = np.maximum(np.maximum(np.abs(gx), np.abs(gy)) ** 2, 1.0)
            return np.where(d <= self.psi.radius, self.psi.constant, 0.0) * w

        self.c_psi = max(self.psi.constant,
                         self._grid_integral(psi_weight, self.psi.radius))

        # c_u and c_xi: spin-averaged integrals against the uniform spin law.
        # Both are radial in the pair norm, so a fine 1-d trapezoid against a
        # tabulated utilde suffices: the h-ball of radius rho has area
        # ball*rho^2, and the squared-max-norm weight integrates to
        # maxnorm_mass * rho^4 over it (homogeneity).
        maxnorm_mass = self._maxnorm_sq_ball_mass()
        c_u = 0.0
        c_xi = 0.0
        for s1 in range(nsp):
            acc_u = 0.0
            acc_xi = 0.0
            for s2 in range(nsp):
                rcore = base.hard_core_radii[s1, s2]
                acc_xi += ball * ((rcore + 2 * self.eps) ** 2 - rcore ** 2)
                rad = self.u_support_radius(s1, s2)
                if rad > 0:
                    step = self.delta_prime / 16.0
                    rho = np.arange(0.0, rad + step, step)
                    ut = self.bond_probability_radial(s1, s2, rho)
                    acc_xi += float(np.trapezoid(ut * ball * 2.0 * rho, rho))
                    acc_u += float(np.trapezoid(ut * maxnorm_mass * 4.0 * rho ** 3, rho))
            c_u = max(c_u, acc_u / nsp)
            c_xi = max(c_xi, acc_xi / nsp)
        self.c_u = c_u
        self.c_xi = c_xi


def build_decomposition(pot, eps=None, mollify_width=None, z=0.1, xi=1.0):
    """Decompose a Potts potential into smooth and small parts.

    eps defaults to the potential's enlargement; passing a different value
    rebuilds the potential with that enlargement first.  mollify_width
    defaults to eps/4.
    """
    if eps is not None and eps != pot.eps:
        pot = PottsPotential(pot.norm, pot.table, eps)
    if mollify_width is None:
        mollify_width = pot.eps / 4.0
    if not mollify_width > 0:
        raise ValueError("mollify_width must be positive")
    return DecomposedPotential(pot, mollify_width, z=z, xi=xi)


# ---------------------------------------------------------------------------
# Hamiltonians


def _base_potential(pot_or_dec):
    return pot_or_dec.base if isinstance(pot_or_dec, DecomposedPotential) else pot_or_dec


def pairs_in_scope(config, region=None, cutoff=None, norm=None):
    """Index pairs (i, j), i < j, of the combined particle list with at least
    one member inside `region` and pair distance at most `cutoff`.

    Returns (i, j, d) arrays, with d the pair distance in `norm`.
    """
    pot_norm = norm
    region = region or config.window
    pos = config.positions
    n = len(pos)
    if n < 2 or cutoff is None or cutoff <= 0:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                np.empty(0))
    box = cutoff * (pot_norm.maxnorm_bound() if pot_norm else 1.0)
    grid = CellGrid(pos, box * 1.0000001)
    ii, jj = grid.candidate_pairs()
    if len(ii) == 0:
        return ii, jj, np.empty(0)
    d = pot_norm.dist(pos[jj] - pos[ii])
    keep = d <= cutoff
    ii, jj, d = ii[keep], jj[keep], d[keep]
    inside = region.contains(pos)
    keep = inside[ii] | inside[jj]
    return ii[keep], jj[keep], d[keep]


def hamiltonian(pot_or_dec, config, region=None, smooth=False):
    """Energy of the configuration: sum of pair interactions over all pairs
    with at least one particle in `region` (default: the full window).

    With smooth=True sums the smooth part Ubar of a decomposed potential
    (always finite); otherwise sums the base potential and returns +inf as
    soon as a pair sits in the hard core.
    """
    base = _base_potential(pot_or_dec)
    if smooth:
        if not isinstance(pot_or_dec, DecomposedPotential):
            raise ValueError("smooth hamiltonian needs a decomposed potential")
        cutoff = pot_or_dec.smooth_range
    else:
        cutoff = base.interaction_range
    region = region or config.window
    pos = config.positions
    n = len(pos)
    if n < 2:
        return 0.0
    if not smooth:
        # hard-core violations can involve pairs beyond the interaction range
        # only through the zero-distance diagonal, which construction forbids
        cutoff = max(cutoff, base.max_hard_core_radius)
    if cutoff <= 0:
        return 0.0
    ii, jj, d = pairs_in_scope(config, region, cutoff, base.norm)
    if len(ii) == 0:
        return 0.0
    spins = config.spins
    if smooth:
        vals = pot_or_dec.smooth_radial(spins[ii], spins[jj], d)
        return float(np.sum(vals))
    vals = base.energy_radial(spins[ii], spins[jj], d)
    if np.any(np.isinf(vals)):
        return INF
    return float(np.sum(vals))


def hamiltonian_small(dec, config, region=None):
    """Energy of the small part u over the same pair scope (finite)."""
    base = dec.base
    region = region or config.window
    cutoff = dec.max_u_support
    if cutoff <= 0 or config.n_total < 2:
        return 0.0
    ii, jj, d = pairs_in_scope(config, region, cutoff, base.norm)
    if len(ii) == 0:
        return 0.0
    spins = config.spins
    return float(np.sum(dec.small_radial(spins[ii], spins[jj], d)))


def interaction_energy(pot_or_dec, xy_a, sp_a, xy_b, sp_b):
    """Cross energy W between two particle sets under the base potential."""
    base = _base_potential(pot_or_dec)
    if len(xy_a) == 0 or len(xy_b) == 0:
        return 0.0
    dx = np.asarray(xy_b, dtype=float)[None, :, :] - np.asarray(xy_a, dtype=float)[:, None, :]
    d = base.norm.dist(dx)
    vals = base.energy_radial(
        np.asarray(sp_a, dtype=np.int64)[:, None],
        np.asarray(sp_b, dtype=np.int64)[None, :], d)
    if np.any(np.isinf(vals)):
        return INF
    return float(np.sum(vals))
