"""Deformed translations of marked point configurations, with Jacobian.

The map translates every particle some distance along e = (1, 0): a full
shift tau deep inside a radius-R box, nothing outside a radius-n box, and a
slowly decaying log-taper profile in between.  Bonded particles and hard-core
contacts must move rigidly, so the profile is corrected by local distortion
terms around every particle whose translation distance is already fixed.  The
construction is a recursion over the minimum of the current translation-
distance field; it produces an ordered partition into clusters with common
translation distances, is bijective, and has an explicit product density
(one factor |1 + d/dx t| per minimizing particle) with respect to the
underlying Poisson-times-counting reference measure.

Everything here works on a configuration's combined interior-then-boundary
particle list; transformations preserve index order, so bond index sets
remain valid on the transformed pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bonds import BondSet, augment_bplus, cluster_range, clusters
from .core import CellGrid, Configuration, Window, maxnorm

INF = math.inf

# particles whose running minima agree within this join the same argmin set
TIE_TOL = 1e-12

# where s * log(s) crosses 1; the taper integrand switches to 1/(s log s) here
SSTAR = 1.7632228343518967


def _check_sstar():
    return SSTAR * math.log(SSTAR)


assert abs(_check_sstar() - 1.0) < 1e-14


def q_taper(s):
    """q(s) = 1 / max(1, s log s), extended by 1 left of the crossing."""
    s = np.asarray(s, dtype=float)
    out = np.ones(s.shape)
    m = s > SSTAR
    if np.any(m):
        sm = s[m]
        out[m] = 1.0 / (sm * np.log(sm))
    return out if out.shape else float(out)


def Q_taper(k):
    """Antiderivative of q from 0: k below the crossing, then grows like
    log log k (closed form, no quadrature)."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("Q_taper needs nonnegative arguments")
    out = np.array(k, dtype=float, copy=True)
    m = k > SSTAR
    if np.any(m):
        out[m] = SSTAR + np.log(np.log(k[m])) - math.log(math.log(SSTAR))
    return out if out.shape else float(out)


def r_ratio(s, k):
    """Fraction of the q-mass of [0, k] sitting right of s (clipped)."""
    if not k > 0:
        raise ValueError("r_ratio needs k > 0")
    s = np.clip(np.asarray(s, dtype=float), 0.0, k)
    qk = Q_taper(k)
    return (qk - Q_taper(s)) / qk


def tau_Rn(s, tau, R, n):
    """Taper profile: tau for s <= R, 0 for s >= n, log-decay between."""
    return tau * r_ratio(np.asarray(s, dtype=float) - R, n - R)


class TaperProfile:
    """tau_Rn with fixed parameters, plus its derivative on the ramp."""

    def __init__(self, tau, R, n):
        self.tau = float(tau)
        self.R = float(R)
        self.n = float(n)
        self.Qnr = float(Q_taper(n - R))

    def value(self, s):
        return tau_Rn(s, self.tau, self.R, self.n)

    def deriv(self, s):
        """d/ds of the profile; 0 off the open ramp (R, n)."""
        s = np.asarray(s, dtype=float)
        on = (s > self.R) & (s < self.n)
        d = np.where(on, -self.tau * q_taper(np.maximum(s - self.R, 0.0)) / self.Qnr, 0.0)
        return d if d.shape else float(d)

    def e_deriv_at(self, pos):
        """d/dx1 of tau_Rn(|pos|_max); 0 on the max-norm kink |x1| = |x2|."""
        x1, x2 = float(pos[0]), float(pos[1])
        if abs(x1) <= abs(x2):
            return 0.0
        return float(self.deriv(abs(x1))) * (1.0 if x1 > 0 else -1.0)


@dataclass(frozen=True)
class TaperParams:
    """Parameters of one deformed translation.

    tau is the translation distance (in [0, 1/2]); R and n bound the flat and
    the frozen region (n > R >= nprime >= 1); nprime is the radius of the
    observation window whose cluster must stay inside radius R for a
    configuration to count as good; delta is the good-set budget.  ck and cf
    default to the decomposed potential's core span and cutoff slope.
    """

    tau: float
    R: int
    n: int
    nprime: int = 1
    delta: float = 0.25
    ck: float = None
    cf: float = None

    def __post_init__(self):
        if not (0.0 <= self.tau <= 0.5):
            raise ValueError("tau must lie in [0, 1/2]")
        if not (self.n > self.R >= self.nprime >= 1):
            raise ValueError("need n > R >= nprime >= 1")
        if not (0.0 < self.delta < 0.5):
            raise ValueError("delta must lie in (0, 1/2)")

    def resolve(self, dec):
        ck = self.ck if self.ck is not None else dec.c_core_span
        cf = self.cf if self.cf is not None else dec.c_cutoff_slope
        return ck, cf


def m_aux(yprime, t, y, params, dec):
    """Local distortion around a particle yprime with fixed translation t.

    Returns t everywhere when the profile gap h at yprime is too steep to
    control (h * cf > 1/2); otherwise t + h * cutoff(yprime, y), with +inf
    where the cutoff has reached one.
    """
    ck, cf = params.resolve(dec)
    profile = TaperProfile(params.tau, params.R, params.n)
    h = abs(float(profile.value(maxnorm(np.asarray(yprime.x)) - ck)) - t)
    if h * cf > 0.5:
        return float(t)
    f = dec.cutoff(yprime, y)
    if f >= 1.0:
        return INF
    return float(t + h * f)


# ---------------------------------------------------------------------------
# result container


@dataclass
class DensityFactor:
    step: int
    particle: int
    branch: str          # "taper", "distortion", or "clamp"
    donor: int           # donor particle index, -1 for the taper branch
    deriv: float
    factor: float


@dataclass
class Donor:
    step: int            # construction step whose cluster created this donor
    pos: np.ndarray      # donor position (original frame)
    spin: int
    t: float
    h: float
    clamp: bool          # True when h*cf > 1/2, i.e. the distortion is the
                         # constant t


@dataclass
class TransformResult:
    """Outcome of a deformed translation (or of its inverse).

    partition holds (P_k, C_k, tau_k) per construction step: the argmin index
    set, its bond-cluster, and the common translation distance.  t_map maps
    every particle index to its translation distance (always >= 0; the
    direction says which way it was applied).  The transformed configuration
    keeps the original window and index order and is not re-validated against
    the window split, since translated particles may leave the original
    interior box geometrically while keeping their interior role.
    """

    partition: list
    t_map: np.ndarray
    transformed_config: Configuration
    transformed_bonds: BondSet
    density: float
    factors: list
    direction: int
    params: TaperParams
    tie_events: int = 0
    donors: list = field(default_factory=list)
    n_steps: int = 0

    @property
    def m_steps(self):
        """Index of the last construction step (-1 for empty input)."""
        return self.n_steps - 1

    def log_density(self):
        return float(sum(math.log(f.factor) for f in self.factors))

    def translation_field(self, pos, spin, upto_step, dec):
        """Value of the running translation-distance field t_k at an
        arbitrary marked point, using donors of steps < upto_step.

        Reflect positions first when this result came from a backward pass.
        """
        profile = TaperProfile(self.params.tau, self.params.R, self.params.n)
        x = np.asarray(pos, dtype=float).copy()
        if self.direction < 0:
            x[0] = -x[0]
        val = float(profile.value(maxnorm(x)))
        radii = dec.base.hard_core_radii
        for d in self.donors:
            if d.step >= upto_step:
                continue
            if d.clamp:
                val = min(val, d.t)
                continue
            dist = float(dec.norm.dist(x - d.pos))
            rc = radii[d.spin, spin]
            if dist >= rc + 2.0 * dec.eps:
                continue  # cutoff = 1, distortion is +inf there
            f = float(np.atleast_1d(dec.cutoff_radial(d.spin, spin, dist))[0])
            if f >= 1.0:
                continue
            val = min(val, d.t + d.h * f)
        return val

    def to_json(self):
        return {
            "schema": 1,
            "direction": self.direction,
            "tau": self.params.tau,
            "R": self.params.R,
            "n": self.params.n,
            "nprime": self.params.nprime,
            "partition": [
                {"P": p.tolist(), "C": c.tolist(), "tau_k": t}
                for p, c, t in self.partition
            ],
            "t_map": self.t_map.tolist(),
            "density": self.density,
            "tie_events": self.tie_events,
            "factors": [
                {"step": f.step, "particle": f.particle, "branch": f.branch,
                 "donor": f.donor, "deriv": f.deriv, "factor": f.factor}
                for f in self.factors
            ],
        }


# ---------------------------------------------------------------------------
# forward construction


def _reflect_config(config):
    flip = np.array([-1.0, 1.0])
    return Configuration(
        config.window,
        config.interior_xy * flip, config.interior_spin,
        config.boundary_xy * flip, config.boundary_spin,
        validate=False)


def _close_pair_grid(dec, positions):
    cutoff = (dec.base.max_hard_core_radius + 2.0 * dec.eps) * dec.norm.maxnorm_bound()
    return CellGrid(positions, max(cutoff, 1e-9) * 1.0000001)


def _transform_engine(config, bonds, params, dec, direction):
    """Run the recursion along +e on (possibly reflected) coordinates."""
    if bonds.n_particles != config.n_total:
        raise ValueError("bond set does not index this configuration")
    work = _reflect_config(config) if direction < 0 else config
    pos = work.positions
    spins = work.spins
    n = config.n_total
    profile = TaperProfile(params.tau, params.R, params.n)
    ck, cf = params.resolve(dec)

    t_map = np.zeros(n)
    partition = []
    factors = []
    donors = []
    ties = 0

    if n > 0:
        if not np.all(np.isfinite(pos)):
            raise ValueError("non-finite particle position")
        has_bonds = len(bonds.edges) > 0
        part = clusters(config, bonds) if has_bonds else None
        grid = _close_pair_grid(dec, pos)
        radii = dec.base.hard_core_radii
        two_eps = 2.0 * dec.eps

        a = maxnorm(pos)
        val = np.asarray(profile.value(a), dtype=float).copy()
        ta_shift = np.asarray(profile.value(a - ck), dtype=float)
        ax = np.abs(pos[:, 0])
        deriv = np.where(ax > np.abs(pos[:, 1]),
                         profile.deriv(a) * np.sign(pos[:, 0]), 0.0)
        branch = ["taper"] * n
        donor_of = np.full(n, -1, dtype=np.int64)
        remaining = np.ones(n, dtype=bool)
        step = 0

        while np.any(remaining):
            masked = np.where(remaining, val, INF)
            vmin = float(np.min(masked))
            p_idx = np.flatnonzero(masked <= vmin + TIE_TOL)
            if has_bonds:
                # clusters leave as wholes, so members stay remaining together
                labels = np.unique(part.labels[p_idx])
                c_idx = np.concatenate([part.members[l] for l in labels])
            else:
                c_idx = p_idx
            partition.append((p_idx, c_idx, vmin))
            for y in p_idx:
                f = abs(1.0 + deriv[y])
                factors.append(DensityFactor(step, int(y), branch[y],
                                             int(donor_of[y]), float(deriv[y]),
                                             float(f)))
            t_map[c_idx] = vmin
            remaining[c_idx] = False

            for y1 in c_idx:
                h = abs(ta_shift[y1] - vmin)
                if h * cf > 0.5:
                    donors.append(Donor(step, pos[y1].copy(), int(spins[y1]),
                                        vmin, h, True))
                    improve = remaining & (vmin < val - TIE_TOL)
                    val[improve] = vmin
                    deriv[improve] = 0.0
                    donor_of[improve] = y1
                    for y in np.flatnonzero(improve):
                        branch[y] = "clamp"
                    near_tie = remaining & ~improve & (vmin <= val + TIE_TOL)
                    for y in np.flatnonzero(near_tie):
                        if abs(deriv[y]) > 1e-15:
                            ties += 1
                            deriv[y] = 0.0
                            branch[y] = "clamp"
                            donor_of[y] = y1
                        val[y] = min(val[y], vmin)
                    continue
                donors.append(Donor(step, pos[y1].copy(), int(spins[y1]),
                                    vmin, h, False))
                cand = grid.near(pos[y1])
                cand = cand[remaining[cand]]
                if len(cand) == 0:
                    continue
                dx = pos[cand] - pos[y1]
                dists = dec.norm.dist(dx)
                fcut = np.asarray(dec.cutoff_radial(spins[y1], spins[cand],
                                                    dists))
                live = fcut < 1.0
                if not np.any(live):
                    continue
                cand, dx, dists, fcut = cand[live], dx[live], dists[live], \
                    fcut[live]
                mval = vmin + h * fcut
                vc = val[cand]
                improve = mval < vc - TIE_TOL
                near = ~improve & (mval <= vc + TIE_TOL)
                if np.any(improve) or np.any(near):
                    slope = np.asarray(dec.cutoff_slope_radial(
                        spins[y1], spins[cand], dists))
                    nd = h * slope * np.asarray(dec.norm.e_deriv(dx))
                    up = cand[improve]
                    val[up] = mval[improve]
                    deriv[up] = nd[improve]
                    donor_of[up] = y1
                    for y in up:
                        branch[y] = "distortion"
                    for y, m_y, nd_y in zip(cand[near], mval[near], nd[near]):
                        if abs(nd_y - deriv[y]) > 1e-15:
                            ties += 1
                            if abs(nd_y) < abs(deriv[y]):
                                deriv[y] = nd_y
                                branch[y] = "distortion"
                                donor_of[y] = y1
                        val[y] = min(val[y], m_y)
            step += 1

    density = 1.0
    for f in factors:
        density *= f.factor

    shift = np.zeros((n, 2))
    shift[:, 0] = t_map * direction
    new_int = config.interior_xy + shift[:config.n_interior]
    new_bnd = config.boundary_xy + shift[config.n_interior:]
    new_config = Configuration(config.window, new_int, config.interior_spin,
                               new_bnd, config.boundary_spin, validate=False)
    new_bonds = BondSet(bonds.edges, n, scope_n=bonds.scope_n)
    return TransformResult(
        partition=partition, t_map=t_map, transformed_config=new_config,
        transformed_bonds=new_bonds, density=density, factors=factors,
        direction=direction, params=params, tie_events=ties, donors=donors,
        n_steps=len(partition))


def forward_transform(config, bonds, params, dec):
    """Deformed translation along +e."""
    return _transform_engine(config, bonds, params, dec, +1)


def backward_transform(config, bonds, params, dec):
    """Deformed translation along -e (mirror construction, not the inverse
    of the forward map)."""
    return _transform_engine(config, bonds, params, dec, -1)


def density(result):
    """Jacobian density of a transform result (product of its factors)."""
    return result.density


# ---------------------------------------------------------------------------
# inverse construction


class _FieldEvaluator:
    """Evaluates the running translation-distance field t_k for the inverse
    recursion: the taper profile cut down by the distortions of all donors
    fixed so far."""

    def __init__(self, profile, dec):
        self.profile = profile
        self.dec = dec
        self.radii = dec.base.hard_core_radii
        self.two_eps = 2.0 * dec.eps
        self.clamp_min = INF
        self.local = []   # (pos, spin, t, h)

    def add_donor(self, pos, spin, t, h, clamp):
        if clamp:
            self.clamp_min = min(self.clamp_min, t)
        else:
            self.local.append((np.asarray(pos, dtype=float), int(spin),
                               float(t), float(h)))

    def value_and_branch(self, x, spin):
        """Minimum of all active branches at (x, spin) with the branch's
        derivative along e; ties resolved toward the smaller derivative."""
        best = float(self.profile.value(maxnorm(x)))
        bder = self.profile.e_deriv_at(x)
        ties = 0
        if self.clamp_min < best - TIE_TOL:
            best, bder = self.clamp_min, 0.0
        elif self.clamp_min <= best + TIE_TOL:
            if abs(bder) > 1e-15:
                ties += 1
                bder = 0.0
            best = min(best, self.clamp_min)
        for dpos, dspin, t, h in self.local:
            dist = float(self.dec.norm.dist(x - dpos))
            rc = self.radii[dspin, spin]
            if dist >= rc + self.two_eps:
                continue
            f = float(np.atleast_1d(self.dec.cutoff_radial(dspin, spin, dist))[0])
            if f >= 1.0:
                continue
            mval = t + h * f
            slope = float(np.atleast_1d(self.dec.cutoff_slope_radial(
                dspin, spin, dist))[0])
            nd = h * slope * float(self.dec.norm.e_deriv(x - dpos))
            if mval < best - TIE_TOL:
                best = mval
                bder = nd
            elif mval <= best + TIE_TOL:
                if abs(nd - bder) > 1e-15:
                    ties += 1
                    if abs(nd) < abs(bder):
                        bder = nd
                best = min(best, mval)
        return best, bder, ties

    def value(self, x, spin):
        return self.value_and_branch(x, spin)[0]

    def solve_back(self, x, spin, hi):
        """The unique c with t(x - c e) = c; the shifted map id + t e has
        slope within [1/2, 3/2], so c is bracketed by [0, hi] whenever
        t(x) >= 0 and t <= hi on the segment."""
        def g(c):
            return self.value(np.array([x[0] - c, x[1]]), spin) - c

        # the field is nonnegative and bounded by tau, so g(0) >= 0 and
        # g(hi) <= 0 up to rounding at the endpoints
        glo = g(0.0)
        if glo <= 0.0:
            return 0.0
        ghi = g(hi)
        if ghi >= 0.0:
            if ghi < 1e-12:
                return hi
            raise RuntimeError("inverse root not bracketed; slope bound broken")
        return brentq(g, 0.0, hi, xtol=1e-14, rtol=8.9e-16)


def inverse_transform(config, bonds, params, dec, direction=+1):
    """Inverse of the deformed translation: reconstructs the unique preimage
    of (config, bonds) under the forward (direction=+1) or backward
    (direction=-1) pass.

    The recursion mirrors the forward one, except that the argmin is taken of
    the field composed with the inverse of the shifted identity map, computed
    by monotone root finding along e.
    """
    if bonds.n_particles != config.n_total:
        raise ValueError("bond set does not index this configuration")
    work = _reflect_config(config) if direction < 0 else config
    pos = work.positions
    spins = work.spins
    n = config.n_total
    profile = TaperProfile(params.tau, params.R, params.n)
    ck, cf = params.resolve(dec)

    t_map = np.zeros(n)
    partition = []
    factors = []
    donors = []
    ties = 0

    if n > 0:
        if not np.all(np.isfinite(pos)):
            raise ValueError("non-finite particle position")
        has_bonds = len(bonds.edges) > 0
        part = clusters(config, bonds) if has_bonds else None
        fieldev = _FieldEvaluator(profile, dec)
        radii = dec.base.hard_core_radii
        cut_box = (dec.base.max_hard_core_radius + 2.0 * dec.eps) \
            * dec.norm.maxnorm_bound()

        remaining = np.ones(n, dtype=bool)
        val = np.empty(n)
        vder = np.empty(n)
        for i in range(n):
            val[i] = fieldev.solve_back(pos[i], spins[i], params.tau)
            vder[i] = 0.0
        step = 0

        while np.any(remaining):
            masked = np.where(remaining, val, INF)
            vmin = float(np.min(masked))
            p_idx = np.flatnonzero(masked <= vmin + TIE_TOL)
            if has_bonds:
                labels = np.unique(part.labels[p_idx])
                c_idx = np.concatenate([part.members[l] for l in labels])
            else:
                c_idx = p_idx
            partition.append((p_idx, c_idx, vmin))
            for y in p_idx:
                back = np.array([pos[y][0] - vmin, pos[y][1]])
                bval, bder, t3 = fieldev.value_and_branch(back, spins[y])
                ties += t3
                factors.append(DensityFactor(step, int(y), "active", -1,
                                             float(bder),
                                             float(abs(1.0 + bder))))
            t_map[c_idx] = vmin
            remaining[c_idx] = False

            new_donors = []
            any_clamp = False
            for y1 in c_idx:
                dpos = np.array([pos[y1][0] - vmin, pos[y1][1]])
                h = abs(float(profile.value(maxnorm(dpos) - ck)) - vmin)
                clamp = h * cf > 0.5
                any_clamp = any_clamp or clamp
                fieldev.add_donor(dpos, spins[y1], vmin, h, clamp)
                donors.append(Donor(step, dpos.copy(), int(spins[y1]), vmin,
                                    h, clamp))
                new_donors.append((dpos, clamp))
            if any_clamp:
                # a constant branch at vmin caps the field globally; the
                # capped root is min(old root, vmin), no re-solve needed
                rem = np.flatnonzero(remaining)
                val[rem] = np.minimum(val[rem], vmin)
            affected = set()
            for dpos, clamp in new_donors:
                if clamp:
                    continue
                rem = np.flatnonzero(remaining)
                if len(rem) == 0:
                    continue
                dx = pos[rem, 0] - dpos[0]
                dy = np.abs(pos[rem, 1] - dpos[1])
                # probe segment is [x - val, x]; inflate the box accordingly
                hit = (dy <= cut_box + 1e-9) & (dx >= -cut_box - 1e-9) \
                    & (dx - val[rem] <= cut_box + 1e-9)
                affected.update(rem[hit].tolist())
            for y in sorted(affected):
                val[y] = fieldev.solve_back(pos[y], spins[y], val[y])
            step += 1

    density_val = 1.0
    for f in factors:
        density_val *= f.factor

    shift = np.zeros((n, 2))
    shift[:, 0] = -t_map * direction
    new_int = config.interior_xy + shift[:config.n_interior]
    new_bnd = config.boundary_xy + shift[config.n_interior:]
    new_config = Configuration(config.window, new_int, config.interior_spin,
                               new_bnd, config.boundary_spin, validate=False)
    new_bonds = BondSet(bonds.edges, n, scope_n=bonds.scope_n)
    return TransformResult(
        partition=partition, t_map=t_map, transformed_config=new_config,
        transformed_bonds=new_bonds, density=density_val, factors=factors,
        direction=direction, params=params, tie_events=ties, donors=donors,
        n_steps=len(partition))


# ---------------------------------------------------------------------------
# good configurations


@dataclass
class GoodConfigReport:
    """Cluster range and the five functionals whose smallness certifies every
    estimate of the deformed translation on this configuration."""

    sigmas: tuple
    cluster_range: float
    range_ok: bool
    sigma_total: float
    is_good: bool


def good_config_report(config, bonds, params, dec):
    """Evaluate the good-configuration criterion for one (Y, B) pair."""
    ck, cf = params.resolve(dec)
    profile = TaperProfile(params.tau, params.R, params.n)
    pos = config.positions
    spins = config.spins
    n = config.n_total
    if n == 0:
        return GoodConfigReport((0.0,) * 5, -INF, True, 0.0, True)

    bplus = augment_bplus(config, bonds, dec)
    crange = cluster_range(config, bplus, params.nprime)
    part = clusters(config, bplus)

    a = maxnorm(pos)
    ta = np.asarray(profile.value(a), dtype=float)
    ta_shift = np.asarray(profile.value(a - ck), dtype=float)
    tau = params.tau

    def pair_gap(idx_i, idx_j):
        """tau-gap^2 with the ordering indicator 1{|y_i| <= |y_j|}."""
        gi = ta_shift[idx_i] - ta[idx_j]
        ind = a[idx_i] <= a[idx_j]
        return np.where(ind, gi * gi, 0.0)

    # close-pair counts (pairs inside the twice-enlarged core, self included)
    radii = dec.base.hard_core_radii + 2.0 * dec.eps
    close_count = np.ones(n)
    grid = CellGrid(pos, float(np.max(radii)) * dec.norm.maxnorm_bound() * 1.0000001)
    ii, jj = grid.candidate_pairs()
    if len(ii):
        d = dec.norm.dist(pos[jj] - pos[ii])
        close = d <= radii[spins[ii], spins[jj]]
        np.add.at(close_count, ii[close], 1.0)
        np.add.at(close_count, jj[close], 1.0)

    # psi neighbor sums (constant box, self included)
    psi = dec.psi
    psi_pairs = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    if psi.constant > 0:
        psi_count = np.ones(n)
        pgrid = CellGrid(pos, psi.radius * dec.norm.maxnorm_bound() * 1.0000001)
        pi, pj = pgrid.candidate_pairs()
        if len(pi):
            d = dec.norm.dist(pos[pj] - pos[pi])
            inside = d <= psi.radius
            pi, pj = pi[inside], pj[inside]
            np.add.at(psi_count, pi, 1.0)
            np.add.at(psi_count, pj, 1.0)
            psi_pairs = (pi, pj)
        psi_sum = psi.constant * psi_count
    else:
        psi_sum = np.zeros(n)

    sig1 = 0.0
    sig3 = 0.0
    sig5 = 0.0
    for members in part.members:
        m = members
        ts, tv, av = ta_shift[m], ta[m], a[m]
        if np.all(ts == tv):
            uni = np.unique(tv)
            if len(uni) == 1:
                continue  # flat cluster: every ordered pair gap vanishes
        gi = ts[:, None] - tv[None, :]
        ind = av[:, None] <= av[None, :]
        gaps = np.where(ind, gi * gi, 0.0)
        sig1 += float(np.sum(gaps))
        sig3 += float(np.sum(gaps * close_count[m][:, None]))
        if psi.constant > 0:
            sig5 += float(np.sum(gaps * psi_sum[m][:, None]))
    sig1 *= 4.0 * cf * cf
    sig3 *= 2.0 * cf * cf
    sig5 *= 6.0

    in_n = Window(params.n).contains(pos)
    qv = q_taper(a[in_n] - params.R)
    sig2 = float(2.0 * tau * tau * np.sum(qv * qv) / profile.Qnr ** 2)

    sig4 = 0.0
    if psi.constant > 0 and len(psi_pairs[0]):
        pi, pj = psi_pairs
        sig4 = float(np.sum(pair_gap(pi, pj)) + np.sum(pair_gap(pj, pi)))
        sig4 *= 3.0 * psi.constant

    sigmas = (sig1, sig2, sig3, sig4, sig5)
    total = float(sum(sigmas))
    range_ok = crange < params.R
    return GoodConfigReport(sigmas, crange, range_ok, total,
                            range_ok and total < params.delta)
