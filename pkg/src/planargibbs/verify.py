"""Executable verification suites: property checks for the deformed
translation, a Monte Carlo test of its change-of-variables identity, a
finite-space version of the symmetry criterion, and the statistical
translation-invariance test.

Every suite is deterministic under a fixed seed and reports one record per
check with the measured values, the tolerance, and the seed that reproduces
it.  Suites run their per-instance work through a thread pool when asked.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .bonds import sample_bonds
from .core import Configuration, Window, maxnorm, rng_stream
from .potentials import hamiltonian, hamiltonian_small
from .sampler import GibbsParams, run_chain, sample_poisson
from .transform import (TaperProfile, backward_transform, forward_transform,
                        good_config_report, inverse_transform)

PASS = "pass"
FAIL = "fail"
VACUOUS = "vacuous"


@dataclass
class CheckResult:
    name: str
    status: str
    value: float = None
    tolerance: float = None
    detail: str = ""
    seed: int = None

    @property
    def passed(self):
        return self.status != FAIL


@dataclass
class SuiteReport:
    suite: str
    seed: int
    checks: list = field(default_factory=list)

    def add(self, name, ok, value=None, tolerance=None, detail="",
            vacuous=False):
        status = VACUOUS if vacuous else (PASS if ok else FAIL)
        self.checks.append(CheckResult(name, status, value, tolerance, detail,
                                       self.seed))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_json(self):
        return {
            "schema": 1,
            "suite": self.suite,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "status": c.status, "value": c.value,
                 "tolerance": c.tolerance, "detail": c.detail, "seed": c.seed}
                for c in self.checks
            ],
        }

    def format_text(self):
        lines = [f"suite {self.suite}  (seed {self.seed})"]
        width = max((len(c.name) for c in self.checks), default=10)
        for c in self.checks:
            val = "" if c.value is None else f" value={c.value:.6g}"
            tol = "" if c.tolerance is None else f" tol={c.tolerance:g}"
            det = f"  {c.detail}" if c.detail else ""
            lines.append(f"  [{c.status.upper():7s}] {c.name:<{width}}{val}{tol}{det}")
        lines.append(f"  => {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _pmap(fn, items, threads=1):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# ---------------------------------------------------------------------------
# finite-space symmetry criterion


def check_symmetry_criterion_toy(measure, permutation, seed=0):
    """Exhaustively verify on a finite probability space that the two-sided
    inequality mu(tA) + mu(t^-1 A) >= 2 mu(A) over all events A holds exactly
    when mu is invariant under the transformation t."""
    mu = np.asarray(measure, dtype=float)
    n = len(mu)
    if n > 20:
        raise ValueError("state space too large for exhaustive enumeration")
    if abs(mu.sum() - 1.0) > 1e-9 or np.any(mu < 0):
        raise ValueError("measure must be a probability vector")
    perm = list(permutation)
    if sorted(perm) != list(range(n)):
        raise ValueError("transformation must be a permutation")
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i

    pushforward = np.array([mu[inv[i]] for i in range(n)])
    invariant = bool(np.allclose(pushforward, mu, atol=1e-12))

    criterion = True
    worst = 0.0
    for bits in itertools.product((0, 1), repeat=n):
        a = [i for i in range(n) if bits[i]]
        ta = sum(mu[perm[i]] for i in a)
        t_inv_a = sum(mu[inv[i]] for i in a)
        gap = ta + t_inv_a - 2.0 * sum(mu[i] for i in a)
        worst = min(worst, gap)
        if gap < -1e-12:
            criterion = False

    report = SuiteReport("symmetry-criterion", seed)
    report.add("criterion-iff-invariance", criterion == invariant,
               value=worst,
               detail=f"criterion={criterion} invariant={invariant}")
    return report, criterion, invariant


# ---------------------------------------------------------------------------
# transform property suite


def _pair_in_core(dec, pos, spins, i, j):
    d = float(dec.norm.dist(pos[j] - pos[i]))
    return d <= dec.base.hard_core_radii[spins[i], spins[j]] or d <= 0.0


def _instance_checks(dec, params, profile, instance):
    """Property counters for one (config, bonds) pair; see the suite."""
    config, bonds = instance
    fwd = forward_transform(config, bonds, params, dec)
    out = {"fwd": fwd, "rigid_pairs": 0, "rigid_bad": 0, "core_bad": 0,
           "mono_bad": 0, "order_bad": 0, "factor_bad": 0, "rt_err": 0.0}
    taus = [t for _, _, t in fwd.partition]
    if any(taus[i] > taus[i + 1] + 1e-15 for i in range(len(taus) - 1)):
        out["mono_bad"] = 1
    pos = config.positions
    spins = config.spins
    n = config.n_total
    tpos = fwd.transformed_config.positions
    radii = dec.base.hard_core_radii
    interp_s = (-1.0, -0.5, -0.25, 0.25, 0.5, 1.0)
    for i in range(n - 1):
        rest = np.arange(i + 1, n)
        dx0 = pos[rest] - pos[i]
        dij = dec.norm.dist(dx0)
        rc = radii[spins[i], spins[rest]]
        in_core = (dij <= rc) | (dij <= 0.0)
        out["rigid_pairs"] += int(np.sum(in_core))
        out["rigid_bad"] += int(np.sum(in_core &
                                       (fwd.t_map[rest] != fwd.t_map[i])))
        free = ~in_core
        if np.any(free):
            dt = dec.norm.dist(tpos[rest] - tpos[i])
            out["core_bad"] += int(np.sum(free & ((dt <= rc) | (dt <= 0.0))))
            gap = fwd.t_map[rest] - fwd.t_map[i]
            for s in interp_s[:-1]:  # s = 1 is the transformed pair above
                sh = dx0.copy()
                sh[:, 0] += s * gap
                ds = dec.norm.dist(sh)
                out["core_bad"] += int(np.sum(free & (gap != 0.0) &
                                              ((ds <= rc) | (ds <= 0.0))))
    if n:
        ub = profile.value(maxnorm(pos))
        if np.any(fwd.t_map < 0) or np.any(fwd.t_map > ub + 1e-15):
            out["order_bad"] = 1
    back = inverse_transform(fwd.transformed_config, fwd.transformed_bonds,
                             params, dec)
    err = float(np.max(np.abs(back.transformed_config.positions - pos))) \
        if n else 0.0
    inv = inverse_transform(config, bonds, params, dec)
    fwd2 = forward_transform(inv.transformed_config, inv.transformed_bonds,
                             params, dec)
    err2 = float(np.max(np.abs(fwd2.transformed_config.positions - pos))) \
        if n else 0.0
    out["rt_err"] = max(err, err2)
    out["factor_bad"] = sum(1 for f in fwd.factors
                            if not 0.5 - 1e-12 <= f.factor <= 1.5 + 1e-12)
    return out


def check_transform_suite(dec, params, instances, seed=0, threads=1,
                          fd_samples=25):
    """Run the construction properties on a list of (config, bonds) pairs:
    ordered translation distances, exact rigidity of core contacts, core
    preservation (with interpolated shifts), the ordering bound, bijectivity
    round trips, density-factor bounds, the half-Lipschitz field property,
    a finite-difference cross-check of the density factors, and the key
    density/energy estimates on good configurations."""
    report = SuiteReport("transform", seed)
    profile = TaperProfile(params.tau, params.R, params.n)
    region = Window(float(params.n))

    per = _pmap(lambda inst: _instance_checks(dec, params, profile, inst),
                instances, threads)
    results = [p["fwd"] for p in per]
    mono_bad = sum(p["mono_bad"] for p in per)
    rigid_bad = sum(p["rigid_bad"] for p in per)
    rigid_pairs = sum(p["rigid_pairs"] for p in per)
    core_bad = sum(p["core_bad"] for p in per)
    order_bad = sum(p["order_bad"] for p in per)
    factor_bad = sum(p["factor_bad"] for p in per)
    rt_err = max((p["rt_err"] for p in per), default=0.0)

    lip_bad = 0
    fd_bad = 0
    fd_checked = 0
    good_seen = 0
    est_density_bad = 0
    est_energy_bad = 0
    inner_outer_bad = 0

    # half-Lipschitz difference quotients and finite-difference derivative
    # cross-checks on a random subset
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(instances), size=min(fd_samples, len(instances)),
                      replace=False) if instances else []
    for idx in pick:
        config, _ = instances[idx]
        fwd = results[idx]
        if config.n_total == 0 or fwd.n_steps == 0:
            continue
        k = int(rng.integers(fwd.n_steps)) + 1
        x = rng.uniform(-params.n, params.n, size=2)
        sp = int(rng.integers(dec.nspins))
        base = fwd.translation_field(x, sp, k, dec)
        for h in (1e-3, 1e-2, 0.1):
            shifted = fwd.translation_field([x[0] + h, x[1]], sp, k, dec)
            if abs(shifted - base) > 0.5 * h + 1e-9:
                lip_bad += 1
        for f in fwd.factors[:4]:
            y = config.positions[f.particle]
            syp = int(config.spins[f.particle])
            h = 1e-6
            mid = fwd.translation_field(y, syp, f.step, dec)
            up = fwd.translation_field([y[0] + h, y[1]], syp, f.step, dec)
            dn = fwd.translation_field([y[0] - h, y[1]], syp, f.step, dec)
            fd_up = (up - mid) / h
            fd_dn = (mid - dn) / h
            if abs(fd_up - fd_dn) > 1e-3 * max(1.0, abs(f.deriv)):
                continue  # kink or branch switch inside the stencil
            fd = (up - dn) / (2 * h)
            fd_checked += 1
            if abs(fd - f.deriv) > 1e-4 * max(1.0, abs(f.deriv)):
                fd_bad += 1

    # inner/outer behavior and key estimates on good configurations
    for (config, bonds), fwd in zip(instances, results):
        rep = good_config_report(config, bonds, params, dec)
        if not rep.is_good:
            continue
        good_seen += 1
        pos = config.positions
        innerp = Window(float(params.nprime)).contains(pos)
        nn = Window(float(params.n))
        outer = ~nn.contains(pos)
        if np.any(fwd.t_map[innerp] != params.tau) \
                or np.any(fwd.t_map[outer] != 0.0):
            inner_outer_bad += 1
        if int(np.sum(nn.contains(pos))) != int(np.sum(
                nn.contains(fwd.transformed_config.positions))):
            inner_outer_bad += 1
        bwd = backward_transform(config, bonds, params, dec)
        if fwd.log_density() + bwd.log_density() < -params.delta:
            est_density_bad += 1
        hf = hamiltonian(dec, fwd.transformed_config, region, smooth=True)
        hb = hamiltonian(dec, bwd.transformed_config, region, smooth=True)
        h0 = hamiltonian(dec, config, region, smooth=True)
        if hf + hb > 2.0 * h0 + params.delta:
            est_energy_bad += 1

    n_inst = len(instances)
    report.add("ordered-translation-distances", mono_bad == 0, value=mono_bad,
               detail=f"{n_inst} instances")
    report.add("core-contacts-move-rigidly", rigid_bad == 0, value=rigid_bad,
               detail=f"{rigid_pairs} contact pairs",
               vacuous=rigid_pairs == 0)
    report.add("core-avoidance-preserved", core_bad == 0, value=core_bad)
    report.add("ordering-bound", order_bad == 0, value=order_bad)
    report.add("round-trip-error", rt_err < 1e-9, value=rt_err, tolerance=1e-9)
    report.add("density-factor-range", factor_bad == 0, value=factor_bad)
    report.add("half-lipschitz-field", lip_bad == 0, value=lip_bad)
    report.add("derivative-cross-check", fd_bad == 0, value=fd_bad,
               detail=f"{fd_checked} factors", vacuous=fd_checked == 0)
    report.add("good-config-density-estimate", est_density_bad == 0,
               value=est_density_bad, detail=f"{good_seen} good configs",
               vacuous=good_seen == 0)
    report.add("good-config-energy-estimate", est_energy_bad == 0,
               value=est_energy_bad, vacuous=good_seen == 0)
    report.add("good-config-inner-outer", inner_outer_bad == 0,
               value=inner_outer_bad, vacuous=good_seen == 0)
    return report


# ---------------------------------------------------------------------------
# density identity


def default_density_statistics(window_r):
    """Three canonical statistics: the constant one (normalization), a count
    in a box riding the taper ramp, and a threshold count event."""
    lo, hi = 0.25 * window_r, 0.92 * window_r
    half = 0.67 * window_r

    def f_one(config, bonds):
        return 1.0

    def f_ramp_count(config, bonds):
        pos = config.positions
        if len(pos) == 0:
            return 0.0
        inside = (pos[:, 0] >= lo) & (pos[:, 0] < hi) & \
            (np.abs(pos[:, 1]) < half)
        return float(np.sum(inside))

    def f_pair_event(config, bonds):
        inner = Window(window_r / 3.0).contains(config.positions) \
            if config.n_total else np.zeros(0, dtype=bool)
        return 1.0 if int(np.sum(inner)) >= 2 else 0.0

    return [("normalization", f_one), ("ramp-count", f_ramp_count),
            ("pair-event", f_pair_event)]


def check_density_identity(dec, params, window, boundary_xy=None,
                           boundary_spin=None, n_samples=10_000, seed=0,
                           rng=None, statistics=None, control=False,
                           also_control=False):
    """Monte Carlo test of the change-of-variables identity: under the
    Poisson-times-Bernoulli-bond law, the mean of density * f(transformed)
    equals the mean of f, once the bond weights are carried across the map
    (a factor exp(-dH_u); identically one for models whose small part
    vanishes).

    With control=True the computed density is replaced by one, which must
    break the identity for position-sensitive statistics.  also_control=True
    evaluates both weightings on the same draws and returns a pair of
    reports (identity, control)."""
    if rng is None:
        rng = np.random.default_rng(seed)
    if statistics is None:
        statistics = default_density_statistics(window.r)
    scope = Window(float(params.n))
    bxy = np.empty((0, 2)) if boundary_xy is None else boundary_xy
    bsp = np.empty(0, dtype=np.int64) if boundary_spin is None else boundary_spin
    has_small = dec.max_u_support > 0

    variants = (control,) if not also_control else (False, True)
    nstat = len(statistics)
    sums = np.zeros((len(variants), nstat, 2))
    sqs = np.zeros((len(variants), nstat, 2))
    cross = np.zeros((len(variants), nstat))
    for _ in range(n_samples):
        base = sample_poisson(window, 1.0, dec.nspins, rng)
        cfg = Configuration(window, base.interior_xy, base.interior_spin,
                            bxy, bsp, validate=False)
        bonds = sample_bonds(cfg, dec, params.n, rng)
        fwd = forward_transform(cfg, bonds, params, dec)
        bond_shift = 1.0
        if has_small:
            du = hamiltonian_small(dec, fwd.transformed_config, scope) - \
                hamiltonian_small(dec, cfg, scope)
            bond_shift = math.exp(-du)
        fvals_t = [f(fwd.transformed_config, fwd.transformed_bonds)
                   for _, f in statistics]
        fvals_0 = [f(cfg, bonds) for _, f in statistics]
        for v, is_control in enumerate(variants):
            w = (1.0 if is_control else fwd.density) * bond_shift
            for k in range(nstat):
                lhs = w * fvals_t[k]
                rhs = fvals_0[k]
                sums[v, k] += (lhs, rhs)
                sqs[v, k] += (lhs * lhs, rhs * rhs)
                cross[v, k] += lhs * rhs

    reports = []
    for v, is_control in enumerate(variants):
        report = SuiteReport("density" + ("-control" if is_control else ""),
                             seed)
        for k, (name, _) in enumerate(statistics):
            mean_d = (sums[v, k, 0] - sums[v, k, 1]) / n_samples
            var_d = (sqs[v, k, 0] + sqs[v, k, 1] - 2 * cross[v, k]) \
                / n_samples - mean_d * mean_d
            se = math.sqrt(max(var_d, 1e-300) / n_samples)
            z = mean_d / se if se > 0 else 0.0
            detail = "density replaced by one (broken on purpose)" \
                if is_control else ""
            report.add(f"z-{name}", abs(z) < 3.0, value=z, tolerance=3.0,
                       detail=detail)
        reports.append(report)
    if also_control:
        return reports[0], reports[1]
    return reports[0]


# ---------------------------------------------------------------------------
# statistical translation invariance


def _merged_chi2(counts_a, counts_b):
    """Two-sample chi-square on count histograms with tail merging."""
    top = max(counts_a.max(initial=0), counts_b.max(initial=0)) + 1
    ha = np.bincount(counts_a, minlength=top + 1).astype(float)
    hb = np.bincount(counts_b, minlength=top + 1).astype(float)
    # merge sparse bins from the right so expected counts stay reasonable
    while len(ha) > 2 and (ha[-1] + hb[-1]) < 10:
        ha[-2] += ha[-1]
        hb[-2] += hb[-1]
        ha, hb = ha[:-1], hb[:-1]
    keep = (ha + hb) > 0
    table = np.vstack([ha[keep], hb[keep]])
    if table.shape[1] < 2:
        return 1.0
    res = sstats.chi2_contingency(table)
    return float(res.pvalue)


def window_statistics(samples, box_lo, box_hi, nspins):
    """Counts, per-spin counts, and mean pairwise distance inside the box
    [box_lo, box_hi) x [box_lo2, box_hi2) for every sample."""
    counts = []
    spin_totals = np.zeros(nspins)
    mean_dists = []
    for cfg in samples:
        pos = cfg.interior_xy
        if len(pos) == 0:
            counts.append(0)
            continue
        inside = (pos[:, 0] >= box_lo[0]) & (pos[:, 0] < box_hi[0]) & \
                 (pos[:, 1] >= box_lo[1]) & (pos[:, 1] < box_hi[1])
        idx = np.flatnonzero(inside)
        counts.append(len(idx))
        for s in cfg.interior_spin[idx]:
            spin_totals[s] += 1
        if len(idx) >= 2:
            p = pos[idx]
            diffs = p[:, None, :] - p[None, :, :]
            d = np.sqrt((diffs ** 2).sum(-1))
            iu = np.triu_indices(len(idx), 1)
            mean_dists.append(float(np.mean(d[iu])))
    return np.array(counts, dtype=np.int64), spin_totals, np.array(mean_dists)


def check_invariance_statistical(params, tau_shift, window_a, n_samples,
                                 seed=0, thinning=None, burn_in=None,
                                 samples=None):
    """Compare statistics of a window A with those of A shifted by tau along
    e, over thinned samples of one chain: a count-histogram chi-square, a
    Kolmogorov-Smirnov test on per-sample mean pair distances, and a
    chi-square on per-spin totals, Bonferroni-corrected.

    Pass precomputed chain samples to skip the chain run."""
    base = params.pot.base if hasattr(params.pot, "base") else params.pot
    reach = base.interaction_range
    a_lo = np.asarray(window_a[0], dtype=float)
    a_hi = np.asarray(window_a[1], dtype=float)
    for corner in (a_lo, a_hi, a_lo + (tau_shift, 0), a_hi + (tau_shift, 0)):
        if np.any(np.abs(corner) > params.window.r - reach):
            raise ValueError("boundary effect risk: window too close to the edge")
    if samples is None:
        thinning = thinning or params.thinning
        burn_in = burn_in if burn_in is not None else params.burn_in
        run = GibbsParams(z=params.z, pot=params.pot, window=params.window,
                          boundary_xy=params.boundary_xy,
                          boundary_spin=params.boundary_spin,
                          move_mix=params.move_mix,
                          sweeps=n_samples * thinning, burn_in=burn_in,
                          thinning=thinning, sigma_move=params.sigma_move,
                          proposal_bias=params.proposal_bias)
        rng = rng_stream(seed, "invariance-chain")
        samples = run_chain(run, rng)

    nspins = base.nspins
    ca, sa, da = window_statistics(samples, a_lo, a_hi, nspins)
    cb, sb, db = window_statistics(samples, a_lo + (tau_shift, 0),
                                   a_hi + (tau_shift, 0), nspins)

    p_count = _merged_chi2(ca, cb)
    if len(da) >= 5 and len(db) >= 5:
        p_dist = float(sstats.ks_2samp(da, db).pvalue)
        dist_vacuous = False
    else:
        p_dist, dist_vacuous = 1.0, True
    table = np.vstack([sa, sb]) + 0.5  # continuity guard for empty spins
    p_spin = float(sstats.chi2_contingency(table).pvalue) \
        if table.sum() > 2 and nspins > 1 else 1.0

    report = SuiteReport("invariance", seed)
    for name, p, vac in (("count-histogram", p_count, False),
                         ("mean-pair-distance", p_dist, dist_vacuous),
                         ("spin-totals", p_spin, nspins < 2)):
        p_adj = min(1.0, 3.0 * p)
        report.add(f"p-{name}", p_adj > 0.01, value=p_adj, tolerance=0.01,
                   vacuous=vac)
    return report, samples
