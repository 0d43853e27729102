"""Acceptance suite: one test per criterion, each printing its verdict.

Shared chains are module-scoped fixtures so expensive sampling happens once.
Every check here is deterministic under the seeds below.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats as sstats
from scipy.integrate import quad

import planargibbs as pg
from planargibbs.potentials import hamiltonian
from planargibbs.transform import SSTAR
from planargibbs.verify import (check_density_identity,
                                check_invariance_statistical,
                                check_transform_suite)

TAPER = pg.TaperParams(tau=0.5, R=4, n=16, nprime=1, delta=0.25)


def _announce(num, ok, detail):
    print(f"CRITERION {num:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def poisson_gof_pvalue(counts, mean):
    """Chi-square goodness of fit against a Poisson law with known mean,
    bins merged so every expected count is at least five."""
    top = int(np.max(counts)) + 1
    hist = np.bincount(counts, minlength=top + 1).astype(float)
    probs = sstats.poisson.pmf(np.arange(len(hist)), mean)
    probs[-1] += max(1.0 - probs.sum(), 0.0)
    exp = probs * len(counts)
    obs_m, exp_m = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(hist, exp):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            obs_m.append(acc_o)
            exp_m.append(acc_e)
            acc_o = acc_e = 0.0
    obs_m[-1] += acc_o
    exp_m[-1] += acc_e
    obs_m = np.array(obs_m)
    exp_m = np.array(exp_m) * (obs_m.sum() / sum(exp_m))
    chi2 = float(np.sum((obs_m - exp_m) ** 2 / exp_m))
    return float(sstats.chi2.sf(chi2, len(obs_m) - 1))


@pytest.fixture(scope="module")
def wr(wr_model, wr_dec):
    return wr_model, wr_dec


@pytest.fixture(scope="module")
def lambda8_samples(wr):
    model, _ = wr
    params = pg.GibbsParams(z=model.z, pot=model.pot, window=pg.Window(8.0),
                            sweeps=2000 * 600, burn_in=30_000, thinning=600)
    return pg.run_chain(params, pg.rng_stream(101, "acceptance-lambda8"))


@pytest.fixture(scope="module")
def lambda2_samples(wr):
    model, _ = wr
    params = pg.GibbsParams(z=model.z, pot=model.pot, window=pg.Window(2.0),
                            sweeps=500 * 500, burn_in=10_000, thinning=500)
    return pg.run_chain(params, pg.rng_stream(102, "acceptance-lambda2"))


@pytest.fixture(scope="module")
def chain_ensemble(wr, lambda8_samples, lambda2_samples):
    """10^3 (Y, B) pairs drawn from the model's chains at two windows: the
    large window populates the taper ramp, the small one the good set."""
    _, dec = wr
    rng = pg.rng_stream(103, "acceptance-bonds")
    instances = []
    for cfg in lambda8_samples[::4][:500]:
        instances.append((cfg, pg.sample_bonds(cfg, dec, TAPER.n, rng)))
    for cfg in lambda2_samples[:500]:
        instances.append((cfg, pg.sample_bonds(cfg, dec, TAPER.n, rng)))
    assert len(instances) == 1000
    assert max(c.n_total for c, _ in instances) <= 100
    return instances


@pytest.fixture(scope="module")
def transform_report(wr, chain_ensemble):
    _, dec = wr
    t0 = time.time()
    rep = check_transform_suite(dec, TAPER, chain_ensemble, seed=104)
    rep.runtime = time.time() - t0
    return rep


def test_criterion_1_zero_potential_sanity(zero_model):
    t0 = time.time()
    params = pg.GibbsParams(z=1.0, pot=zero_model.pot, window=pg.Window(2.0),
                            sweeps=10_000 * 150, burn_in=3_000, thinning=150)
    counts = np.array(pg.run_chain(params, pg.rng_stream(105, "acceptance-free"),
                                   collect=lambda c: c.n_interior))
    runtime = time.time() - t0
    assert len(counts) == 10_000
    p = poisson_gof_pvalue(counts, 16.0)
    _announce(1, p > 0.01 and runtime < 60.0,
              f"count distribution vs Poisson(16): p={p:.4f}, "
              f"runtime {runtime:.1f}s < 60s")


def test_criterion_2_hard_core_exclusion(wr, lambda8_samples, lambda2_samples):
    model, _ = wr
    radius = 1.0
    violations = 0
    n_pairs = 0
    for cfg in lambda8_samples + lambda2_samples:
        pos, sp = cfg.interior_xy, cfg.interior_spin
        for i in range(len(pos) - 1):
            d = model.pot.norm.dist(pos[i + 1:] - pos[i])
            unlike = sp[i + 1:] != sp[i]
            n_pairs += int(np.sum(unlike))
            violations += int(np.sum(unlike & (d <= radius)))
    _announce(2, violations == 0,
              f"{violations} unlike pairs within the exclusion radius over "
              f"{len(lambda8_samples) + len(lambda2_samples)} samples "
              f"({n_pairs} unlike pairs inspected); exact zero required")


def test_criterion_3_construction_lemmas(transform_report):
    rep = transform_report
    by = {c.name: c for c in rep.checks}
    wanted = ("ordered-translation-distances", "core-contacts-move-rigidly",
              "core-avoidance-preserved", "ordering-bound")
    ok = all(by[name].passed for name in wanted)
    ok = ok and rep.runtime < 300.0
    _announce(3, ok,
              "ordering/rigidity/core-preservation/distance bounds on 1000 "
              f"chain draws, 100% satisfaction; runtime {rep.runtime:.1f}s < 300s")


def test_criterion_4_bijectivity(transform_report):
    by = {c.name: c for c in transform_report.checks}
    err = by["round-trip-error"].value
    _announce(4, err < 1e-9,
              f"max round-trip position error {err:.3g} < 1e-9 over 1000 "
              "instances, both compositions")


def test_criterion_5_density_identity():
    model = pg.widom_rowlinson(eps=1.0, z=0.02)
    dec = model.decompose()
    params = pg.TaperParams(tau=0.5, R=1, n=3, nprime=1, delta=0.25)
    t0 = time.time()
    rep, control = check_density_identity(
        dec, params, pg.Window(3.0), n_samples=100_000, seed=106,
        also_control=True)
    runtime = time.time() - t0
    zs = {c.name: abs(c.value) for c in rep.checks}
    zc = {c.name: abs(c.value) for c in control.checks}
    ok = all(z < 3.0 for z in zs.values())
    ok = ok and zc["z-ramp-count"] > 3.0
    ok = ok and runtime < 600.0
    _announce(5, ok,
              "change-of-variables identity at 1e5 samples: "
              + ", ".join(f"|z|={v:.2f}" for v in zs.values())
              + f"; control |z|={zc['z-ramp-count']:.1f} > 3; "
              f"runtime {runtime:.0f}s < 600s")


def test_criterion_6_key_estimates(transform_report):
    by = {c.name: c for c in transform_report.checks}
    dens = by["good-config-density-estimate"]
    ener = by["good-config-energy-estimate"]
    n_good = int(dens.detail.split()[0])
    ok = dens.passed and ener.passed and dens.status != "vacuous" \
        and n_good > 0
    _announce(6, ok,
              f"log-density sum >= -0.25 and smooth-energy inequality on all "
              f"{n_good} good configurations, zero violations")


def test_criterion_7_good_set_trend(wr, lambda2_samples):
    _, dec = wr
    rng = pg.rng_stream(107, "acceptance-trend")
    fracs = []
    for (R, n) in ((4, 16), (6, 32), (8, 64)):
        tp = pg.TaperParams(tau=0.5, R=R, n=n, nprime=1, delta=0.25)
        bad = 0
        for cfg in lambda2_samples:
            bonds = pg.sample_bonds(cfg, dec, n, rng)
            if not pg.good_config_report(cfg, bonds, tp, dec).is_good:
                bad += 1
        fracs.append(bad / len(lambda2_samples))
    monotone = all(fracs[i] >= fracs[i + 1] for i in range(len(fracs) - 1))
    _announce(7, monotone and fracs[-1] < 0.25,
              "non-good fraction over 500 draws at (R,n)=(4,16),(6,32),(8,64): "
              + ", ".join(f"{f:.3f}" for f in fracs)
              + "; non-increasing with last < 0.25")


def test_criterion_8_invariance_and_control(wr, lambda8_samples):
    model, _ = wr
    params = pg.GibbsParams(z=model.z, pot=model.pot, window=pg.Window(8.0))
    rep, _ = check_invariance_statistical(
        params, tau_shift=0.5, window_a=((-1.0, -1.0), (1.0, 1.0)),
        n_samples=len(lambda8_samples), seed=108, samples=lambda8_samples)
    biased = pg.GibbsParams(z=model.z, pot=model.pot, window=pg.Window(8.0),
                            proposal_bias=1.0, burn_in=30_000, thinning=600)
    rep_bad, _ = check_invariance_statistical(
        biased, tau_shift=0.5, window_a=((-1.0, -1.0), (1.0, 1.0)),
        n_samples=2000, seed=109)
    ps = {c.name: c.value for c in rep.checks}
    ok = rep.passed and not rep_bad.passed
    _announce(8, ok,
              "window statistics invariant under the 0.5-shift at 2000 "
              "samples (" + ", ".join(f"{k[2:]}: p={v:.3f}"
                                      for k, v in ps.items())
              + "); biased-proposal control fails as required")


def test_criterion_9_taper_antiderivative_closed_form():
    worst = 0.0
    for k in (0.5, 1.0, SSTAR, 2.0, 10.0, 100.0):
        pts = [SSTAR] if k > SSTAR else None
        ref, _ = quad(lambda s: float(pg.q_taper(s)), 0.0, k, limit=300,
                      points=pts)
        worst = max(worst, abs(float(pg.Q_taper(k)) - ref))
    _announce(9, worst < 1e-8,
              f"closed form vs adaptive quadrature: max deviation {worst:.2e} "
              "< 1e-8 on k in {0.5, 1, s*, 2, 10, 100}")


def test_criterion_10_decomposition_correctness(wr_dec, step_dec):
    rng = pg.rng_stream(110, "acceptance-dec")
    wide = pg.widom_rowlinson(eps=1.0, z=0.02).decompose()
    worst_identity = 0.0
    ok = True
    for dec in (wr_dec, step_dec, wide):
        pot = dec.base
        for _ in range(10):
            s1 = rng.integers(0, pot.nspins, size=1000)
            s2 = rng.integers(0, pot.nspins, size=1000)
            rcore = pot.hard_core_radii[s1, s2]
            d = rcore + rng.uniform(1e-9, 4.0, size=1000)
            ubar = dec.smooth_radial(s1, s2, d)
            u = dec.small_radial(s1, s2, d)
            base = pot.energy_radial(s1, s2, d)
            worst_identity = max(worst_identity,
                                 float(np.max(np.abs(ubar - u - base))))
            ut = dec.bond_probability_radial(s1, s2, d)
            ok = ok and bool(np.all(u >= 0.0))
            ok = ok and bool(np.all(ut <= np.minimum(u, 1.0) + 1e-15))
        ok = ok and dec.c_xi < 1.0 / (dec.z * dec.xi)
    ok = ok and worst_identity <= 1e-9
    _announce(10, ok,
              f"smooth-minus-small identity to {worst_identity:.2e} <= 1e-9 "
              "on 1e4 off-core pairs per model; small part nonnegative; "
              "bond probability <= min(u, 1); admissibility margin holds "
              "for all three shipped models")


def test_extra_rigidity_on_hand_built_contacts(wr_dec):
    # non-chain ensemble keeping the exact-rigidity check non-vacuous
    rng = pg.rng_stream(111, "acceptance-adversarial")
    instances = []
    for _ in range(50):
        n = int(rng.integers(2, 40))
        xy = rng.uniform(-15, 15, size=(n, 2))
        sp = rng.integers(0, 2, size=n)
        for k in range(min(4, n // 2)):
            xy[n - 1 - k] = xy[k] + rng.uniform(-0.7, 0.7, size=2)
        cfg = pg.Configuration(pg.Window(16.0), xy, sp, validate=False)
        edges = [(int(a), int(b))
                 for a, b in rng.integers(0, n, size=(3, 2)) if a != b]
        instances.append((cfg, pg.BondSet(edges, n)))
    cfg = pg.Configuration(pg.Window(16.0), [[6.0, 0.0], [6.9, 0.2]], [0, 1])
    instances.append((cfg, pg.BondSet([], 2)))
    rep = check_transform_suite(wr_dec, TAPER, instances, seed=111)
    by = {c.name: c for c in rep.checks}
    assert rep.passed, rep.format_text()
    assert by["core-contacts-move-rigidly"].status == "pass"
