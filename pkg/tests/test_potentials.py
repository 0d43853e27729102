import math

import numpy as np
import pytest

import planargibbs as pg
from planargibbs.potentials import (ContinuousRadialPart, hamiltonian,
                                    pairs_in_scope)

INF = math.inf


def wr_unlike():
    return pg.WellBehavedFn.hard_core(1.0)


def step_fn(jump_at=2.0, value=1.0, point_value=None):
    return pg.WellBehavedFn([0.0, jump_at], [[value]],
                            [value if point_value is None else point_value,
                             value])


def test_eval_well_behaved_examples():
    fn = wr_unlike()
    assert fn(0.5) == INF
    assert fn(1.5) == 0.0
    st = step_fn()
    assert st(1.0) == 1.0  # midway on the plateau


def test_decompose_no_jumps_is_identity():
    fn = wr_unlike()
    cont, small = pg.decompose_well_behaved(fn, 0.1)
    rr = np.linspace(1.0001, 3.0, 100)
    assert np.allclose(np.asarray(cont(rr)), fn(rr))
    assert np.all(np.asarray(small(rr)) == 0.0)


def test_decompose_step_peak_values():
    # jump 1 -> 0 at radius 2: tent peak is (max limit) + 1 = 2
    fn = step_fn(jump_at=2.0, value=1.0)
    cont, small = pg.decompose_well_behaved(fn, 0.1)
    assert float(np.asarray(cont(2.0))) == 2.0
    assert float(np.asarray(small(2.0))) == 1.0
    # just outside the tent support the small part vanishes
    assert float(np.asarray(small(2.0 + 0.100001))) == 0.0
    assert float(np.asarray(small(2.0 - 0.100001))) == 0.0
    dense = np.linspace(0.01, 4.0, 2000)
    sm = np.asarray(small(dense))
    outside = np.abs(dense - 2.0) > 0.1
    assert np.max(sm[outside]) == 0.0
    assert np.all(sm >= 0.0)


def test_decompose_bad_eps():
    with pytest.raises(ValueError, match="eps"):
        pg.decompose_well_behaved(step_fn(), 0.0)


def test_pair_potential_examples(wr_model):
    pot = wr_model.pot
    a = pg.Particle((0.0, 0.0), 0)
    b = pg.Particle((0.5, 0.0), 1)
    assert pg.eval_pair_potential(pot, a, b) == INF
    like_far = pg.Particle((0.3, 0.0), 0)
    assert pg.eval_pair_potential(pot, a, like_far) == 0.0
    twin = pg.Particle((0.0, 0.0), 0)
    assert pg.eval_pair_potential(pot, a, twin) == INF  # diagonal in the core


def test_pair_region_examples(wr_model):
    pot = wr_model.pot  # radius 1, eps 0.05
    a = pg.Particle((0.0, 0.0), 0)
    assert pg.pair_region(pot, a, pg.Particle((1.0, 0.0), 1)) == "hard_core"
    assert pg.pair_region(pot, a, pg.Particle((1.075, 0.0), 1)) == "ring2"
    assert pg.pair_region(pot, a, pg.Particle((1.15, 0.0), 1)) == "outside"
    assert pg.pair_region(pot, a, pg.Particle((1.03, 0.0), 1)) == "ring1"


def test_cutoff_examples(wr_dec):
    a = pg.Particle((0.0, 0.0), 0)
    assert wr_dec.cutoff(a, pg.Particle((0.7, 0.0), 1)) == 0.0
    assert wr_dec.cutoff(a, pg.Particle((2.0, 0.0), 1)) == 1.0
    # midpoint of the transition: s = 1/2 gives 3/4 - 1/4 = 1/2
    mid = pg.Particle((1.05, 0.0), 1)
    assert wr_dec.cutoff(a, mid) == pytest.approx(0.5, abs=1e-12)
    # derivative bounded by the advertised slope constant
    rng = pg.rng_stream(8, "cutoff")
    worst = 0.0
    for _ in range(500):
        x = rng.uniform(-2, 2, size=2)
        y = pg.Particle((x[0], x[1]), int(rng.integers(2)))
        worst = max(worst, abs(wr_dec.cutoff_e_deriv(a, y)))
    assert worst <= wr_dec.c_cutoff_slope + 1e-12


def test_cutoff_monotone_radially(wr_dec):
    d = np.linspace(0.0, 2.0, 400)
    f = wr_dec.cutoff_radial(0, 1, d)
    assert np.all(np.diff(f) >= -1e-15)
    assert np.all((f >= 0.0) & (f <= 1.0))


def test_build_decomposition_pure_hard_core(wr_dec):
    rr = np.linspace(0.0, 3.0, 500)
    assert np.all(wr_dec.smooth_radial(0, 1, rr) == 0.0)
    assert np.all(wr_dec.small_radial(0, 1, rr) == 0.0)
    assert np.all(wr_dec.bond_probability_radial(0, 1, rr) == 0.0)


def test_build_decomposition_step_support(step_dec):
    # eps = 0.1, mollifier width 0.02: u lives within 0.12 of the jump radius
    rr = np.linspace(0.51, 3.0, 1500)
    u = step_dec.small_radial(0, 1, rr)
    outside = np.abs(rr - 1.5) > 0.12001
    assert np.max(u[outside]) == 0.0
    inside = np.abs(rr - 1.5) < 0.1
    assert np.max(u[inside]) > 0.5


def test_cxi_example_and_admissibility(wr_dec):
    # enlarged-core ring for the excluding pair, euclidean norm
    annulus = math.pi * (1.1 ** 2 - 1.0 ** 2)
    assert annulus == pytest.approx(0.6597344572538572, rel=1e-12)
    # spin-averaged constant: mean of the like (radius 0) and unlike rings
    expected = 0.5 * (math.pi * 0.1 ** 2 + annulus)
    assert wr_dec.c_xi == pytest.approx(expected, rel=1e-6)
    assert wr_dec.c_xi < 1.0 / (wr_dec.z * wr_dec.xi)


def test_activity_too_large_rejected(wr_model):
    with pytest.raises(ValueError, match="activity too large"):
        pg.build_decomposition(wr_model.pot, z=5.0, xi=1.0)


def test_decomposition_identity_and_bounds(step_dec):
    rng = pg.rng_stream(11, "identity")
    pot = step_dec.base
    worst = 0.0
    for _ in range(10_000 // 500):
        s1 = rng.integers(0, 2, size=500)
        s2 = rng.integers(0, 2, size=500)
        rcore = pot.hard_core_radii[s1, s2]
        d = rcore + rng.uniform(1e-6, 3.0, size=500)
        ubar = step_dec.smooth_radial(s1, s2, d)
        u = step_dec.small_radial(s1, s2, d)
        base = pot.energy_radial(s1, s2, d)
        worst = max(worst, float(np.max(np.abs(ubar - u - base))))
        assert np.all(u >= 0.0)
        ut = step_dec.bond_probability_radial(s1, s2, d)
        assert np.all(ut <= np.minimum(u, 1.0) + 1e-15)
        assert np.all(ut >= 0.0)
    assert worst <= 1e-9


def test_continuity_of_continuous_part(step_model):
    cont = ContinuousRadialPart(step_model.pot.table[0][1], step_model.pot.eps)
    # shrinking-increment modulus on a dense grid right of the core
    for h, bound in ((1e-3, 0.05), (1e-5, 5e-4)):
        rr = np.linspace(0.52, 3.0, 4000)
        gap = np.max(np.abs(np.asarray(cont(rr + h)) - np.asarray(cont(rr))))
        assert gap <= bound  # tent slope m/eps = 20 dominates


def test_psi_domination(step_dec):
    rng = pg.rng_stream(13, "psi")
    psi = step_dec.psi
    part = step_dec.smooth[0][1]
    worst_violation = -INF
    for _ in range(40):
        d = rng.uniform(0.5, psi.radius, size=250)
        ang = rng.uniform(0, 2 * math.pi, size=250)
        dx = np.stack([d * np.cos(ang), d * np.sin(ang)], axis=1)
        dd = step_dec.norm.dist(dx)
        g1 = part.deriv1(dd)
        g2 = part.deriv2(dd)
        # euclidean norm: d2/dt2 = g2 * (dx/d)^2 + g1 * dy^2 / d^3
        second = g2 * (dx[:, 0] / dd) ** 2 + g1 * dx[:, 1] ** 2 / dd ** 3
        bound = psi.radial(dd)
        worst_violation = max(worst_violation, float(np.max(second - bound)))
    assert worst_violation <= 0.0


def test_smooth_derivatives_match_finite_differences(step_dec):
    part = step_dec.smooth[0][1]
    rng = pg.rng_stream(14, "fd")
    for _ in range(40):
        r = float(rng.uniform(0.55, 1.8))
        h = 1e-5
        fd1 = (part(r + h) - part(r - h)) / (2 * h)
        fd2 = (part(r + h) - 2 * part(r) + part(r - h)) / h ** 2
        assert fd1 == pytest.approx(part.deriv1(r), rel=1e-4, abs=1e-6)
        assert fd2 == pytest.approx(part.deriv2(r), rel=1e-3, abs=2e-2)


def test_hamiltonian_examples(wr_model):
    pot = wr_model.pot
    w = pg.Window(4.0)
    empty = pg.Configuration(w, np.empty((0, 2)), [])
    assert hamiltonian(pot, empty) == 0.0
    like = pg.Configuration(w, [[0.0, 0.0], [0.4, 0.0]], [0, 0])
    assert hamiltonian(pot, like) == 0.0
    unlike = pg.Configuration(w, [[0.0, 0.0], [0.5, 0.0]], [0, 1])
    assert hamiltonian(pot, unlike) == INF


def test_hamiltonian_matches_bruteforce(step_model):
    pot = step_model.pot
    rng = pg.rng_stream(21, "ham")
    w = pg.Window(5.0)
    for _ in range(25):
        n = int(rng.integers(2, 40))
        xy = rng.uniform(-4.9, 4.9, size=(n, 2))
        sp = rng.integers(0, 2, size=n)
        bxy = rng.uniform(5.0, 6.0, size=(5, 2))
        bsp = rng.integers(0, 2, size=5)
        cfg = pg.Configuration(w, xy, sp, bxy, bsp)
        # brute force over all pairs with one member inside the region
        region = pg.Window(3.0)
        pos = cfg.positions
        spins = cfg.spins
        inside = region.contains(pos)
        href = 0.0
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if inside[i] or inside[j]:
                    d = pot.norm.dist(pos[j] - pos[i])
                    href += float(pot.energy_radial(spins[i], spins[j], d)[0])
        assert hamiltonian(pot, cfg, region) == href


def test_pairs_in_scope_requires_member_inside(step_model):
    pot = step_model.pot
    w = pg.Window(6.0)
    cfg = pg.Configuration(w, [[5.0, 5.0], [5.5, 5.0], [0.0, 0.0], [0.7, 0.0]],
                           [0, 1, 0, 1])
    ii, jj, _ = pairs_in_scope(cfg, pg.Window(2.0), 2.0, pot.norm)
    pairs = set(zip(ii.tolist(), jj.tolist()))
    assert (2, 3) in pairs
    assert (0, 1) not in pairs


def test_loader_validation():
    obj = pg.widom_rowlinson().to_json()
    obj["entries"].append({"spins": [0, 1], "breakpoints": [2.0],
                           "pieces": [], "point_values": ["inf"]})
    with pytest.raises(ValueError, match="conflicting"):
        pg.ModelSpec.from_json(obj)

    bad = pg.widom_rowlinson().to_json()
    bad["entries"][1]["point_values"] = [0.5]  # finite value on a closed core
    with pytest.raises(ValueError, match="hard-core radius"):
        pg.ModelSpec.from_json(bad)

    neg = pg.step_potts().to_json()
    for entry in neg["entries"]:
        if entry["spins"] == [0, 1]:
            entry["pieces"] = [[-1.0]]
    with pytest.raises(ValueError, match="negative"):
        pg.ModelSpec.from_json(neg)


def test_model_json_roundtrip(step_model):
    back = pg.ModelSpec.from_json(step_model.to_json())
    assert back.to_json() == step_model.to_json()


def test_interior_point_values_must_be_finite():
    with pytest.raises(ValueError, match="finite"):
        pg.WellBehavedFn([0.0, 1.0], [[1.0]], [1.0, INF])
