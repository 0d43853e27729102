"""Grand-canonical Metropolis-Hastings sampler for conditional Gibbs laws.

The chain targets the distribution with weight exp(-H(Y)) * z^N against the
unit-intensity Poisson process inside a window, conditioned on a fixed
boundary configuration outside it.  Proposals mix births (uniform position
and spin), deaths (uniform particle) and Gaussian single-particle moves;
any proposal that lands a pair inside the hard core is rejected outright.

A deliberately broken variant used as a negative-control fixture draws birth
proposals from a sinusoidally tilted density along e while keeping the
uniform-proposal acceptance rule.  That plants a bulk gradient into the
stationary law, which the translation-invariance checks must detect.  (A
mere constant shift of birth proposals would stay translation-covariant in
the bulk and detectable only at the window edge, so it makes no fixture.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Configuration, Window
from .potentials import DecomposedPotential, hamiltonian, interaction_energy

RESYNC_INTERVAL = 10_000


def _base_potential(pot_or_dec):
    return pot_or_dec.base if isinstance(pot_or_dec, DecomposedPotential) else pot_or_dec


def sample_poisson(window, intensity, spin_count, rng):
    """Poisson configuration: count ~ Poisson(intensity * area), positions
    i.i.d. uniform in the window, spins i.i.d. uniform."""
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    n = rng.poisson(intensity * window.area)
    xy = rng.uniform(-window.r, window.r, size=(n, 2))
    spins = rng.integers(0, spin_count, size=n)
    return Configuration(window, xy, spins)


def poisson_boundary_ring(window, intensity, spin_count, width, rng):
    """Boundary generator: a Poisson sample on the ring of the given width
    around the window (positions outside the window only)."""
    outer = Window(window.r + width)
    cfg = sample_poisson(outer, intensity, spin_count, rng)
    keep = ~window.contains(cfg.interior_xy)
    return cfg.interior_xy[keep], cfg.interior_spin[keep]


@dataclass(frozen=True)
class GibbsParams:
    """Run parameters for one chain."""

    z: float
    pot: object                    # PottsPotential or DecomposedPotential
    window: Window
    boundary_xy: np.ndarray = None
    boundary_spin: np.ndarray = None
    nspins: int = None
    move_mix: tuple = (0.35, 0.35, 0.30)
    sweeps: int = 0
    burn_in: int = 0
    thinning: int = 1
    sigma_move: float = None
    # negative-control fixture: amplitude of the tilt 1 + a*sin(pi*x/2) on
    # the birth-proposal density, with acceptance left uniform; 0 = correct
    proposal_bias: float = 0.0

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError("z must be positive")
        if abs(sum(self.move_mix) - 1.0) > 1e-12:
            raise ValueError("move mix must sum to one")
        base = _base_potential(self.pot)
        if self.nspins is None:
            object.__setattr__(self, "nspins", base.nspins)
        if self.sigma_move is None:
            rmin = base.min_positive_hard_core_radius()
            object.__setattr__(self, "sigma_move",
                               0.25 * rmin if rmin else 0.25)
        if self.boundary_xy is None:
            object.__setattr__(self, "boundary_xy", np.empty((0, 2)))
            object.__setattr__(self, "boundary_spin",
                               np.empty(0, dtype=np.int64))
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


@dataclass
class ChainState:
    """Snapshot of the chain: configuration, cached energy, step counter."""

    config: Configuration
    energy: float
    steps: int = 0


class _Chain:
    """Mutable chain workspace with a uniform-grid neighbor index."""

    def __init__(self, params, config=None):
        self.params = params
        self.base = _base_potential(params.pot)
        self.norm = self.base.norm
        self.window = params.window
        self.area = params.window.area
        cutoff = self.base.interaction_range
        self.cutoff = cutoff
        self.cell = max(cutoff * self.norm.maxnorm_bound(), 1e-9)
        self.free = cutoff <= 0
        cap = 64
        self.xy = np.zeros((cap, 2))
        self.spin = np.zeros(cap, dtype=np.int64)
        self.n = 0
        self.cells = {}
        self.bxy = np.asarray(params.boundary_xy, dtype=float).reshape(-1, 2)
        self.bspin = np.asarray(params.boundary_spin, dtype=np.int64).reshape(-1)
        self.bcells = {}
        for i, p in enumerate(self.bxy):
            self.bcells.setdefault(self._key(p), []).append(i)
        self.energy = 0.0
        self.steps = 0
        if config is not None:
            for x, s in zip(config.interior_xy, config.interior_spin):
                e = self._local_energy(x, int(s))
                if math.isinf(e):
                    raise ValueError("initial configuration violates the hard core")
                self._insert(x, int(s))
                self.energy += e

    def _key(self, p):
        return (int(math.floor(p[0] / self.cell)), int(math.floor(p[1] / self.cell)))

    def _insert(self, x, s):
        if self.n == len(self.xy):
            self.xy = np.vstack([self.xy, np.zeros_like(self.xy)])
            self.spin = np.concatenate([self.spin, np.zeros_like(self.spin)])
        self.xy[self.n] = x
        self.spin[self.n] = s
        self.cells.setdefault(self._key(x), set()).add(self.n)
        self.n += 1

    def _remove(self, i):
        # swap-delete; the moved particle keeps its position and spin
        last = self.n - 1
        self.cells[self._key(self.xy[i])].discard(i)
        if i != last:
            self.cells[self._key(self.xy[last])].discard(last)
            self.xy[i] = self.xy[last]
            self.spin[i] = self.spin[last]
            self.cells.setdefault(self._key(self.xy[i]), set()).add(i)
        self.n = last

    def _candidates(self, x, skip=-1):
        ci, cj = self._key(x)
        out = []
        for a in (ci - 1, ci, ci + 1):
            for b in (cj - 1, cj, cj + 1):
                got = self.cells.get((a, b))
                if got:
                    out.extend(got)
        if skip >= 0:
            out = [i for i in out if i != skip]
        return out

    def _local_energy(self, x, s, skip=-1):
        """Interaction of a particle at (x, s) with everything else."""
        if self.free:
            return 0.0
        total = 0.0
        idx = self._candidates(x, skip)
        if idx:
            d = self.norm.dist(self.xy[idx] - x)
            vals = self.base.energy_radial(self.spin[idx], s, d)
            if np.any(np.isinf(vals)):
                return math.inf
            total += float(np.sum(vals))
        ci, cj = self._key(x)
        bidx = []
        for a in (ci - 1, ci, ci + 1):
            for b in (cj - 1, cj, cj + 1):
                got = self.bcells.get((a, b))
                if got:
                    bidx.extend(got)
        if bidx:
            d = self.norm.dist(self.bxy[bidx] - x)
            vals = self.base.energy_radial(self.bspin[bidx], s, d)
            if np.any(np.isinf(vals)):
                return math.inf
            total += float(np.sum(vals))
        return total

    def step(self, rng):
        self.steps += 1
        pb, pd, _ = self.params.move_mix
        u = rng.random()
        z_area = self.params.z * self.area
        if u < pb:
            x = rng.uniform(-self.window.r, self.window.r, size=2)
            bias = self.params.proposal_bias
            if bias != 0.0:
                # broken fixture: tilted proposal, uniform acceptance below
                while rng.random() * (1.0 + abs(bias)) > \
                        1.0 + bias * math.sin(0.5 * math.pi * x[0]):
                    x = rng.uniform(-self.window.r, self.window.r, size=2)
            s = int(rng.integers(self.params.nspins))
            de = self._local_energy(x, s)
            if math.isinf(de):
                return
            acc = z_area * math.exp(-de) / (self.n + 1)
            if acc >= 1.0 or rng.random() < acc:
                self._insert(x, s)
                self.energy += de
        elif u < pb + pd:
            if self.n == 0:
                return
            i = int(rng.integers(self.n))
            e_i = self._local_energy(self.xy[i], int(self.spin[i]), skip=i)
            acc = self.n * math.exp(min(e_i, 700.0)) / z_area
            if acc >= 1.0 or rng.random() < acc:
                self.energy -= e_i
                self._remove(i)
        else:
            if self.n == 0:
                return
            i = int(rng.integers(self.n))
            old = self.xy[i].copy()
            s = int(self.spin[i])
            new = old + rng.normal(0.0, self.params.sigma_move, size=2)
            if not bool(self.window.contains(new)):
                return
            e_old = self._local_energy(old, s, skip=i)
            e_new = self._local_energy(new, s, skip=i)
            if math.isinf(e_new):
                return
            de = e_new - e_old
            if de <= 0.0 or rng.random() < math.exp(-de):
                self.cells[self._key(old)].discard(i)
                self.xy[i] = new
                self.cells.setdefault(self._key(new), set()).add(i)
                self.energy += de

    def resync(self):
        """Recompute the cached energy from scratch; returns the drift."""
        snap = self.snapshot(validate=False)
        fresh = hamiltonian(self.base, snap)
        drift = abs(fresh - self.energy)
        self.energy = fresh
        return drift

    def snapshot(self, validate=True):
        return Configuration(self.window, self.xy[:self.n].copy(),
                             self.spin[:self.n].copy(), self.bxy, self.bspin,
                             validate=validate)

    def state(self):
        return ChainState(self.snapshot(), self.energy, self.steps)


def mcmc_step(state, params, rng):
    """One Metropolis-Hastings proposal, returned as a new state."""
    chain = _Chain(params, state.config)
    chain.steps = state.steps
    chain.step(rng)
    return chain.state()


def run_chain(params, rng, init=None, collect=None):
    """Run the chain and return thinned post-burn-in snapshots.

    Starts from the empty configuration (always admissible) unless an initial
    configuration is given.  Emits a snapshot every `thinning` steps during
    the `sweeps` steps that follow `burn_in`; `collect` maps a snapshot to
    whatever should be stored (default: the configuration itself).
    """
    chain = _Chain(params, init)
    for _ in range(params.burn_in):
        chain.step(rng)
        if chain.steps % RESYNC_INTERVAL == 0:
            chain.resync()
    samples = []
    for k in range(1, params.sweeps + 1):
        chain.step(rng)
        if chain.steps % RESYNC_INTERVAL == 0:
            chain.resync()
        if k % params.thinning == 0:
            snap = chain.snapshot()
            samples.append(collect(snap) if collect else snap)
    return samples


@dataclass
class CorrelationEstimate:
    probe_size: int
    estimate: float
    std_error: float
    bound: float
    violates_bound: bool


def estimate_correlation(samples, probes, pot_or_dec, xi=1.0):
    """Empirical correlation functional of finite probe configurations.

    For a probe Y' the estimator is exp(-H(Y')) times the sample mean of
    exp(-W(Y', sample)); a flag marks estimates exceeding xi^len(probe) by
    more than three standard errors.
    """
    if not samples:
        raise ValueError("need at least one sample")
    base = _base_potential(pot_or_dec)
    out = []
    for probe in probes:
        pxy = np.array([p.x for p in probe], dtype=float).reshape(-1, 2)
        pspin = np.array([p.spin for p in probe], dtype=np.int64)
        h = 0.0
        for a in range(len(probe)):
            h += interaction_energy(base, pxy[a:a + 1], pspin[a:a + 1],
                                    pxy[a + 1:], pspin[a + 1:])
        pref = math.exp(-h) if not math.isinf(h) else 0.0
        weights = np.empty(len(samples))
        for k, cfg in enumerate(samples):
            w = interaction_energy(base, pxy, pspin, cfg.positions, cfg.spins)
            weights[k] = math.exp(-w) if not math.isinf(w) else 0.0
        mean = float(np.mean(weights)) * pref
        se = float(np.std(weights, ddof=1) / math.sqrt(len(weights))) * pref \
            if len(weights) > 1 else 0.0
        bound = xi ** len(probe)
        out.append(CorrelationEstimate(len(probe), mean, se, bound,
                                       mean > bound + 3.0 * se))
    return out
