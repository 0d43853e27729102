"""Bernoulli bond process, bond-set augmentation, clusters and cluster range.

Bonds are unordered pairs of indices into a configuration's combined
interior-then-boundary particle list.  The bond process draws each candidate
pair independently with probability utilde = 1 - exp(-u); since u has bounded
support, candidate enumeration only visits pairs within that support.  The
augmented set adds an edge for every pair inside the twice-enlarged hard
core, which is what cluster ranges and the good-set functionals consume.
"""

from __future__ import annotations

import numpy as np

from .core import CellGrid, Window, maxnorm
from .potentials import pairs_in_scope


class UnionFind:
    """Disjoint sets over range(n), path compression + union by rank."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a):
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


class BondSet:
    """Set of unordered particle-index pairs, optionally tied to the window
    scope it was sampled in."""

    def __init__(self, edges, n_particles, scope_n=None):
        seen = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError("self-loops are not allowed")
            if not (0 <= a < n_particles and 0 <= b < n_particles):
                raise ValueError("bond index out of range")
            seen.add((min(a, b), max(a, b)))
        self.edges = frozenset(seen)
        self.n_particles = int(n_particles)
        self.scope_n = scope_n

    def __len__(self):
        return len(self.edges)

    def __contains__(self, pair):
        a, b = pair
        return (min(a, b), max(a, b)) in self.edges

    def __le__(self, other):
        return self.edges <= other.edges

    def edge_arrays(self):
        if not self.edges:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        arr = np.array(sorted(self.edges), dtype=np.int64)
        return arr[:, 0], arr[:, 1]

    def validate_scope(self, config):
        """Every edge must touch a particle inside the scope window."""
        if self.scope_n is None:
            return True
        inside = Window(self.scope_n).contains(config.positions)
        return all(inside[a] or inside[b] for a, b in self.edges)

    def to_json(self, config=None):
        obj = {
            "schema": 1,
            "n_particles": self.n_particles,
            "scope_n": self.scope_n,
            "edges": [[a, b] for a, b in sorted(self.edges)],
        }
        if config is not None:
            obj["config_hash"] = config.content_hash()
        return obj

    @classmethod
    def from_json(cls, obj, config=None):
        if config is not None and "config_hash" in obj:
            if obj["config_hash"] != config.content_hash():
                raise ValueError("bond file does not match the configuration")
        return cls(obj["edges"], obj["n_particles"], obj.get("scope_n"))


class ClusterPartition:
    """Connected components of the particle set under a bond set."""

    def __init__(self, n_particles, edges):
        uf = UnionFind(n_particles)
        for a, b in edges:
            uf.union(a, b)
        roots = [uf.find(i) for i in range(n_particles)]
        relabel = {}
        labels = np.empty(n_particles, dtype=np.int64)
        for i, r in enumerate(roots):
            labels[i] = relabel.setdefault(r, len(relabel))
        self.labels = labels
        self.n_clusters = len(relabel)
        members = [[] for _ in range(self.n_clusters)]
        for i, lab in enumerate(labels):
            members[lab].append(i)
        self.members = [np.array(m, dtype=np.int64) for m in members]

    def cluster_of(self, i):
        return self.members[self.labels[i]]

    def same_cluster(self, i, j):
        return self.labels[i] == self.labels[j]


def clusters(config, bonds):
    edges = bonds.edges if isinstance(bonds, BondSet) else bonds
    return ClusterPartition(config.n_total, edges)


def sample_bonds(config, dec, n, rng):
    """Draw the Bernoulli bond set: every pair with at least one member in
    the scope window [-n, n)^2 enters independently with probability
    utilde(pair).  Pairs beyond the support of the small part never occur and
    are skipped outright; pairs inside the hard core have u = 0.
    """
    cutoff = dec.max_u_support
    scope = Window(n)
    if cutoff <= 0 or config.n_total < 2:
        return BondSet([], config.n_total, scope_n=n)
    ii, jj, d = pairs_in_scope(config, scope, cutoff, dec.norm)
    if len(ii) == 0:
        return BondSet([], config.n_total, scope_n=n)
    spins = config.spins
    prob = dec.bond_probability_radial(spins[ii], spins[jj], d)
    take = rng.random(len(prob)) < prob
    edges = list(zip(ii[take].tolist(), jj[take].tolist()))
    return BondSet(edges, config.n_total, scope_n=n)


def close_pair_edges(config, dec):
    """All index pairs inside the twice-enlarged hard core (any scope)."""
    pos = config.positions
    if config.n_total < 2:
        return []
    radii = dec.base.hard_core_radii + 2.0 * dec.eps
    cutoff = float(np.max(radii))
    if cutoff <= 0:
        return []
    box = cutoff * dec.norm.maxnorm_bound()
    grid = CellGrid(pos, box * 1.0000001)
    ii, jj = grid.candidate_pairs()
    if len(ii) == 0:
        return []
    d = dec.norm.dist(pos[jj] - pos[ii])
    spins = config.spins
    close = d <= radii[spins[ii], spins[jj]]
    return list(zip(ii[close].tolist(), jj[close].tolist()))


def augment_bplus(config, bonds, dec):
    """Bond set enlarged by an edge for every close pair."""
    edges = set(bonds.edges)
    edges.update((min(a, b), max(a, b)) for a, b in close_pair_edges(config, dec))
    return BondSet(edges, config.n_total, scope_n=None)


NO_CLUSTER = -np.inf


def cluster_range(config, bplus, inner_r):
    """Sup of the max norm over all particles connected to the inner window
    [-inner_r, inner_r)^2; -inf when no particle lies in the inner window."""
    pos = config.positions
    if config.n_total == 0:
        return NO_CLUSTER
    part = clusters(config, bplus)
    inner = Window(inner_r).contains(pos)
    if not np.any(inner):
        return NO_CLUSTER
    seed_labels = np.unique(part.labels[inner])
    touched = np.isin(part.labels, seed_labels)
    return float(np.max(maxnorm(pos[touched])))
