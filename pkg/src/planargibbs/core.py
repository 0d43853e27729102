"""Particles, spins, windows, configurations, norms and seedable randomness.

Positions live in the plane, spins in a finite set {0, ..., nspins-1} carrying
the uniform reference measure.  A configuration is a finite marked point set
split into an interior part (inside a half-open square window) and a boundary
part (outside it).  All types here are immutable values; operations are pure
functions of their inputs plus an explicit RNG.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

JSON_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# norms


class Norm:
    """A norm on the plane: 'max', 'euclidean', or 'weighted'.

    'weighted' is the elliptic norm sqrt(w1*dx^2 + w2*dy^2) with positive
    weights.  Only the position part of a particle is ever measured; spins are
    ignored by all distance computations.
    """

    KINDS = ("max", "euclidean", "weighted")

    def __init__(self, kind="max", weights=None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown norm kind {kind!r}")
        self.kind = kind
        if kind == "weighted":
            if weights is None:
                raise ValueError("weighted norm needs weights")
            w1, w2 = float(weights[0]), float(weights[1])
            if not (w1 > 0 and w2 > 0):
                raise ValueError("weights must be positive")
            self.weights = (w1, w2)
        else:
            self.weights = None

    def __repr__(self):
        if self.kind == "weighted":
            return f"Norm('weighted', {self.weights})"
        return f"Norm({self.kind!r})"

    def __eq__(self, other):
        return (
            isinstance(other, Norm)
            and self.kind == other.kind
            and self.weights == other.weights
        )

    def dist(self, dx):
        """Norm of displacement vectors, shape (..., 2) -> (...)."""
        dx = np.asarray(dx, dtype=float)
        if self.kind == "max":
            return np.max(np.abs(dx), axis=-1)
        if self.kind == "euclidean":
            return np.hypot(dx[..., 0], dx[..., 1])
        w1, w2 = self.weights
        return np.sqrt(w1 * dx[..., 0] ** 2 + w2 * dx[..., 1] ** 2)

    def e_deriv(self, dx):
        """d/dt |dx + t*e|  at t = 0, where e = (1, 0).

        At kinks (max-norm ties, zero vector) returns 0; those points form a
        null set and callers treat them as flagged ties.
        """
        dx = np.asarray(dx, dtype=float)
        if self.kind == "max":
            ax = np.abs(dx[..., 0])
            ay = np.abs(dx[..., 1])
            return np.where(ax > ay, np.sign(dx[..., 0]), 0.0)
        d = self.dist(dx)
        with np.errstate(invalid="ignore", divide="ignore"):
            if self.kind == "euclidean":
                g = dx[..., 0] / d
            else:
                g = self.weights[0] * dx[..., 0] / d
        return np.where(d > 0, g, 0.0)

    def unit_ball_area(self):
        if self.kind == "max":
            return 4.0
        if self.kind == "euclidean":
            return math.pi
        w1, w2 = self.weights
        return math.pi / math.sqrt(w1 * w2)

    def maxnorm_bound(self):
        """sup of the max norm over the unit ball of this norm."""
        if self.kind in ("max", "euclidean"):
            return 1.0
        w1, w2 = self.weights
        return max(1.0 / math.sqrt(w1), 1.0 / math.sqrt(w2))

    def e_slope_bound(self):
        """sup over displacements of |d/dt |dx + t*e||."""
        if self.kind in ("max", "euclidean"):
            return 1.0
        return math.sqrt(self.weights[0])

    def to_json(self):
        if self.kind == "weighted":
            return {"kind": self.kind, "weights": list(self.weights)}
        return {"kind": self.kind}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["kind"], obj.get("weights"))


def maxnorm(x):
    """Max norm of positions, shape (..., 2) -> (...).  Used by the taper."""
    x = np.asarray(x, dtype=float)
    return np.max(np.abs(x), axis=-1)


def distance(y1, y2, norm):
    """Distance between the positions of two particles; spins are ignored."""
    dx = np.asarray(y2.x, dtype=float) - np.asarray(y1.x, dtype=float)
    return float(norm.dist(dx))


# ---------------------------------------------------------------------------
# particles, windows, configurations


@dataclass(frozen=True)
class Particle:
    """A marked point: position in the plane plus a spin index."""

    x: tuple
    spin: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.x[0]) and math.isfinite(self.x[1])):
            raise ValueError("particle position must be finite")
        if self.spin < 0:
            raise ValueError("spin index must be nonnegative")


@dataclass(frozen=True)
class Window:
    """The centred square [-r, r)^2, half-open on both axes."""

    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError("window half-width must be positive and finite")

    def contains(self, x):
        """Membership test, vectorized over positions of shape (..., 2)."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= -self.r) & (x < self.r), axis=-1)

    @property
    def area(self):
        return 4.0 * self.r * self.r


class Configuration:
    """Finite marked point set: interior particles inside a window plus a
    fixed boundary configuration outside it.

    Stored as flat arrays; a particle's identity is its index in the combined
    interior-then-boundary order, which every transformation preserves so that
    bond index sets stay valid across transforms.
    """

    def __init__(self, window, interior_xy, interior_spin, boundary_xy=None,
                 boundary_spin=None, validate=True):
        self.window = window
        self.interior_xy = np.ascontiguousarray(
            np.asarray(interior_xy, dtype=float).reshape(-1, 2))
        self.interior_spin = np.ascontiguousarray(
            np.asarray(interior_spin, dtype=np.int64).reshape(-1))
        if boundary_xy is None:
            boundary_xy = np.empty((0, 2))
            boundary_spin = np.empty((0,), dtype=np.int64)
        self.boundary_xy = np.ascontiguousarray(
            np.asarray(boundary_xy, dtype=float).reshape(-1, 2))
        self.boundary_spin = np.ascontiguousarray(
            np.asarray(boundary_spin, dtype=np.int64).reshape(-1))
        if validate:
            self._validate()
        for a in (self.interior_xy, self.interior_spin,
                  self.boundary_xy, self.boundary_spin):
            a.setflags(write=False)

    def _validate(self):
        if len(self.interior_xy) != len(self.interior_spin):
            raise ValueError("interior position/spin length mismatch")
        if len(self.boundary_xy) != len(self.boundary_spin):
            raise ValueError("boundary position/spin length mismatch")
        allxy = self.positions
        if allxy.size and not np.all(np.isfinite(allxy)):
            raise ValueError("non-finite particle position")
        if len(self.interior_xy) and not np.all(self.window.contains(self.interior_xy)):
            raise ValueError("interior particle outside the window")
        if len(self.boundary_xy) and np.any(self.window.contains(self.boundary_xy)):
            raise ValueError("boundary particle inside the window")
        if len(allxy) > 1:
            seen = set(map(tuple, allxy))
            if len(seen) != len(allxy):
                raise ValueError("coincident particle positions are not allowed")

    @property
    def n_interior(self):
        return len(self.interior_xy)

    @property
    def n_total(self):
        return len(self.interior_xy) + len(self.boundary_xy)

    @property
    def positions(self):
        """Combined (interior first, then boundary) positions, shape (N, 2)."""
        return np.concatenate([self.interior_xy, self.boundary_xy], axis=0)

    @property
    def spins(self):
        return np.concatenate([self.interior_spin, self.boundary_spin], axis=0)

    def particles(self):
        """Interior particles as Particle objects (convenience accessor)."""
        return [Particle((float(x[0]), float(x[1])), int(s))
                for x, s in zip(self.interior_xy, self.interior_spin)]

    def restrict(self, region):
        """Restriction to a smaller window: particles of the interior that lie
        in `region` stay interior, everything else becomes boundary."""
        if region.r > self.window.r:
            raise ValueError("region exceeds window")
        if len(self.interior_xy):
            inside = region.contains(self.interior_xy)
        else:
            inside = np.zeros(0, dtype=bool)
        new_int_xy = self.interior_xy[inside]
        new_int_sp = self.interior_spin[inside]
        out_xy = self.interior_xy[~inside]
        out_sp = self.interior_spin[~inside]
        bxy = np.concatenate([out_xy, self.boundary_xy], axis=0)
        bsp = np.concatenate([out_sp, self.boundary_spin], axis=0)
        return Configuration(region, new_int_xy, new_int_sp, bxy, bsp)

    def to_json(self):
        return {
            "schema": JSON_SCHEMA_VERSION,
            "window_r": float(self.window.r),
            "interior": [[float(x[0]), float(x[1]), int(s)]
                         for x, s in zip(self.interior_xy, self.interior_spin)],
            "boundary": [[float(x[0]), float(x[1]), int(s)]
                         for x, s in zip(self.boundary_xy, self.boundary_spin)],
        }

    @classmethod
    def from_json(cls, obj):
        interior = obj.get("interior", [])
        boundary = obj.get("boundary", [])
        return cls(
            Window(float(obj["window_r"])),
            np.array([[p[0], p[1]] for p in interior], dtype=float).reshape(-1, 2),
            np.array([p[2] for p in interior], dtype=np.int64),
            np.array([[p[0], p[1]] for p in boundary], dtype=float).reshape(-1, 2),
            np.array([p[2] for p in boundary], dtype=np.int64),
        )

    def content_hash(self):
        """Hash of the canonical JSON encoding; bond files carry it so a bond
        set can never silently drift away from the configuration it indexes."""
        payload = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def __eq__(self, other):
        return (
            isinstance(other, Configuration)
            and self.window.r == other.window.r
            and np.array_equal(self.interior_xy, other.interior_xy)
            and np.array_equal(self.interior_spin, other.interior_spin)
            and np.array_equal(self.boundary_xy, other.boundary_xy)
            and np.array_equal(self.boundary_spin, other.boundary_spin)
        )


def restrict(config, region):
    """Functional form of Configuration.restrict."""
    return config.restrict(region)


# ---------------------------------------------------------------------------
# randomness


def rng_stream(seed, stream_label=""):
    """Deterministic, splittable random stream.

    Identical (seed, label) pairs give identical streams across runs and
    platforms; distinct labels give streams that are independent for all
    practical purposes.  The label is folded in through SHA-256 so arbitrary
    strings are safe.
    """
    digest = hashlib.sha256(stream_label.encode()).digest()
    words = [int.from_bytes(digest[4 * i:4 * (i + 1)], "little") for i in range(4)]
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *words])
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# neighbor grid


class CellGrid:
    """Uniform grid over a static point set for neighbor queries.

    Cell size should be at least the interaction cutoff measured in the max
    norm; then candidates for any pair within that cutoff sit in adjacent
    cells.  Queries return candidate index arrays; callers do the exact test.
    """

    def __init__(self, positions, cell_size):
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        self.cell_size = float(max(cell_size, 1e-9))
        self._cells = {}
        keys = np.floor(self.positions / self.cell_size).astype(np.int64)
        for idx, (i, j) in enumerate(map(tuple, keys)):
            self._cells.setdefault((i, j), []).append(idx)
        self._keys = keys

    def near(self, point):
        """Indices of points in the 3x3 block of cells around `point`."""
        ci = int(math.floor(point[0] / self.cell_size))
        cj = int(math.floor(point[1] / self.cell_size))
        out = []
        cells = self._cells
        for i in (ci - 1, ci, ci + 1):
            for j in (cj - 1, cj, cj + 1):
                got = cells.get((i, j))
                if got:
                    out.extend(got)
        return np.array(out, dtype=np.int64)

    def candidate_pairs(self):
        """All index pairs (i < j) living in the same or adjacent cells."""
        out_i, out_j = [], []
        cells = self._cells
        for (ci, cj), members in cells.items():
            # same cell
            m = len(members)
            for a in range(m):
                for b in range(a + 1, m):
                    out_i.append(members[a])
                    out_j.append(members[b])
            # half of the neighbor offsets, to avoid double counting
            for di, dj in ((1, -1), (1, 0), (1, 1), (0, 1)):
                other = cells.get((ci + di, cj + dj))
                if other:
                    for a in members:
                        for b in other:
                            out_i.append(a)
                            out_j.append(b)
        return (np.array(out_i, dtype=np.int64), np.array(out_j, dtype=np.int64))
