"""Shipped model definitions and the model-file loader.

A model file bundles a Potts type potential (norm, spin count, per-pair
radial interactions) with the run parameters that belong to it: activity z,
correlation bound xi, enlargement eps and mollifier width.  Two defaults are
provided: a two-species mixture with hard exclusion between unlike species
only, and a two-species step repulsion with a smaller hard core.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .core import Norm
from .potentials import (DecomposedPotential, PottsPotential, WellBehavedFn,
                         build_decomposition)

MODEL_SCHEMA_VERSION = 1


@dataclass
class ModelSpec:
    """A potential plus the parameters a simulation run needs."""

    name: str
    pot: PottsPotential
    z: float
    xi: float = 1.0
    mollify_width: float = None

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError("activity z must be positive")
        if self.mollify_width is None:
            self.mollify_width = self.pot.eps / 4.0

    def decompose(self) -> DecomposedPotential:
        return build_decomposition(self.pot, mollify_width=self.mollify_width,
                                   z=self.z, xi=self.xi)

    def to_json(self):
        return {
            "schema": MODEL_SCHEMA_VERSION,
            "name": self.name,
            "activity": self.z,
            "ruelle_xi": self.xi,
            "mollify_width": self.mollify_width,
            **self.pot.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get("schema") != MODEL_SCHEMA_VERSION:
            raise ValueError("unsupported model schema version")
        pot = PottsPotential.from_json(obj)
        return cls(name=obj.get("name", "unnamed"), pot=pot,
                   z=float(obj["activity"]),
                   xi=float(obj.get("ruelle_xi", 1.0)),
                   mollify_width=obj.get("mollify_width"))


def load_model(path_or_dict) -> ModelSpec:
    """Read a model from a JSON file path or an already-parsed dict."""
    if isinstance(path_or_dict, dict):
        return ModelSpec.from_json(path_or_dict)
    with open(path_or_dict, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid model file: {exc}") from exc
    return ModelSpec.from_json(obj)


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def default_eps(radii, fraction=0.05):
    """Default enlargement: a small fraction of the smallest hard disc."""
    positive = [r for r in radii if r > 0]
    return fraction * min(positive) if positive else 0.05


def widom_rowlinson(radius=1.0, z=0.2, nspins=2, eps=None,
                    norm_kind="euclidean"):
    """Two-species (or k-species) mixture: unlike particles exclude each
    other inside `radius`, like particles do not interact at all."""
    if eps is None:
        eps = default_eps([radius])
    zero = WellBehavedFn.zero()
    core = WellBehavedFn.hard_core(radius)
    table = [[zero if i == j else core for j in range(nspins)]
             for i in range(nspins)]
    pot = PottsPotential(Norm(norm_kind), table, eps)
    return ModelSpec(name="widom_rowlinson", pot=pot, z=z)


def step_potts(core_radius=0.5, step_radius=1.5, height=1.0, z=0.1,
               eps=0.1, mollify_width=0.02, norm_kind="euclidean"):
    """Two-species continuum step repulsion: unlike pairs pay `height` when
    closer than `step_radius` and are excluded inside `core_radius`."""
    zero = WellBehavedFn.zero()
    step = WellBehavedFn(
        breakpoints=[core_radius, step_radius],
        pieces=[[height]],
        point_values=[float("inf"), height],
    )
    table = [[zero, step], [step, zero]]
    pot = PottsPotential(Norm(norm_kind), table, eps)
    return ModelSpec(name="step_potts", pot=pot, z=z,
                     mollify_width=mollify_width)


def zero_potential(z=1.0, nspins=1, eps=0.05, norm_kind="euclidean"):
    """Free model: no interaction at all (beyond the excluded diagonal)."""
    zero = WellBehavedFn.zero()
    table = [[zero for _ in range(nspins)] for _ in range(nspins)]
    pot = PottsPotential(Norm(norm_kind), table, eps)
    return ModelSpec(name="zero_potential", pot=pot, z=z)
