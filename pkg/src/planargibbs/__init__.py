"""Two-dimensional continuum Gibbs systems with finite spin spaces: sampler,
smooth/small potential decomposition, Bernoulli bond process, deformed
translations with explicit Jacobian density, and statistical verification."""

from .core import (Configuration, Norm, Particle, Window, distance, maxnorm,
                   restrict, rng_stream)
from .potentials import (DecomposedPotential, PottsPotential, WellBehavedFn,
                         build_decomposition, decompose_well_behaved,
                         eval_pair_potential, eval_well_behaved, hamiltonian,
                         hamiltonian_small, pair_region)
from .bonds import (BondSet, ClusterPartition, augment_bplus, cluster_range,
                    clusters, sample_bonds)
from .transform import (GoodConfigReport, Q_taper, TaperParams, TransformResult,
                        backward_transform, density, forward_transform,
                        good_config_report, inverse_transform, m_aux, q_taper,
                        r_ratio, tau_Rn)
from .sampler import (ChainState, GibbsParams, estimate_correlation, mcmc_step,
                      poisson_boundary_ring, run_chain, sample_poisson)
from .models import (ModelSpec, load_model, save_model, step_potts,
                     widom_rowlinson, zero_potential)

__version__ = "0.1.0"

__all__ = [
    "Configuration", "Norm", "Particle", "Window", "distance", "maxnorm",
    "restrict", "rng_stream",
    "DecomposedPotential", "PottsPotential", "WellBehavedFn",
    "build_decomposition", "decompose_well_behaved", "eval_pair_potential",
    "eval_well_behaved", "hamiltonian", "hamiltonian_small", "pair_region",
    "BondSet", "ClusterPartition", "augment_bplus", "cluster_range",
    "clusters", "sample_bonds",
    "GoodConfigReport", "Q_taper", "TaperParams", "TransformResult",
    "backward_transform", "density", "forward_transform", "good_config_report",
    "inverse_transform", "m_aux", "q_taper", "r_ratio", "tau_Rn",
    "ChainState", "GibbsParams", "estimate_correlation", "mcmc_step",
    "poisson_boundary_ring", "run_chain", "sample_poisson",
    "ModelSpec", "load_model", "save_model", "step_potts", "widom_rowlinson",
    "zero_potential",
    "__version__",
]
