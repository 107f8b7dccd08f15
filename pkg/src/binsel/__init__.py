"""Bayesian variable selection for binary regression.

Auxiliary-variable logistic/probit models with spike-and-slab indicator
priors, dependence-aware Gibbs kernels driven by shrinkage partial-
correlation graphs, parallel tempering, and mixing diagnostics.
"""

from .augmentation import sample_beta, sample_lambda, sample_z
from .dependence import (NeighbourhoodGraph, ShrinkageEstimate, complete_graph,
                         partial_correlation, random_graph,
                         shrinkage_correlation, threshold_graph)
from .diagnostics import (EssReport, analyze_traces, efficiency_ratio, ess_ar,
                          ess_star, fp_fn_counts, inclusion_probabilities)
from .errors import (BinselError, ConfigError, ConstantColumnError,
                     FactorizationError, NumericalError, RejectionCapError)
from .model import (Dataset, ModelState, PosteriorGaussian, PriorSpec,
                    compute_posterior_gaussian, deviance, load_dataset,
                    log_marginal_z, prior_c2_range, save_dataset, standardize)
from .rng import RngStream, chain_streams
from .samplers import (KernelSpec, RunConfig, TraceSet, init_state_from_prior,
                       kernel_add_delete, kernel_full_gibbs, kernel_joint_gibbs,
                       kernel_neighbourhood_gibbs, kernel_restricted_gibbs,
                       load_traces, run_chain, save_traces)
from .simulate import (SimTruth, simulate_scenario1, simulate_scenario2,
                       surrogate_expression_matrix)
from .tempering import LadderSpec, run_parallel_tempering, swap_log_acceptance

__version__ = "0.1.0"
