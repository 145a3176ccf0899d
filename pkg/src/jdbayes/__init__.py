"""Adaptive Bayes estimation for small-noise jump-diffusions.

The package simulates paths of

    dX = a(X, mu) dt + eps b(X, sigma) dW + eps c(X-, alpha) dJ

with J compound Poisson, and estimates (mu, sigma, alpha) by staged
posterior means of contrast functions sampled with MpCN.
"""
from .model import (DomainError, FAMILIES, GammaFamily, InvalidParameterError,
                    InverseGaussianFamily, JumpFamily, ModelError, ModelSpec,
                    NormalFamily, ParamBox, ParamVector, dpsi_dalpha,
                    make_model, preset, psi, sample_jump,
                    validate_assumptions)
from .simulator import (FisherInfo, JumpRecord, PathExplosionError,
                        SamplePath, SimConfig, filter_validity_diagnostic,
                        fisher_info, ode_limit_path, simulate_path)
from .contrast import (FilterMask, FilterSpec, InvalidFilterError,
                       classify_increments, contrast0, contrast1, contrast2,
                       ideal_contrasts)
from .sampler import (ChainResult, LogTarget, MCMCConfig, grid_posterior_mean,
                      mpcn_step, run_chain)
from .pipeline import (EstimationResult, estimate_adaptive, estimate_full,
                       estimate_initial_mu)
from .harness import (ConfigError, ExperimentConfig, SummaryTable,
                      load_config, parse_config, run_replications, summarize)
from .kernels import BACKEND

__version__ = "0.1.0"
