"""Replicability rates under non-exact replication sequences.

Modules: ``specfun`` (special functions), ``seqmodels`` (benchmark and
operational sequence models), ``discrim`` (sampling HDIs), ``posterior2d``
(grid posterior of mean rate and intraclass correlation), ``hetero``
(heterogeneity-to-(mu, rho) maps) and ``ml4`` (effect-size reanalysis).
"""

__version__ = "0.1.0"

from .specfun import (  # noqa: E402
    BetaShape, beta_shape_from_mean_icc, binomial_lower_tail, binomial_tail,
    bivariate_normal_cdf, normal_cdf, normal_ppf,
)
from .seqmodels import (  # noqa: E402
    OperationalDesign, SequenceParams, TwoPointMixture, benchmark_variance,
    betabinomial_pmf, effective_sample_size, excess_variance, operational_variance,
    operational_verdict_loglik, pmf_vector, two_point_icc, variance_floor,
)
from .discrim import (  # noqa: E402
    HdiInterval, SeparablePair, hdi_grid, intervals_separated, minimal_separable_pair,
    normal_interval_width, sampling_hdi,
)
from .posterior2d import (  # noqa: E402
    PosteriorGrid2D, PriorSpec, conditional_density, jeffreys_prior_grid, joint_posterior,
    marginal_mu, overlap, overlap_matrix,
)
from .hetero import (  # noqa: E402
    ConvergenceError, DeliveryScenario, PopulationScenario, ex1_rho, ex1_table,
    ex2_finite_n, ex2_rho_largen, ex2_table, panel_label,
)
