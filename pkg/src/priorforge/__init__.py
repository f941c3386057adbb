"""priorforge: weakly-informative default priors for GLM coefficients.

Slope-prior variances are derived as if the prior had been placed on a
generalized partial-correlation scale: a signed Cox-Snell generalized
R-squared links coefficients to correlations through a quartic approximation
of the profile log-likelihood, and a Taylor expansion propagates a scaled-Beta
correlation prior back to the coefficient scale. Intercepts, cell means, the
gaussian residual sd, and random-effect sds follow companion schemes keyed
off the slope priors.
"""

__version__ = "0.1.0"

from ._backend import backend_name
from .errors import (
    DesignError,
    FitError,
    FormulaError,
    PriorForgeError,
    QuarticFitError,
    RhoDomainError,
)
from .formula import (
    DesignData,
    ModelSpec,
    RandomTerm,
    build_design,
    format_formula,
    parse_formula,
    read_csv_columns,
)
from .glm import (
    BINOMIAL,
    GAUSSIAN,
    POISSON,
    Family,
    FitResult,
    family,
    fit_glm,
    log_likelihood,
    profile_loglik,
)
from .pcorr import (
    QuarticProfile,
    beta_from_rho,
    classical_slope_sd,
    fit_quartic,
    generalized_partial_corr,
    loglambda_from_quartic,
)
from .priors import (
    HalfNormal,
    Normal,
    PriorSet,
    PriorSpec,
    Uniform,
    build_all_priors,
    cellmeans_priors,
    default_taylor_order,
    intercept_prior,
    random_effect_prior,
    residual_sd_prior,
    slope_prior,
)
from .sim import SimGrid, canonical_gaussian_profile, run_roundtrip, run_taylor_sd
from .taylor import (
    DEFAULT_SIGMA_RHO,
    SCALE_LABELS,
    WIDE,
    RhoScale,
    TaylorConfig,
    beta_central_moment,
    derivatives_of_g,
    taylor_variance,
)

__all__ = [
    "__version__",
    "backend_name",
    "PriorForgeError",
    "FormulaError",
    "DesignError",
    "FitError",
    "QuarticFitError",
    "RhoDomainError",
    "ModelSpec",
    "RandomTerm",
    "DesignData",
    "parse_formula",
    "format_formula",
    "build_design",
    "read_csv_columns",
    "Family",
    "FitResult",
    "family",
    "GAUSSIAN",
    "BINOMIAL",
    "POISSON",
    "log_likelihood",
    "fit_glm",
    "profile_loglik",
    "QuarticProfile",
    "generalized_partial_corr",
    "classical_slope_sd",
    "fit_quartic",
    "loglambda_from_quartic",
    "beta_from_rho",
    "RhoScale",
    "TaylorConfig",
    "SCALE_LABELS",
    "DEFAULT_SIGMA_RHO",
    "WIDE",
    "beta_central_moment",
    "derivatives_of_g",
    "taylor_variance",
    "Normal",
    "HalfNormal",
    "Uniform",
    "PriorSpec",
    "PriorSet",
    "default_taylor_order",
    "slope_prior",
    "intercept_prior",
    "cellmeans_priors",
    "residual_sd_prior",
    "random_effect_prior",
    "build_all_priors",
    "SimGrid",
    "run_roundtrip",
    "run_taylor_sd",
    "canonical_gaussian_profile",
]
