"""Lasso estimation lab for beta-mixing subgaussian time series."""

__version__ = "0.1.0"

from .dgm import (  # noqa: F401
    BlockPartition,
    ClippedARCH,
    GaussianVAR,
    ModelSpec,
    OmittedVarVAR,
    Series,
    SubgaussianVAR,
    blocking_indices,
    companion_form,
    make_example_spec,
    simulate,
    stationary_covariance,
    validate_model,
)
from .lasso import (  # noqa: F401
    BoundReport,
    LassoConfig,
    LassoSolution,
    error_metrics,
    kkt_residual,
    solve,
    theoretical_bounds,
)
from .numerics import (  # noqa: F401
    DistributionSpec,
    min_eigen_sym,
    operator_norm,
    scalar_subgaussian_norm,
    soft_threshold,
    solve_discrete_lyapunov,
    spectral_radius,
)
from .problem import (  # noqa: F401
    RegressionProblem,
    SubgaussianConstants,
    build_problem,
    population_target,
    residuals,
    subgaussian_constants,
)
from .conditions import (  # noqa: F401
    ConcentrationReport,
    DBReport,
    REReport,
    concentration_tail_experiment,
    db_bound,
    db_statistic,
    lower_re_certificate,
    re_tolerance,
)
