"""Functional autoregression of order 1: estimation, residual bootstrap and
Mallows-metric Monte Carlo validation on a finite orthonormal basis."""

from .bootstrap import (
    BootstrapConfig,
    BootstrapStats,
    UnstableOperatorError,
    bootstrap_path,
    bootstrap_statistics,
    draw_bootstrap_innovations,
)
from .estimation import (
    EigenSystem,
    FarFit,
    FixedRule,
    KRule,
    LogRule,
    PolyRule,
    TruncationError,
    autocov_est,
    cov_est,
    eigensystem,
    estimate_psi,
    fit,
    format_k_rule,
    parse_k_rule,
    projection,
    reg_inverse,
    residuals,
    s_n_operator,
    sample_mean,
    select_k,
)
from .hilbert import (
    FuncVec,
    HsOp,
    adjoint,
    basis_vector,
    hs_inner,
    hs_norm,
    identity,
    inner,
    kron,
    norm,
    op_norm,
)
from .mallows import (
    PointCloud,
    mallows_bruteforce,
    mallows_d2,
    mallows_operator_d2,
    optimal_matching,
)
from .process import (
    ExponentialSpectrum,
    FarModel,
    InnovationSpec,
    PolynomialSpectrum,
    Sample,
    dense_random_psi,
    diagonal_exponential_psi,
    draw_innovation,
    draw_innovations,
    ma_closed_form_path,
    make_psi,
    simulate,
    stationary_cov,
)
from .rng import derive_seed, make_rng

__version__ = "0.1.0"

from .harness import (  # noqa: E402  (harness imports the version indirectly)
    EXPERIMENTS,
    McConfig,
    McReport,
    RateTable,
    autocov_bootstrap_trend,
    cov_bootstrap_trend,
    default_config,
    innovation_law_trend,
    mean_bootstrap_trend,
    rate_condition_table,
    run_experiment,
)
