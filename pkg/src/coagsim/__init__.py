"""Deterministic simulator and verification suite for self-similar
fat-tail profiles of Smoluchowski's coagulation equation."""

from .config import ConfigError, RunConfig, dumps_config, load_config, parse_config, run_config
from .dual import (
    DualField,
    QTailReport,
    SubsolutionReport,
    adjoint_consistency,
    find_m_star,
    q_tail_bound,
    solve_dual,
    subsolution_bound,
)
from .forward import (
    EvolutionState,
    GronwallReport,
    IntegrationError,
    SimulationResult,
    Trajectory,
    evolve,
    gain,
    gronwall_check,
    loss_rate,
    mild_step,
    rearrangement_residual,
    rescaled_trajectory,
    simulate,
)
from .kernel import (
    CutoffParams,
    KernelSpec,
    constant_kernel,
    eval_cutoff,
    eval_kernel,
    eval_regularized,
    product_kernel,
    sum_kernel,
    zero_kernel,
)
from .measure import (
    EnvelopeReport,
    GridMeasure,
    Params,
    cumulative_mass,
    dyadic_tail_integral,
    envelope_check_lower,
    envelope_check_upper,
    from_csv,
    geometric_grid,
    power_law_init,
    refit_tail,
    to_csv,
    xrho_dist,
    xrho_norm,
)
from .stablecdf import (
    StableProfile,
    WTable,
    subsolution_profile,
    t3e4_residual,
    w_deriv,
    w_eval,
    w_laplace,
    w_table,
)
from .stationary import (
    ContinuationReport,
    StationaryResult,
    decay0_residual,
    density_at,
    find_stationary,
    gain_flux,
    lambda_continuation,
    tail_fit,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContinuationReport",
    "CutoffParams",
    "DualField",
    "EnvelopeReport",
    "EvolutionState",
    "GridMeasure",
    "GronwallReport",
    "IntegrationError",
    "KernelSpec",
    "Params",
    "QTailReport",
    "RunConfig",
    "SimulationResult",
    "StableProfile",
    "StationaryResult",
    "SubsolutionReport",
    "Trajectory",
    "WTable",
    "adjoint_consistency",
    "constant_kernel",
    "cumulative_mass",
    "decay0_residual",
    "density_at",
    "dumps_config",
    "dyadic_tail_integral",
    "envelope_check_lower",
    "envelope_check_upper",
    "eval_cutoff",
    "eval_kernel",
    "eval_regularized",
    "evolve",
    "find_m_star",
    "find_stationary",
    "from_csv",
    "gain",
    "gain_flux",
    "geometric_grid",
    "gronwall_check",
    "lambda_continuation",
    "load_config",
    "loss_rate",
    "mild_step",
    "parse_config",
    "power_law_init",
    "product_kernel",
    "q_tail_bound",
    "rearrangement_residual",
    "refit_tail",
    "rescaled_trajectory",
    "run_config",
    "simulate",
    "solve_dual",
    "subsolution_bound",
    "subsolution_profile",
    "sum_kernel",
    "t3e4_residual",
    "tail_fit",
    "to_csv",
    "w_deriv",
    "w_eval",
    "w_laplace",
    "w_table",
    "xrho_dist",
    "xrho_norm",
    "zero_kernel",
]
