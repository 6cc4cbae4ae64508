"""Drift-implicit Milstein simulation of the CIR short-rate model.

Layers: `model` holds the closed-form moment analysis (exact CIR moments,
scheme recurrences, biases); `stochastic` the splittable Wiener-increment
streams; `scheme` the one-step map and single-path drivers; `montecarlo`
the ensemble estimators and convergence ladders; `cli` the experiment
harness. `_kernels` dispatches the hot loops to a compiled extension with
a NumPy fallback.
"""

__version__ = "0.1.0"

from ._kernels import available_backends, backend_name
from .model import (
    PAR1,
    PAR2,
    PRESETS,
    CirParams,
    ConditionReport,
    MomentDomain,
    ParameterDomain,
    ThetaAnalysis,
    UnsupportedTheta,
    check_conditions,
    exact_mean,
    exact_second_moment,
    iterate_moments,
    mean_error,
    numerical_mean,
    numerical_second_moment,
    second_moment_bias_sweep,
    second_moment_error,
    theta_coefficients,
)
from .montecarlo import (
    DegenerateFit,
    ErrorLadder,
    InsufficientPaths,
    MomentTrace,
    analytic_error_ladder,
    fit_loglog_slope,
    sample_moments,
    strong_error_ladder,
    weak_error_ladder,
)
from .scheme import (
    DomainViolation,
    OneStepMap,
    PathRun,
    PathState,
    Safety,
    SchemeConfig,
    milstein_step,
    simulate_coupled,
    simulate_path,
    simulate_with,
    theta_milstein_map,
)
from .stochastic import CoupledIncrements, NoiseStream, StreamExhausted, gaussian_block

__all__ = [
    "__version__",
    "available_backends",
    "backend_name",
    "PAR1",
    "PAR2",
    "PRESETS",
    "CirParams",
    "ConditionReport",
    "ThetaAnalysis",
    "ParameterDomain",
    "MomentDomain",
    "UnsupportedTheta",
    "check_conditions",
    "exact_mean",
    "exact_second_moment",
    "theta_coefficients",
    "numerical_mean",
    "numerical_second_moment",
    "iterate_moments",
    "mean_error",
    "second_moment_error",
    "second_moment_bias_sweep",
    "NoiseStream",
    "CoupledIncrements",
    "StreamExhausted",
    "gaussian_block",
    "Safety",
    "SchemeConfig",
    "PathState",
    "PathRun",
    "DomainViolation",
    "milstein_step",
    "simulate_path",
    "simulate_coupled",
    "OneStepMap",
    "theta_milstein_map",
    "simulate_with",
    "MomentTrace",
    "ErrorLadder",
    "InsufficientPaths",
    "DegenerateFit",
    "sample_moments",
    "weak_error_ladder",
    "analytic_error_ladder",
    "strong_error_ladder",
    "fit_loglog_slope",
]
