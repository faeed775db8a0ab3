"""Treatment effects in the target population of all trial-eligible
individuals, estimated from a randomized trial nested in a cohort."""

from targetpop._core import (
    InputError,
    NumericalError,
    bootstrap_ci,
    calibrate_intercept,
    calibrate_tau_binary,
    estimate,
    fit_glm,
    generate_cohort,
    run_scenario,
    true_effect,
)

__all__ = [
    "InputError",
    "NumericalError",
    "bootstrap_ci",
    "calibrate_intercept",
    "calibrate_tau_binary",
    "estimate",
    "fit_glm",
    "generate_cohort",
    "run_scenario",
    "true_effect",
]
