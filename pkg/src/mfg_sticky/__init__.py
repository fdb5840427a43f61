"""Mean-field solver and finite-N simulator for a sticky-price
production market with quadratic output-adjustment costs."""

from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    ImaginaryAxisRootError,
    MfgError,
    NoConvergenceError,
    ParameterError,
    ParamsMismatchError,
    RiccatiBlowupError,
    SingularBoundaryError,
    UnstableStepError,
)
from .grids import TimeGrid
from .model import (
    InitialConditions,
    MarketParams,
    Population,
    empirical_distribution,
    epsilon_n,
    validate_params,
)
from .nash import (
    NashLimit,
    nash_cost_closed_form,
    nash_cost_quadrature,
    solve_fixedpoint,
    solve_uniform,
    strategy_nash,
)
from .simulate import (
    SimConfig,
    SimResult,
    deviation_gap,
    estimate_costs,
    passivity_check,
    run_passivity_trial,
    simulate_nash,
    simulate_social,
)
from .social import (
    SocialLimit,
    social_cost_closed_form,
    social_cost_quadrature,
    solve_social_fixedpoint,
    solve_social_uniform,
    strategy_social,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateSpectrumError",
    "ImaginaryAxisRootError",
    "InitialConditions",
    "MarketParams",
    "MfgError",
    "NashLimit",
    "NoConvergenceError",
    "ParameterError",
    "ParamsMismatchError",
    "Population",
    "RiccatiBlowupError",
    "SimConfig",
    "SimResult",
    "SingularBoundaryError",
    "SocialLimit",
    "TimeGrid",
    "UnstableStepError",
    "deviation_gap",
    "empirical_distribution",
    "epsilon_n",
    "estimate_costs",
    "nash_cost_closed_form",
    "nash_cost_quadrature",
    "passivity_check",
    "run_passivity_trial",
    "simulate_nash",
    "simulate_social",
    "social_cost_closed_form",
    "social_cost_quadrature",
    "solve_fixedpoint",
    "solve_social_fixedpoint",
    "solve_social_uniform",
    "solve_uniform",
    "strategy_nash",
    "strategy_social",
    "validate_params",
]
