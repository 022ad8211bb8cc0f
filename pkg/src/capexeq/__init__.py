"""Competitive capacity-expansion equilibrium under stochastic demand.

A library for computing, simulating, and verifying the closed-form
competitive equilibrium of a market where heterogeneous price-taking
producers irreversibly expand production capability while demand follows
a geometric Brownian motion.  Modules:

- population: producer types, market parameters, standing assumptions
- clearing:   aggregate supply, market-clearing price profiles
- control:    single-producer value function and free boundaries
- paths:      Monte Carlo paths, strategies, payoff estimation
- verify:     named check suites with machine-readable results
- cli:        scenario files and batch artifact emission
"""

from .clearing import (
    EquilibriumProfile,
    NumericalError,
    PowerLawStrategy,
    TabulatedStrategy,
    aggregate_I,
    aggregate_I_derivative,
    asymptotic_slope,
)
from .config import ConfigError, Scenario, load_scenario, parse_scenario
from .control import ConstantPhi, ControlSolution, PowerPhi
from .paths import (
    PayoffEstimate,
    PayoffEstimator,
    SimConfig,
    constant_strategy,
    simulate_batch,
    threshold_strategy,
)
from .population import (
    DerivedMarket,
    MarketParams,
    ParameterError,
    ProducerType,
    alpha_bar,
    characteristic_roots,
    derive_market,
    investment_coefficient,
    producer_derived,
    validate_assumptions,
)
from .verify import CheckResult, run_suites

__version__ = "0.1.0"

__all__ = [
    "CheckResult",
    "ConfigError",
    "ConstantPhi",
    "ControlSolution",
    "DerivedMarket",
    "EquilibriumProfile",
    "MarketParams",
    "NumericalError",
    "ParameterError",
    "PayoffEstimate",
    "PayoffEstimator",
    "PowerLawStrategy",
    "PowerPhi",
    "ProducerType",
    "Scenario",
    "SimConfig",
    "TabulatedStrategy",
    "aggregate_I",
    "aggregate_I_derivative",
    "asymptotic_slope",
    "characteristic_roots",
    "constant_strategy",
    "derive_market",
    "investment_coefficient",
    "load_scenario",
    "parse_scenario",
    "run_suites",
    "simulate_batch",
    "threshold_strategy",
    "alpha_bar",
    "producer_derived",
    "validate_assumptions",
]
