"""Admission control and pricing for an infinite-server loss queue with congestion costs."""

from .erlang import (
    ErlangTable,
    OccupancyDistribution,
    erlang_b,
    erlang_table,
    expected_occupancy,
    occupancy_distribution,
    partial_power_moment,
)
from .errors import ConsistencyError, DomainError, SimulationError, ThresholdOverflowError
from .model import CostPolynomial, SystemParams
from .observable import (
    ObservableAnalysis,
    admission_price,
    analyze_observable,
    equilibrium_threshold,
    individual_utility,
    revenue,
    revenue_optimal_threshold,
    social_welfare,
    socially_optimal_threshold,
)
from .sim import ServiceDistribution, SimConfig, SimResult, simulate_observable, simulate_unobservable
from .unobservable import (
    UnobservableAnalysis,
    analyze_unobservable,
    entrance_price,
    equilibrium_join_prob,
    optimal_join_prob,
    revenue_unobservable,
)

__version__ = "0.1.0"


__all__ = [
    "ConsistencyError",
    "CostPolynomial",
    "DomainError",
    "ErlangTable",
    "ObservableAnalysis",
    "OccupancyDistribution",
    "ServiceDistribution",
    "SimConfig",
    "SimResult",
    "SimulationError",
    "SystemParams",
    "ThresholdOverflowError",
    "UnobservableAnalysis",
    "admission_price",
    "analyze_observable",
    "analyze_unobservable",
    "entrance_price",
    "equilibrium_join_prob",
    "equilibrium_threshold",
    "erlang_b",
    "erlang_table",
    "expected_occupancy",
    "individual_utility",
    "occupancy_distribution",
    "optimal_join_prob",
    "partial_power_moment",
    "revenue",
    "revenue_optimal_threshold",
    "revenue_unobservable",
    "simulate_observable",
    "simulate_unobservable",
    "social_welfare",
    "socially_optimal_threshold",
]
