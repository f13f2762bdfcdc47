"""Drop box siting and collection-tour planning toolkit.

Selects ballot drop box locations and a ballot-collection tour that minimize
total (fixed plus operational) cost subject to multi-coverage and
minimum-access constraints, via an exact lazy-constraint branch-and-bound
method and a Pareto-frontier local-search heuristic.
"""

from .model import (
    AccessParams,
    EdgeCosts,
    Infeasible,
    Instance,
    Location,
    Solution,
    SolveOptions,
    VoterPopulation,
    access_value,
    annualize_fixed,
    annualize_operational,
    dominance_filter,
    edge_cost_from_travel,
    epsilon_default,
    reformulated_costs,
    validate_instance,
)

__all__ = [
    "AccessParams",
    "EdgeCosts",
    "Infeasible",
    "Instance",
    "Location",
    "Solution",
    "SolveOptions",
    "VoterPopulation",
    "access_value",
    "annualize_fixed",
    "annualize_operational",
    "dominance_filter",
    "edge_cost_from_travel",
    "epsilon_default",
    "reformulated_costs",
    "validate_instance",
]

__version__ = "0.1.0"
