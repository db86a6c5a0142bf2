"""Chance-constrained day-ahead dispatch of a GES fleet over a radial network."""

from .problem import NOMINAL, VARIANTS, CcoConfig, ProblemDescription, RowBlock, SocCopy, build_problem
from .scenarios import (GES_STREAM, GRID_STREAM, RISK_STREAM, GridScenario, ges_scenarios,
                        grid_scenarios, nominal_fleet, required_scenario_count)
from .solve import (INFEASIBLE, NUMERICAL_FAILURE, OPTIMAL, DispatchSchedule, DispatchSolution,
                    extract_schedule, objective_components, solve_dispatch)
from .verify import Diagnostics, in_sample_violations, verify_solution

__all__ = [
    "NOMINAL", "VARIANTS", "CcoConfig", "ProblemDescription", "RowBlock", "SocCopy", "build_problem",
    "GES_STREAM", "GRID_STREAM", "RISK_STREAM", "GridScenario", "ges_scenarios", "grid_scenarios",
    "nominal_fleet", "required_scenario_count", "INFEASIBLE", "NUMERICAL_FAILURE", "OPTIMAL",
    "DispatchSchedule", "DispatchSolution", "extract_schedule", "objective_components",
    "solve_dispatch", "Diagnostics", "in_sample_violations", "verify_solution",
]
