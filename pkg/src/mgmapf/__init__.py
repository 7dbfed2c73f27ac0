"""Optimal multi-goal multi-agent path finding.

Two optimal solvers for the sum-of-costs objective, HCBS (conflict-based
search over goal orderings) and SMT-HCBS (lazy SAT compilation), plus an
exhaustive joint-state oracle used as ground truth on small instances.
"""

from mgmapf.errors import (IncompletePlanError, InfeasibleError, MapfError, NoSolutionError,
                           ParseError, SolverTimeout, StateLimitError, StructuralError)
from mgmapf.hcbs import plan_agent, solve_hcbs
from mgmapf.instance import (Constraint, Graph, Instance, Plan, Solution, generate_instance,
                             parse_map, parse_scen, validate)
from mgmapf.oracle import solve_optimal
from mgmapf.smt import solve_smt_hcbs

__all__ = [
    "Constraint", "Graph", "IncompletePlanError", "InfeasibleError", "Instance", "MapfError",
    "NoSolutionError", "ParseError", "Plan", "Solution", "SolverTimeout", "StateLimitError",
    "StructuralError", "generate_instance", "parse_map", "parse_scen", "plan_agent",
    "solve_hcbs", "solve_optimal", "solve_smt_hcbs", "validate",
]
