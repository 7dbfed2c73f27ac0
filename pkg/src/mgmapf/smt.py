"""Lazy SAT compilation (SMT-HCBS).

For a candidate sum-of-costs the formula ``H(SoC)`` describes one path per
agent through its pruned time expansion, makes every goal visited at some
``t >= 1`` and bounds the total lateness with a cardinality constraint.
Collisions between agents are deliberately left out: satisfying models are
checked afterwards and every collision found becomes a binary clause.  When
the formula turns UNSAT the cost goes up by one and the formula is rebuilt,
replaying every recorded conflict.

Expansion depth: with ``LB_i`` the single-agent optimum and
``delta = SoC - sum(LB)``, every agent of a solution within ``SoC`` finishes
by ``LB_i + delta``, so all of them fit in ``t_M = max(LB) + delta`` steps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from mgmapf.distance import DistanceOracle
from mgmapf.errors import MapfError, NoSolutionError, SolverTimeout
from mgmapf.hcbs import individual_lower_bounds
from mgmapf.instance import Instance, Plan, Solution, agent_cost, find_collisions
from mgmapf.mdd import Mdd, build_mdd
from mgmapf.sat import SatSolver

# ("vertex", (i, v, t), (j, v, t)) or ("edge", (i, u, v, t), (j, v, u, t))
ConflictRecord = tuple


@dataclass
class VarMap:
    x: dict[tuple[int, int, int], int] = field(default_factory=dict)       # (agent, v, t)
    e: dict[tuple[int, int, int, int], int] = field(default_factory=dict)  # (agent, u, v, t)
    visited: dict[tuple[int, int, int], int] = field(default_factory=dict)  # (agent, goal, t)
    done: dict[tuple[int, int], int] = field(default_factory=dict)         # (agent, t)
    depth: int = 0
    agents: int = 0


def conflict_clause(record: ConflictRecord, varmap: VarMap) -> list[int] | None:
    """Binary clause forbidding the recorded collision; None when one side
    has no variable (already impossible in this expansion)."""
    kind, first, second = record
    table = varmap.x if kind == "vertex" else varmap.e
    a, b = table.get(first), table.get(second)
    if a is None or b is None:
        return None
    return [-a, -b]


def collision_record(collision) -> ConflictRecord:
    i, j = collision.agents
    t = collision.time
    if collision.kind == "vertex":
        v = collision.location
        return ("vertex", (i, v, t), (j, v, t))
    u, v = collision.location
    return ("edge", (i, u, v, t), (j, v, u, t))


def encode(instance: Instance, mdds: Sequence[Mdd], soc: int, conflicts: Sequence[ConflictRecord],
           lower_bounds: Sequence[int], deadline: float | None = None
           ) -> tuple[SatSolver, VarMap] | None:
    """Build H(soc); None when some goal has no occurrence in its expansion."""
    delta = soc - sum(lower_bounds)
    if delta < 0:
        raise ValueError(f"cost {soc} is below the lower bound {sum(lower_bounds)}")
    depth = mdds[0].depth if mdds else 0
    solver = SatSolver()
    vm = VarMap(depth=depth, agents=len(mdds))
    late: list[int] = []
    for i, mdd in enumerate(mdds):
        if deadline is not None and time.monotonic() > deadline:
            raise SolverTimeout("encoding exceeded deadline", {})
        for t, level in enumerate(mdd.levels):
            for v in sorted(level):
                vm.x[(i, v, t)] = solver.new_var()
        for t, edges in enumerate(mdd.edges):
            for u, v in edges:
                vm.e[(i, u, v, t)] = solver.new_var()

        x, e = vm.x, vm.e
        solver.add_clause([x[(i, instance.starts[i], 0)]])
        for t in range(depth):
            outgoing: dict[int, list[int]] = {}
            incoming: dict[int, list[int]] = {}
            for u, v in mdd.edges[t]:
                var = e[(i, u, v, t)]
                outgoing.setdefault(u, []).append(var)
                incoming.setdefault(v, []).append(var)
                solver.add_clause([-var, x[(i, u, t)]])
                solver.add_clause([-var, x[(i, v, t + 1)]])
            for u in sorted(mdd.levels[t]):
                out = outgoing[u]
                solver.add_clause([-x[(i, u, t)], *out])
                solver.add_at_most(out, 1)
            # redundant: a node is only occupied if some edge enters it
            for v in sorted(mdd.levels[t + 1]):
                solver.add_clause([-x[(i, v, t + 1)], *incoming[v]])
        for t, level in enumerate(mdd.levels):
            solver.add_at_most([x[(i, v, t)] for v in sorted(level)], 1)

        for g in instance.goals[i]:
            occurrences = [x[(i, g, t)] for t in range(1, depth + 1) if (i, g, t) in x]
            if not occurrences:
                return None
            solver.add_clause(occurrences)

        # visited-by-t and done-by-t, only needed below the depth
        lb = lower_bounds[i]
        prev: dict[int, int | None] = {g: None for g in instance.goals[i]}
        for t in range(1, depth):
            for g in instance.goals[i]:
                var = solver.new_var()
                vm.visited[(i, g, t)] = var
                here = x.get((i, g, t))
                before = prev[g]
                solver.add_clause([-var] + [lit for lit in (before, here) if lit is not None])
                for lit in (before, here):
                    if lit is not None:
                        solver.add_clause([-lit, var])
                prev[g] = var
            if t >= lb:
                d = solver.new_var()
                vm.done[(i, t)] = d
                parts = [vm.visited[(i, g, t)] for g in instance.goals[i]]
                for p in parts:
                    solver.add_clause([-d, p])
                solver.add_clause([d, *(-p for p in parts)])
                late.append(-d)

    solver.add_at_most(late, delta)
    for record in conflicts:
        clause = conflict_clause(record, vm)
        if clause is not None:
            solver.add_clause(clause)
    return solver, vm


def extract_paths(solver: SatSolver, vm: VarMap, instance: Instance) -> list[tuple[int, ...]]:
    graph = instance.graph
    by_agent_level: dict[tuple[int, int], list[int]] = {}
    for (i, v, t), var in vm.x.items():
        if solver.value(var):
            by_agent_level.setdefault((i, t), []).append(v)
    paths = []
    for i in range(vm.agents):
        path = []
        for t in range(vm.depth + 1):
            here = by_agent_level.get((i, t), [])
            if len(here) != 1:
                raise MapfError(f"agent {i} occupies {len(here)} vertices at t={t}")
            if path and not graph.is_move(path[-1], here[0]):
                raise MapfError(f"agent {i} jumps {path[-1]} -> {here[0]} at t={t}")
            path.append(here[0])
        paths.append(tuple(path))
    return paths


def _trim(path: tuple[int, ...], keep: int) -> tuple[int, ...]:
    """Drop trailing waits, keeping at least ``path[0..keep]``."""
    end = len(path)
    while end > keep + 1 and path[end - 1] == path[end - 2]:
        end -= 1
    return path[:end]


class SmtHcbs:
    """One solve session; keeps recorded conflicts across cost increments."""

    def __init__(self, instance: Instance, oracle: DistanceOracle | None = None,
                 dump_dir: str | Path | None = None):
        self.instance = instance
        self.oracle = oracle or DistanceOracle(instance.graph)
        self._lower_bounds: list[int] | None = None
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        self.stats = {"soc_iterations": 0, "sat_calls": 0, "refinements": 0,
                      "variables": 0, "clauses": 0}
        self.deadline: float | None = None

    @property
    def lower_bounds(self) -> list[int]:
        if self._lower_bounds is None:
            try:
                self._lower_bounds = individual_lower_bounds(self.instance, self.oracle,
                                                             self.deadline)
            except SolverTimeout:
                raise SolverTimeout("SMT-HCBS exceeded deadline", self.stats) from None
        return self._lower_bounds

    @property
    def soc_lower_bound(self) -> int:
        return sum(self.lower_bounds)

    def depth_for(self, soc: int) -> int:
        return max(self.lower_bounds) + soc - self.soc_lower_bound

    def mdds_for(self, soc: int) -> list[Mdd]:
        depth = self.depth_for(soc)
        mdds = []
        for i in range(self.instance.agent_count):
            self._check_deadline()
            mdds.append(build_mdd(self.instance, i, depth, self.oracle))
        return mdds

    def encode(self, soc: int, conflicts: Sequence[ConflictRecord] = ()):
        try:
            return encode(self.instance, self.mdds_for(soc), soc, conflicts, self.lower_bounds,
                          self.deadline)
        except SolverTimeout:
            raise SolverTimeout("SMT-HCBS exceeded deadline", self.stats) from None

    def _check_deadline(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise SolverTimeout("SMT-HCBS exceeded deadline", self.stats)

    def solve_fixed(self, soc: int, conflicts: list[ConflictRecord] | None = None
                    ) -> tuple[Solution | None, list[ConflictRecord]]:
        if soc < self.soc_lower_bound:
            raise ValueError(f"cost {soc} is below the lower bound {self.soc_lower_bound}")
        conflicts = list(conflicts or [])
        known = set(conflicts)
        built = self.encode(soc, conflicts)
        if built is None:
            return None, conflicts
        solver, vm = built
        iteration = 0
        while True:
            self._check_deadline()
            self._dump(solver, soc, iteration)
            self.stats["sat_calls"] += 1
            self.stats["variables"] = solver.num_vars
            self.stats["clauses"] = len(solver.clauses)
            try:
                sat = solver.solve(deadline=self.deadline)
            except SolverTimeout:
                raise SolverTimeout("SMT-HCBS exceeded deadline", self.stats) from None
            if not sat:
                return None, conflicts
            paths = extract_paths(solver, vm, self.instance)
            collisions = find_collisions(paths)
            if not collisions:
                plans = []
                for path, goals in zip(paths, self.instance.goals):
                    cost = agent_cost(path, goals)
                    plans.append(Plan(_trim(path, cost), cost))
                solution = Solution(tuple(plans), dict(self.stats))
                assert solution.soc <= soc, "cardinality bound failed to limit the cost"
                return solution, conflicts
            for collision in collisions:
                record = collision_record(collision)
                assert record not in known, "model violates a recorded conflict"
                known.add(record)
                conflicts.append(record)
                solver.add_clause(conflict_clause(record, vm))
                self.stats["refinements"] += 1
            iteration += 1

    def _dump(self, solver: SatSolver, soc: int, iteration: int) -> None:
        if self.dump_dir is None:
            return
        self.dump_dir.mkdir(parents=True, exist_ok=True)
        with open(self.dump_dir / f"h_soc{soc}_iter{iteration}.cnf", "w") as sink:
            solver.export_dimacs(sink)

    def solve(self, cost_cap: int | None = None, deadline: float | None = None) -> Solution:
        self.deadline = deadline
        soc = self.soc_lower_bound
        conflicts: list[ConflictRecord] = []
        while True:
            if cost_cap is not None and soc > cost_cap:
                raise NoSolutionError(f"no solution within cap {cost_cap} (last tried {soc - 1})")
            self.stats["soc_iterations"] += 1
            self.stats["last_soc"] = soc
            solution, conflicts = self.solve_fixed(soc, conflicts)
            if solution is not None:
                return Solution(solution.plans, dict(self.stats))
            soc += 1


def solve_smt_hcbs(instance: Instance, cost_cap: int | None = None,
                   deadline: float | None = None, dump_dir: str | Path | None = None) -> Solution:
    return SmtHcbs(instance, dump_dir=dump_dir).solve(cost_cap, deadline)
