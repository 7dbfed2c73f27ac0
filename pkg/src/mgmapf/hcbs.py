"""Hamiltonian conflict-based search.

Three nested searches:

* a conflict tree over collision constraints, expanded best-first by
  sum-of-costs (ties: fewer constraints, then FIFO);
* per agent, A* over goal orderings; a node is (vertex, arrival time,
  visited-goal mask) and its heuristic is the spanning-tree bound over the
  goals still open;
* per ordering step, a time-expanded A* for a constraint-respecting segment.

Constraints only reach up to some time ``H`` (the *stationary time*); from
``H`` on the time-expanded graph no longer changes.  Two consequences are
used below: a segment stream only needs arrivals up to the first one at or
after ``H`` (any later arrival is a time-shifted copy of that one), and a
plan whose last goal is reached before ``H`` must carry an escape suffix
reaching ``H`` so that parking at its final vertex is safe forever.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from mgmapf.distance import DistanceOracle
from mgmapf.errors import InfeasibleError, NoSolutionError, SolverTimeout
from mgmapf.instance import (Constraint, Graph, Instance, Plan, Solution,
                             agent_cost, find_collisions)


_EMPTY: frozenset = frozenset()


class ConstraintTable:
    def __init__(self, constraints: Iterable[Constraint] = ()):
        self.vertex_at: dict[int, set[int]] = {}  # t -> forbidden vertices
        self.edge_at: dict[int, set[tuple[int, int]]] = {}  # t -> forbidden moves t -> t+1
        stationary = 0
        for c in constraints:
            if c.kind == "vertex":
                self.vertex_at.setdefault(c.time, set()).add(c.location)
                stationary = max(stationary, c.time)
            else:
                self.edge_at.setdefault(c.time, set()).add(tuple(c.location))
                stationary = max(stationary, c.time + 1)
        self.stationary = stationary

    def allowed(self, u: int, v: int, t: int) -> bool:
        """May the agent go from u at time t to v at time t + 1?"""
        if v in self.vertex_at.get(t + 1, _EMPTY):
            return False
        return u == v or (u, v) not in self.edge_at.get(t, _EMPTY)

    def step(self, t: int) -> tuple[set[int] | frozenset, set[tuple[int, int]] | frozenset]:
        """Forbidden arrival vertices at t + 1 and forbidden moves t -> t + 1."""
        return self.vertex_at.get(t + 1, _EMPTY), self.edge_at.get(t, _EMPTY)

    def __bool__(self) -> bool:
        return bool(self.vertex_at or self.edge_at)


def _layer(adjacency, current, table: ConstraintTable, t: int) -> dict[int, int]:
    blocked, banned = table.step(t)
    nxt: dict[int, int] = {}
    for x in current:
        if x not in blocked and x not in nxt:
            nxt[x] = x
        for y in adjacency[x]:
            if y not in nxt and y not in blocked and (x, y) not in banned:
                nxt[y] = x
    return nxt


def segment_search(graph: Graph, start: tuple[int, int], target: int,
                   constraints: ConstraintTable | Iterable[Constraint] = (),
                   horizon: int | None = None,
                   oracle: DistanceOracle | None = None,
                   stats: dict | None = None) -> Iterator[list[int]]:
    """Yield constraint-respecting paths from ``start = (u, t0)`` to ``target``
    in strictly increasing arrival time (arrival >= t0 + 1).

    The first path is the earliest arrival.  Later arrivals are produced only
    up to the first one at or after the stationary time of ``constraints``.
    """
    table = constraints if isinstance(constraints, ConstraintTable) else ConstraintTable(constraints)
    oracle = oracle or DistanceOracle(graph)
    u, t0 = start
    stationary = table.stationary
    if horizon is None:
        horizon = max(t0, stationary) + graph.vertex_count
    to_target = oracle.distances_from(target)
    if to_target[u] < 0:
        return

    if stationary <= t0:
        path = [u, u] if u == target else oracle.shortest_path(u, target)
        if stats is not None:
            stats["low_expansions"] = stats.get("low_expansions", 0) + len(path)
        yield path
        return

    first = _earliest_arrival(graph, u, t0, target, table, horizon, to_target, stats)
    if first is None:
        return
    yield first
    earliest = t0 + len(first) - 1
    if earliest >= stationary:
        return

    # later arrivals: layered reachability with parent pointers
    layers: list[dict[int, int]] = [{u: -1}]
    adjacency = graph.adjacency
    for t in range(t0, horizon):
        current = layers[-1]
        nxt = _layer(adjacency, current, table, t)
        if stats is not None:
            stats["low_expansions"] = stats.get("low_expansions", 0) + len(current)
        if not nxt:
            return
        layers.append(nxt)
        arrival = t + 1
        if arrival > earliest and target in nxt:
            yield _unwind(layers, target)
            if arrival >= stationary:
                return


def _unwind(layers: list[dict[int, int]], end: int) -> list[int]:
    path = [end]
    for layer in reversed(layers[1:]):
        path.append(layer[path[-1]])
    path.reverse()
    return path


def _earliest_arrival(graph: Graph, u: int, t0: int, target: int, table: ConstraintTable,
                      horizon: int, to_target: list[int], stats: dict | None) -> list[int] | None:
    adjacency = graph.adjacency
    min_arrival = t0 + 1

    def h(x: int, t: int) -> int:
        return max(to_target[x], min_arrival - t)

    counter = itertools.count()
    h0 = h(u, t0)
    heap = [(t0 + h0, h0, next(counter), u, t0)]
    parent = {(u, t0): None}
    expansions = 0
    found = None
    while heap:
        _, _, _, x, t = heapq.heappop(heap)
        if x == target and t >= min_arrival:
            found = (x, t)
            break
        expansions += 1
        if t >= horizon:
            continue
        blocked, banned = table.step(t)
        for y in (x, *adjacency[x]):
            if to_target[y] < 0 or (y, t + 1) in parent or y in blocked \
                    or (y != x and (x, y) in banned):
                continue
            parent[(y, t + 1)] = (x, t)
            hy = h(y, t + 1)
            heapq.heappush(heap, (t + 1 + hy, hy, next(counter), y, t + 1))
    if stats is not None:
        stats["low_expansions"] = stats.get("low_expansions", 0) + expansions
    if found is None:
        return None
    path = []
    node = found
    while node is not None:
        path.append(node[0])
        node = parent[node]
    path.reverse()
    return path


def _escape(graph: Graph, v: int, t: int, table: ConstraintTable) -> list[int] | None:
    """Vertices for times t+1..H keeping the agent safe until the stationary
    time H, preferring to stay put; [] when t >= H, None when impossible."""
    stationary = table.stationary
    if t >= stationary:
        return []
    layers: list[dict[int, int]] = [{v: -1}]
    adjacency = graph.adjacency
    for step in range(t, stationary):
        nxt = _layer(adjacency, layers[-1], table, step)
        if not nxt:
            return None
        layers.append(nxt)
    final = v if v in layers[-1] else min(layers[-1])
    return _unwind(layers, final)[1:]


@dataclass(order=True)
class _CtEntry:
    soc: int
    n_constraints: int
    seq: int
    constraints: frozenset = field(compare=False)
    plans: tuple = field(compare=False)


class Hcbs:
    """One solver session over an instance; not shared across threads."""

    def __init__(self, instance: Instance, oracle: DistanceOracle | None = None):
        self.instance = instance
        self.oracle = oracle or DistanceOracle(instance.graph)
        self.stats = {"ct_expanded": 0, "ct_generated": 0, "replans": 0,
                      "mid_expansions": 0, "low_expansions": 0}
        self.deadline: float | None = None
        self._plans: dict[tuple[int, frozenset], Plan | None] = {}

    def _check_deadline(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise SolverTimeout("HCBS exceeded deadline", self.stats)

    def plan_agent(self, agent: int, constraints: Iterable[Constraint] = ()) -> Plan | None:
        """Minimal-completion plan for ``agent`` under its constraints, or None."""
        own = frozenset(c for c in constraints if c.agent == agent)
        key = (agent, own)
        if key not in self._plans:
            self._plans[key] = self._plan(agent, own)
        return self._plans[key]

    def _plan(self, agent: int, constraints: frozenset[Constraint]) -> Plan | None:
        instance, oracle, graph = self.instance, self.oracle, self.instance.graph
        start = instance.starts[agent]
        goals = instance.goals[agent]
        table = ConstraintTable(constraints)
        bits = {g: 1 << b for b, g in enumerate(goals)}
        full = (1 << len(goals)) - 1
        self.stats["replans"] += 1

        def remaining(mask: int) -> list[int]:
            return [g for g in goals if not mask & bits[g]]

        h0 = oracle.mst_lower_bound(start, goals)
        # node: (vertex, time, mask, parent index, segment)
        nodes: list[tuple[int, int, int, int, list[int]]] = [(start, 0, 0, -1, [start])]
        heap = [(h0, h0, 0)]
        seen = {(start, 0, 0)}
        seq = itertools.count(1)
        max_f = 0
        while heap:
            f, _, index = heapq.heappop(heap)
            max_f = max(max_f, f)
            v, t, mask, _, _ = nodes[index]
            self.stats["mid_expansions"] += 1
            if self.stats["mid_expansions"] % 64 == 1:
                self._check_deadline()
            if mask == full:
                suffix = _escape(graph, v, t, table)
                if suffix is None:
                    continue
                path = self._assemble(nodes, index) + suffix
                cost = agent_cost(path, goals)
                assert max_f <= t, "ordering search expanded beyond the plan cost"
                return Plan(tuple(path), cost)
            for goal in remaining(mask):
                for segment in segment_search(graph, (v, t), goal, table, oracle=oracle,
                                              stats=self.stats):
                    arrival = t + len(segment) - 1
                    new_mask = mask
                    for x in segment[1:]:
                        new_mask |= bits.get(x, 0)
                    key = (goal, arrival, new_mask)
                    if key in seen:
                        continue
                    seen.add(key)
                    h = oracle.mst_lower_bound(goal, remaining(new_mask))
                    nodes.append((goal, arrival, new_mask, index, segment))
                    heapq.heappush(heap, (arrival + h, h, next(seq)))
        return None

    @staticmethod
    def _assemble(nodes, index: int) -> list[int]:
        pieces = []
        while index >= 0:
            _, _, _, parent, segment = nodes[index]
            pieces.append(segment if parent < 0 else segment[1:])
            index = parent
        path: list[int] = []
        for piece in reversed(pieces):
            path.extend(piece)
        return path

    def solve(self, cost_cap: int | None = None, deadline: float | None = None) -> Solution:
        self.deadline = deadline
        instance = self.instance
        for i, (s, goals) in enumerate(zip(instance.starts, instance.goals)):
            try:
                self.oracle.mst_lower_bound(s, goals)
            except InfeasibleError as exc:
                raise InfeasibleError(f"agent {i}: {exc}") from None
        plans = []
        for i in range(instance.agent_count):
            plan = self.plan_agent(i)
            if plan is None:
                raise NoSolutionError(f"agent {i} has no plan")
            plans.append(plan)
        seq = itertools.count()
        root = _CtEntry(sum(p.completion_time for p in plans), 0, next(seq), frozenset(), tuple(plans))
        open_list = [root]
        self.stats["ct_generated"] = 1
        # equal constraint sets yield equal plans, so a repeat is a redundant subtree
        generated = {root.constraints}
        last_key = -1
        while open_list:
            self._check_deadline()
            node = heapq.heappop(open_list)
            assert node.soc >= last_key, "conflict tree keys must not decrease"
            last_key = node.soc
            if cost_cap is not None and node.soc > cost_cap:
                break
            self.stats["ct_expanded"] += 1
            collisions = find_collisions([p.path for p in node.plans])
            if not collisions:
                return Solution(node.plans, dict(self.stats))
            c = collisions[0]
            i, j = c.agents
            if c.kind == "vertex":
                branches = [Constraint(i, "vertex", c.location, c.time),
                            Constraint(j, "vertex", c.location, c.time)]
            else:
                u, v = c.location
                branches = [Constraint(i, "edge", (u, v), c.time),
                            Constraint(j, "edge", (v, u), c.time)]
            for con in branches:
                constraints = node.constraints | {con}
                if constraints in generated:
                    continue
                generated.add(constraints)
                plan = self.plan_agent(con.agent, constraints)
                if plan is None:
                    continue
                plans = list(node.plans)
                plans[con.agent] = plan
                soc = sum(p.completion_time for p in plans)
                heapq.heappush(open_list, _CtEntry(soc, len(constraints), next(seq),
                                                   constraints, tuple(plans)))
                self.stats["ct_generated"] += 1
        cap = "" if cost_cap is None else f" within cap {cost_cap}"
        raise NoSolutionError(f"no solution{cap}")


def plan_agent(instance: Instance, agent: int, constraints: Iterable[Constraint] = (),
               oracle: DistanceOracle | None = None) -> Plan | None:
    return Hcbs(instance, oracle).plan_agent(agent, constraints)


def solve_hcbs(instance: Instance, cost_cap: int | None = None,
               deadline: float | None = None) -> Solution:
    return Hcbs(instance).solve(cost_cap, deadline)


def format_stats(stats: dict) -> str:
    return "".join(f"{key}={value}\n" for key, value in stats.items())


def individual_lower_bounds(instance: Instance, oracle: DistanceOracle | None = None,
                            deadline: float | None = None) -> list[int]:
    """Exact unconstrained optimum of every agent on its own."""
    solver = Hcbs(instance, oracle)
    solver.deadline = deadline
    bounds = []
    for i in range(instance.agent_count):
        plan = solver.plan_agent(i)
        if plan is None:
            raise InfeasibleError(f"agent {i} cannot visit all of its goals")
        bounds.append(plan.completion_time)
    return bounds
