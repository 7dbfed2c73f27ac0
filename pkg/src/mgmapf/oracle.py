"""Exhaustive uniform-cost search over joint configurations.

Ground truth for the other solvers: every agent may wait or move on every
step (finished agents included, at no cost), vertex and edge collisions are
rejected, and a step costs the number of agents that had not finished
before it.  Only meant for toy instances.
"""

from __future__ import annotations

import heapq
import itertools
import time

from mgmapf.errors import NoSolutionError, SolverTimeout, StateLimitError
from mgmapf.instance import Instance, Solution, make_plan

DEFAULT_MAX_STATES = 2_000_000


def solve_optimal(instance: Instance, soc_cap: int | None = None,
                  max_states: int = DEFAULT_MAX_STATES,
                  deadline: float | None = None) -> Solution:
    graph = instance.graph
    k = instance.agent_count
    bits = []
    full = []
    for goals in instance.goals:
        bits.append({g: 1 << b for b, g in enumerate(goals)})
        full.append((1 << len(goals)) - 1)
    options = [(v, *graph.adjacency[v]) for v in range(graph.vertex_count)]

    start = (tuple(instance.starts), (0,) * k)
    best = {start: 0}
    parent: dict[tuple, tuple | None] = {start: None}
    heap = [(0, 0, start)]
    counter = itertools.count(1)
    expanded = 0
    while heap:
        g, _, state = heapq.heappop(heap)
        if g > best[state]:
            continue
        if soc_cap is not None and g > soc_cap:
            break
        positions, masks = state
        if all(m == f for m, f in zip(masks, full)):
            return _reconstruct(instance, parent, state, expanded)
        expanded += 1
        if deadline is not None and expanded % 512 == 1 and time.monotonic() > deadline:
            raise SolverTimeout("oracle exceeded deadline", {"expanded": expanded})
        step = g + sum(1 for m, f in zip(masks, full) if m != f)
        for child in _joint_moves(positions, masks, options, bits):
            old = best.get(child)
            if old is None or step < old:
                if old is None and len(best) >= max_states:
                    raise StateLimitError(f"more than {max_states} joint states")
                best[child] = step
                parent[child] = state
                heapq.heappush(heap, (step, next(counter), child))
    cap = "" if soc_cap is None else f" within cap {soc_cap}"
    raise NoSolutionError(f"no solution{cap}")


def _joint_moves(positions, masks, options, bits):
    """Collision-free successor states, built agent by agent."""
    occupant = {v: j for j, v in enumerate(positions)}
    partial = [((), ())]
    for i, here in enumerate(positions):
        agent_bits = bits[i]
        mask = masks[i]
        grown = []
        for placed, placed_masks in partial:
            for v in options[here]:
                if v in placed:
                    continue
                # edge collision: an earlier agent j moved from v to here
                j = occupant.get(v, i)
                if j < i and placed[j] == here:
                    continue
                grown.append((placed + (v,), placed_masks + (mask | agent_bits.get(v, 0),)))
        partial = grown
    return partial


def _reconstruct(instance: Instance, parent: dict, state: tuple, expanded: int) -> Solution:
    states = []
    while state is not None:
        states.append(state[0])
        state = parent[state]
    states.reverse()
    plans = tuple(
        make_plan([s[i] for s in states], instance.goals[i])
        for i in range(instance.agent_count)
    )
    return Solution(plans, {"expanded": expanded})
