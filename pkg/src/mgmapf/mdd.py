"""Per-agent time expansion pruned by the spanning-tree test.

A node ``v^t`` is kept when the agent can be at ``v`` by time ``t`` and the
spanning-tree bound from the start over ``goals | {v}`` fits in the
expansion depth.  Nodes that cannot continue to the last level are then
pruned backwards.
"""

from __future__ import annotations

from dataclasses import dataclass

from mgmapf.distance import DistanceOracle
from mgmapf.errors import InfeasibleError
from mgmapf.instance import Instance


@dataclass(frozen=True)
class Mdd:
    agent: int
    depth: int  # t_M
    levels: tuple[frozenset[int], ...]
    edges: tuple[tuple[tuple[int, int], ...], ...]  # edges[t]: (u, v) for u^t -> v^(t+1)

    def __contains__(self, node: tuple[int, int]) -> bool:
        v, t = node
        return 0 <= t <= self.depth and v in self.levels[t]

    def successors(self, v: int, t: int) -> list[int]:
        return [b for a, b in self.edges[t] if a == v]

    def contains_path(self, path) -> bool:
        """Is ``path`` (padded by waiting to the depth) a directed path here?"""
        if not path or len(path) - 1 > self.depth:
            return False
        padded = list(path) + [path[-1]] * (self.depth + 1 - len(path))
        if padded[0] not in self.levels[0]:
            return False
        edge_sets = self._edge_sets()
        return all((padded[t], padded[t + 1]) in edge_sets[t] for t in range(self.depth))

    def _edge_sets(self) -> list[set[tuple[int, int]]]:
        cached = self.__dict__.get("_edge_cache")
        if cached is None:
            cached = [set(level) for level in self.edges]
            object.__setattr__(self, "_edge_cache", cached)
        return cached

    def dump(self) -> str:
        return "".join(f"t={t}: {' '.join(map(str, sorted(level)))}\n"
                       for t, level in enumerate(self.levels))


def build_mdd(instance: Instance, agent: int, depth: int,
              oracle: DistanceOracle | None = None) -> Mdd:
    oracle = oracle or DistanceOracle(instance.graph)
    graph = instance.graph
    start = instance.starts[agent]
    goals = instance.goals[agent]
    from_start = oracle.distances_from(start)
    for g in goals:
        if from_start[g] < 0:
            raise InfeasibleError(f"agent {agent}: goal {g} unreachable from {start}")
    if depth < 0:
        raise ValueError("depth must be non-negative")

    # the tree test does not depend on t, so evaluate it once per vertex
    fits = [
        from_start[v] >= 0 and oracle.mst_lower_bound(start, (*goals, v)) <= depth
        for v in range(graph.vertex_count)
    ]
    levels = [
        {v for v in range(graph.vertex_count) if fits[v] and 0 <= from_start[v] <= t}
        for t in range(depth + 1)
    ]
    levels[0] = {start} if fits[start] else set()

    edges: list[list[tuple[int, int]]] = []
    for t in range(depth):
        nxt = levels[t + 1]
        edges.append([(u, v) for u in sorted(levels[t])
                      for v in (u, *graph.adjacency[u]) if v in nxt])

    # backward pass: drop nodes without a continuation to the last level
    for t in range(depth - 1, -1, -1):
        alive_next = levels[t + 1]
        edges[t] = [(u, v) for u, v in edges[t] if v in alive_next]
        levels[t] = {u for u, _ in edges[t]}
    # forward pass: drop nodes not reachable from the start
    for t in range(depth):
        edges[t] = [(u, v) for u, v in edges[t] if u in levels[t]]
        levels[t + 1] = {v for _, v in edges[t]}

    return Mdd(agent, depth, tuple(frozenset(level) for level in levels),
               tuple(tuple(sorted(e)) for e in edges))


def mdd_stats(mdd: Mdd) -> tuple[int, int]:
    return sum(len(level) for level in mdd.levels), sum(len(e) for e in mdd.edges)
