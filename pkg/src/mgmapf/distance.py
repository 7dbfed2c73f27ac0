"""Unit-cost shortest-path distances and the spanning-tree lower bound on
covering-walk cost.

The bound is the minimum spanning tree of the metric closure over the
terminal set ``{u} | U``.  Every walk that starts at ``u`` and visits all of
``U`` induces a spanning tree of that closure of no greater weight, so the
tree cost never exceeds the cheapest covering walk.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Iterable

from mgmapf.errors import InfeasibleError
from mgmapf.instance import Graph

UNREACHABLE = math.inf


class DistanceOracle:
    """Breadth-first distances, computed lazily per source and cached.

    The caches are plain dicts; give each solver thread its own oracle.
    """

    def __init__(self, graph: Graph):
        self.graph = graph
        self._dist: dict[int, list[int]] = {}
        self._parent: dict[int, list[int]] = {}
        self._mst: dict[tuple[int, frozenset[int]], int] = {}

    def _bfs(self, source: int) -> list[int]:
        dist = self._dist.get(source)
        if dist is not None:
            return dist
        adjacency = self.graph.adjacency
        dist = [-1] * len(adjacency)
        parent = [-1] * len(adjacency)
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for v in adjacency[u]:
                if dist[v] < 0:
                    dist[v] = du
                    parent[v] = u
                    queue.append(v)
        self._dist[source] = dist
        self._parent[source] = parent
        return dist

    def dist(self, u: int, v: int) -> float:
        d = self._bfs(u)[v]
        return UNREACHABLE if d < 0 else d

    def distances_from(self, u: int) -> list[int]:
        """Raw distance array from ``u``; -1 marks unreachable vertices."""
        return self._bfs(u)

    def shortest_path(self, u: int, v: int) -> list[int] | None:
        """A shortest vertex sequence from u to v (inclusive), or None."""
        self._bfs(v)
        parent = self._parent[v]
        if u != v and parent[u] < 0:
            return None
        path = [u]
        while path[-1] != v:
            path.append(parent[path[-1]])
        return path

    def mst_lower_bound(self, u: int, terminals: Iterable[int]) -> int:
        rest = frozenset(terminals) - {u}
        key = (u, rest)
        cached = self._mst.get(key)
        if cached is not None:
            return cached
        cost = self._prim((u, *sorted(rest)))
        self._mst[key] = cost
        return cost

    def _prim(self, nodes: tuple[int, ...]) -> int:
        if len(nodes) <= 1:
            return 0
        rows = [self._bfs(x) for x in nodes]
        best = [rows[0][y] for y in nodes]
        in_tree = [False] * len(nodes)
        in_tree[0] = True
        total = 0
        for _ in range(len(nodes) - 1):
            pick, pick_cost = -1, None
            for j, d in enumerate(best):
                if in_tree[j]:
                    continue
                if d < 0:
                    raise InfeasibleError(f"disconnected terminals: {nodes[0]} and {nodes[j]}")
                if pick_cost is None or d < pick_cost:
                    pick, pick_cost = j, d
            in_tree[pick] = True
            total += pick_cost
            row = rows[pick]
            for j, y in enumerate(nodes):
                if not in_tree[j] and row[y] >= 0 and (best[j] < 0 or row[y] < best[j]):
                    best[j] = row[y]
        return total


def mst_lower_bound(graph_or_oracle: Graph | DistanceOracle, u: int, terminals: Iterable[int]) -> int:
    oracle = graph_or_oracle if isinstance(graph_or_oracle, DistanceOracle) \
        else DistanceOracle(graph_or_oracle)
    return oracle.mst_lower_bound(u, terminals)
