import itertools
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from mgmapf.distance import UNREACHABLE, DistanceOracle, mst_lower_bound
from mgmapf.errors import InfeasibleError
from mgmapf.instance import Graph

from naive import all_pairs, covering_walk_cost
from suite import fixture, random_connected_graph

# F2 star ids: 0 = top leaf, 1 = west leaf, 2 = center, 3 = east leaf
TOP, WEST, CENTER, EAST = 0, 1, 2, 3


def test_path_distance():
    assert DistanceOracle(fixture("F1")).dist(0, 3) == 3


def test_star_leaf_to_leaf():
    assert DistanceOracle(fixture("F2")).dist(WEST, EAST) == 2


def test_grid_corner_to_corner():
    assert DistanceOracle(fixture("F4")).dist(0, 8) == 4


def test_unreachable_and_self():
    oracle = DistanceOracle(Graph.from_edges(3, [(0, 1)]))
    assert oracle.dist(0, 2) == UNREACHABLE == math.inf
    assert oracle.dist(2, 2) == 0
    assert oracle.shortest_path(0, 2) is None
    assert oracle.shortest_path(0, 1) == [0, 1]


def test_mst_examples():
    assert mst_lower_bound(fixture("F1"), 0, [3]) == 3
    assert mst_lower_bound(fixture("F2"), CENTER, [TOP, WEST, EAST]) == 3
    assert mst_lower_bound(fixture("F1"), 1, [0, 3]) == 3


def test_mst_is_strict_on_the_path():
    d = all_pairs(fixture("F1").adjacency)
    assert covering_walk_cost(d, 1, [0, 3]) == 4


def test_mst_trivial_terminal_sets():
    oracle = DistanceOracle(fixture("F4"))
    assert oracle.mst_lower_bound(4, []) == 0
    assert oracle.mst_lower_bound(4, [4]) == 0


def test_adding_a_hub_can_lower_the_tree():
    oracle = DistanceOracle(fixture("F2"))
    assert oracle.mst_lower_bound(TOP, [WEST, EAST]) == 4
    assert oracle.mst_lower_bound(TOP, [WEST, EAST, CENTER]) == 3


def test_disconnected_terminals():
    with pytest.raises(InfeasibleError, match="disconnected terminals"):
        mst_lower_bound(Graph.from_edges(3, [(0, 1)]), 0, [1, 2])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distances_match_floyd_warshall(seed):
    graph = random_connected_graph(random.Random(seed), 9)
    d = all_pairs(graph.adjacency)
    oracle = DistanceOracle(graph)
    for u in range(graph.vertex_count):
        for v in range(graph.vertex_count):
            assert oracle.dist(u, v) == d[u][v]
        for v in range(graph.vertex_count):
            path = oracle.shortest_path(u, v)
            assert path[0] == u and path[-1] == v and len(path) - 1 == d[u][v]
            assert all(b in graph.adjacency[a] for a, b in zip(path, path[1:]))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mst_bound_properties(seed):
    rng = random.Random(seed)
    graph = random_connected_graph(rng, 8)
    n = graph.vertex_count
    d = all_pairs(graph.adjacency)
    oracle = DistanceOracle(graph)
    u = rng.randrange(n)
    terminals = rng.sample(range(n), rng.randint(0, min(4, n)))
    bound = oracle.mst_lower_bound(u, terminals)
    nodes = {u, *terminals}
    assert bound <= covering_walk_cost(d, u, terminals)
    assert (bound == 0) == (len(nodes) <= 1)
    if len(nodes) > 1:
        closest = min(d[a][b] for a, b in itertools.combinations(nodes, 2))
        assert bound >= (len(nodes) - 1) * closest
    for extra in range(n):
        # a metric-closure tree can shrink by at most half when a hub is added
        assert 2 * oracle.mst_lower_bound(u, [*terminals, extra]) >= bound
    for v in terminals:
        rest = [t for t in terminals if t != v]
        assert bound <= d[u][v] + oracle.mst_lower_bound(v, rest)
