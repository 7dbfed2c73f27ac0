import random

import pytest
from hypothesis import given, settings, strategies as st

from mgmapf.distance import DistanceOracle
from mgmapf.errors import InfeasibleError
from mgmapf.hcbs import individual_lower_bounds
from mgmapf.instance import Graph, Instance
from mgmapf.mdd import build_mdd, mdd_stats

from suite import fixture, random_connected_graph

TOP, WEST, CENTER, EAST = 0, 1, 2, 3


def one_agent(graph, start, goals):
    return Instance.build(graph, [start], [goals])


def test_one_step_goal():
    mdd = build_mdd(one_agent(fixture("F1"), 0, [1]), 0, 1)
    assert mdd.levels == (frozenset({0}), frozenset({0, 1}))
    assert mdd.edges == (((0, 0), (0, 1)),)


def test_path_grows_one_vertex_per_level():
    mdd = build_mdd(one_agent(fixture("F1"), 0, [3]), 0, 3)
    assert [sorted(level) for level in mdd.levels] == [[0], [0, 1], [0, 1, 2], [0, 1, 2, 3]]
    assert mdd_stats(mdd)[0] == 10


def test_tree_test_excludes_far_vertices():
    # F1 from v2 with goal v1 at t_M = 1: v3 would need a tree of cost 2
    mdd = build_mdd(one_agent(fixture("F1"), 1, [0]), 0, 1)
    assert all(2 not in level and 3 not in level for level in mdd.levels)


def test_single_vertex_graph():
    inst = one_agent(Graph(((),)), 0, [0])
    assert mdd_stats(build_mdd(inst, 0, 0)) == (1, 0)


def test_star_other_leaves_absent():
    mdd = build_mdd(one_agent(fixture("F2"), CENTER, [TOP]), 0, 1)
    assert all(WEST not in level and EAST not in level for level in mdd.levels)
    assert (TOP, 1) in mdd and (WEST, 1) not in mdd


def test_unreachable_goal():
    with pytest.raises(InfeasibleError):
        build_mdd(one_agent(Graph.from_edges(3, [(0, 1)]), 0, [2]), 0, 5)


def test_contains_path_pads_with_waits():
    mdd = build_mdd(one_agent(fixture("F1"), 0, [2]), 0, 4)
    assert mdd.contains_path([0, 1, 2])
    assert not mdd.contains_path([0, 1, 2, 3, 2, 1])
    assert not mdd.contains_path([1, 2])


def test_dump():
    mdd = build_mdd(one_agent(fixture("F1"), 0, [1]), 0, 1)
    assert mdd.dump() == "t=0: 0\nt=1: 0 1\n"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_structure_and_monotonicity(seed):
    rng = random.Random(seed)
    graph = random_connected_graph(rng, 8)
    n = graph.vertex_count
    start = rng.randrange(n)
    inst = one_agent(graph, start, rng.sample(range(n), rng.randint(1, min(3, n))))
    oracle = DistanceOracle(graph)
    lb = individual_lower_bounds(inst, oracle)[0]
    previous = None
    for depth in range(lb, lb + 4):
        mdd = build_mdd(inst, 0, depth, oracle)
        assert mdd.levels[0] == {start}
        for t in range(depth):
            sources = {u for u, _ in mdd.edges[t]}
            targets = {v for _, v in mdd.edges[t]}
            assert sources == mdd.levels[t] and targets == mdd.levels[t + 1]
            assert all(u == v or v in graph.adjacency[u] for u, v in mdd.edges[t])
        nodes, _ = mdd_stats(mdd)
        assert nodes <= (depth + 1) * n
        if previous is not None:
            assert all(previous.levels[t] <= mdd.levels[t] for t in range(previous.depth + 1))
        previous = mdd
