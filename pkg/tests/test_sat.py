import io
import itertools
import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from mgmapf.errors import SolverTimeout
from mgmapf.sat import SatSolver, luby, parse_dimacs

from naive import truth_table_sat


def solver_with(num_vars, clauses):
    s = SatSolver()
    s.new_vars(num_vars)
    for c in clauses:
        s.add_clause(c)
    return s


def random_cnf(rng, max_vars=20, max_clauses=90):
    n = rng.randint(1, max_vars)
    m = rng.randint(0, max_clauses)
    clauses = []
    for _ in range(m):
        width = rng.choice((1, 2, 3, 3, 3, 3, 4)) if n >= 4 else rng.randint(1, n)
        clauses.append([v if rng.random() < 0.5 else -v for v in rng.sample(range(1, n + 1), width)])
    return n, clauses


def satisfies(model, clauses):
    return all(any(model[l] if l > 0 else not model[-l] for l in c) for c in clauses)


def test_luby_prefix():
    assert [luby(i) for i in range(15)] == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]


class TestAddClause:
    def test_tautology_dropped(self):
        s = solver_with(1, [[1, -1]])
        assert s.clauses == []

    def test_contradicting_units(self):
        s = solver_with(1, [[1]])
        assert s.add_clause([-1]) is False
        assert s.solve() is False

    def test_duplicates_removed(self):
        s = solver_with(1, [[1, 1]])
        assert s.clauses == [[1]]

    def test_empty_clause_is_permanent(self):
        s = solver_with(2, [[]])
        s.add_clause([1, 2])
        assert s.solve() is False and s.solve() is False

    def test_undeclared_variable(self):
        s = solver_with(2, [])
        with pytest.raises(ValueError):
            s.add_clause([3])
        with pytest.raises(ValueError):
            s.add_clause([0])


class TestSolve:
    def test_unit_chain(self):
        s = solver_with(2, [[1], [-1, 2]])
        assert s.solve()
        assert s.value(1) and s.value(2)

    def test_pigeonhole_two_into_one(self):
        # p_i: pigeon i sits in the single hole
        s = solver_with(2, [[1], [2], [-1, -2]])
        assert s.solve() is False

    def test_pigeonhole_five_into_four(self):
        s = SatSolver()
        x = {(p, h): s.new_var() for p in range(5) for h in range(4)}
        for p in range(5):
            s.add_clause([x[p, h] for h in range(4)])
        for h in range(4):
            for p, q in itertools.combinations(range(5), 2):
                s.add_clause([-x[p, h], -x[q, h]])
        assert s.solve() is False
        assert s.stats["conflicts"] > 0

    def test_empty_formula(self):
        assert SatSolver().solve()

    def test_assumptions(self):
        s = solver_with(3, [[1, 2], [-1, 3]])
        assert s.solve([-2]) and s.value(1) and s.value(3)
        assert s.solve([1, -3]) is False
        assert s.solve()  # assumptions leave no trace

    def test_incremental_equals_from_scratch(self):
        rng = random.Random(5)
        for _ in range(150):
            n, clauses = random_cnf(rng, 12, 60)
            cut = len(clauses) // 2
            live = solver_with(n, clauses[:cut])
            live.solve()
            for c in clauses[cut:]:
                live.add_clause(c)
            assert live.solve() == solver_with(n, clauses).solve()

    def test_identical_input_identical_model(self):
        rng = random.Random(11)
        for _ in range(40):
            n, clauses = random_cnf(rng, 20, 70)
            a, b = solver_with(n, clauses), solver_with(n, clauses)
            assert (a.solve(), a.model, a.stats) == (b.solve(), b.model, b.stats)

    def test_deadline(self):
        s = SatSolver()
        x = {(p, h): s.new_var() for p in range(10) for h in range(9)}
        for p in range(10):
            s.add_clause([x[p, h] for h in range(9)])
        for h in range(9):
            for p, q in itertools.combinations(range(10), 2):
                s.add_clause([-x[p, h], -x[q, h]])
        with pytest.raises(SolverTimeout):
            s.solve(deadline=time.monotonic())

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_agrees_with_truth_table(self, seed):
        n, clauses = random_cnf(random.Random(seed), 12, 60)
        s = solver_with(n, clauses)
        verdict = s.solve()
        assert verdict == truth_table_sat(n, clauses)
        if verdict:
            assert satisfies(s.model, clauses)


class TestAtMost:
    def test_pair_is_one_clause(self):
        s = solver_with(2, [])
        s.add_at_most([1, 2], 1)
        assert s.clauses == [[-1, -2]]

    def test_zero_bound_is_units(self):
        s = solver_with(3, [])
        s.add_at_most([1, -2, 3], 0)
        assert s.clauses == [[-1], [2], [-3]]

    def test_large_bound_one_uses_counter(self):
        s = solver_with(7, [])
        s.add_at_most(list(range(1, 8)), 1)
        assert s.num_vars > 7

    @pytest.mark.parametrize("bound", [0, 1, 2, 3])
    @pytest.mark.parametrize("size", range(0, 9))
    def test_exact_bound_exhaustive(self, size, bound):
        rng = random.Random(size * 10 + bound)
        lits = [v if rng.random() < 0.5 else -v for v in range(1, size + 1)]
        s = solver_with(size, [])
        s.add_at_most(lits, bound)
        for values in itertools.product((False, True), repeat=size):
            assumption = [v if val else -v for v, val in zip(range(1, size + 1), values)]
            true_lits = sum(1 for lit in lits if values[abs(lit) - 1] == (lit > 0))
            assert s.solve(assumption) == (true_lits <= bound)


class TestDimacs:
    def test_unit_body_line(self):
        s = solver_with(1, [[1]])
        assert s.to_dimacs() == "p cnf 1 1\n1 0\n"

    def test_empty_db(self):
        sink = io.StringIO()
        SatSolver().export_dimacs(sink)
        assert sink.getvalue() == "p cnf 0 0\n"

    def test_round_trip_is_equisatisfiable(self):
        rng = random.Random(3)
        for _ in range(60):
            n, clauses = random_cnf(rng, 15, 70)
            s = solver_with(n, clauses)
            again = parse_dimacs(s.to_dimacs())
            assert again.clauses == s.clauses
            assert again.solve() == s.solve()

    def test_bad_header(self):
        with pytest.raises(ValueError):
            parse_dimacs("p dnf 1 1\n1 0\n")
