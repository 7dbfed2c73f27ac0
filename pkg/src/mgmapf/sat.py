"""A compact incremental CDCL SAT solver.

Two watched literals, first-UIP learning, Luby restarts, phase saving and
activity-based branching (decay 0.95, ties broken by the lower variable
index).  There is no randomness anywhere, so identical clause sequences give
identical verdicts and models.

Clauses may be added between ``solve`` calls; learned clauses stay valid
because the clause set only ever grows.

Literals are non-zero ints in DIMACS style.  Internally, per-literal arrays
are Python lists indexed by the signed literal itself: with capacity ``C``
and list length ``2C + 1``, index ``l`` for ``l > 0`` and ``-l`` (which
wraps to ``2C + 1 - l``) never collide.
"""

from __future__ import annotations

import heapq
import io
import time
from typing import IO, Iterable, Sequence

from mgmapf.errors import SolverTimeout

_RESTART_BASE = 100
_DECAY = 0.95


def luby(i: int) -> int:
    """i-th element (0-based) of the Luby sequence 1 1 2 1 1 2 4 ..."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i %= size
    return 1 << seq


class SatSolver:
    def __init__(self):
        self.num_vars = 0
        self.clauses: list[list[int]] = []  # normalized input clauses
        self.learnts: list[list[int]] = []
        self.unsat = False
        self.model: list[bool] | None = None
        self.stats = {"decisions": 0, "propagations": 0, "conflicts": 0,
                      "learned": 0, "restarts": 0, "solves": 0}

        self._cap = 0
        self._val: list[int] = [0]
        self._watches: list[list[list[int]]] = [[]]
        self._level: list[int] = [0]
        self._reason: list[list[int] | None] = [None]
        self._activity: list[float] = [0.0]
        self._phase: list[bool] = [False]
        self._seen: list[bool] = [False]
        self._trail: list[int] = []
        self._trail_lim: list[int] = []
        self._qhead = 0
        self._heap: list[tuple[float, int]] = []
        self._var_inc = 1.0

    # -- variables and clauses ---------------------------------------------

    def new_var(self) -> int:
        self.num_vars += 1
        v = self.num_vars
        if v > self._cap:
            self._grow(max(16, 2 * self._cap))
        self._level.append(0)
        self._reason.append(None)
        self._activity.append(0.0)
        self._phase.append(False)
        self._seen.append(False)
        heapq.heappush(self._heap, (-0.0, v))
        return v

    def new_vars(self, count: int) -> list[int]:
        return [self.new_var() for _ in range(count)]

    def _grow(self, cap: int) -> None:
        old_cap, old_val, old_w = self._cap, self._val, self._watches
        val = [0] * (2 * cap + 1)
        watches: list[list[list[int]]] = [[] for _ in range(2 * cap + 1)]
        for v in range(1, old_cap + 1):
            val[v], val[-v] = old_val[v], old_val[-v]
            watches[v], watches[-v] = old_w[v], old_w[-v]
        self._cap, self._val, self._watches = cap, val, watches

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause; returns False once the clause set is known UNSAT."""
        clause: list[int] = []
        present = set()
        for lit in lits:
            if lit == 0 or abs(lit) > self.num_vars:
                raise ValueError(f"literal {lit} refers to an undeclared variable")
            if -lit in present:
                return not self.unsat  # tautology
            if lit not in present:
                present.add(lit)
                clause.append(lit)
        self.clauses.append(clause)
        if self.unsat:
            return False
        self._backtrack(0)
        val = self._val
        if any(val[lit] > 0 for lit in clause):
            return True
        live = [lit for lit in clause if val[lit] == 0]
        if not live:
            self.unsat = True
            return False
        if len(live) == 1:
            self._enqueue(live[0], None)
            if self._propagate() is not None:
                self.unsat = True
                return False
            return True
        self._attach(live)
        return True

    def add_at_most(self, lits: Sequence[int], bound: int) -> None:
        """Encode sum(lits) <= bound.

        bound 0 gives unit clauses, bound 1 over at most six literals uses
        pairwise exclusion, everything else a sequential counter.
        """
        if bound < 0:
            raise ValueError("bound must be non-negative")
        lits = list(lits)
        n = len(lits)
        if bound >= n:
            return
        if bound == 0:
            for lit in lits:
                self.add_clause([-lit])
            return
        if bound == 1 and n <= 6:
            for i in range(n):
                for j in range(i + 1, n):
                    self.add_clause([-lits[i], -lits[j]])
            return
        # s[i][j]: at least j+1 of lits[0..i] are true
        k = bound
        s = [self.new_vars(k) for _ in range(n - 1)]
        self.add_clause([-lits[0], s[0][0]])
        for j in range(1, k):
            self.add_clause([-s[0][j]])
        for i in range(1, n - 1):
            x = lits[i]
            self.add_clause([-x, s[i][0]])
            self.add_clause([-s[i - 1][0], s[i][0]])
            for j in range(1, k):
                self.add_clause([-x, -s[i - 1][j - 1], s[i][j]])
                self.add_clause([-s[i - 1][j], s[i][j]])
            self.add_clause([-x, -s[i - 1][k - 1]])
        self.add_clause([-lits[n - 1], -s[n - 2][k - 1]])

    def _attach(self, clause: list[int]) -> None:
        self._watches[clause[0]].append(clause)
        self._watches[clause[1]].append(clause)

    # -- search ------------------------------------------------------------

    def _enqueue(self, lit: int, reason: list[int] | None) -> None:
        v = lit if lit > 0 else -lit
        self._val[lit] = 1
        self._val[-lit] = -1
        self._level[v] = len(self._trail_lim)
        self._reason[v] = reason
        self._trail.append(lit)

    def _propagate(self) -> list[int] | None:
        val = self._val
        watches = self._watches
        trail = self._trail
        level = self._level
        reasons = self._reason
        depth = len(self._trail_lim)
        qhead = self._qhead
        props = 0
        conflict = None
        while qhead < len(trail):
            false_lit = -trail[qhead]
            qhead += 1
            props += 1
            ws = watches[false_lit]
            i = j = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                if val[first] > 0:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if val[lk] >= 0:
                        c[1], c[k] = lk, false_lit
                        watches[lk].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if val[first] < 0:
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        conflict = c
                    else:
                        val[first] = 1
                        val[-first] = -1
                        v = first if first > 0 else -first
                        level[v] = depth
                        reasons[v] = c
                        trail.append(first)
            del ws[j:]
            if conflict is not None:
                break
        self._qhead = qhead
        self.stats["propagations"] += props
        return conflict

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        seen = self._seen
        level = self._level
        trail = self._trail
        depth = len(self._trail_lim)
        learnt = [0]
        counter = 0
        p = 0
        idx = len(trail) - 1
        clause = conflict
        touched = []
        while True:
            for q in (clause if p == 0 else clause[1:]):
                v = q if q > 0 else -q
                if not seen[v] and level[v] > 0:
                    seen[v] = True
                    touched.append(v)
                    self._bump(v)
                    if level[v] >= depth:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(trail[idx])]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            pv = abs(p)
            clause = self._reason[pv]
            seen[pv] = False
            counter -= 1
            if counter == 0:
                break
        learnt[0] = -p
        for v in touched:
            seen[v] = False
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda k: level[abs(learnt[k])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, level[abs(learnt[1])]

    def _bump(self, v: int) -> None:
        act = self._activity
        act[v] += self._var_inc
        if act[v] > 1e100:
            for u in range(1, self.num_vars + 1):
                act[u] *= 1e-100
            self._var_inc *= 1e-100
            self._rebuild_heap()
        elif self._val[v] == 0:
            heapq.heappush(self._heap, (-act[v], v))

    def _rebuild_heap(self) -> None:
        act, val = self._activity, self._val
        self._heap = [(-act[v], v) for v in range(1, self.num_vars + 1) if val[v] == 0]
        heapq.heapify(self._heap)

    def _backtrack(self, target: int) -> None:
        if len(self._trail_lim) <= target:
            return
        val, phase, act, heap = self._val, self._phase, self._activity, self._heap
        cut = self._trail_lim[target]
        for lit in reversed(self._trail[cut:]):
            v = lit if lit > 0 else -lit
            val[lit] = 0
            val[-lit] = 0
            self._reason[v] = None
            phase[v] = lit > 0
            heapq.heappush(heap, (-act[v], v))
        del self._trail[cut:]
        del self._trail_lim[target:]
        self._qhead = len(self._trail)

    def _pick_branch(self) -> int:
        heap, val, act = self._heap, self._val, self._activity
        if len(heap) > 4 * self.num_vars + 1024:
            self._rebuild_heap()
            heap = self._heap
        while heap:
            neg, v = heapq.heappop(heap)
            if val[v] == 0 and -neg == act[v]:
                return v if self._phase[v] else -v
        return 0

    def solve(self, assumptions: Sequence[int] = (), deadline: float | None = None) -> bool:
        """Return True (model in ``self.model``) or False.

        ``deadline`` is a ``time.monotonic()`` value; passing it raises
        SolverTimeout when the search runs past it.
        """
        self.stats["solves"] += 1
        self.model = None
        if self.unsat:
            return False
        self._backtrack(0)
        if self._propagate() is not None:
            self.unsat = True
            return False
        for lit in assumptions:
            if lit == 0 or abs(lit) > self.num_vars:
                raise ValueError(f"assumption {lit} refers to an undeclared variable")
        result = self._search(list(assumptions), deadline)
        if result:
            self.model = [False] + [self._val[v] > 0 for v in range(1, self.num_vars + 1)]
            self._verify(self.model)
        self._backtrack(0)
        return result

    def _search(self, assumptions: list[int], deadline: float | None) -> bool:
        restart_no = 0
        budget = luby(restart_no) * _RESTART_BASE
        conflicts_here = 0
        stats = self.stats
        while True:
            conflict = self._propagate()
            if conflict is not None:
                stats["conflicts"] += 1
                conflicts_here += 1
                if not self._trail_lim:
                    self.unsat = True
                    return False
                learnt, back = self._analyze(conflict)
                self._backtrack(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self.learnts.append(learnt)
                    self._attach(learnt)
                    self._enqueue(learnt[0], learnt)
                stats["learned"] += 1
                self._var_inc /= _DECAY
                if deadline is not None and stats["conflicts"] % 64 == 0 \
                        and time.monotonic() > deadline:
                    self._backtrack(0)
                    raise SolverTimeout("SAT search exceeded deadline", dict(stats))
                continue
            if conflicts_here >= budget:
                stats["restarts"] += 1
                restart_no += 1
                budget = luby(restart_no) * _RESTART_BASE
                conflicts_here = 0
                self._backtrack(0)
                continue
            depth = len(self._trail_lim)
            if depth < len(assumptions):
                lit = assumptions[depth]
                value = self._val[lit]
                if value < 0:
                    return False
                self._trail_lim.append(len(self._trail))
                if value == 0:
                    self._enqueue(lit, None)
                continue
            lit = self._pick_branch()
            if lit == 0:
                return True
            stats["decisions"] += 1
            self._trail_lim.append(len(self._trail))
            self._enqueue(lit, None)

    def _verify(self, model: list[bool]) -> None:
        for clause in self.clauses:
            if not any(model[lit] if lit > 0 else not model[-lit] for lit in clause):
                raise AssertionError(f"model violates clause {clause}")

    def value(self, lit: int) -> bool:
        if self.model is None:
            raise RuntimeError("no model available")
        return self.model[lit] if lit > 0 else not self.model[-lit]

    # -- DIMACS ------------------------------------------------------------

    def export_dimacs(self, sink: IO[str]) -> None:
        sink.write(f"p cnf {self.num_vars} {len(self.clauses)}\n")
        for clause in self.clauses:
            sink.write(" ".join(map(str, clause)) + " 0\n")

    def to_dimacs(self) -> str:
        buf = io.StringIO()
        self.export_dimacs(buf)
        return buf.getvalue()


def parse_dimacs(text: str) -> SatSolver:
    solver = SatSolver()
    pending: list[int] = []
    declared = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad problem line {line!r}")
            declared = int(parts[2])
            solver.new_vars(declared)
            continue
        if declared is None:
            raise ValueError("clause before problem line")
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                solver.add_clause(pending)
                pending = []
            else:
                pending.append(lit)
    if pending:
        solver.add_clause(pending)
    return solver
