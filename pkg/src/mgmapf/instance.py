"""Problem model: graphs, instances, plans, validation and cost metrics.

Timing conventions used throughout the package:

* a plan is a vertex sequence indexed by timestep, ``path[0]`` is the start;
* goal visits are counted from ``t = 1`` on, so a goal equal to the start
  still has to be re-entered (or waited on) at some later step;
* plans may continue after their completion time at zero cost, and a plan
  shorter than the joint makespan is padded by parking at its last vertex.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from mgmapf.errors import IncompletePlanError, ParseError, StructuralError

PASSABLE = frozenset(".GS")
IMPASSABLE = frozenset("@OTW")


@dataclass(frozen=True)
class Graph:
    adjacency: tuple[tuple[int, ...], ...]
    coords: tuple[tuple[int, int], ...] | None = None
    height: int | None = None
    width: int | None = None

    def __post_init__(self):
        n = len(self.adjacency)
        for u, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"adjacency of {u} must be sorted and duplicate-free")
            for v in nbrs:
                if not 0 <= v < n:
                    raise ValueError(f"vertex {u} lists unknown neighbour {v}")
                if v == u:
                    raise ValueError(f"self-loop at vertex {u}")
                if u not in self.adjacency[v]:
                    raise ValueError(f"asymmetric edge {u}-{v}")
        if self.coords is not None and len(self.coords) != n:
            raise ValueError("coords must have one entry per vertex")

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[tuple[int, int]]) -> Graph:
        nbrs: list[set[int]] = [set() for _ in range(vertex_count)]
        for u, v in edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(tuple(tuple(sorted(s)) for s in nbrs))

    @classmethod
    def grid(cls, rows: Sequence[str]) -> Graph:
        """Build a 4-connected grid graph from map rows (no header)."""
        return _grid_from_rows([r for r in rows], first_line=1)

    @property
    def vertex_count(self) -> int:
        return len(self.adjacency)

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u < v:
                    yield u, v

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def is_move(self, u: int, v: int) -> bool:
        """True for a wait (u == v) or a traversal of an existing edge."""
        return u == v or v in self.adjacency[u]

    def vertex_at(self, row: int, col: int) -> int:
        if self.coords is None:
            raise ValueError("graph has no grid coordinates")
        index = self._coord_index()
        try:
            return index[(row, col)]
        except KeyError:
            raise ValueError(f"cell (row={row}, col={col}) is not passable") from None

    def _coord_index(self) -> dict[tuple[int, int], int]:
        cached = self.__dict__.get("_coord_cache")
        if cached is None:
            cached = {rc: i for i, rc in enumerate(self.coords or ())}
            object.__setattr__(self, "_coord_cache", cached)
        return cached


def _grid_from_rows(rows: list[str], first_line: int) -> Graph:
    height = len(rows)
    width = len(rows[0]) if rows else 0
    ids: dict[tuple[int, int], int] = {}
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"expected {width} cells, got {len(row)}", first_line + r)
        for c, ch in enumerate(row):
            if ch in PASSABLE:
                ids[(r, c)] = len(ids)
            elif ch not in IMPASSABLE:
                raise ParseError(f"unknown cell character {ch!r}", first_line + r)
    adjacency = []
    for (r, c) in ids:
        nbrs = [ids[p] for p in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)) if p in ids]
        adjacency.append(tuple(sorted(nbrs)))
    return Graph(tuple(adjacency), tuple(ids), height, width)


def parse_map(text: str) -> Graph:
    """Read a movingai octile ``.map`` file body."""
    lines = text.splitlines()
    expected = [("type", "octile"), ("height", None), ("width", None)]
    values = {}
    for i, (key, want) in enumerate(expected):
        if i >= len(lines):
            raise ParseError(f"missing '{key}' header", i + 1)
        parts = lines[i].split()
        if len(parts) != 2 or parts[0] != key:
            raise ParseError(f"expected '{key} ...' header, got {lines[i]!r}", i + 1)
        if want is not None and parts[1] != want:
            raise ParseError(f"unsupported map type {parts[1]!r}", i + 1)
        values[key] = parts[1]
    try:
        height = int(values["height"])
        width = int(values["width"])
    except ValueError:
        raise ParseError("height and width must be integers", 2) from None
    if len(lines) < 4 or lines[3].strip() != "map":
        raise ParseError("expected 'map' line", 4)
    rows = [ln.rstrip("\r") for ln in lines[4:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise ParseError(f"expected {height} rows, got {len(rows)}", 5 + len(rows))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"expected {width} cells, got {len(row)}", 5 + r)
    graph = _grid_from_rows(rows, first_line=5)
    return Graph(graph.adjacency, graph.coords, height, width)


def render_map(graph: Graph) -> str:
    """Write a grid graph back out as an octile map ('.' passable, '@' blocked)."""
    if graph.coords is None or graph.height is None or graph.width is None:
        raise ValueError("only grid graphs can be rendered")
    cells = [["@"] * graph.width for _ in range(graph.height)]
    for r, c in graph.coords:
        cells[r][c] = "."
    body = "\n".join("".join(row) for row in cells)
    return f"type octile\nheight {graph.height}\nwidth {graph.width}\nmap\n{body}\n"


@dataclass(frozen=True)
class ScenEntry:
    bucket: int
    map_name: str
    width: int
    height: int
    start: tuple[int, int]  # (x, y) == (column, row)
    goal: tuple[int, int]
    optimal_length: float


def parse_scen(text: str) -> list[ScenEntry]:
    lines = text.splitlines()
    if not lines or lines[0].split() != ["version", "1"]:
        raise ParseError("missing 'version 1' line", 1)
    entries = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 9:
            raise ParseError(f"expected 9 tab-separated fields, got {len(fields)}", lineno)
        try:
            entries.append(ScenEntry(
                bucket=int(fields[0]),
                map_name=fields[1],
                width=int(fields[2]),
                height=int(fields[3]),
                start=(int(fields[4]), int(fields[5])),
                goal=(int(fields[6]), int(fields[7])),
                optimal_length=float(fields[8]),
            ))
        except ValueError as exc:
            raise ParseError(f"bad field value ({exc})", lineno) from None
    return entries


@dataclass(frozen=True)
class Instance:
    graph: Graph
    starts: tuple[int, ...]
    goals: tuple[tuple[int, ...], ...]
    seed: int | None = None

    def __post_init__(self):
        n = self.graph.vertex_count
        if len(self.starts) != len(self.goals):
            raise ValueError("one goal set per agent is required")
        if len(self.starts) > n:
            raise ValueError("more agents than vertices")
        if len(set(self.starts)) != len(self.starts):
            raise ValueError("start vertices must be distinct")
        for i, (s, gs) in enumerate(zip(self.starts, self.goals)):
            if not 0 <= s < n:
                raise ValueError(f"agent {i}: start {s} is not a vertex")
            if not gs:
                raise ValueError(f"agent {i}: empty goal set")
            if list(gs) != sorted(set(gs)):
                raise ValueError(f"agent {i}: goals must be sorted and distinct")
            for g in gs:
                if not 0 <= g < n:
                    raise ValueError(f"agent {i}: goal {g} is not a vertex")

    @classmethod
    def build(cls, graph: Graph, starts: Sequence[int], goals: Sequence[Iterable[int]],
              seed: int | None = None) -> Instance:
        return cls(graph, tuple(starts), tuple(tuple(sorted(set(g))) for g in goals), seed)

    @property
    def agent_count(self) -> int:
        return len(self.starts)

    @property
    def goals_per_agent(self) -> int:
        return max((len(g) for g in self.goals), default=0)


def generate_instance(graph: Graph, scen: Sequence[ScenEntry], k: int, m: int,
                      seed: int) -> Instance:
    """Starts from the first ``k`` scenario entries; ``m`` goals per agent drawn
    uniformly from all scenario goal cells (duplicates within one agent rejected)."""
    if k < 1 or m < 1:
        raise ValueError("k and m must be positive")
    if k > len(scen):
        raise ValueError(f"scenario has {len(scen)} entries, {k} agents requested")
    if k > graph.vertex_count:
        raise ValueError("more agents than vertices")
    pool = [graph.vertex_at(e.goal[1], e.goal[0]) for e in scen]
    if m > len(set(pool)):
        raise ValueError(f"{m} goals per agent requested, scenario has {len(set(pool))} distinct goal cells")
    starts = [graph.vertex_at(e.start[1], e.start[0]) for e in scen[:k]]
    if len(set(starts)) != k:
        raise ValueError("scenario places two agents on one start cell")
    rng = random.Random(seed)
    goals = []
    for _ in range(k):
        picked: list[int] = []
        while len(picked) < m:
            v = pool[rng.randrange(len(pool))]
            if v not in picked:
                picked.append(v)
        goals.append(picked)
    return Instance.build(graph, starts, goals, seed=seed)


@dataclass(frozen=True)
class Plan:
    path: tuple[int, ...]
    completion_time: int

    def at(self, t: int) -> int:
        return self.path[min(t, len(self.path) - 1)]

    @property
    def length(self) -> int:
        return len(self.path) - 1


@dataclass(frozen=True)
class Solution:
    plans: tuple[Plan, ...]
    stats: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def soc(self) -> int:
        return sum(p.completion_time for p in self.plans)

    @property
    def makespan(self) -> int:
        return max((p.length for p in self.plans), default=0)

    def paths(self) -> list[tuple[int, ...]]:
        return [p.path for p in self.plans]


@dataclass(frozen=True, order=True)
class Collision:
    time: int
    agents: tuple[int, int]
    kind: str  # "vertex" or "edge"
    location: int | tuple[int, int]
    """Vertex, or the (u, v) move of ``agents[0]``; ``agents[1]`` moves v -> u."""


@dataclass(frozen=True, order=True)
class Constraint:
    agent: int
    kind: str  # "vertex" or "edge"
    location: int | tuple[int, int]
    time: int

    def __post_init__(self):
        if self.kind == "vertex" and self.time < 1:
            raise ValueError("vertex constraints need time >= 1")
        if self.kind == "edge" and self.time < 0:
            raise ValueError("edge constraints need time >= 0")
        if self.kind not in ("vertex", "edge"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")


@dataclass
class ValidationReport:
    collisions: list[Collision]
    missing_goals: dict[int, tuple[int, ...]]

    @property
    def valid(self) -> bool:
        return not self.collisions and not self.missing_goals


def agent_cost(path: Sequence[int], goals: Iterable[int]) -> int:
    """Smallest t_c such that every goal occurs in ``path[1..t_c]``."""
    remaining = set(goals)
    if not remaining:
        return 0
    for t in range(1, len(path)):
        remaining.discard(path[t])
        if not remaining:
            return t
    raise IncompletePlanError(f"goals {sorted(remaining)} never visited")


def make_plan(path: Sequence[int], goals: Iterable[int]) -> Plan:
    path = tuple(path)
    return Plan(path, agent_cost(path, goals))


def sum_of_costs(solution: Solution) -> int:
    return solution.soc


def makespan(solution: Solution) -> int:
    return solution.makespan


def check_structure(instance: Instance, paths: Sequence[Sequence[int]]) -> None:
    """Raise StructuralError on a bad start, unknown vertex or teleport."""
    if len(paths) != instance.agent_count:
        raise StructuralError(f"{len(paths)} plans for {instance.agent_count} agents", -1, 0)
    graph = instance.graph
    n = graph.vertex_count
    for i, path in enumerate(paths):
        if not path:
            raise StructuralError("empty plan", i, 0)
        if path[0] != instance.starts[i]:
            raise StructuralError(f"starts at {path[0]}, expected {instance.starts[i]}", i, 0)
        for t, v in enumerate(path):
            if not 0 <= v < n:
                raise StructuralError(f"unknown vertex {v}", i, t)
            if t and not graph.is_move(path[t - 1], v):
                raise StructuralError(f"invalid move {path[t - 1]} -> {v}", i, t)


def find_collisions(paths: Sequence[Sequence[int]]) -> list[Collision]:
    """All vertex and edge collisions of the padded joint execution, sorted
    by (time, agent pair)."""
    if not paths:
        return []
    horizon = max(len(p) for p in paths) - 1
    found: list[Collision] = []
    for t in range(horizon + 1):
        occupants: dict[int, list[int]] = defaultdict(list)
        for i, p in enumerate(paths):
            occupants[p[min(t, len(p) - 1)]].append(i)
        for v, agents in occupants.items():
            if len(agents) > 1:
                for x in range(len(agents)):
                    for y in range(x + 1, len(agents)):
                        found.append(Collision(t, (agents[x], agents[y]), "vertex", v))
        if t == horizon:
            break
        moves: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, p in enumerate(paths):
            u, v = p[min(t, len(p) - 1)], p[min(t + 1, len(p) - 1)]
            if u != v:
                moves[(u, v)].append(i)
        for (u, v), forward in list(moves.items()):
            for i in forward:
                for j in moves.get((v, u), ()):
                    if i < j:
                        found.append(Collision(t, (i, j), "edge", (u, v)))
    found.sort()
    return found


def validate(instance: Instance, solution: Solution) -> ValidationReport:
    paths = solution.paths()
    check_structure(instance, paths)
    missing = {}
    for i, plan in enumerate(solution.plans):
        window = set(plan.path[1:plan.completion_time + 1])
        gaps = tuple(g for g in instance.goals[i] if g not in window)
        if gaps:
            missing[i] = gaps
    return ValidationReport(find_collisions(paths), missing)


# -- text formats -----------------------------------------------------------

def format_solution(solution: Solution) -> str:
    lines = [
        f"agent {i}: {' '.join(map(str, p.path))} | cost={p.completion_time}"
        for i, p in enumerate(solution.plans)
    ]
    return "\n".join(lines) + "\n"


def parse_solution(text: str) -> Solution:
    plans = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line.startswith("agent "):
            continue
        try:
            head, rest = line.split(":", 1)
            body, cost = rest.rsplit("|", 1)
            index = int(head.split()[1])
            key, value = cost.strip().split("=")
            if key != "cost":
                raise ValueError("expected cost=<c>")
            path = tuple(int(tok) for tok in body.split())
        except ValueError as exc:
            raise ParseError(f"bad solution line ({exc})", lineno) from None
        if index != len(plans):
            raise ParseError(f"expected agent {len(plans)}, got {index}", lineno)
        plans.append(Plan(path, int(value)))
    return Solution(tuple(plans))


def format_instance(instance: Instance) -> str:
    seed = "none" if instance.seed is None else str(instance.seed)
    out = [f"instance k={instance.agent_count} m={instance.goals_per_agent} seed={seed}"]
    g = instance.graph
    if _is_full_grid(g):
        out.append(f"map {g.height} {g.width}")
        out.extend(render_map(g).splitlines()[4:])
    else:
        out.append(f"graph {g.vertex_count}")
        out.append("edges " + " ".join(f"{u}-{v}" for u, v in g.edges()))
    out.append("agents")
    for s, gs in zip(instance.starts, instance.goals):
        out.append(" ".join(map(str, (s, *gs))))
    return "\n".join(out) + "\n"


def _is_full_grid(g: Graph) -> bool:
    """True when ``g`` is exactly the 4-connected grid over its own cells."""
    if g.coords is None or g.height is None or g.width is None:
        return False
    rebuilt = _grid_from_rows(render_map(g).splitlines()[4:], first_line=5)
    return rebuilt.adjacency == g.adjacency and rebuilt.coords == g.coords


def parse_instance(text: str) -> Instance:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("instance"):
        raise ParseError("expected 'instance k=.. m=.. seed=..' header", 1)
    header = dict(tok.split("=", 1) for tok in lines[0].split()[1:] if "=" in tok)
    try:
        k = int(header["k"])
        seed = None if header.get("seed", "none") == "none" else int(header["seed"])
    except (KeyError, ValueError):
        raise ParseError("bad instance header", 1) from None
    if len(lines) < 2:
        raise ParseError("missing graph section", 2)
    kind = lines[1].split()
    pos = 2
    if kind and kind[0] == "map" and len(kind) == 3:
        height, width = int(kind[1]), int(kind[2])
        rows = lines[pos:pos + height]
        if len(rows) != height:
            raise ParseError(f"expected {height} map rows", pos + 1)
        grid = _grid_from_rows(rows, first_line=pos + 1)
        graph = Graph(grid.adjacency, grid.coords, height, width)
        pos += height
    elif kind and kind[0] == "graph" and len(kind) == 2:
        n = int(kind[1])
        if pos >= len(lines) or not lines[pos].startswith("edges"):
            raise ParseError("expected 'edges' line", pos + 1)
        try:
            edges = [tuple(map(int, tok.split("-"))) for tok in lines[pos].split()[1:]]
            graph = Graph.from_edges(n, edges)
        except ValueError as exc:
            raise ParseError(f"bad edge list ({exc})", pos + 1) from None
        pos += 1
    else:
        raise ParseError("expected 'map H W' or 'graph N'", 2)
    if pos >= len(lines) or lines[pos].strip() != "agents":
        raise ParseError("expected 'agents' line", pos + 1)
    starts, goals = [], []
    for lineno in range(pos + 1, len(lines)):
        toks = lines[lineno].split()
        if not toks:
            continue
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise ParseError("agent lines hold vertex ids", lineno + 1) from None
        if len(vals) < 2:
            raise ParseError("agent line needs a start and at least one goal", lineno + 1)
        starts.append(vals[0])
        goals.append(vals[1:])
    if len(starts) != k:
        raise ParseError(f"header says k={k}, found {len(starts)} agents", len(lines))
    try:
        return Instance.build(graph, starts, goals, seed=seed)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
