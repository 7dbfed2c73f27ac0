"""Command-line front end: solve, validate, generate and bench.

Exit codes: 0 solved / valid, 1 error / invalid, 2 timeout, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from mgmapf.errors import MapfError, SolverTimeout, StructuralError
from mgmapf.hcbs import Hcbs, format_stats
from mgmapf.instance import (Instance, format_instance, format_solution, generate_instance,
                             parse_instance, parse_map, parse_scen, parse_solution, validate)
from mgmapf.oracle import solve_optimal
from mgmapf.smt import SmtHcbs

EXIT_OK, EXIT_ERROR, EXIT_TIMEOUT, EXIT_USAGE = 0, 1, 2, 64
ALGORITHMS = ("hcbs", "smt", "oracle")
CSV_COLUMNS = ["algo", "agents", "goals", "attempted", "solved", "success_rate",
               "mean_ms", "median_ms", "mean_soc"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def default_seed() -> int:
    return int(os.environ.get("MGMAPF_SEED", "0"))


def run_solver(algo: str, instance: Instance, deadline: float | None = None,
               dump_dir: str | None = None):
    if algo == "hcbs":
        return Hcbs(instance).solve(deadline=deadline)
    if algo == "smt":
        return SmtHcbs(instance, dump_dir=dump_dir).solve(deadline=deadline)
    if algo == "oracle":
        return solve_optimal(instance, deadline=deadline)
    raise ValueError(f"unknown algorithm {algo!r}")


def load_instance(args) -> Instance:
    if args.instance:
        return parse_instance(Path(args.instance).read_text())
    if not (args.map and args.scen):
        raise UsageError("either --instance or both --map and --scen are required")
    graph = parse_map(Path(args.map).read_text())
    scen = parse_scen(Path(args.scen).read_text())
    return generate_instance(graph, scen, args.agents, args.goals, args.seed)


def cmd_solve(args, out) -> int:
    instance = load_instance(args)
    deadline = None if args.timeout is None else time.monotonic() + args.timeout
    started = time.perf_counter()
    try:
        solution = run_solver(args.algo, instance, deadline, args.dump_dir)
    except SolverTimeout as exc:
        out.write(f"timeout after {args.timeout}s\n")
        out.write(format_stats(exc.stats))
        return EXIT_TIMEOUT
    wall_ms = (time.perf_counter() - started) * 1000
    out.write(format_solution(solution))
    out.write(f"soc={solution.soc}\nmakespan={solution.makespan}\nwall_ms={wall_ms:.1f}\n")
    if args.stats:
        out.write(format_stats(solution.stats))
    return EXIT_OK


def cmd_validate(args, out) -> int:
    instance = parse_instance(Path(args.instance).read_text())
    solution = parse_solution(Path(args.solution).read_text())
    try:
        report = validate(instance, solution)
    except StructuralError as exc:
        out.write(f"structural error: {exc}\n")
        return EXIT_ERROR
    for c in report.collisions:
        out.write(f"collision {c.kind} agents={c.agents[0]},{c.agents[1]} "
                  f"at={c.location} t={c.time}\n")
    for agent, goals in sorted(report.missing_goals.items()):
        out.write(f"coverage gap agent={agent} goals={' '.join(map(str, goals))}\n")
    for i, plan in enumerate(solution.plans):
        if agent_cost_mismatch(plan, instance.goals[i]):
            out.write(f"cost mismatch agent={i} stated={plan.completion_time}\n")
    out.write("valid\n" if report.valid else "invalid\n")
    return EXIT_OK if report.valid else EXIT_ERROR


def agent_cost_mismatch(plan, goals) -> bool:
    from mgmapf.instance import agent_cost
    try:
        return agent_cost(plan.path, goals) != plan.completion_time
    except MapfError:
        return False  # reported as a coverage gap


def cmd_generate(args, out) -> int:
    graph = parse_map(Path(args.map).read_text())
    scen = parse_scen(Path(args.scen).read_text())
    out.write(format_instance(generate_instance(graph, scen, args.agents, args.goals, args.seed)))
    return EXIT_OK


# -- bench ------------------------------------------------------------------

@dataclass
class BenchConfig:
    map_path: str
    scen_paths: list[str]
    agent_counts: list[int]
    goals: int
    instances: int = 25
    timeout: float = 300.0
    algorithms: list[str] = field(default_factory=lambda: ["hcbs", "smt"])
    seed_base: int = 0
    jobs: int = 1
    timing: bool = True

    def __post_init__(self):
        if not self.agent_counts:
            raise ValueError("agent sweep must not be empty")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.instances < 1:
            raise ValueError("need at least one instance per point")
        if not self.scen_paths:
            raise ValueError("need at least one scenario file")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}")


def _bench_job(job) -> tuple[bool, float, int | None]:
    algo, instance, timeout = job
    started = time.perf_counter()
    try:
        solution = run_solver(algo, instance, time.monotonic() + timeout)
    except (SolverTimeout, MapfError):
        return False, 0.0, None
    elapsed = (time.perf_counter() - started) * 1000
    if elapsed > timeout * 1000:
        return False, 0.0, None
    return True, elapsed, solution.soc


def bench_instances(config: BenchConfig) -> dict[int, list[Instance]]:
    graph = parse_map(Path(config.map_path).read_text())
    scens = [parse_scen(Path(p).read_text()) for p in config.scen_paths]
    out = {}
    for k in config.agent_counts:
        out[k] = [
            generate_instance(graph, scens[i % len(scens)], k, config.goals, config.seed_base + i)
            for i in range(config.instances)
        ]
    return out


def run_bench(config: BenchConfig) -> str:
    instances = bench_instances(config)
    jobs = [(algo, k, i, (algo, inst, config.timeout))
            for algo in config.algorithms
            for k in config.agent_counts
            for i, inst in enumerate(instances[k])]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_bench_job, [j[3] for j in jobs]))
    else:
        results = [_bench_job(j[3]) for j in jobs]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    grouped: dict[tuple[str, int], list[tuple[bool, float, int | None]]] = {}
    for (algo, k, _, _), result in zip(jobs, results):
        grouped.setdefault((algo, k), []).append(result)
    for algo in config.algorithms:
        for k in config.agent_counts:
            rows = grouped[(algo, k)]
            solved = [r for r in rows if r[0]]
            times = [r[1] for r in solved]
            socs = [r[2] for r in solved]
            mean_ms = median_ms = mean_soc = ""
            if solved:
                if config.timing:
                    mean_ms = f"{statistics.fmean(times):.1f}"
                    median_ms = f"{statistics.median(times):.1f}"
                mean_soc = f"{statistics.fmean(socs):.2f}"
            writer.writerow([algo, k, config.goals, len(rows), len(solved),
                             round(len(solved) / len(rows), 4), mean_ms, median_ms, mean_soc])
    return buf.getvalue()


def cmd_bench(args, out) -> int:
    config = BenchConfig(
        map_path=args.map,
        scen_paths=args.scen,
        agent_counts=[int(x) for x in args.agents.split(",") if x],
        goals=args.goals,
        instances=args.instances,
        timeout=args.timeout,
        algorithms=[a for a in args.algos.split(",") if a],
        seed_base=args.seed_base,
        jobs=args.jobs,
        timing=not args.no_timing,
    )
    out.write(run_bench(config))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mgmapf", description="Multi-goal MAPF solvers (HCBS, SMT-HCBS, oracle)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--algo", choices=ALGORITHMS, default="hcbs")
    p.add_argument("--instance", help="instance file (see 'generate')")
    p.add_argument("--map")
    p.add_argument("--scen")
    p.add_argument("--agents", type=int, default=1)
    p.add_argument("--goals", type=int, default=1)
    p.add_argument("--seed", type=int, default=default_seed())
    p.add_argument("--timeout", type=float, default=None, help="seconds")
    p.add_argument("--dump-dir", help="write h_soc<K>_iter<J>.cnf files here (smt)")
    p.add_argument("--stats", action="store_true", help="print search statistics")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check a solution file against an instance file")
    p.add_argument("instance")
    p.add_argument("solution")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write an instance file from a map and scenario")
    p.add_argument("--map", required=True)
    p.add_argument("--scen", required=True)
    p.add_argument("--agents", type=int, required=True)
    p.add_argument("--goals", type=int, required=True)
    p.add_argument("--seed", type=int, default=default_seed())
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="success rate / runtime sweep, CSV on stdout")
    p.add_argument("--map", required=True)
    p.add_argument("--scen", required=True, nargs="+", help="one or more scenario files, used round-robin")
    p.add_argument("--agents", required=True, help="comma-separated agent counts")
    p.add_argument("--goals", type=int, required=True)
    p.add_argument("--instances", type=int, default=25)
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--algos", default="hcbs,smt")
    p.add_argument("--seed-base", type=int, default=default_seed())
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-timing", action="store_true", help="leave runtime columns empty")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except (MapfError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
