import io
import subprocess
import sys

import pytest

from mgmapf.cli import BenchConfig, main, run_bench
from mgmapf.hcbs import solve_hcbs
from mgmapf.instance import Instance, Plan, Solution, format_instance, format_solution, generate_instance, parse_map, parse_scen

from suite import fixture


def run(argv):
    out = io.StringIO()
    code = main(argv, out)
    return code, out.getvalue()


@pytest.fixture
def f1_file(tmp_path):
    path = tmp_path / "f1.txt"
    path.write_text(format_instance(Instance.build(fixture("F1"), [0], [[3]])))
    return path


@pytest.mark.parametrize("algo", ["hcbs", "smt", "oracle"])
def test_solve_single_agent(f1_file, algo):
    code, text = run(["solve", "--algo", algo, "--instance", str(f1_file)])
    assert code == 0
    assert "agent 0: 0 1 2 3 | cost=3" in text and "soc=3\n" in text and "makespan=3\n" in text


def test_solve_from_map_matches_library(data_dir):
    graph = parse_map((data_dir / "empty-16-16.map").read_text())
    scen = parse_scen((data_dir / "empty-16-16-random-1.scen").read_text())
    expected = solve_hcbs(generate_instance(graph, scen, 3, 2, 11))
    code, text = run(["solve", "--map", str(data_dir / "empty-16-16.map"),
                      "--scen", str(data_dir / "empty-16-16-random-1.scen"),
                      "--agents", "3", "--goals", "2", "--seed", "11", "--stats"])
    assert code == 0
    assert f"soc={expected.soc}\n" in text and "ct_expanded=" in text
    assert format_solution(expected) in text


def test_timeout_exit_code(data_dir):
    code, text = run(["solve", "--algo", "smt", "--map", str(data_dir / "empty-16-16.map"),
                      "--scen", str(data_dir / "empty-16-16-random-1.scen"),
                      "--agents", "6", "--goals", "6", "--timeout", "0.001"])
    assert code == 2 and text.startswith("timeout")


def test_usage_errors():
    assert run(["solve", "--bogus"])[0] == 64
    assert run(["solve", "--algo", "astar"])[0] == 64
    assert run([])[0] == 64
    assert run(["solve"])[0] == 64  # neither --instance nor --map/--scen


def test_missing_file():
    assert run(["solve", "--instance", "/nonexistent/instance.txt"])[0] == 1


def test_validate(tmp_path):
    inst = Instance.build(fixture("F3"), [0, 3], [[3], [0]])
    (tmp_path / "i.txt").write_text(format_instance(inst))
    good = Solution((Plan((0, 1, 3), 2), Plan((3, 2, 0), 2)))
    clash = Solution((Plan((0, 1, 3), 2), Plan((3, 1, 0), 2)))
    short = Solution((Plan((0, 1), 1), Plan((3, 2, 0), 2)))
    for name, sol in (("good", good), ("clash", clash), ("short", short)):
        (tmp_path / f"{name}.txt").write_text(format_solution(sol))
    assert run(["validate", str(tmp_path / "i.txt"), str(tmp_path / "good.txt")]) == (0, "valid\n")
    code, text = run(["validate", str(tmp_path / "i.txt"), str(tmp_path / "clash.txt")])
    assert code == 1 and "collision vertex agents=0,1 at=1 t=1" in text
    code, text = run(["validate", str(tmp_path / "i.txt"), str(tmp_path / "short.txt")])
    assert code == 1 and "coverage gap agent=0 goals=3" in text


def test_generate(data_dir):
    args = ["generate", "--map", str(data_dir / "empty-16-16.map"),
            "--scen", str(data_dir / "empty-16-16-random-2.scen"),
            "--agents", "4", "--goals", "3", "--seed", "5"]
    first, second = run(args), run(args)
    assert first == second and first[1].startswith("instance k=4 m=3 seed=5\nmap 16 16\n")


def bench_config(data_dir, **kw):
    defaults = dict(map_path=str(data_dir / "empty-16-16.map"),
                    scen_paths=[str(data_dir / "empty-16-16-random-1.scen")],
                    agent_counts=[1], goals=1, instances=1, timeout=30.0)
    defaults.update(kw)
    return BenchConfig(**defaults)


def test_bench_trivial_point(data_dir):
    csv_text = run_bench(bench_config(data_dir, algorithms=["hcbs"]))
    header, row = csv_text.splitlines()
    assert header == "algo,agents,goals,attempted,solved,success_rate,mean_ms,median_ms,mean_soc"
    assert row.split(",")[:6] == ["hcbs", "1", "1", "1", "1", "1.0"]


def test_bench_is_deterministic_without_timing(data_dir):
    config = bench_config(data_dir, agent_counts=[1, 2], goals=2, instances=3, timing=False,
                          scen_paths=[str(data_dir / "empty-16-16-random-1.scen"),
                                      str(data_dir / "empty-16-16-random-2.scen")])
    first = run_bench(config)
    assert first == run_bench(config)
    rows = [line.split(",") for line in first.splitlines()[1:]]
    by_algo = {}
    for algo, agents, *_, mean_soc in rows:
        by_algo.setdefault(agents, {})[algo] = mean_soc
    assert all(v["hcbs"] == v["smt"] for v in by_algo.values())


def test_bench_config_invariants(data_dir):
    for bad in (dict(agent_counts=[]), dict(timeout=0), dict(instances=0),
                dict(algorithms=["dfs"]), dict(scen_paths=[])):
        with pytest.raises(ValueError):
            bench_config(data_dir, **bad)


def test_bench_cli_and_seed_env(data_dir, monkeypatch):
    monkeypatch.setenv("MGMAPF_SEED", "3")
    args = ["bench", "--map", str(data_dir / "empty-16-16.map"),
            "--scen", str(data_dir / "empty-16-16-random-1.scen"),
            "--agents", "1", "--goals", "2", "--instances", "2", "--algos", "hcbs", "--no-timing"]
    code, text = run(args)
    assert code == 0
    assert text == run_bench(bench_config(data_dir, goals=2, instances=2, algorithms=["hcbs"],
                                          seed_base=3, timing=False))


def test_module_entry_point(f1_file):
    proc = subprocess.run([sys.executable, "-m", "mgmapf", "solve", "--instance", str(f1_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "soc=3" in proc.stdout
