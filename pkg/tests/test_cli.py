import json

from click.testing import CliRunner

from e2evrp.cli import main
from e2evrp.model import parse_instance, parse_solution

TINY = """\
NAME tiny
LEVEL1 4 120 0
LEVEL2 12 55 0 400 1
DEPOT 60 0
SATELLITES 2
1 40 60 - 6
2 360 140 - 6
CUSTOMERS 6
3 120 80 10
4 160 120 15
5 240 60 9
6 280 140 12
7 200 100 8
8 90 140 11
STATIONS 2
9 200 90
10 300 60
"""


def _write_tiny(tmp_path):
    p = tmp_path / "tiny.txt"
    p.write_text(TINY)
    return str(p)


def test_generate_single_instance_roundtrips(tmp_path):
    out = tmp_path / "gen.txt"
    res = CliRunner().invoke(
        main, ["generate", "--stations", "4", "--battery", "900", "--seed", "2", "--out", str(out)]
    )
    assert res.exit_code == 0, res.output
    inst = parse_instance(out.read_text())
    assert len(inst.stations) == 4 and inst.battery_capacity == 900


def test_generate_set_writes_files(tmp_path):
    res = CliRunner().invoke(
        main, ["generate", "--set", "8", "--out-dir", str(tmp_path / "s8"), "--instances", "1"]
    )
    assert res.exit_code == 0, res.output
    files = sorted((tmp_path / "s8").glob("*.txt"))
    assert len(files) == 10  # one instance per battery level
    parse_instance(files[0].read_text())


def test_solve_runs_and_reports(tmp_path):
    inst = _write_tiny(tmp_path)
    sol_out = tmp_path / "best.sol"
    json_out = tmp_path / "runs.json"
    csv_out = tmp_path / "agg.csv"
    res = CliRunner().invoke(
        main,
        [
            "solve", inst, "--restarts", "1", "--runs", "2", "--seed", "5",
            "--param", "i_max=15", "--param", "granularity=5",
            "--solution-out", str(sol_out), "--json-out", str(json_out),
            "--csv-out", str(csv_out),
        ],
    )
    assert res.exit_code == 0, res.output
    payload = json.loads(json_out.read_text())
    assert len(payload["runs"]) == 2
    agg = payload["aggregate"]
    assert set(agg) == {"instance", "avg", "best", "t_star_avg", "runs"}
    assert agg["best"] <= min(r["best_cost"] for r in payload["runs"])
    assert csv_out.read_text().splitlines()[0] == "instance,avg,best,t_star_avg,runs"
    # emitted solution verifies clean
    chk = CliRunner().invoke(main, ["check", inst, str(sol_out)])
    assert chk.exit_code == 0, chk.output
    assert "ok" in chk.output


def test_check_rejects_corrupted_solution(tmp_path):
    inst_path = _write_tiny(tmp_path)
    sol_out = tmp_path / "best.sol"
    res = CliRunner().invoke(
        main, ["solve", inst_path, "--restarts", "1", "--param", "i_max=5", "--solution-out", str(sol_out)]
    )
    assert res.exit_code == 0, res.output
    inst = parse_instance(TINY)
    sol = parse_solution(sol_out.read_text(), inst)
    # drop one customer visit
    routes = list(sol.second_level_routes)
    victim = next(i for i, r in enumerate(routes) if len(r.visits) >= 1)
    broken = sol_out.read_text().replace(f" {routes[victim].visits[0]} ", " ", 1)
    (tmp_path / "broken.sol").write_text(broken)
    chk = CliRunner().invoke(main, ["check", inst_path, str(tmp_path / "broken.sol"), "--json"])
    assert chk.exit_code == 1
    report = json.loads(chk.output)
    assert report["ok"] is False and report["violations"]


def test_check_missing_file_is_machine_readable():
    res = CliRunner().invoke(main, ["check", "/nonexistent/file.txt", "/also/missing.sol", "--json"])
    assert res.exit_code == 2
    assert "error" in json.loads(res.output)


def test_sweep_cli_writes_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    res = CliRunner().invoke(
        main,
        [
            "sweep", "--mode", "battery", "--levels", "1000,1400", "--instances", "1",
            "--runs", "1", "--budget", "1", "--stations", "10", "--out", str(out),
        ],
    )
    assert res.exit_code == 0, res.output
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "level,instance_seed,run_seed,cost_L,cost_inf,detour_pct,station_visits"
    assert len(lines) == 3


def test_bound_cli(tmp_path):
    inst = _write_tiny(tmp_path)
    res = CliRunner().invoke(main, ["bound", inst, "--delta", "4", "--json"])
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert report["lower_bound"] >= 0
    solve = CliRunner().invoke(main, ["solve", inst, "--restarts", "1", "--json"])
    cost = json.loads(solve.output)["aggregate"]["best"]
    assert report["lower_bound"] <= cost


def test_augment_cli(tmp_path):
    base = tmp_path / "base.txt"
    base.write_text(TINY.replace("400 1", "999999 1"))  # battery irrelevant for the base
    out = tmp_path / "aug.txt"
    res = CliRunner().invoke(
        main, ["augment", str(base), "--gamma1", "120", "--ratio", "0.2", "--out", str(out)]
    )
    assert res.exit_code == 0, res.output
    inst = parse_instance(out.read_text())
    assert inst.depot == (600, 0)
    assert len(inst.stations) >= 1


def test_solve_missing_instance_errors():
    res = CliRunner().invoke(main, ["solve", "/no/such/file", "--json"])
    assert res.exit_code == 2
    assert "error" in json.loads(res.output)
