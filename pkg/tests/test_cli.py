import csv
import json
import subprocess
import sys

import pytest

from asymcp.cli import CSV_HEADERS, ConfigError, build_config, main, read_config_file


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_meanfield_example(tmp_path):
    code, out = run(tmp_path, "meanfield", "--set", "lambda1=0", "--set", "lambda2=3", "--set", "gamma=1",
                    "--set", "u1=0.1", "--set", "u2=0.1")
    assert code == 0
    table = rows(out / "meanfield.csv")
    assert table[0] == ["t", "u1", "u2"]
    t, u1, u2 = map(float, table[-1])
    assert t == 200.0 and abs(u1 - 1 / 6) <= 1e-6 and abs(u2 - 1 / 6) <= 1e-6
    summary = json.loads((out / "summary.json").read_text())
    assert summary["aggregates"]["stable"] is True
    assert "wall_clock_seconds" in json.loads((out / "timing.json").read_text())


def test_bad_gamma_exit_2(tmp_path, capsys):
    code, _ = run(tmp_path, "branching", "--set", "gamma=-1")
    assert code == 2
    assert "gamma" in capsys.readouterr().err


@pytest.mark.parametrize("mode,key,value", [
    ("simulate", "lambda2", "-2"), ("simulate", "boundary", "symptomatic_frozen"), ("block", "k", "0"),
    ("meanfield", "dt", "0"), ("percolation", "epsilon", "2"), ("simulate", "colour", "red"),
    ("branching", "d", "1.5"),
])
def test_validation_names_key(tmp_path, capsys, mode, key, value):
    code, _ = run(tmp_path, mode, "--set", f"{key}={value}")
    assert code == 2
    assert key in capsys.readouterr().err


def test_meanfield_start_outside_simplex():
    with pytest.raises(ConfigError):
        build_config("meanfield", {"u1": "0.7", "u2": "0.7"})


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# progeny run\nd = 2\ngamma=0.05  # subcritical\n\nreplicas=300\n")
    assert read_config_file(cfg) == {"d": "2", "gamma": "0.05", "replicas": "300"}
    code, out = run(tmp_path, "branching", "--config", str(cfg), "--seed", "17")
    assert code == 0
    table = rows(out / "branching.csv")
    assert len(table) == 301
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 17 and summary["parameters"]["d"] == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("gamma 0.1\n")
    assert main(["branching", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2


@pytest.mark.parametrize("mode,extra,header", [
    ("simulate", [], "simulate"),
    ("block", ["--set", "k=2"], "block"),
    ("branching", [], "branching"),
    ("percolation", [], "percolation_paths"),
    ("percolation", ["--set", "kind=field", "--set", "width=4", "--set", "levels=5"], "percolation_field"),
])
def test_csv_headers(tmp_path, mode, extra, header):
    code, out = run(tmp_path, mode, "--replicas", "50", *extra)
    assert code == 0
    assert (out / f"{mode}.csv").read_text().splitlines()[0] == ",".join(CSV_HEADERS[header])


def test_simulate_header_literal(tmp_path):
    code, out = run(tmp_path, "simulate", "--replicas", "5")
    assert code == 0
    first = (out / "simulate.csv").read_text().splitlines()[0]
    assert first == "replica,pi1,pi2,t_cumulative,extinction_time,max_space,max_time,extinct"


@pytest.mark.parametrize("mode", ["simulate", "branching", "block"])
def test_reproducible_across_jobs(tmp_path, mode):
    _, a = run(tmp_path, mode, "--replicas", "2500", "--jobs", "1", "--seed", "99", name="a")
    _, b = run(tmp_path, mode, "--replicas", "2500", "--jobs", "3", "--seed", "99", name="b")
    for f in (f"{mode}.csv", "summary.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_replica_prefix_stable(tmp_path):
    _, a = run(tmp_path, "simulate", "--replicas", "100", "--seed", "3", name="a")
    _, b = run(tmp_path, "simulate", "--replicas", "200", "--seed", "3", name="b")
    assert rows(a / "simulate.csv") == rows(b / "simulate.csv")[:101]


def test_float_format_round_trips(tmp_path):
    _, out = run(tmp_path, "simulate", "--replicas", "20")
    for row in rows(out / "simulate.csv")[1:]:
        assert repr(float(row[3])) == row[3]
        assert row[7] in ("true", "false")


def test_budget_exit_3(tmp_path):
    code, _ = run(tmp_path, "percolation", "--set", "n_max=40", "--set", "d=3")
    assert code == 3
    code, _ = run(tmp_path, "simulate", "--replicas", "20000", "--set", "time_budget=1e-9")
    assert code == 3


def test_verify_subset(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "--set", "criteria=1,9", "--set", "scale=0.05")
    assert code == 0
    report = (out / "report.txt").read_text()
    assert "[PASS] 1. offspring law" in report and "[PASS] 9. percolation combinatorics" in report
    assert rows(out / "verify.csv")[0] == ["criterion", "name", "passed"]


def test_verify_failure_exit_1(tmp_path):
    code, out = run(tmp_path, "verify", "--set", "criteria=8", "--set", "scale=0.2")
    assert code == 1
    assert "[FAIL] 8. block events" in (out / "report.txt").read_text()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "asymcp", "branching", "--set", "gamma=-3", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "gamma" in res.stderr
