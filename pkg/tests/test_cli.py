import json
import os
import subprocess
import sys

import numpy as np
import pytest

from lqot.cli import main, read_plan_csv
from lqot.config import load_config
from lqot.fiber import NoncontrollableCost
from lqot.lqcost import cost_matrices, pairwise_cost

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def cfg_path(name):
    return os.path.join(CONFIGS, name)


def run(verb, config, out, *extra):
    return main([verb, "--config", config, "--out", str(out), *extra])


def load(out, name):
    with open(os.path.join(out, name), encoding="utf-8") as fh:
        return json.load(fh)


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_analyze_euclidean(tmp_path):
    assert run("analyze", cfg_path("euclidean.json"), tmp_path) == 0
    doc = load(tmp_path, "analyze.json")
    assert doc["controllability"]["d"] == 2
    for key in ("D", "E", "F"):
        assert np.allclose(doc["cost"][key], np.eye(2), atol=1e-14)


def test_analyze_block_report(tmp_path):
    p = write_config(tmp_path, {"system": {"A": [[1, 0], [0, 1]], "B": [[1], [0]]}})
    assert run("analyze", p, tmp_path) == 0
    doc = load(tmp_path, "analyze.json")
    assert doc["controllability"]["d"] == 1
    assert np.allclose(doc["controllability"]["A2"], [[1.0]], atol=1e-14)


def test_cost_values(tmp_path):
    assert run("cost", cfg_path("euclidean.json"), tmp_path / "e") == 0
    assert load(tmp_path / "e", "cost.json")["pairs"][0]["cost"] == pytest.approx(0.5, abs=1e-14)
    assert run("cost", cfg_path("double_integrator.json"), tmp_path / "d") == 0
    assert load(tmp_path / "d", "cost.json")["pairs"][0]["cost"] == pytest.approx(6.0, rel=1e-12)


def test_cost_off_fiber_marker(tmp_path):
    assert run("cost", cfg_path("fibered.json"), tmp_path) == 0
    pairs = load(tmp_path, "cost.json")["pairs"]
    assert isinstance(pairs[0]["cost"], float)
    assert pairs[1]["cost"] == "+inf"


def test_trajectory_csv_header(tmp_path):
    assert run("trajectory", cfg_path("double_integrator.json"), tmp_path) == 0
    with open(tmp_path / "trajectory_0.csv", encoding="utf-8") as fh:
        header = fh.readline().strip()
        rows = fh.readlines()
    assert header == "t,x1,x2,p1,p2,u1"
    assert len(rows) == 65
    last = [float(v) for v in rows[-1].split(",")]
    assert last[0] == 1.0 and np.allclose(last[1:3], [1, 0], atol=1e-10)


def test_solve_dirac(tmp_path):
    p = write_config(tmp_path, {
        "system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]]},
        "source": {"points": [[0, 0]]}, "target": {"points": [[1, 0]]},
    })
    assert run("solve", p, tmp_path) == 0
    plan = load(tmp_path, "solve.json")["plan"]
    assert plan["total_cost"] == pytest.approx(6.0, rel=1e-12)
    assert len(plan["couplings"]) == 1


def test_solve_generic_map(tmp_path):
    assert run("solve", cfg_path("double_integrator.json"), tmp_path) == 0
    doc = load(tmp_path, "solve.json")
    assert isinstance(doc["map"], list) and len(doc["map"]) == 5
    assert sorted(m["j"] for m in doc["map"]) == list(range(5))
    assert doc["monotonicity"]["passed"]
    assert abs(doc["duals"]["duality_gap"]) < 1e-9


@pytest.mark.parametrize("name", ["euclidean.json", "double_integrator.json", "fibered.json"])
def test_plan_round_trip(tmp_path, name):
    assert run("solve", cfg_path(name), tmp_path) == 0
    total = load(tmp_path, "solve.json")["plan"]["total_cost"]
    rows, cols, masses = read_plan_csv(tmp_path / "plan.csv")
    cfg = load_config(cfg_path(name))
    mu0, mu1 = cfg.measure("source"), cfg.measure("target")
    if cfg.system.n == 3:
        C = NoncontrollableCost(cfg.system).pairwise(mu0.points, mu1.points)
    else:
        C = pairwise_cost(cost_matrices(cfg.system), mu0.points, mu1.points)
    assert float(np.dot(C[rows, cols], masses)) == pytest.approx(total, rel=1e-12, abs=1e-15)


def test_solve_fibered_breakdown(tmp_path):
    assert run("solve", cfg_path("fibered.json"), tmp_path) == 0
    doc = load(tmp_path, "solve.json")
    assert doc["controllable"] is False and len(doc["fibers"]) == 2
    assert doc["compatibility"]["compatible"]


def test_incompatible_exit_code(tmp_path, capsys):
    assert run("solve", cfg_path("fibered_incompatible.json"), tmp_path) == 3
    err = capsys.readouterr().err
    assert "discrepancy" in err
    assert load(tmp_path, "solve.json")["discrepancy"] > 0


def test_check_passes(tmp_path):
    for name in ("euclidean.json", "double_integrator.json", "fibered.json", "free_motion.json"):
        assert run("check", cfg_path(name), tmp_path / name) == 0, name
        assert load(tmp_path / name, "check.json")["passed"]


def test_check_reports_oracle_gap(tmp_path):
    assert run("check", cfg_path("double_integrator.json"), tmp_path) == 0
    oracle = [c for c in load(tmp_path, "check.json")["checks"] if c["name"] == "oracle"][0]
    assert oracle["K"][-1] == 64
    assert oracle["gap"] == pytest.approx(6 / (1 - 64**-2) - 6, rel=1e-6)
    assert oracle["extrapolated_gap"] <= 1e-3


def test_failed_check_exit_code(tmp_path):
    p = write_config(tmp_path, {
        "system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]]},
        "pairs": [[[0, 0], [1, 0]]],
        "options": {"oracle_K": [2, 4], "oracle_gap": 1e-15},
    })
    assert run("check", p, tmp_path) == 4
    assert not load(tmp_path, "check.json")["passed"]


def test_numerical_failure_exit_code(tmp_path, capsys):
    # one constant control piece cannot steer the double integrator to (1, 0)
    p = write_config(tmp_path, {
        "system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]]},
        "pairs": [[[0, 0], [1, 0]]],
        "options": {"oracle_K": [1]},
    })
    assert run("check", p, tmp_path) == 4
    assert "UnreachableEndpoint" in capsys.readouterr().err


def test_config_errors_exit_2(tmp_path, capsys):
    bad_u = write_config(tmp_path, {"system": {"A": [[0]], "B": [[1]], "U": [[-1]]}}, "u.json")
    assert run("check", bad_u, tmp_path) == 2
    assert "system.U" in capsys.readouterr().err
    ragged = write_config(tmp_path, {"system": {"A": [[0, 1], [0]], "B": [[1], [0]]}}, "r.json")
    assert run("analyze", ragged, tmp_path) == 2
    assert "system.A[1]" in capsys.readouterr().err
    assert run("analyze", cfg_path("euclidean.json"), tmp_path, "--tol", "1") == 2
    assert run("analyze", str(tmp_path / "missing.json"), tmp_path) == 2


def test_sample_outputs(tmp_path):
    assert run("sample", cfg_path("euclidean.json"), tmp_path, "--seed", "5") == 0
    with open(tmp_path / "target.csv", encoding="utf-8") as fh:
        assert fh.readline().strip() == "x1,x2,weight"
        assert len(fh.readlines()) == 5


@pytest.mark.parametrize("verb", ["solve", "check", "sample"])
def test_byte_identical_outputs(tmp_path, verb):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(verb, cfg_path("euclidean.json"), a) == 0
    assert run(verb, cfg_path("euclidean.json"), b) == 0
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "lqot", "cost", "--config", cfg_path("euclidean.json"), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "cost.json").exists()
