import json
import shutil
import subprocess
import sys

import pytest

from idcais import cli
from idcais.safety_filter import QCQPError

SCENARIO = "configs/scenarios/golden_1v1.json"


def run(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_simulate_writes_outputs(tmp_path, capsys):
    code, out = run(["simulate", "--scenario", SCENARIO, "--out", str(tmp_path), "--seed", "3"], capsys)
    assert code == 0
    outcome = json.loads(out.out)
    assert outcome["captures"] == 1
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,agent_id,role,x,y,vx,vy,ux,uy,status\n")
    assert json.loads((tmp_path / "trajectory_events.json").read_text())
    assert json.loads((tmp_path / "outcome.json").read_text()) == outcome


def test_simulate_overrides(capsys):
    code, out = run(
        ["simulate", "--scenario", SCENARIO, "--dt", "0.02", "--no-cbf", "--assignment", "cudaa",
         "--attacker-policy", "evasive"],
        capsys,
    )
    assert code == 0 and json.loads(out.out)["captures"] == 1


def test_assign(tmp_path, capsys):
    target = tmp_path / "a.json"
    code, _ = run(["assign", "--scenario", "configs/scenarios/golden_2v2_cbf.json", "--out", str(target)], capsys)
    assert code == 0
    doc = json.loads(target.read_text())
    assert sorted(i for i in doc["assignment"]["attacker_of"] if i is not None) == [0, 1]
    assert len(doc["cost_tables"]["interception_cost"]) == 2


def test_compare(capsys):
    code, out = run(["compare", "--scenario", "configs/scenarios/golden_2v2_cbf.json"], capsys)
    assert code == 0
    doc = json.loads(out.out)
    assert doc["cadaa"]["objective"] <= doc["cudaa"]["objective"] + 1e-9


def test_sweep(capsys):
    code, out = run(["sweep", "--config", "configs/sweep_mirror.json"], capsys)
    assert code == 0
    doc = json.loads(out.out)
    assert doc["sigma"] == 1.0 and doc["denominator"] > 0


def test_validation_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"attackers": [{"position": [0.5, 0]}], "defenders": [{"position": [5, 0]}]}))
    code, out = run(["simulate", "--scenario", str(bad)], capsys)
    assert code == 2
    assert "$.attackers[0].position" in out.err
    code, _ = run(["simulate", "--scenario", str(tmp_path / "missing.json")], capsys)
    assert code == 2


def test_solver_failure_exit_code(monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise QCQPError("no convergence")

    monkeypatch.setattr(cli, "run_simulation", boom)
    code, out = run(["simulate", "--scenario", SCENARIO], capsys)
    assert code == 3 and "solver failure" in out.err


def test_usage_error():
    with pytest.raises(SystemExit) as err:
        cli.main(["simulate"])
    assert err.value.code == 2


def test_console_script():
    exe = shutil.which("idcais")
    cmd = [exe] if exe else [sys.executable, "-m", "idcais.cli"]
    done = subprocess.run(cmd + ["compare", "--scenario", SCENARIO], capture_output=True, text=True, timeout=120)
    assert done.returncode == 0, done.stderr
    assert "cadaa" in json.loads(done.stdout)
