import json
import subprocess
import sys
import time
from pathlib import Path

import pytest

from antagonet import cli
from antagonet.errors import NumericalError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
SHIPPED = sorted(SCENARIOS.glob("*.json"))


def run(tmp_path, *args):
    return cli.main([*map(str, args), "--out", str(tmp_path)])


def report(tmp_path):
    return json.loads((tmp_path / "report.json").read_text())


JOBS = [
    (cmd, p)
    for p in SHIPPED
    for cmd in ("analyze", "certify", "simulate")
    if cmd != "certify" or "certificate" in json.loads(p.read_text())
]


@pytest.mark.parametrize("command, path", JOBS, ids=lambda x: getattr(x, "stem", x))
def test_shipped_scenarios_run_quickly(tmp_path, command, path):
    t0 = time.perf_counter()
    assert run(tmp_path, command, path) == 0
    assert time.perf_counter() - t0 < 5.0
    assert (tmp_path / "report.json").exists()


def test_example1_analysis_flags_non_simple_spectrum(tmp_path, capsys):
    assert run(tmp_path, "analyze", SCENARIOS / "example1.json") == 0
    gain = report(tmp_path)["topologies"][0]["gain"]
    assert not gain["passed"]
    assert "gain condition" in capsys.readouterr().out


def test_violation_reported(tmp_path):
    assert run(tmp_path, "analyze", SCENARIOS / "exa2_violation.json") == 0
    rep = report(tmp_path)
    assert rep["gain_passed_all"] is False


def test_exa2_passes(tmp_path):
    assert run(tmp_path, "analyze", SCENARIOS / "exa2.json") == 0
    assert report(tmp_path)["gain_passed_all"] is True


@pytest.mark.parametrize("name", ["example4", "followers"])
def test_certify_succeeds(tmp_path, name):
    assert run(tmp_path, "certify", SCENARIOS / f"{name}.json") == 0
    rep = report(tmp_path)
    assert rep["certified"] and 0 < rep["decay"] < 1
    assert rep["envelope_check"]["holds"]
    assert (tmp_path / "audit.csv").exists()


def test_certify_unstable_topology_fails_cleanly(tmp_path):
    d = json.loads((SCENARIOS / "exa2_violation.json").read_text())
    d.update(
        tdadt={"dwell": [2]},
        certificate={"omega": [1], "gamma": [1.01], "S1": [0], "S2": [0]},
        schedule={"kind": "constant"},
    )
    p = tmp_path / "unstable.json"
    p.write_text(json.dumps(d))
    assert run(tmp_path / "o", "certify", p) == 0
    rep = report(tmp_path / "o")
    assert rep["certified"] is False and "unit circle" in rep["failure"]


def test_simulate_containment(tmp_path):
    assert run(tmp_path, "simulate", SCENARIOS / "containment.json") == 0
    assert report(tmp_path)["containment"]["max_error"] < 1e-6


def test_simulate_example4_coordinates(tmp_path):
    assert run(tmp_path, "simulate", SCENARIOS / "example4.json") == 0
    assert report(tmp_path)["verdict"]["achieved"]


def test_simulate_divergence_marked(tmp_path, capsys):
    assert run(tmp_path, "simulate", SCENARIOS / "exa2_violation.json") == 0
    assert report(tmp_path)["diverged"]
    assert "diverged" in capsys.readouterr().out
    assert "# truncated" in (tmp_path / "trajectory.csv").read_text()


def test_simulate_signed(tmp_path):
    assert run(tmp_path, "simulate", SCENARIOS / "altafini.json") == 0
    rep = report(tmp_path)
    assert rep["signed"]["balanced"]
    assert rep["embedding"]["max_error"] < 1e-6


def test_same_seed_same_bytes(tmp_path):
    d = json.loads((SCENARIOS / "exa2.json").read_text())
    d.pop("initial", None)
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    outs = []
    for sub, seed in (("a", 7), ("b", 7), ("c", 8)):
        assert run(tmp_path / sub, "simulate", p, "--seed", seed) == 0
        outs.append((tmp_path / sub / "trajectory.csv").read_bytes())
    assert outs[0] == outs[1] != outs[2]


def test_input_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2, "graphs": [{"edges": [["1", "2", -1]]}]}')
    assert run(tmp_path, "analyze", bad) == 2
    assert run(tmp_path, "analyze", tmp_path / "missing.json") == 2
    assert run(tmp_path, "certify", SCENARIOS / "exa2.json") == 2
    assert run(tmp_path, "analyze", bad, "--seed", -1) == 2
    assert cli.main(["analyze", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    def boom(ctx):
        raise NumericalError("routes disagree")

    monkeypatch.setitem(cli.COMMANDS, "analyze", boom)
    assert run(tmp_path, "analyze", SCENARIOS / "exa2.json") == 3


def test_batch(tmp_path, capsys):
    lst = tmp_path / "list.txt"
    lst.write_text("\n".join(str(p) for p in SHIPPED) + "\n# comment\n")
    assert cli.main(["simulate", "--batch", str(lst), "--out", str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == len(SHIPPED)
    for p in SHIPPED:
        assert (tmp_path / "b" / p.stem / "report.json").exists()


def test_batch_reports_worst_exit(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    lst = tmp_path / "list.txt"
    lst.write_text(f"{SCENARIOS / 'exa2.json'}\nbad.json\n")
    assert cli.main(["analyze", "--batch", str(lst), "--out", str(tmp_path / "b")]) == 2


def test_console_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "antagonet.cli", "--version"], capture_output=True, text=True
    )
    assert res.returncode == 0 and res.stdout.strip().endswith(cli.__version__)
