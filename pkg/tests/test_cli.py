import csv
import json

import numpy as np
import pytest

from motiondesign import cli, elements, functional
from motiondesign.model import load_problem, problem_to_dict


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "two_bar"
    assert cli.main(["run", "two_bar_truss", "-o", str(out)]) == cli.EXIT_OK
    for name in ("report.json", "trajectory.csv", "energy.csv", "forces.csv", "iterations.csv"):
        assert (out / name).is_file()
    rep = json.loads((out / "report.json").read_text())
    assert rep["converged"] and rep["iterations"] <= 15
    assert rep["path_nodes"] == 15
    p = load_problem(cli.resolve_problem("two_bar_truss"))
    assert functional.evaluate_J(p, np.array(rep["controls"]))[0] == pytest.approx(rep["J"], rel=1e-12)
    traj = read_csv(out / "trajectory.csv")
    assert len(traj) == 15 * 3
    last_apex = [r for r in traj if r["path_node"] == "14" and r["node"] == "1"][0]
    assert float(last_apex["x"]) == pytest.approx(0.2) and float(last_apex["y"]) == pytest.approx(-0.2)
    energy = read_csv(out / "energy.csv")
    assert float(energy[0]["Pi_int"]) == 0.0
    assert "converged" in capsys.readouterr().out


def test_example_prefix_accepted(tmp_path):
    assert cli.main(["run", "examples/kinematic_truss", "-o", str(tmp_path)]) == cli.EXIT_OK


def test_missing_file_exit_code(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == cli.EXIT_INPUT
    assert "cannot read" in capsys.readouterr().err


def test_malformed_file_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": [[0, 0],, ]}')
    assert cli.main(["run", str(bad)]) == cli.EXIT_INPUT
    assert "bad.json:1:" in capsys.readouterr().err


def test_bad_arguments_exit_code():
    assert cli.main(["run"]) == cli.EXIT_INPUT
    assert cli.main(["run", "two_bar_truss", "--predictor", "magic"]) == cli.EXIT_INPUT


def test_non_convergence_exit_code(tmp_path):
    data = problem_to_dict(load_problem(cli.resolve_problem("two_bar_truss")))
    data["solver"]["max_iter"] = 1
    path = tmp_path / "short.json"
    path.write_text(json.dumps(data))
    out = tmp_path / "out"
    assert cli.main(["run", str(path), "-o", str(out)]) == cli.EXIT_DIVERGED
    assert len(read_csv(out / "iterations.csv")) == 2


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "kinematic_truss", "-o", str(a)]) == 0
    assert cli.main(["run", "kinematic_truss", "-o", str(b)]) == 0
    for name in ("trajectory.csv", "energy.csv", "forces.csv", "iterations.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_path_refinement_override(tmp_path):
    J = {}
    for n in (14, 28):
        out = tmp_path / str(n)
        assert cli.main(["run", "kinematic_truss", "--path-elements", str(n), "-o", str(out)]) == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["path"]["n_elements"] == n
        J[n] = rep["J"]
    assert J[28] <= J[14] / 4


def test_predictor_override(tmp_path):
    out = tmp_path / "pre"
    assert cli.main(["run", "two_bar_truss", "--predictor", "preanalysis", "-o", str(out)]) == 0
    lin = json.loads(open(tmp_path / "pre" / "report.json").read())
    assert lin["J_predictor"] < 12.0


def test_verify_passes(capsys):
    assert cli.main(["verify"]) == cli.EXIT_OK
    table = capsys.readouterr().out
    assert "FAIL" not in table and table.count("PASS") >= 10


def test_verify_catches_broken_truss(monkeypatch, capsys):
    good = elements.truss_state

    def broken(X, d, mat):
        st = good(X, d, mat)
        return elements.ElementState(st.energy, st.f_int, 1.01 * st.k_t)

    monkeypatch.setattr(elements, "truss_state", broken)
    assert cli.main(["verify"]) == cli.EXIT_DIVERGED
    rows = [line for line in capsys.readouterr().out.splitlines() if line.startswith("fd truss")]
    assert rows and "FAIL" in rows[0]


def test_brach_exact(tmp_path, capsys):
    out = tmp_path / "cycloid.csv"
    assert cli.main(["brach", "exact", "--samples", "11", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 11
    assert float(rows[-1]["x"]) == pytest.approx(10.0) and float(rows[-1]["y"]) == pytest.approx(2.0)
    assert "t_E = 4.05" in capsys.readouterr().err


def test_brach_fe(capsys):
    assert cli.main(["brach", "fe", "--elements", "8"]) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("sbar,x,y")
    assert len(captured.out.strip().splitlines()) == 10
    assert "converged" in captured.err


def test_brach_invalid(capsys):
    assert cli.main(["brach", "exact", "--B", "0", "9"]) == cli.EXIT_INPUT
    assert "above" in capsys.readouterr().err
