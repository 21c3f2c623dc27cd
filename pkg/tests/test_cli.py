import json

import numpy as np
import pytest

from bethepoly.cli import EXIT_ASSERTION, EXIT_BUDGET, EXIT_INPUT, EXIT_OK, main
from bethepoly.fixtures import equality_cycle, random_graph, random_tree, single_edge
from bethepoly.graph import FactorGraph, serialize
from bethepoly.permanent import permanent_nfg


def write_graph(tmp_path, g, name="g.json"):
    p = tmp_path / name
    p.write_text(serialize(g))
    return str(p)


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, argv):
    code, out = run(capsys, argv)
    return code, json.loads(out)


def test_z_exact(tmp_path, capsys):
    g = single_edge()  # 1*1 + 2*3
    code, rep = run_json(capsys, ["z-exact", write_graph(tmp_path, g)])
    assert code == EXIT_OK
    assert rep["Z"] == pytest.approx(7.0)
    assert rep["marginals"]["e"] == pytest.approx(6 / 7)
    assert rep["command"] == "z-exact" and len(rep["input_digest"]) == 64


def test_z_exact_identity_permanent(tmp_path, capsys):
    code, rep = run_json(capsys, ["z-exact", write_graph(tmp_path, permanent_nfg(np.eye(2)))])
    assert code == EXIT_OK and rep["Z"] == pytest.approx(1.0)


def test_budget_exit_code(tmp_path, capsys):
    g = random_graph(np.random.default_rng(0), 4, 6)
    code, rep = run_json(capsys, ["z-exact", write_graph(tmp_path, g), "--budget-bits", "4"])
    assert code == EXIT_BUDGET and rep["error"] == "BudgetExceeded"


def test_missing_file_and_bad_json(tmp_path, capsys):
    code, rep = run_json(capsys, ["z-exact", str(tmp_path / "nope.json")])
    assert code == EXIT_INPUT and rep["error"] == "ParseError"
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"factors\": [\n")
    code, rep = run_json(capsys, ["bethe", str(bad)])
    assert code == EXIT_INPUT


def test_bethe_tree_exact(tmp_path, capsys):
    g = random_tree(np.random.default_rng(3), 4)
    path = write_graph(tmp_path, g)
    _, z = run_json(capsys, ["z-exact", path])
    code, rep = run_json(capsys, ["bethe", path, "--starts", "2"])
    assert code == EXIT_OK
    assert rep["log_Z_B"] == pytest.approx(z["log_Z"], abs=1e-6)
    assert rep["certificate_value"] == pytest.approx(rep["log_Z_B"], abs=1e-6)


def test_bethe_ones2_and_grid(tmp_path, capsys):
    path = write_graph(tmp_path, permanent_nfg(np.ones((2, 2))))
    code, poly = run_json(capsys, ["bethe", path, "--starts", "4"])
    assert code == EXIT_OK and poly["Z_B"] == pytest.approx(1.0, rel=1e-6)
    code, grid = run_json(capsys, ["bethe", path, "--method", "grid"])
    assert code == EXIT_OK and grid["method"] == "grid-oracle"
    assert grid["log_Z_B"] <= poly["log_Z_B"] + 1e-6


def test_verify_permanent_passes(tmp_path, capsys):
    A = np.random.default_rng(1).uniform(0.1, 2, (2, 2))
    code, rep = run_json(capsys, ["verify", write_graph(tmp_path, permanent_nfg(A)), "--starts", "4", "--trials", "50"])
    assert code == EXIT_OK
    assert rep["status"] == "PASS" and rep["all_stable"] and rep["Z_B <= Z"]


def test_verify_equality_cycle_not_asserted(tmp_path, capsys):
    code, rep = run_json(capsys, ["verify", write_graph(tmp_path, equality_cycle(3)), "--starts", "4", "--trials", "20"])
    assert code == EXIT_OK
    assert rep["bipartized"] is True
    assert rep["status"] in ("PASS", "NOT-ASSERTED")


def test_verify_non_stable_not_asserted(tmp_path, capsys):
    # 1 + xy has a root in the upper half plane
    g = FactorGraph.build(
        ["a", "b", "c"], [("e1", ("a", "b")), ("e2", ("a", "c"))], {"a": [1.0, 0.0, 0.0, 1.0], "b": [1.0, 1.0], "c": [1.0, 1.0]}
    )
    code, rep = run_json(capsys, ["verify", write_graph(tmp_path, g), "--starts", "4", "--trials", "20"])
    assert code == EXIT_OK
    assert rep["stability"]["a"]["status"] == "NotStable"
    assert rep["status"] == "NOT-ASSERTED" and rep["Z_B <= Z"] is None


def test_ipc_and_stability_commands(tmp_path, capsys):
    path = write_graph(tmp_path, permanent_nfg(np.ones((2, 2))))
    code, rep = run_json(capsys, ["ipc-check", path, "--trials", "50"])
    assert code == EXIT_OK and rep["passed"] and rep["m"] == 4
    code, rep = run_json(capsys, ["stability-check", path])
    assert code == EXIT_OK and rep["all_stable"]


def test_bp_tree(tmp_path, capsys):
    g = random_tree(np.random.default_rng(5), 5)
    code, rep = run_json(capsys, ["bp", write_graph(tmp_path, g)])
    assert code == EXIT_OK and rep["converged"]
    assert rep["free_energy"] == pytest.approx(rep["log_Z"], abs=1e-6)
    assert rep["stationarity_residual"] <= 1e-6


def test_covers_command(tmp_path, capsys):
    g = random_tree(np.random.default_rng(2), 3)
    code, rep = run_json(capsys, ["covers", write_graph(tmp_path, g), "--k", "2", "--samples", "3"])
    assert code == EXIT_OK
    assert rep["estimate"] == pytest.approx(rep["Z"], rel=1e-9)
    assert rep["violations"] == []


def test_permanent_command(tmp_path, capsys):
    p = tmp_path / "ones3.json"
    p.write_text(json.dumps(np.ones((3, 3)).tolist()))
    code, rep = run_json(capsys, ["permanent", "--matrix", str(p), "--starts", "2"])
    assert code == EXIT_OK and rep["passed"]
    assert rep["per"] == pytest.approx(6.0)
    assert rep["Z_B_ds"] <= 6.0 * (1 + 1e-6)


def test_permanent_bad_matrix(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps([[1, 2, 3], [4, 5]]))
    code, rep = run_json(capsys, ["permanent", "--matrix", str(p)])
    assert code == EXIT_INPUT


def test_csv_format(tmp_path, capsys):
    code, out = run(capsys, ["z-exact", write_graph(tmp_path, single_edge()), "--format", "csv"])
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "field,value"
    assert "Z,7.0" in lines
    assert any(line.startswith("marginals.e,") for line in lines)


def test_deterministic_reports(tmp_path, capsys):
    path = write_graph(tmp_path, random_graph(np.random.default_rng(7), 3, 4))
    _, a = run_json(capsys, ["bethe", path, "--starts", "3", "--seed", "11"])
    _, b = run_json(capsys, ["bethe", path, "--starts", "3", "--seed", "11", "--threads", "4"])
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_exit_code_constants():
    assert (EXIT_OK, EXIT_ASSERTION, EXIT_BUDGET, EXIT_INPUT) == (0, 2, 3, 4)
