import csv
import io
import json
import subprocess
import sys

import pytest

from _instances import loop_instance, seven_vehicle_tree, setup
from frcvp.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, EXIT_USAGE, RESULT_FIELDS, SWEEP_FIELDS, main
from frcvp.model import load_instance
from frcvp.solvers.enumerate import exact_enumerate


@pytest.fixture
def tree_file(tmp_path):
    p = tmp_path / "tree.json"
    p.write_text(seven_vehicle_tree().to_json())
    return p


@pytest.fixture
def loop_file(tmp_path):
    p = tmp_path / "loop.json"
    p.write_text(loop_instance().to_json())
    return p


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_generate_round_trips(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["generate", "--edges", "30", "--vehicles", "12", "--seed", "3", "--out", str(out)]) == EXIT_OK
    inst = load_instance(out)
    assert len(inst.vehicles) == 12 and len(inst.network.edges) == 30
    assert "route_graph=single-tree" in capsys.readouterr().out


def test_generate_reuses_network(tmp_path, tree_file):
    base, out = tmp_path / "base.json", tmp_path / "g.json"
    main(["generate", "--edges", "25", "--vehicles", "3", "--seed", "1", "--out", str(base)])
    assert main(["generate", "--network-file", str(base), "--vehicles", "6", "--seed", "2", "--out", str(out)]) == EXIT_OK
    assert load_instance(out).network == load_instance(base).network
    # a network without positions has no default origin region
    assert main(["generate", "--network-file", str(tree_file), "--vehicles", "4"]) == EXIT_INVALID


def test_discretize_tree(tree_file, capsys):
    assert main(["discretize", "--instance", str(tree_file)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["summary"] == {"buckets": 9, "distinct_rtws": 7, "within_bounds": True}
    assert set(doc["rtws"]) == {str(i) for i in range(1, 8)}


def test_discretize_loop_runs_loop_break(loop_file, capsys):
    assert main(["discretize", "--instance", str(loop_file)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "converged" and len(doc["buckets"]["buckets"]) == 13


@pytest.mark.parametrize("method", ["exact", "bnb", "greedy", "greedy2", "ptas", "lp-round"])
def test_solve_row_and_schedule(tmp_path, tree_file, method):
    out = tmp_path / "r.csv"
    assert main(["solve", "--instance", str(tree_file), "--method", method, "--out", str(out)]) == EXIT_OK
    (row,) = rows(out.read_text())
    assert tuple(row) == RESULT_FIELDS and row["method"] == method and row["status"] == "ok"
    sched = json.loads((tmp_path / "r.schedule.json").read_text())
    assert set(sched) == {str(i) for i in range(1, 8)}
    inst = seven_vehicle_tree()
    opt = exact_enumerate(inst, setup(inst)[2]).value
    assert float(row["objective"]) <= opt + 1e-9
    if method in ("exact", "bnb"):
        assert float(row["objective"]) == pytest.approx(opt)


def test_solve_twof_has_no_schedule(tree_file, capsys):
    assert main(["solve", "--instance", str(tree_file), "--formulation", "twof"]) == EXIT_OK
    (row,) = rows(capsys.readouterr().out)
    assert "no schedule" in row["note"]


def test_solve_loop_uses_gva(loop_file, capsys):
    assert main(["solve", "--instance", str(loop_file)]) == EXIT_OK
    (row,) = rows(capsys.readouterr().out)
    assert row["note"] == "gva" and row["buckets"] == "13"


def test_solve_loop_rejects_tree_methods(loop_file):
    assert main(["solve", "--instance", str(loop_file), "--method", "greedy"]) == EXIT_INVALID


def test_zero_budget_exit_code(tmp_path):
    out = tmp_path / "g.json"
    main(["generate", "--edges", "40", "--vehicles", "20", "--seed", "1", "--out", str(out)])
    assert main(["solve", "--instance", str(out), "--budget-sec", "0"]) == EXIT_BUDGET


def test_export_formulations(tmp_path, tree_file):
    for form in ("va", "twof", "ct", "lp"):
        out = tmp_path / f"{form}.lp"
        assert main(["export", "--instance", str(tree_file), "--formulation", form, "--out", str(out)]) == EXIT_OK
        text = out.read_text()
        assert text.startswith("\\") or text.lower().lstrip().startswith("max")
        assert "End" in text


def test_export_gva_on_tree_falls_back(tree_file, capsys):
    assert main(["export", "--instance", str(tree_file), "--formulation", "gva"]) == EXIT_OK
    assert "exporting va instead of gva" in capsys.readouterr().err


def test_export_gva_on_loop(tmp_path, loop_file):
    out = tmp_path / "g.lp"
    assert main(["export", "--instance", str(loop_file), "--formulation", "gva", "--out", str(out)]) == EXIT_OK
    assert "VA2_2" in out.read_text()


def test_sweep(tmp_path, capsys):
    out = tmp_path / "g.json"
    main(["generate", "--edges", "30", "--vehicles", "8", "--seed", "2", "--out", str(out)])
    capsys.readouterr()
    assert main(["sweep", "--instance", str(out), "--ratios", "0.02,0.1", "--trials", "3"]) == EXIT_OK
    table = rows(capsys.readouterr().out)
    assert [float(r["ratio"]) for r in table] == [0.02, 0.1]
    assert tuple(table[0]) == SWEEP_FIELDS
    assert all(r["buckets_within_bounds"] == "True" and r["trials"] == "3" for r in table)


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--instance", "x", "--method", "nope"])
    assert exc.value.code == EXIT_USAGE


def test_invalid_instance(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--instance", str(bad)]) == EXIT_INVALID
    assert main(["solve", "--instance", str(tmp_path / "missing.json")]) == EXIT_INVALID


def test_console_entry_point(tree_file):
    proc = subprocess.run([sys.executable, "-m", "frcvp.cli", "solve", "--instance", str(tree_file),
                           "--method", "greedy"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert rows(proc.stdout)[0]["method"] == "greedy"
