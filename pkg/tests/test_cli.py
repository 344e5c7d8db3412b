import json
from pathlib import Path

import pytest

import main

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "logging": {"level": "ERROR"},
        "flatness": {"restarts": 8, "iters": 200},
        "simulation": {"dim": 40, "samples": 2},
    }))
    return str(path)


def run(capsys, config, *argv):
    code = main.main(["--config", config, *argv])
    return code, capsys.readouterr().out


def test_zerotest_exit_codes(capsys, config):
    code, out = run(capsys, config, "zerotest", "--expr", "y*inv(x*y)*x - 1")
    assert code == main.EXIT_OK
    assert json.loads(out)["zero"] is True
    code, out = run(capsys, config, "zerotest", "--expr", "x*y - y*x")
    assert code == main.EXIT_NEGATIVE
    assert json.loads(out)["zero"] is False


def test_zerotest_full_block(capsys, config):
    code, out = run(capsys, config, "zerotest", "--expr", "x1", "--method", "full_block")
    assert code == main.EXIT_NEGATIVE


def test_not_regular_expression(capsys, config):
    code, out = run(capsys, config, "zerotest", "--expr", "inv(x - x)")
    assert code == main.EXIT_INPUT
    assert json.loads(out)["regular"] is False


def test_syntax_error(capsys, config):
    code, out = run(capsys, config, "parse", "--expr", "inv(x")
    assert code == main.EXIT_INPUT
    assert out == ""


def test_parse_and_linearize(capsys, config):
    code, out = run(capsys, config, "parse", "--expr", "inv(x1)")
    assert code == main.EXIT_OK
    assert json.loads(out)["text"] == "inv(x1)"
    code, out = run(capsys, config, "parse", "--poly", "x1*x2 + 1")
    assert json.loads(out)["degree"] == 2
    code, out = run(capsys, config, "linearize", "--expr", "x1*x2")
    payload = json.loads(out)
    assert payload["dimension"] == 4
    assert len(payload["u"]) == 4


def test_rank_of_pencils(capsys, config):
    code, out = run(capsys, config, "rank", "--pencil", str(DATA / "allones.json"))
    assert code == main.EXIT_OK
    payload = json.loads(out)
    assert payload["rho"] == 1
    assert payload["kind"] == "ShrunkSubspace"
    code, out = run(capsys, config, "rank", "--pencil", str(DATA / "allones.json"), "--hollow")
    assert json.loads(out)["kind"] == "Hollow"
    code, out = run(capsys, config, "rank", "--pencil", str(DATA / "pauli3.json"))
    assert json.loads(out)["kind"] == "Full"


def test_rank_of_polynomial_matrix(capsys, config):
    code, out = run(capsys, config, "rank", "--poly-matrix", str(DATA / "rank_one_block.json"))
    assert json.loads(out)["rho"] == 1
    code, out = run(capsys, config, "rank", "--poly-matrix", str(DATA / "rank_one_block.json"),
                    "--method", "full_block")
    assert json.loads(out)["rho"] == 1


def test_eval(capsys, config):
    code, out = run(capsys, config, "eval", "--expr", "x1*x2", "--tuple", str(DATA / "tuple_2x2.json"))
    assert code == main.EXIT_OK
    payload = json.loads(out)
    assert payload["dim"] == 2
    # [[2, 1], [1, 3]] @ diag(1, -1)
    assert payload["value"][0][0] == pytest.approx([2.0, 0.0], abs=1e-9)
    assert payload["value"][1][1] == pytest.approx([-3.0, 0.0], abs=1e-9)


def test_eval_outside_domain(capsys, config):
    code, _ = run(capsys, config, "eval", "--expr", "inv(x2 - 1)", "--tuple", str(DATA / "tuple_2x2.json"))
    assert code == main.EXIT_INPUT


def test_atoms_and_entropy_dimension(capsys, config):
    code, out = run(capsys, config, "atoms", "--pencil", str(DATA / "diag_x1_1.json"))
    payload = json.loads(out)
    assert [atom["lambda"] for atom in payload["atoms"]] == pytest.approx([1.0])
    assert payload["atoms"][0]["weight"] == pytest.approx(0.5)
    code, out = run(capsys, config, "entropy-dim", "--pencil", str(DATA / "diag_x1_1.json"))
    assert json.loads(out)["delta_star"] == pytest.approx(0.75)


def test_hoelder(capsys, config):
    code, out = run(capsys, config, "hoelder", "--pencil", str(DATA / "pauli3.json"))
    payload = json.loads(out)
    assert payload["fisher"] == 3.0 and payload["fisher_default"]
    assert payload["C"] == pytest.approx(5.241, abs=1e-2)
    assert payload["log_energy_bound"] == pytest.approx(-15.72, abs=3e-2)
    code, _ = run(capsys, config, "hoelder", "--pencil", str(DATA / "allones.json"))
    assert code == main.EXIT_INPUT


def test_simulate_json_and_csv(capsys, config, tmp_path):
    csv_path = tmp_path / "eigs.csv"
    code, out = run(capsys, config, "simulate", "--pencil", str(DATA / "diag_x1_1.json"), "--csv", str(csv_path))
    assert code == main.EXIT_OK
    assert json.loads(out)["dim"] == 40
    assert csv_path.read_text().splitlines()[0] == "sample,index,eigenvalue"

    summary_path = tmp_path / "summary.json"
    code, out = run(capsys, config, "simulate", "--pencil", str(DATA / "diag_x1_1.json"), "--format", "csv",
                    "--summary", str(summary_path))
    lines = out.splitlines()
    assert lines[0] == "sample,index,eigenvalue"
    assert len(lines) == 1 + 2 * 2 * 40
    assert json.loads(summary_path.read_text())["samples"] == 2


def test_missing_file(capsys, config):
    code, _ = run(capsys, config, "atoms", "--pencil", "does-not-exist.json")
    assert code == main.EXIT_INPUT
