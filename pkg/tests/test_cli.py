import csv
import io
import json
import subprocess
import sys

import pytest

from exploding import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, doc, name="def.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_validate_echoes_normalized(capsys):
    code, out, _ = run(capsys, "validate", "eight_cycle")
    assert code == 0
    doc = json.loads(out)
    assert doc["backend"] == "finite" and doc["map"] == [1, 2, 3, 4, 5, 6, 7, 0]
    assert doc["mu"] == ["1/8"] * 8
    assert doc["derived"]["b"][0] == "1/2"


def test_validate_non_decreasing_weights(tmp_path, capsys):
    path = write(tmp_path, {
        "backend": "finite", "mu": ["1/2", "1/2"], "map": [1, 0],
        "levels": {"kind": "custom", "a": ["1/4", "3/4"], "cap": 2},
    })
    code, out, err = run(capsys, "validate", path)
    assert code == 2 and out == ""
    problems = json.loads(err)["problems"]
    assert "not_strictly_decreasing" in {p["code"] for p in problems}


@pytest.mark.parametrize("doc, code", [
    ({"backend": "torus", "levels": {"kind": "geometric", "ratio": "1/2", "cap": 2}}, "unknown_backend"),
    ({"backend": "shift", "p": ["1/2", "1/2"]}, "missing_levels"),
    ({"backend": "shift", "p": ["1/2", "1/2"], "levels": {"kind": "geometric", "ratio": "1/2", "cap": 1}},
     "cap_too_small"),
    ({"backend": "shift", "alphabet": 3, "p": ["1/2", "1/2"],
      "levels": {"kind": "geometric", "ratio": "1/2", "cap": 2}}, "alphabet_mismatch"),
    ({"backend": "finite", "mu": ["1/2", "1/2"], "map": [0, 0],
      "levels": {"kind": "geometric", "ratio": "1/2", "cap": 2}}, "not_injective"),
])
def test_input_errors_exit_2(tmp_path, capsys, doc, code):
    rc, _, err = run(capsys, "validate", write(tmp_path, doc))
    assert rc == 2
    assert code in {p["code"] for p in json.loads(err)["problems"]}


def test_missing_file_and_bad_json(tmp_path, capsys):
    rc, _, err = run(capsys, "check", str(tmp_path / "nothing.json"))
    assert rc == 2 and json.loads(err)["error"] == "file_not_found"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc, _, err = run(capsys, "check", str(bad))
    assert rc == 2 and json.loads(err)["error"] == "bad_json"


def test_check_eight_cycle(capsys):
    code, out, _ = run(capsys, "check", "eight_cycle")
    assert code == 0
    rep = json.loads(out)
    assert rep["doubly_stochastic"]["passed"]
    assert rep["ergodicity"]["eig_multiplicity"] == 1 and rep["ergodicity"]["agree"]


def test_check_two_two_cycles_is_consistent_non_ergodic(capsys):
    code, out, _ = run(capsys, "check", "two_two_cycles")
    assert code == 0
    erg = json.loads(out)["ergodicity"]
    assert erg["eig_multiplicity"] == 2 and not erg["map_ergodic"] and erg["agree"]


def test_kernel_csv(tmp_path, capsys):
    out_path = tmp_path / "k.csv"
    code, _, _ = run(capsys, "kernel", "two_two_cycles", "--out", str(out_path))
    assert code == 0
    rows = list(csv.reader(io.StringIO(out_path.read_text())))
    assert rows[0] == ["from_x", "from_k", "to_x", "to_k", "prob"]
    assert rows[1] == ["0", "1", "1", "1", "1/2"]


def test_kernel_json(capsys):
    code, out, _ = run(capsys, "kernel", "two_two_cycles", "--format", "json")
    assert code == 0
    assert json.loads(out)[0]["targets"][0] == {"to": [1, 1], "prob": "1/2"}


def test_kernel_on_shift_is_input_error(capsys):
    code, _, err = run(capsys, "kernel", "fair_coin")
    assert code == 2 and json.loads(err)["error"] == "UnsupportedModeError"


def test_lemma_table(capsys):
    code, out, _ = run(capsys, "lemma", "fair_coin", "--word", "1", "--i-max", "6", "--n-max", "6")
    assert code == 0
    rep = json.loads(out)
    assert rep["rows"] == 36 and len(rep["table"]) == 36
    assert rep["margins_nonnegative"]


def test_lemma_csv(tmp_path, capsys):
    code, out, _ = run(capsys, "lemma", "fair_coin", "--i-max", "2", "--n-max", "2", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "i,n,lhs,bound,margin" and len(lines) == 5


def test_entropy_shift(capsys):
    code, out, _ = run(capsys, "entropy", "fair_coin", "--n-max", "3")
    assert code == 0
    rep = json.loads(out)
    assert rep["ks_entropy"]["h_over_n"] == pytest.approx([0.6931471805599453] * 3)
    assert rep["r_summability"]["R_at_cap"] == "0/1"


def test_entropy_partition(capsys):
    code, out, _ = run(capsys, "entropy", "two_two_cycles", "--n-max", "2", "--partition", "0,2|1,3")
    assert code == 0
    assert len(json.loads(out)["ks_entropy"]["h_over_n"]) == 2


def test_simulate_non_ergodic(tmp_path, capsys):
    occ = tmp_path / "occ.csv"
    code, out, _ = run(capsys, "simulate", "two_two_cycles", "--steps", "2000", "--start", "0,1",
                       "--observable", "set:0,1", "--out", str(occ))
    assert code == 0
    rep = json.loads(out)
    assert rep["birkhoff_average"] == "1/1" and rep["integral"] == "1/2"
    assert occ.read_text().splitlines()[0] == "x,k,occupancy,nu"


@pytest.mark.parametrize("obs", ["set:9", "level:7", "foo:1"])
def test_simulate_bad_observable(capsys, obs):
    code, _, err = run(capsys, "simulate", "eight_cycle", "--steps", "10", "--observable", obs)
    assert code == 2 and json.loads(err)["error"] == "invalid_observable"


def test_factors_shift_words(capsys):
    code, out, _ = run(capsys, "factors", "fair_coin", "--word", "1", "--word", "011")
    assert code == 0
    assert len(json.loads(out)["witnesses"]) == 2


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", "fair_coin", "--functions", "10")
    assert code == 0
    rep = json.loads(out)
    assert rep["consistent"]


def test_float_mode_flag(capsys):
    code, out, _ = run(capsys, "check", "eight_cycle", "--mode", "float")
    assert code == 0
    assert json.loads(out)["doubly_stochastic"]["exact"] is False


@pytest.mark.parametrize("argv", [
    ["check", "eight_cycle"],
    ["simulate", "eight_cycle", "--steps", "3000", "--seed", "9"],
    ["lemma", "fair_coin", "--i-max", "3", "--n-max", "3"],
    ["compare", "biased_coin", "--functions", "5"],
])
def test_byte_identical_across_processes(argv):
    cmd = [sys.executable, "-m", "exploding", *argv]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second and first
