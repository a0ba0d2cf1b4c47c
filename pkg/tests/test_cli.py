import csv
import io
import json
import math
import subprocess
import sys

import pytest

from softmdp.cli import CSV_COLUMNS, main

SYMMETRIC = ('{"num_states": 1, "num_actions": 2, "gamma": 0.5, "rewards": [[0, 0]],'
             ' "transitions": [[[1], [1]]]}')
ONE_ACTION = ('{"num_states": 1, "num_actions": 1, "gamma": 0.5, "rewards": [[1]],'
              ' "transitions": [[[1]]]}')


@pytest.fixture
def files(tmp_path):
    def make(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return make


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_check_valid_is_silent(capsys, files):
    assert run(capsys, "check", files("s.json", SYMMETRIC)) == (0, "", "")


def test_check_bad_row(capsys, files):
    code, out, _ = run(capsys, "check", files("b.json", ONE_ACTION.replace("[[[1]]]", "[[[0.9]]]")))
    assert code == 2
    assert out.strip().splitlines() == [out.strip()]
    assert "row sum 0.9 != 1 at [0][0]" in out


def test_check_malformed_and_missing(capsys, files, tmp_path):
    code, _, err = run(capsys, "check", files("m.json", '{"num_states": '))
    assert code == 1 and "parse error" in err
    code, _, err = run(capsys, "check", tmp_path / "nope.json")
    assert code == 1 and "cannot read" in err


def test_generate_deterministic_and_checkable(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(capsys, "generate", "--seed", 42, "--states", 3, "--actions", 2, "--gamma", 0.9,
                   "--reward-range", -1, 1, "--out", p, "--deterministic")[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert run(capsys, "check", a)[0] == 0


def test_generate_invalid_parameters(capsys, tmp_path):
    code, _, err = run(capsys, "generate", "--seed", 1, "--states", 2, "--actions", 2,
                       "--gamma", 1.5, "--out", tmp_path / "x.json")
    assert code == 2 and "gamma" in err
    code, _, _ = run(capsys, "generate", "--seed", 1, "--states", 2, "--actions", 2,
                     "--gamma", 0.5, "--out", tmp_path / "missing" / "x.json")
    assert code == 1


def test_solve_summary_vi_and_spi(capsys, files, tmp_path):
    path = files("s.json", SYMMETRIC)
    code, out, _ = run(capsys, "solve", path, "--method", "vi", "--reg", "entropy", "--eta", 1,
                       "--out", tmp_path / "vi.json")
    assert code == 0 and "V[0] = 1.386294" in out
    code, out, _ = run(capsys, "solve", path, "--method", "spi", "--out", tmp_path / "spi.json")
    assert code == 0
    v_vi = json.loads((tmp_path / "vi.json").read_text())["result"]["fixed_point_v"][0]
    v_spi = json.loads((tmp_path / "spi.json").read_text())["result"]["fixed_point_v"][0]
    assert abs(v_vi - v_spi) <= 1e-9
    assert abs(v_spi - 2 * math.log(2)) <= 1e-9


def test_solve_report_timestamp_only_when_not_deterministic(capsys, files, tmp_path):
    path = files("s.json", SYMMETRIC)
    run(capsys, "solve", path, "--out", tmp_path / "a.json")
    run(capsys, "solve", path, "--out", tmp_path / "b.json", "--deterministic")
    run(capsys, "solve", path, "--out", tmp_path / "c.json", "--deterministic")
    assert "timestamp" in json.loads((tmp_path / "a.json").read_text())["provenance"]
    assert (tmp_path / "b.json").read_bytes() == (tmp_path / "c.json").read_bytes()
    assert "timestamp" not in (tmp_path / "b.json").read_text()


def test_solve_none_warns_about_eta(capsys, files):
    code, _, err = run(capsys, "solve", files("s.json", SYMMETRIC), "--reg", "none", "--eta", 1)
    assert code == 0 and "ignored" in err


@pytest.mark.parametrize("flags", [["--reg", "kl"], ["--eta", "0"], ["--eta", "-1", "--reg", "kl",
                                                                   "--uniform-prior"],
                                   ["--uniform-prior"], ["--tol", "0"]])
def test_solve_argument_errors(capsys, files, flags):
    assert run(capsys, "solve", files("s.json", SYMMETRIC), *flags)[0] == 2


def test_solve_kl_uniform_prior(capsys, files):
    code, out, _ = run(capsys, "solve", files("s.json", SYMMETRIC), "--reg", "kl", "--uniform-prior")
    assert code == 0 and "V[0] = 0.000000000" in out


def test_solve_nonconvergence_exit(capsys, files):
    assert run(capsys, "solve", files("s.json", SYMMETRIC), "--max-iter", 1)[0] == 4


def test_tolerance_env_and_flag_precedence(capsys, files, monkeypatch, tmp_path):
    path = files("s.json", SYMMETRIC)
    monkeypatch.setenv("SOFTMDP_DEFAULT_TOL", "1e-3")
    run(capsys, "solve", path, "--out", tmp_path / "env.json", "--deterministic")
    run(capsys, "solve", path, "--tol", "1e-6", "--out", tmp_path / "flag.json", "--deterministic")
    env = json.loads((tmp_path / "env.json").read_text())["provenance"]["config"]["tolerance"]
    flag = json.loads((tmp_path / "flag.json").read_text())["provenance"]["config"]["tolerance"]
    assert (env, flag) == (1e-3, 1e-6)


def test_summary_truncates_at_ten_states(capsys, tmp_path):
    p = tmp_path / "g.json"
    run(capsys, "generate", "--seed", 3, "--states", 12, "--actions", 2, "--gamma", 0.5, "--out", p)
    _, out, _ = run(capsys, "solve", p)
    assert "V[9]" in out and "V[10]" not in out and "2 more states" in out


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_compare_single_action_file(capsys, files):
    code, out, _ = run(capsys, "compare", files("one.json", ONE_ACTION), "--eta-list", "1")
    assert code == 0
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
    (row,) = _rows(out)
    assert row["policy_gap"] == "0.0" and float(row["q_gap"]) <= 1e-10
    assert row["verdict"] == "pass"


def test_compare_threshold_zero_fails(capsys, files):
    path = files("g.json", '{"num_states": 2, "num_actions": 2, "gamma": 0.9,'
                 ' "rewards": [[1, 0], [0, 0.5]],'
                 ' "transitions": [[[0.3, 0.7], [0.5, 0.5]], [[1, 0], [0.2, 0.8]]]}')
    code, out, _ = run(capsys, "compare", path, "--threshold", 0)
    assert code == 3 and all(r["verdict"] == "fail" for r in _rows(out))


def test_compare_random_suite_outputs(capsys, tmp_path):
    args = ["compare", "--random-suite", 5, "--seed", 1, "--deterministic",
            "--csv", tmp_path / "g.csv", "--out", tmp_path / "r.json"]
    code, out, _ = run(capsys, *args)
    assert code == 0 and "passed: 40" in out
    rows = _rows((tmp_path / "g.csv").read_text())
    assert len(rows) == 40 and max(float(r["q_gap"]) for r in rows) <= 1e-6
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["summary"]["passed"] == 40 and len(report["instances"]) == 40


def test_compare_nonconvergence_exit(capsys):
    assert run(capsys, "compare", "--random-suite", 1, "--max-iter", 1)[0] == 4


def test_compare_argument_errors(capsys, files):
    assert run(capsys, "compare")[0] == 2
    assert run(capsys, "compare", "--random-suite", 2, "--shape-ranges", "states=2")[0] == 2
    assert run(capsys, "compare", "--random-suite", 2, "--eta-list", "0,1")[0] == 2
    assert run(capsys, "compare", files("s.json", SYMMETRIC), "--reg", "kl")[0] == 2


def test_compare_shape_ranges(capsys, tmp_path):
    code, _, _ = run(capsys, "compare", "--random-suite", 3, "--shape-ranges",
                     "states=2:3,actions=2:2,gamma=0.6:0.7", "--csv", tmp_path / "g.csv")
    rows = _rows((tmp_path / "g.csv").read_text())
    assert code == 0
    assert {r["A"] for r in rows} == {"2"} and all(0.6 <= float(r["gamma"]) <= 0.7 for r in rows)


def test_verify_symmetric_all(capsys, files):
    code, out, _ = run(capsys, "verify", files("s.json", SYMMETRIC), "--checks", "all")
    assert code == 0
    lines = dict(line.split(None, 1) for line in out.strip().splitlines())
    assert set(lines) == {"kkt", "multiplier", "prop1", "exhaustive"}
    assert float(lines["kkt"].split()[0]) <= 1e-9
    assert all(v.endswith("pass") for v in lines.values())


def test_verify_guard(capsys, tmp_path):
    p = tmp_path / "four.json"
    run(capsys, "generate", "--seed", 2, "--states", 4, "--actions", 2, "--gamma", 0.9, "--out", p)
    code, _, err = run(capsys, "verify", p, "--checks", "exhaustive")
    assert code == 5 and "refused" in err


def test_verify_random_small(capsys, tmp_path):
    p = tmp_path / "small.json"
    run(capsys, "generate", "--seed", 8, "--states", 2, "--actions", 2, "--gamma", 0.9,
        "--with-prior", "--out", p)
    for reg in ("entropy", "kl", "none"):
        code, out, _ = run(capsys, "verify", p, "--reg", reg)
        assert code == 0, out


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "softmdp", "check", files("s.json", SYMMETRIC)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == ""
