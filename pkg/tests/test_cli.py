import json

import pytest

from phiblab.cli import EXIT_BY_CODE, jsonable, main, run_scenario, strip_timing

RELINDEX = """\
name = "scalar_relindex"
pipeline = "RELINDEX"

[operator]
model = "scalar"
params = {{ a = 0.5 }}

[weights]
beta1 = {b1}
beta2 = {b2}

[discretization]
T = 200.0
M = 64
N = 0
"""


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_relindex_match_exits_zero(tmp_path, capsys):
    p = write(tmp_path, RELINDEX.format(b1=0.0, b2=1.0))
    out = tmp_path / "out"
    assert main(["run", str(p), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    res = rep["result"]
    assert (res["lhs_numeric"], res["rhs_contour"], res["oracle"], res["status"]) == (1, 1, 1, "MATCH")
    assert rep["exit_code"] == 0 and rep["error"] is None
    assert "RELINDEX" in capsys.readouterr().out


def test_weight_on_spectrum_exits_one(tmp_path):
    p = write(tmp_path, RELINDEX.format(b1=0.0, b2=0.5))
    code, rep = run_scenario(p, tmp_path / "out")
    assert code == 1
    assert rep["error"]["code"] == "WEIGHT_ON_SPECTRUM"
    assert json.loads((tmp_path / "out" / "report.json").read_text())["error"]["code"] == "WEIGHT_ON_SPECTRUM"


def test_config_error_report_names_field(tmp_path):
    p = write(tmp_path, RELINDEX.format(b1=0.0, b2=1.0).replace("a = 0.5", "q = 0.5"))
    code, rep = run_scenario(p, tmp_path / "out")
    assert code == 1
    assert rep["error"]["details"]["field"] == "operator.params.q"


def test_missing_file_exits_one(tmp_path):
    code, rep = run_scenario(tmp_path / "absent.cfg", tmp_path / "out")
    assert code == 1 and rep["error"]["code"] == "CONFIG_ERROR"


def test_divisibility_violation_exits_two(tmp_path):
    text = """\
name = "neg"
pipeline = "ZK"

[operator]
model = "sum"
params = { components = [{ name = "scalar", a = 0.3 }, { name = "scalar", a = 0.8 }] }

[zk]
k = 2
base = { name = "scalar", a = 0.3 }

[weights]
beta = 0.1
sweep = [0.5, 1.1]

[discretization]
T = 200.0
M = 64
N = 0
"""
    code, rep = run_scenario(write(tmp_path, text), tmp_path / "out")
    assert code == 2
    assert rep["error"]["code"] == "DIVISIBILITY_VIOLATION"


def test_staircase_writes_csv(tmp_path):
    text = """\
name = "st"
pipeline = "STAIRCASE"

[operator]
model = "scalar"
params = { a = 0.3 }

[weights]
range = [-0.5, 1.0]
steps = 7

[discretization]
T = 200.0
M = 64
N = 0
"""
    code, rep = run_scenario(write(tmp_path, text), tmp_path / "out")
    assert code == 0
    lines = (tmp_path / "out" / "staircase.csv").read_text().splitlines()
    assert lines[0].split(",")[:2] == ["beta", "rel_index"]
    assert len(lines) == 8


def test_report_is_deterministic(tmp_path):
    p = write(tmp_path, RELINDEX.format(b1=0.0, b2=1.0))
    _, a = run_scenario(p, tmp_path / "a")
    _, b = run_scenario(p, tmp_path / "b")
    assert strip_timing(a) == strip_timing(b)
    assert "timing" not in strip_timing(a)


def test_unknown_flag_prints_usage_and_exits_one(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "x.cfg", "--bogus"])
    assert e.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_list_models_machine(capsys):
    assert main(["list-models", "--machine"]) == 0
    names = [m["name"] for m in json.loads(capsys.readouterr().out)]
    assert "D" in names and "kfold" in names


def test_list_models_human(capsys):
    assert main(["list-models"]) == 0
    assert "laplace" in capsys.readouterr().out


def test_exit_codes_partition():
    assert EXIT_BY_CODE["DIVISIBILITY_VIOLATION"] == 2
    assert set(EXIT_BY_CODE.values()) <= {0, 1, 2, 3}


def test_jsonable():
    assert jsonable({"x": float("inf"), "z": 1 + 2j, "t": (1, 2)}) == {"x": "inf", "z": [1.0, 2.0], "t": [1, 2]}
