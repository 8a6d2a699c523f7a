from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, xz_set
from localroi import io as jio
from localroi.cli import main
from localroi.conic import SdpProblem
from localroi.discrimination import random_task
from localroi.errors import SchemaError
from localroi.incompatibility import build_primal_problem, compute_roi
from localroi.measurements import deterministic_strings


@pytest.mark.parametrize("name, schema", [
    ("set_xz.json", "measurement_set.v1"),
    ("set_xyz.json", "measurement_set.v1"),
    ("set_compatible.json", "measurement_set.v1"),
    ("task_product.json", "task.v1"),
    ("task_random.json", "task.v1"),
])
def test_fixture_round_trip_is_byte_identical(name, schema):
    text = (FIXTURES / name).read_text()
    assert jio.dumps(jio.load(FIXTURES / name, schema)) == text


def test_typed_round_trips(tmp_path):
    s = xz_set()
    again = jio.set_from_json(jio.loads(jio.dumps(jio.set_to_json(s))))
    assert all(np.array_equal(a, b) for p, q in zip(s, again) for a, b in zip(p, q))
    t = random_task((2, 2), 2, 2, seed=1)
    t2 = jio.task_from_json(jio.loads(jio.dumps(jio.task_to_json(t))))
    assert np.array_equal(t.padded_states(), t2.padded_states())
    cert = compute_roi(s)
    doc = jio.cert_to_json(cert)
    jio.save(tmp_path / "c.json", doc, "roi_cert.v1")
    back = jio.cert_from_json(jio.load(tmp_path / "c.json", "roi_cert.v1"))
    assert back.roi == cert.roi and back.check(s) == []


def test_sdp_dump_validates():
    s = xz_set()
    dump = build_primal_problem(s, deterministic_strings(s)).to_json()
    jio.validate(jio.loads(jio.dumps(dump)), "sdp_dump.v1")
    assert SdpProblem.from_json(jio.loads(jio.dumps(dump))).to_json()["name"] == "roi_primal"


def test_missing_dim_pointer():
    with pytest.raises(SchemaError) as err:
        jio.load(FIXTURES / "bad_missing_dim.json", "measurement_set.v1")
    assert err.value.pointer == "/dim"


def test_nested_pointer():
    doc = jio.load(FIXTURES / "task_product.json", "task.v1")
    del doc["ensembles"][0]["states"][1]["weight"]
    with pytest.raises(SchemaError) as err:
        jio.validate(doc, "task.v1")
    assert err.value.pointer == "/ensembles/0/states/1/weight"


def test_nan_rejected():
    with pytest.raises(SchemaError):
        jio.load(FIXTURES / "bad_nan.json", "measurement_set.v1")
    with pytest.raises(SchemaError):
        jio.dumps({"x": float("nan")})


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trip(x):
    text = jio.dumps({"x": x})
    assert jio.loads(text)["x"] == x
    assert jio.dumps(jio.loads(text)) == text


def run(args, capsys):
    code = main([str(a) for a in args])
    return code, capsys.readouterr()


def test_cli_roi(tmp_path, capsys):
    out = tmp_path / "cert.json"
    code, _ = run(["roi", "-i", FIXTURES / "set_xz.json", "-o", out], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == "roi_cert.v1" and doc["gap"] <= 1e-6 and doc["valid"]
    assert doc["config"]["command"] == "roi" and "version" in doc


def test_cli_verify_achievability(tmp_path, capsys):
    out = tmp_path / "v.json"
    code, _ = run(["verify-achievability", "-i", FIXTURES / "set_xz.json", "-i", FIXTURES / "set_xz.json", "-o", out], capsys)
    assert code == 0
    res = json.loads(out.read_text())["result"]
    assert abs(res["ratio"] - res["expected_ratio"]) <= 1e-4


def test_cli_construct_outputs(tmp_path, capsys):
    out = tmp_path / "opt.json"
    code, _ = run(["construct", "-i", FIXTURES / "set_xz.json", "-i", FIXTURES / "set_z.json", "-o", out], capsys)
    assert code == 0
    jio.task_from_json(jio.load(out, "task.v1"))
    meta = jio.load(tmp_path / "opt.meta.json", "bundle_meta.v1")
    assert meta["M_star"] > 0 and meta["task_file"] == "opt.json"


@pytest.mark.parametrize("args", [
    ["psg", "--task", FIXTURES / "bad_syntax.json", "-i", FIXTURES / "set_xz.json", "-i", FIXTURES / "set_xz.json"],
    ["roi", "-i", FIXTURES / "bad_missing_dim.json"],
    ["roi", "-i", FIXTURES / "bad_nan.json"],
    ["roi", "-i", FIXTURES / "bad_not_psd.json"],
    ["roi", "-i", FIXTURES / "does_not_exist.json"],
    ["psg", "--task", FIXTURES / "task_random.json", "-i", FIXTURES / "set_xz.json"],
    ["psg", "--task", FIXTURES / "task_random.json", "-i", FIXTURES / "set_xz.json", "-i", FIXTURES / "set_xz.json", "--parties", "3"],
    ["roi", "-i", FIXTURES / "set_xz.json", "--tol", "gap_tol=-1"],
])
def test_cli_input_errors(args, capsys):
    code, cap = run(args, capsys)
    assert code == 2
    assert "error" in cap.err


def test_cli_schema_diagnostic_has_pointer(capsys):
    code, cap = run(["roi", "-i", FIXTURES / "bad_missing_dim.json"], capsys)
    assert code == 2 and "/dim" in cap.err


def test_cli_resource_failure(capsys):
    code, _ = run(["roi", "-i", FIXTURES / "set_xyz.json", "--tol", "string_cap=4"], capsys)
    assert code == 3


def test_cli_solver_gap_failure(capsys):
    code, _ = run(["roi", "-i", FIXTURES / "set_xz.json", "--tol", "gap_tol=1e-15"], capsys)
    assert code == 3


def test_cli_check_failure(capsys):
    # one see-saw restart stalls in a local optimum on this task, so the reach check fails
    code, cap = run(["verify-achievability", "-i", FIXTURES / "set_z.json", "-i", FIXTURES / "set_z.json",
                     "--restarts", "1"], capsys)
    assert code == 1
    assert "FAIL  seesaw_reaches_bound" in cap.out


def test_cli_success_paths(capsys):
    code, _ = run(["tensor-roi", "-i", FIXTURES / "set_xz.json", "-i", FIXTURES / "set_z.json"], capsys)
    assert code == 0
    code, cap = run(["compat-check", "-i", FIXTURES / "set_compatible.json"], capsys)
    assert code == 0 and cap.out.startswith("compatible")
    code, _ = run(["simulate", "--task", FIXTURES / "task_random.json", "-i", FIXTURES / "set_xz.json",
                   "-i", FIXTURES / "set_xyz.json", "--trials", "50000", "--seed", "3", "--mode", "locc1"], capsys)
    assert code == 0
    code, _ = run(["seesaw", "--task", FIXTURES / "task_product.json", "--parent-sizes", "2", "2", "--restarts", "2"], capsys)
    assert code == 0


def test_cli_help_lists_commands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for cmd in ("roi", "compat-check", "tensor-roi", "psg", "seesaw", "bound-check", "construct", "verify-achievability", "simulate"):
        assert cmd in text
