import csv
import io
import json

import pytest

from hyperalloc.cli import FORMAT_ENV, main
from hyperalloc.report import emit_report
from hyperalloc.runner import run
from hyperalloc.scenario import parse_scenario

from conftest import SCENARIO_DIR

THREE_ROBOTS = str(SCENARIO_DIR / "three_robots.scn")
MINIMAL = str(SCENARIO_DIR / "minimal.scn")


@pytest.fixture(autouse=True)
def clean_format_env(monkeypatch):
    monkeypatch.delenv(FORMAT_ENV, raising=False)


def invoke(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_allocate_defaults_to_table(capsys):
    code, out, err = invoke(capsys, "allocate", "--scenario", THREE_ROBOTS)
    assert code == 0 and err == ""
    assert out.startswith("run seed=0 mode=expected")
    assert "task T arrival=0 -> R2 (max-score)" in out
    assert "zero-score" in out
    assert "schedule R2" in out
    assert "dynamics T: converged" in out


def test_jsonl_records(capsys):
    code, out, _ = invoke(
        capsys, "allocate", "--scenario", THREE_ROBOTS, "--format", "jsonl"
    )
    assert code == 0
    records = [json.loads(line) for line in out.splitlines()]
    kinds = [r["record"] for r in records]
    assert kinds[0] == "meta"
    assert kinds.count("decision") == 1
    assert kinds.count("schedule") == 5
    meta = records[0]
    assert meta["subspaces"] == ["cmpt", "comm", "cplt"]
    assert meta["convergence"]["T"]["converged"] is True
    decision = next(r for r in records if r["record"] == "decision")
    assert decision["chosen"] == "R2"
    assert decision["rationale"] == "max-score"
    nodes = {c["node"]: c for c in decision["candidates"]}
    assert nodes["R3"]["exclusion"] == "zero-score"
    assert nodes["R2"]["scores"]["comm"] == 0.00407
    r2_schedule = next(
        r for r in records if r["record"] == "schedule" and r["node"] == "R2"
    )
    assert r2_schedule["entries"][0]["task"] == "T"


def test_csv_schema(capsys):
    code, out, _ = invoke(
        capsys, "allocate", "--scenario", THREE_ROBOTS, "--format", "csv"
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["task", "node", "subspace", "score", "combined", "loss", "rationale"]
    assert len(rows) == 1 + 3 * 3  # three candidates, three subspaces each
    by_key = {(r[1], r[2]): r for r in rows[1:]}
    assert float(by_key[("R1", "comm")][3]) == 0.00266
    assert by_key[("R2", "cmpt")][6] == "max-score"
    assert by_key[("R3", "cplt")][6] == "zero-score"
    # full precision survives the round trip
    assert float(by_key[("R2", "cmpt")][4]) == 0.00014680523581542224


def test_env_var_sets_format(capsys, monkeypatch):
    monkeypatch.setenv(FORMAT_ENV, "csv")
    _, out, _ = invoke(capsys, "allocate", "--scenario", THREE_ROBOTS)
    assert out.startswith("task,node,subspace")


def test_flag_beats_env_var(capsys, monkeypatch):
    monkeypatch.setenv(FORMAT_ENV, "csv")
    _, out, _ = invoke(
        capsys, "allocate", "--scenario", THREE_ROBOTS, "--format", "jsonl"
    )
    assert out.startswith('{"record":"meta"')


def test_unknown_env_format_is_an_error(capsys, monkeypatch):
    monkeypatch.setenv(FORMAT_ENV, "yaml")
    code, out, err = invoke(capsys, "allocate", "--scenario", THREE_ROBOTS)
    assert code == 2 and out == ""
    assert err.startswith("error:") and "yaml" in err


def test_out_writes_file(capsys, tmp_path):
    target = tmp_path / "report.jsonl"
    code, out, _ = invoke(
        capsys,
        "allocate",
        "--scenario",
        THREE_ROBOTS,
        "--format",
        "jsonl",
        "--out",
        str(target),
    )
    assert code == 0 and out == ""
    on_disk = target.read_text(encoding="utf-8")
    assert on_disk == emit_report(run(parse_scenario(open(THREE_ROBOTS).read())), "jsonl")


def test_scenario_issues_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("[network]\nnode A kind=robot\nnode A kind=fog\n", encoding="utf-8")
    code, out, err = invoke(capsys, "allocate", "--scenario", str(bad))
    assert code == 1 and out == ""
    lines = err.splitlines()
    assert all(line.startswith(f"{bad}: line ") for line in lines)
    assert any("already declared" in line or "duplicate" in line for line in lines)


def test_missing_file_exits_2(capsys, tmp_path):
    code, _, err = invoke(capsys, "allocate", "--scenario", str(tmp_path / "nope.scn"))
    assert code == 2 and err.startswith("error:")


def test_bad_override_exits_2(capsys):
    code, _, err = invoke(
        capsys, "allocate", "--scenario", THREE_ROBOTS, "--step", "7.0"
    )
    assert code == 2 and "step" in err


def test_engine_error_exits_2(capsys, tmp_path):
    scn = tmp_path / "zero.scn"
    scn.write_text(
        "[network]\n"
        "node A kind=robot\n"
        "node B kind=fog\n"
        "link A B c=1.0 lambda=1.0\n"
        "[task T]\n"
        "vertices V\n"
        "exec A 0.0\n"
        "exec B 0.0\n"
        "[arrivals]\n"
        "arrive t=0.0 task=T\n"
        "[options]\n"
        "subspaces cmpt\n",
        encoding="utf-8",
    )
    code, _, err = invoke(capsys, "allocate", "--scenario", str(scn))
    assert code == 2 and "busy time" in err


@pytest.mark.parametrize("what", ["flows", "pi", "routes"])
def test_inspect_emits_json(capsys, what):
    code, out, err = invoke(
        capsys, "inspect", "--scenario", THREE_ROBOTS, "--what", what
    )
    assert code == 0 and err == ""
    payload = json.loads(out)
    if what == "flows":
        assert payload["T"]["count"] == 4
    elif what == "pi":
        assert payload["T"]["converged"] is True
    else:
        assert {(r["from"], r["to"]) for r in payload} >= {("R1", "F"), ("F", "C")}


def test_sampled_cli_runs_are_reproducible(capsys):
    args = (
        "allocate",
        "--scenario",
        MINIMAL,
        "--mode",
        "sample",
        "--seed",
        "42",
        "--format",
        "jsonl",
    )
    _, first, _ = invoke(capsys, *args)
    _, second, _ = invoke(capsys, *args)
    assert first == second


def test_emit_report_rejects_unknown_format():
    report = run(parse_scenario(open(MINIMAL).read()))
    with pytest.raises(ValueError, match="format"):
        emit_report(report, "xml")
