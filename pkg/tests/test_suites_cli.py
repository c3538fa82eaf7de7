from __future__ import annotations

import json

import numpy as np
import pytest

from hfc.cli import main
from hfc.errors import SchemaError
from hfc.operators import CommutingTuple
from hfc.serialize import canonical_dumps
from hfc.suites import (RANDOMIZED, VERBS, build_problem, demo_problem, emit_csv, emit_json, emit_plotdata,
                        read_problem, run_suite, tuple_corpus, validate_problem, write_report)

SMALL = {
    "suite": "small",
    "seed": 7,
    "tuple": {"operators": [[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [2.0, 0.5]]]]},
    "ensemble_size": 3,
    "m_ladder": [1, 4, 16, 64, 256, 1024],
}


def _write(tmp_path, obj, name="p.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_schema_errors_exit_2(tmp_path, capsys):
    assert main(["analyze", "--problem", _write(tmp_path, "{not json")]) == 2
    assert "malformed JSON" in capsys.readouterr().err
    assert main(["analyze", "--problem", _write(tmp_path, dict(SMALL, surprise=1))]) == 2
    assert main(["fc", "--problem", _write(tmp_path, {k: v for k, v in SMALL.items() if k != "seed"})]) == 2
    assert main(["analyze", "--problem", _write(tmp_path, dict(SMALL, tolerances={"fc.nonsense": 1.0}))]) == 2
    assert main(["analyze", "--problem", str(tmp_path / "missing.json")]) == 2
    bad_quad = dict(SMALL, quadrature={"r_min": 10.0, "r_max": 1.0})
    assert main(["fc", "--problem", _write(tmp_path, bad_quad)]) == 2


def test_schema_rejects_unknown_nested_keys():
    with pytest.raises(SchemaError, match="grid"):
        validate_problem(dict(SMALL, grid={"t_min": 1e-3, "bogus": 1}))
    with pytest.raises(SchemaError):
        build_problem({"corpus": {"count": 2, "d": [1], "n_max": 3}})
    with pytest.raises(SchemaError):
        run_suite(SMALL, "no-such-verb")


def test_seed_is_only_required_for_randomized_verbs(tmp_path):
    unseeded = {k: v for k, v in SMALL.items() if k != "seed"}
    assert main(["analyze", "--problem", _write(tmp_path, unseeded)]) == 0
    assert main(["fc", "--problem", _write(tmp_path, unseeded), "--seed", "3"]) == 0
    assert {"fc", "sqfn", "verify-all"} <= RANDOMIZED and "analyze" not in RANDOMIZED


def test_violated_fixture_exits_1(tmp_path, capsys):
    path = str(tmp_path / "v.json")
    with open(path, "w") as fh:
        json.dump(demo_problem("violated"), fh)
    assert main(["integral-check", "--problem", path]) == 1
    err = capsys.readouterr().err
    assert "FAIL integral-check.defect/main" in err


def test_demo_oracle_suite_passes(tmp_path, capsys):
    path = _write(tmp_path, demo_problem())
    assert main(["fc", "--problem", path, "--jobs", "2"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["verb"] == "fc"
    assert {c["name"].split("/")[1] for c in report["checks"]} == {"main", "c00", "c01", "c02"}


def test_module_errors_are_recorded_per_check(tmp_path, capsys):
    # nu = 3 is above every function angle, so contour checks fail without aborting the run
    assert main(["fc", "--problem", _write(tmp_path, SMALL), "--nu", "3.0"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert [c["name"] for c in report["checks"]] == ["fc/main/error"]
    assert "AngleOrderViolation" in report["checks"][0]["error"]
    assert report["quadrature"] == {"nu": 3.0}
    report = run_suite(SMALL, "analyze")
    assert report["passed"] and report["checks"]


def test_quadrature_flags_reach_the_contour(tmp_path, capsys):
    assert main(["fc", "--problem", _write(tmp_path, SMALL), "--nodes-per-decade", "24"]) == 0
    assert json.loads(capsys.readouterr().out)["quadrature"] == {"nodes_per_decade": 24}
    # a truncated radial range is honest about its tail, so the oracle check still holds
    report = run_suite(SMALL, "fc", quadrature={"r_min": 1e-2, "r_max": 1e2})
    oracle = [c for c in report["checks"] if c["name"].startswith("fc.oracle")]
    assert oracle and all(c["pass"] for c in oracle)
    assert any(c["tolerance"] > 1e-3 for c in oracle)


def test_determinism_across_runs_and_jobs():
    problem = demo_problem()
    for verb in ("fc-constant", "sqfn", "analyze"):
        a = emit_json(run_suite(problem, verb, jobs=1))
        assert a == emit_json(run_suite(problem, verb, jobs=1))
        assert a == emit_json(run_suite(problem, verb, jobs=4))
        names = [c["name"] for c in json.loads(a)["checks"]]
        assert names == sorted(names)


def test_seed_changes_randomized_output():
    a = run_suite(SMALL, "fc-constant", seed=1)
    b = run_suite(SMALL, "fc-constant", seed=2)
    # the headline value is attained by the constant member, the ensemble ratios move with the seed
    assert a["series"] != b["series"] and a["seed"] == 1


def test_corpus_is_seeded():
    cfg = {"count": 4, "d": [1, 2], "n_max": 4, "kind": "diagonalizable", "max_angle": 1.0}
    one, two = tuple_corpus(cfg, 11), tuple_corpus(cfg, 11)
    assert len(one) == 4 and all(isinstance(t, CommutingTuple) for t in one)
    for s, t in zip(one, two):
        assert all(np.array_equal(a, b) for a, b in zip(s.operators, t.operators))
    assert max(max(t.types()) for t in one) < 1.0


def test_emitters_and_round_trip(tmp_path):
    report = run_suite(SMALL, "phi-check")
    text = emit_json(report)
    assert emit_json(json.loads(text)) == text
    assert canonical_dumps(json.loads(text)) + "\n" == text
    rows = emit_csv(report).splitlines()
    assert rows[0] == "name,value,target,tolerance,pass" and len(rows) == len(report["checks"]) + 1
    files = emit_plotdata(report)
    assert files
    for body in files.values():
        lines = body.splitlines()
        assert lines[0].startswith("# series: ") and lines[1].startswith("# ")
        assert all(len(line.split("\t")) == 2 for line in lines[2:])
    written = write_report(report, "plotdata", tmp_path / "plots")
    assert sorted(p.name for p in written) == sorted(files)


def test_empty_report_gives_header_only_files(tmp_path):
    report = run_suite({"suite": "empty"}, "analyze")
    assert report["checks"] == [] and report["series"] == {} and report["passed"]
    assert emit_csv(report) == "name,value,target,tolerance,pass\n"
    (path,) = write_report(report, "plotdata", tmp_path)
    assert path.read_text() == "# series: none\n"
    (path,) = write_report(report, "csv", tmp_path)
    assert path.read_text() == "name,value,target,tolerance,pass\n"


def test_cli_writes_files_and_reports_output_errors(tmp_path):
    path = _write(tmp_path, SMALL)
    assert main(["analyze", "--problem", path, "--out", str(tmp_path / "out"), "--format", "csv"]) == 0
    assert (tmp_path / "out" / "report.csv").exists()
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["analyze", "--problem", path, "--out", str(blocker / "sub")]) == 2


@pytest.mark.parametrize("verb", [v for v in VERBS if v not in ("schatten", "group-equiv", "multiplier")])
def test_every_per_tuple_verb_runs_on_the_small_problem(verb):
    report = run_suite(SMALL, verb)
    assert report["checks"], verb
    assert not any(c["name"].endswith("/error") for c in report["checks"]), verb


def test_read_problem_validates(tmp_path):
    assert read_problem(_write(tmp_path, SMALL)) == SMALL
    with pytest.raises(SchemaError):
        read_problem(_write(tmp_path, dict(SMALL, seed="seven")))
