import copy
import json

import numpy as np
import pytest
from click.testing import CliRunner

from isagpe.cli import main
from isagpe.expr import eval_real, parse_many
from isagpe.oracle import closed_form_output
from isagpe.problem import (
    ETA,
    TIMES,
    ProblemError,
    case_study,
    kinetics_expression,
    load_problem,
    problem_from_dict,
    round_significant,
    validate,
)
from isagpe.setinv import Subpaving, solve


@pytest.fixture
def doc():
    return case_study()


def test_generated_problem_validates(doc):
    validate(doc)
    assert len(doc["measurements"]) == 15
    assert all(m["eta"] == ETA == 1e-3 for m in doc["measurements"])
    assert doc["domain"] == [[0.5, 0.7], [0.1, 0.2]]


def test_generated_expressions_follow_closed_form(doc):
    e = parse_many(doc["expressions"], variables=doc["variables"])
    rng = np.random.default_rng(0)
    for x in rng.uniform([0.5, 0.1], [0.7, 0.2], size=(20, 2)):
        y = eval_real(e, x)
        ref = [closed_form_output((x[0], x[1], 0.35), t) for t in TIMES]
        np.testing.assert_allclose(y, ref, rtol=1e-12, atol=1e-15)


def test_measurement_rounding(doc):
    for m, t in zip(doc["measurements"], TIMES):
        exact = closed_form_output((0.6, 0.15, 0.35), t)
        assert m["y"] == round_significant(exact, 3)
        assert abs(m["y"] - exact) <= 0.5 * 10 ** (np.floor(np.log10(abs(exact))) - 2) * (1 + 1e-9)


def test_round_significant():
    assert round_significant(0.123456, 2) == 0.12
    assert round_significant(0.125, 2) == 0.12  # binary 0.125 is exact, ties go to even
    assert round_significant(1234.5, 3) == 1230


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.update(colour="red"), "<root>"),
        (lambda d: d.pop("epsilon"), "<root>"),
        (lambda d: d.update(epsilon=-1), "epsilon"),
        (lambda d: d.update(engine="newton"), "engine"),
        (lambda d: d["measurements"][3].update(sigma=1), "measurements/3"),
        (lambda d: d["measurements"][0].update(output=99), "measurements/0/output"),
        (lambda d: d["domain"][1].reverse(), "domain/1"),
        (lambda d: d["domain"].pop(), "domain"),
        (lambda d: d.update(N=0), "N"),
    ],
)
def test_schema_errors_name_the_field(doc, mutate, field):
    bad = copy.deepcopy(doc)
    mutate(bad)
    with pytest.raises(ProblemError) as info:
        problem_from_dict(bad)
    assert info.value.field == field


def test_expression_errors_are_problem_errors(doc):
    doc["expressions"][0] = "exp(x1 +"
    with pytest.raises(ProblemError) as info:
        problem_from_dict(doc)
    assert info.value.field == "expressions"


def test_overrides(doc):
    p = problem_from_dict(doc, engine="ism", N=7, epsilon=None)
    assert p.engine == "ism" and p.N == 7 and p.epsilon == doc["epsilon"]


# --- command line ----------------------------------------------------------------------


@pytest.fixture
def problem_file(tmp_path, doc):
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(doc))
    return path


def run(args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_solve_writes_artifacts(tmp_path, problem_file):
    out = tmp_path / "out"
    res = run(["solve", problem_file, "--engine", "sivia", "--epsilon", "0.01", "--out-dir", out])
    assert res.exit_code == 0, res.output
    stats = json.loads((out / "stats.json").read_text())
    assert {"engine", "N", "epsilon", "iterations", "interior_count", "boundary_count", "wall_ms"} <= set(stats)
    assert stats["iterations"] > 0 and stats["boundary_count"] > 0
    sp_json = Subpaving.from_json(json.loads((out / "subpaving.json").read_text()))
    sp_csv = Subpaving.from_csv((out / "subpaving.csv").read_text())
    assert sp_json.interior == sp_csv.interior and sp_json.boundary == sp_csv.boundary
    header = (out / "subpaving.csv").read_text().splitlines()[0]
    assert header == "class,lo_1,hi_1,lo_2,hi_2"
    # the counter is the engine's dequeue count
    direct = solve(load_problem(problem_file, engine="sivia", epsilon=0.01))
    assert stats["iterations"] == direct.stats["iterations"]


def test_solve_is_deterministic(tmp_path, problem_file):
    for name in ("a", "b"):
        assert run(["solve", problem_file, "--engine", "ism", "--out-dir", tmp_path / name]).exit_code == 0
    assert (tmp_path / "a" / "subpaving.csv").read_bytes() == (tmp_path / "b" / "subpaving.csv").read_bytes()


def test_ism_uses_fewer_iterations(tmp_path, problem_file):
    counts = {}
    for engine in ("sivia", "ism"):
        out = tmp_path / engine
        assert run(["solve", problem_file, "--engine", engine, "--grid-N", 2, "--out-dir", out]).exit_code == 0
        counts[engine] = json.loads((out / "stats.json").read_text())["iterations"]
    assert counts["ism"] < counts["sivia"]


def test_malformed_json_exits_1_without_outputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "out"
    res = run(["solve", bad, "--out-dir", out])
    assert res.exit_code == 1
    assert not out.exists()


def test_unknown_key_exits_1(tmp_path, doc):
    doc["extra"] = 1
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    res = run(["solve", path, "--out-dir", tmp_path / "out"])
    assert res.exit_code == 1 and "extra" in res.output


def test_budget_exit_code_and_partial_output(tmp_path, problem_file):
    out = tmp_path / "out"
    res = run(["solve", problem_file, "--budget", 5, "--out-dir", out])
    assert res.exit_code == 2
    stats = json.loads((out / "stats.json").read_text())
    assert stats["iterations"] == 5 and stats["complete"] is False


def test_generate_case_study(tmp_path):
    path = tmp_path / "cs.json"
    assert run(["generate-case-study", path]).exit_code == 0
    doc = json.loads(path.read_text())
    validate(doc)
    assert doc == case_study()


def test_bench_hausdorff_csv():
    res = run(["bench-hausdorff", "--N", "1,10", "--xbar2", "0.1,5", "--samples", 100])
    assert res.exit_code == 0
    lines = res.output.strip().splitlines()
    assert lines[0] == "N,xbar2,d_H"
    rows = [tuple(float(v) for v in line.split(",")) for line in lines[1:]]
    assert len(rows) == 4 and all(r[2] >= 0 for r in rows)
    small = [r for r in rows if r[1] == 0.1]
    assert all(r[2] < 0.5 for r in small)


def test_cells_csv():
    res = run(["cells", "--N", 20])
    assert res.exit_code == 0
    lines = res.output.strip().splitlines()
    assert len(lines) == 401
    assert {line.split(",")[0] for line in lines[1:]} == {"interior", "indeterminate", "excluded"}


def test_bench_iterations_csv(problem_file):
    res = run(["bench-iterations", problem_file, "--epsilon", "0.01", "--N", "2"])
    assert res.exit_code == 0
    lines = res.output.strip().splitlines()
    assert lines[0].startswith("engine,N,epsilon,iterations")
    assert len(lines) == 3


def test_kinetics_expression_mentions_fixed_rate():
    assert "0.35" in kinetics_expression(3)
