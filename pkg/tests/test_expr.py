import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exprgen import random_boxes, random_expression, sample_in
from isagpe.errors import ArityError, DomainViolation, ParseError, UnknownIdentifier
from isagpe.expr import Expr, ExprBuilder, Node, eval_interval, eval_interval_arrays, eval_real, parse, parse_many, to_text
from isagpe.interval import IntervalBox
from isagpe.oracle import integrate_kinetics
from isagpe.problem import kinetics_expression


def test_cubic_dag_shape():
    e = parse("x1^3 + x2^3")
    assert [n.op for n in e.nodes] == ["var", "pow", "var", "pow", "add"]


def test_test_function_shares_subterms():
    e = parse("exp(sin(x1)+sin(x2)*cos(x2))")
    assert sum(1 for n in e.nodes if n.op == "var" and n.param == 1) == 1
    assert e.nodes[-1].op == "un" and e.nodes[-1].param == "exp"


@pytest.mark.parametrize("text", ["x1 +", "(x1", "x1 x2", "x1 ^ 1.5", "*x1", ""])
def test_malformed(text):
    with pytest.raises(ParseError):
        parse(text)


def test_error_positions():
    with pytest.raises(ParseError) as info:
        parse("x1 +\n  * x2")
    assert info.value.line == 2 and info.value.column == 3


def test_unknown_identifier_and_arity():
    with pytest.raises(UnknownIdentifier):
        parse("tan(x1)")
    with pytest.raises(UnknownIdentifier):
        parse("y + 1")
    with pytest.raises(ArityError):
        parse("exp(x1, x2)")


def test_precedence():
    e = parse("-x1^2 + 2*3")
    assert eval_real(e, np.array([3.0]))[0] == -3.0
    assert eval_real(parse("2^3^2"), np.zeros(0))[0] == 512.0
    assert eval_real(parse("x1/x2/2", n_vars=2), np.array([8.0, 2.0]))[0] == 2.0
    assert eval_real(parse("x1 - x2 - 1"), np.array([5.0, 1.0]))[0] == 3.0


def test_named_variables_and_constants():
    e = parse("a*pi + b", variables=["a", "b"])
    assert e.n_vars == 2
    assert math.isclose(eval_real(e, np.array([1.0, 1.0]))[0], math.pi + 1)


def test_eval_real_examples():
    assert eval_real(parse("x1^3 + x2^3"), np.array([1.0, 2.0]))[0] == 9.0
    assert eval_real(parse("exp(sin(x1)+sin(x2)*cos(x2))"), np.array([0.0, 0.0]))[0] == 1.0


def test_case_study_output_matches_integration():
    x = np.array([0.6, 0.15])
    y = eval_real(parse(kinetics_expression(2.0)), x)[0]
    assert abs(y - integrate_kinetics((0.6, 0.15, 0.35), 2.0, 10_000)) <= 1e-6


def test_eval_real_domain_violation():
    with pytest.raises(DomainViolation):
        eval_real(parse("log(x1)"), np.array([-1.0]))


def test_eval_interval_examples():
    cube = eval_interval(parse("x1^3 + x2^3"), IntervalBox.from_bounds([-3, -3], [3, 3]))[0]
    assert cube.lo <= -54 and cube.hi >= 54 and cube.diam() < 108 + 1e-9
    sq = eval_interval(parse("x1*x1"), IntervalBox.from_bounds([-1], [1]))[0]
    assert sq.lo <= -1 and sq.lo > -1 - 1e-12
    s = eval_interval(parse("x1+x2"), IntervalBox.from_bounds([0, 2], [1, 3]))[0]
    assert (s.lo, s.hi) == (2, 4)


def test_eval_interval_reports_node():
    e = parse("log(x1 - 1)")
    with pytest.raises(DomainViolation) as info:
        eval_interval(e, IntervalBox.from_bounds([0], [3]))
    assert info.value.node is not None


def test_dag_validation():
    with pytest.raises(ValueError):
        Expr((Node("add", (0, 1), None),), (0,), 1)
    with pytest.raises(ValueError):
        Expr((Node("var", (), 3),), (0,), 1)


def test_builder_folds_scalars():
    b = ExprBuilder(n_vars=1)
    x = b.var(0)
    k = b.mul(b.const(2.0), x)
    e = b.build([k])
    assert e.nodes[-1].op == "smul"


def test_multi_output():
    e = parse_many(["x1 + x2", "x1 * x2"], n_vars=2)
    np.testing.assert_array_equal(eval_real(e, np.array([2.0, 3.0])), [5.0, 6.0])
    assert e.select([1]).n_outputs == 1


@pytest.mark.parametrize("seed", range(25))
def test_round_trip_through_text(seed):
    rng = np.random.default_rng(seed)
    e = parse(random_expression(rng, 3, 4), n_vars=3)
    again = parse(to_text(e), n_vars=3)
    assert again.nodes == e.nodes and again.outputs == e.outputs


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_degenerate_box(x1, x2):
    e = parse("exp(sin(x1)+sin(x2)*cos(x2)) + x1^3 - x1*x2")
    y = eval_real(e, np.array([x1, x2]))[0]
    enc = eval_interval(e, IntervalBox.from_bounds([x1, x2], [x1, x2]))[0]
    assert enc.contains(y)
    assert enc.diam() <= 1e-12 * max(1.0, abs(y))


def test_containment_fuzz():
    """1000 boxes with 100 samples each over random expressions of depth <= 6."""
    rng = np.random.default_rng(7)
    violations = checked = 0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        e = parse(random_expression(rng, n, int(rng.integers(1, 7))), n_vars=n)
        lo, hi = random_boxes(rng, n, 10)
        encl = eval_interval_arrays(e, lo.T, hi.T, strict=False)[0]
        pts = sample_in(rng, lo, hi, 100)
        with np.errstate(all="ignore"):
            y = eval_real(e, pts)[0]
        ok = np.isfinite(y)
        inside = (encl.lo[:, None] <= y) & (y <= encl.hi[:, None])
        violations += int(np.sum(ok & ~inside))
        checked += int(ok.sum())
    assert checked > 90_000
    assert violations == 0
