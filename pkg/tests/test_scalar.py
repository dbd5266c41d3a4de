import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hiconn import Chart, SamplePlan, evaluate, fields_equal_on, parse, partial, to_dsl
from hiconn.errors import ChartMismatch, DivisionByZero, DomainMismatch, ParseError, UnknownIdentifier
from hiconn.randomfields import random_polynomial
from hiconn.scalar import _Add, _Const, _Coord, _Mul, _Recip


def test_evaluate_product(chart2):
    assert evaluate(parse("x0*x1", chart2), (2, 3)) == 6


def test_evaluate_reciprocal(chart2):
    assert evaluate(parse("1/(1+x0^2)", chart2), (1, 0)) == pytest.approx(0.5)


def test_division_by_zero_reports_point(chart2):
    with pytest.raises(DivisionByZero) as info:
        evaluate(parse("1/x0", chart2), (0, 1))
    assert tuple(info.value.point) == (0.0, 1.0)


def test_partial_examples(chart2):
    assert to_dsl(partial(parse("x0*x1", chart2), 0)) == "x1"
    d = partial(parse("1/(1+x0^2)", chart2), 0)
    assert evaluate(d, (1, 0)) == pytest.approx(-0.5)
    assert partial(parse("sin(x0)", chart2), 1).is_zero


def test_partial_out_of_range(chart2):
    with pytest.raises(DomainMismatch):
        partial(parse("x0", chart2), 2)


def test_parse_tree_shapes(chart2):
    node = parse("x0*x1 + 2", chart2).node
    assert isinstance(node, _Add)
    kinds = sorted(type(t).__name__ for t in node.terms)
    assert kinds == ["_Const", "_Mul"]
    mul = next(t for t in node.terms if isinstance(t, _Mul))
    assert sorted(f.index for f in mul.factors if isinstance(f, _Coord)) == [0, 1]
    assert isinstance(parse("1/(1+x0^2)", chart2).node, _Recip)
    assert isinstance(parse("3", chart2).node, _Const)


def test_unknown_identifier(chart2):
    with pytest.raises(UnknownIdentifier):
        parse("x9", chart2)


@pytest.mark.parametrize("src", ["x0 +", "(x0", "x0 ** 2", "2 x0", "", "x0^x1", "sin x0"])
def test_parse_errors(chart2, src):
    with pytest.raises(ParseError):
        parse(src, chart2)


def test_unary_minus_binds_tighter_than_power(chart2):
    assert evaluate(parse("-x0^2", chart2), (3, 0)) == 9
    assert evaluate(parse("-(x0^2)", chart2), (3, 0)) == -9


def test_custom_coordinate_names():
    chart = Chart(2, ("r", "theta"))
    f = parse("r*cos(theta)", chart)
    assert evaluate(f, (2.0, 0.0)) == pytest.approx(2.0)
    assert "theta" in to_dsl(f.partial(1))


def test_fields_equal_examples(chart2, plan2):
    x0 = parse("x0", chart2)
    assert fields_equal_on(x0, x0, plan2).residual == 0.0
    rep = fields_equal_on(parse("(x0+1)^2", chart2), parse("x0^2+2*x0+1", chart2), plan2)
    assert rep.equal and rep.residual < 1e-14
    strict = SamplePlan(plan2.points, abs_tol=1e-8, rel_tol=1e-12, seed=plan2.seed)
    rep = fields_equal_on(x0, parse("x0 + 1e-3", chart2), strict)
    assert not rep.equal
    assert rep.residual == pytest.approx(1e-3)


def test_chart_mismatch(chart2, chart3):
    with pytest.raises(ChartMismatch):
        parse("x0", chart2) + parse("x0", chart3)


def test_sample_plan_is_seeded(chart3):
    a = SamplePlan.uniform(chart3, 20, seed=4)
    b = SamplePlan.uniform(chart3, 20, seed=4)
    assert np.array_equal(a.points, b.points)
    assert a.points.shape == (20, 3)
    assert np.all(np.abs(a.points) <= 1)


@given(st.integers(0, 2**32 - 1))
def test_dsl_round_trip(seed):
    chart = Chart(3)
    rng = np.random.default_rng(seed)
    f = random_polynomial(chart, rng, degree=3)
    g = f * parse("sin(x1) + 1/(2 + x2^2) - exp(x0)", chart)
    plan = SamplePlan.uniform(chart, 10, seed=seed % 1000)
    back = parse(to_dsl(g), chart)
    assert np.allclose(back.values(plan.points), g.values(plan.points), rtol=1e-12, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_partial_matches_finite_difference(seed, i):
    chart = Chart(3)
    rng = np.random.default_rng(seed)
    f = random_polynomial(chart, rng, degree=3) * parse("cos(x0*x2)", chart)
    p = rng.uniform(-1, 1, 3)
    h = 1e-5
    e = np.eye(3)[i] * h
    fd = (f(p + e) - f(p - e)) / (2 * h)
    assert partial(f, i)(p) == pytest.approx(fd, abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_product_rule(seed):
    chart = Chart(2)
    rng = np.random.default_rng(seed)
    f, g = random_polynomial(chart, rng), random_polynomial(chart, rng)
    plan = SamplePlan.uniform(chart, 10, seed=0)
    lhs = (f * g).partial(0)
    rhs = f.partial(0) * g + f * g.partial(0)
    assert fields_equal_on(lhs, rhs, plan).equal


def test_number_formatting_round_trips(chart2):
    for v in (0.1, -2.5, 1e-20, 123456.789, math.pi):
        f = chart2.const(v) * parse("x0", chart2)
        assert evaluate(parse(to_dsl(f), chart2), (1, 0)) == v
