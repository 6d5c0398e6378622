import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsgraphic.expr import (BinOp, Call, DomainError, ExprSyntaxError, Num, Pow, UnknownIdentifier, Var,
                            eval_batch, eval_jet2, evaluate, negate, parse)


def fd_gradient(e, p, h=1e-6):
    g = np.zeros(4)
    for i in range(4):
        d = np.zeros(4)
        d[i] = h
        g[i] = (evaluate(e, p + d) - evaluate(e, p - d)) / (2 * h)
    return g


def fd_hessian(e, p, h=1e-4):
    H = np.zeros((4, 4))
    for i in range(4):
        d = np.zeros(4)
        d[i] = h
        H[i] = (eval_jet2(e, p + d).gradient - eval_jet2(e, p - d).gradient) / (2 * h)
    return H


def test_single_variable():
    assert parse("x1") == Var(1)


def test_sum_of_squares_value():
    e = parse("x1^2 + x2^2 + x3^2 + x4^2")
    assert evaluate(e, [0.5, 0.5, 0.5, 0.5]) == pytest.approx(1.0, abs=1e-15)


def test_product_minus_sine_against_finite_differences():
    e = parse("x1*x3 - 2*sin(x2)")
    p = np.array([1.0, 0.0, 2.0, 0.0])
    j = eval_jet2(e, p)
    assert j.value == pytest.approx(2.0)
    np.testing.assert_allclose(j.gradient, [2, -2, 1, 0], atol=1e-12)
    np.testing.assert_allclose(fd_gradient(e, p), j.gradient, atol=1e-8)


def test_linear_jet():
    j = eval_jet2(parse("x1"), [0, 0, 0, 1])
    assert j.value == 0
    np.testing.assert_array_equal(j.gradient, [1, 0, 0, 0])
    np.testing.assert_array_equal(j.hessian, np.zeros((4, 4)))


def test_quadratic_form_hessian():
    e = parse("x1^2+x2^2+x3^2+x4^2")
    for p in np.random.default_rng(0).normal(size=(5, 4)):
        np.testing.assert_array_equal(eval_jet2(e, p).hessian, 2 * np.eye(4))


def test_bilinear_jet():
    j = eval_jet2(parse("x1*x2"), [3, 5, 0, 0])
    assert j.value == 15
    np.testing.assert_array_equal(j.gradient, [5, 3, 0, 0])
    H = np.zeros((4, 4))
    H[0, 1] = H[1, 0] = 1
    np.testing.assert_array_equal(j.hessian, H)


def test_precedence():
    assert parse("-x1^2") == negate(Pow(Var(1), 2))
    assert evaluate(parse("-x1^2"), [3, 0, 0, 0]) == -9
    assert evaluate(parse("2-3-4"), [0] * 4) == -5
    assert evaluate(parse("8/4/2"), [0] * 4) == 1
    assert evaluate(parse("1+2*3^2"), [0] * 4) == 19
    assert isinstance(parse("cos(x1)"), Call)
    assert isinstance(parse("x1*x2"), BinOp)


@pytest.mark.parametrize("text, offset", [("x1 +* x2", 4), ("(x1", 3), ("x1 x2", 3), ("", 0), ("x1^0.5", 3)])
def test_syntax_errors_report_offset(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset
    assert info.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as info:
        parse("x1 + tan(x2)")
    assert info.value.offset == 5
    with pytest.raises(UnknownIdentifier):
        parse("x5")


def test_division_by_zero():
    with pytest.raises(DomainError):
        eval_jet2(parse("1/x1"), [0, 1, 0, 0])


def test_literal_rounding():
    assert parse("0.1") == Num(0.1)


def test_deterministic():
    e = parse("exp(x1*x2) - cos(x3)^3/(1+x4^2)")
    p = [0.3, -0.7, 1.1, 0.2]
    a, b = eval_jet2(e, p), eval_jet2(e, p)
    assert a.value == b.value
    assert np.array_equal(a.gradient, b.gradient) and np.array_equal(a.hessian, b.hessian)


def test_batch_matches_pointwise():
    e = parse("x1*sin(x2) + exp(-x3^2)*x4 - 3/(2+x1^2)")
    P = np.random.default_rng(1).normal(size=(20, 4))
    v, g, H = eval_batch(e, P)
    for i, p in enumerate(P):
        j = eval_jet2(e, p)
        assert v[i] == pytest.approx(j.value, rel=1e-14)
        np.testing.assert_allclose(g[i], j.gradient, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(H[i], j.hessian, rtol=1e-13, atol=1e-15)


# random well-conditioned expressions: denominators are kept away from zero
leaf = st.one_of(st.integers(1, 4).map(lambda i: f"x{i}"),
                 st.floats(-3, 3, allow_nan=False).map(lambda c: f"{c:.3f}".replace("-", "0-")))


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*"), children).map(lambda t: f"({t[0]}{t[1]}{t[2]})"),
        st.tuples(children, children).map(lambda t: f"({t[0]}/(2+({t[1]})^2))"),
        st.tuples(children, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda c: f"exp(0.3*sin({c}))"),
        children.map(lambda c: f"-{c}"),
    )


expressions = st.recursive(leaf, _extend, max_leaves=8)
points = st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=4, max_size=4).map(np.array)


@settings(max_examples=1000, deadline=None)
@given(expressions, points)
def test_derivatives_match_finite_differences(text, p):
    e = parse(text)
    j = eval_jet2(e, p)
    h = 1e-5
    for i in range(4):
        d = np.zeros(4)
        d[i] = h
        fd = (evaluate(e, p + d) - evaluate(e, p - d)) / (2 * h)
        assert abs(fd - j.gradient[i]) <= 1e-5 * max(1.0, abs(j.gradient[i]))
    H = fd_hessian(e, p, h)
    assert np.all(np.abs(H - j.hessian) <= 1e-3 * np.maximum(1.0, np.abs(j.hessian)))
    np.testing.assert_array_equal(j.hessian, j.hessian.T)
