import math
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughflow.rde.expr import ExprSyntaxError, compile_polys, max_var, parse, poly_to_text, to_poly, to_text

DIM = 3


def exprs():
    leaf = st.one_of(
        st.integers(1, DIM).map(lambda i: f"x{i}"),
        st.integers(0, 9).map(str),
        st.sampled_from(["0.5", "1.25", "2e-1"]),
    )

    def extend(inner):
        return st.one_of(
            st.tuples(inner, st.sampled_from(["+", "-", "*"]), inner).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            st.tuples(inner, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
            st.tuples(st.sampled_from(["sin", "cos", "exp"]), inner).map(lambda t: f"{t[0]}({t[1]})"),
            inner.map(lambda e: f"-{e}"),
        )

    return st.recursive(leaf, extend, max_leaves=6)


def py_eval(text, x):
    src = re.sub(r"x(\d+)", lambda m: f"x[{int(m.group(1)) - 1}]", text).replace("^", "**")
    return eval(src, {"sin": math.sin, "cos": math.cos, "exp": math.exp, "x": x})


POINTS = np.random.default_rng(0).uniform(-1, 1, (5, DIM))


@settings(max_examples=60)
@given(exprs())
def test_print_parse_roundtrip(text):
    tree = parse(text)
    assert parse(to_text(tree)) == tree


@settings(max_examples=60)
@given(exprs())
def test_normal_form_evaluates_like_source(text):
    f = compile_polys([to_poly(parse(text))], DIM)
    got = f(POINTS)[:, 0]
    want = [py_eval(text, x) for x in POINTS]
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)


@settings(max_examples=60)
@given(exprs())
def test_normal_form_text_is_stable(text):
    p = to_poly(parse(text))
    assert to_poly(parse(poly_to_text(p))) == p


@settings(max_examples=40)
@given(exprs(), st.integers(0, DIM - 1))
def test_derivative_matches_finite_difference(text, i):
    p = to_poly(parse(text))
    f = compile_polys([p], DIM)
    df = compile_polys([p.diff(i)], DIM)
    h = 1e-6
    e = np.zeros(DIM)
    e[i] = h
    fd = (f(POINTS + e) - f(POINTS - e))[:, 0] / (2 * h)
    np.testing.assert_allclose(df(POINTS)[:, 0], fd, rtol=1e-5, atol=1e-5)


def test_identical_terms_cancel():
    assert to_poly(parse("sin(x1*x2) - sin(x2*x1)")).is_zero()
    assert to_poly(parse("(x1 + 1)^2 - x1^2 - 2*x1 - 1")).is_zero()
    assert to_poly(parse("exp(0)")).constant_value() == 1.0


def test_precedence():
    assert py_eval("-x1^2", [3.0, 0, 0]) == -9.0
    f = compile_polys([to_poly(parse("-x1^2 + 2*x2*x3"))], 3)
    assert f(np.array([[3.0, 1.0, 2.0]]))[0, 0] == pytest.approx(-5.0)


def test_max_var():
    assert max_var(parse("x1 + sin(x7) * x2")) == 7
    assert max_var(parse("3")) == 0


@pytest.mark.parametrize("text, pos", [
    ("x1 +", 4),
    ("x1 ^ 1.5", 5),
    ("x0", 0),
    ("tan(x1)", 0),
    ("x1 $ x2", 3),
    ("(x1 + x2", 8),
    ("x1 x2", 3),
    ("sin x1", 4),
])
def test_syntax_errors_report_position(text, pos):
    with pytest.raises(ExprSyntaxError) as e:
        parse(text)
    assert e.value.position == pos
    assert "^" in str(e.value)
