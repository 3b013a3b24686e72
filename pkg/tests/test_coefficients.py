import cmath
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as sp_gamma

from qspiral.coefficients import (
    FactoredForm,
    LaurentFactoredForm,
    evaluate_coefficient,
    form_from_dict,
    form_to_dict,
    format_coefficient,
    parse_coefficient,
    split_at_modulus,
)
from qspiral.errors import ParseError, SemanticError, TieAtThreshold

PROPS = settings(max_examples=30, deadline=None)
X = np.array([0.3 + 0.2j, -0.7 + 0.4j, 1.1j, 1.6 - 0.3j, -1.9 - 0.8j])

REFERENCE = {
    "(1 - x^3)": lambda x: 1 - x ** 3,
    "sin(x)": np.sin,
    "cos(x)": np.cos,
    "x*sin(2*x)": lambda x: x * np.sin(2 * x),
    "gamma(x)": sp_gamma,
    "exp(x)": np.exp,
    "2/x": lambda x: 2 / x,
    "sin(2/x)": lambda x: np.sin(2 / x),
    "x^2*(1-x/2)/(1-3*x)": lambda x: x ** 2 * (1 - x / 2) / (1 - 3 * x),
}


@pytest.mark.parametrize("text", sorted(REFERENCE))
def test_evaluation_matches_reference(text):
    f = parse_coefficient(text, 2.0)
    got = np.asarray(evaluate_coefficient(f, X))
    want = REFERENCE[text](X)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("text", sorted(REFERENCE))
def test_printer_round_trip(text):
    f = parse_coefficient(text, 2.0)
    g = parse_coefficient(format_coefficient(f), 2.0)
    assert np.allclose(evaluate_coefficient(g, X), evaluate_coefficient(f, X), rtol=1e-12)


@pytest.mark.parametrize("text", sorted(REFERENCE))
def test_json_round_trip(text):
    f = parse_coefficient(text, 2.0)
    g = form_from_dict(json.loads(json.dumps(form_to_dict(f))))
    assert np.allclose(evaluate_coefficient(g, X), evaluate_coefficient(f, X), rtol=1e-12)


def test_cubic_structure():
    f = parse_coefficient("(1 - x^3)")
    assert isinstance(f, FactoredForm)
    assert f.alpha == 1 and f.mu0 == 0
    zeros = sorted(f.zero_points(), key=lambda p: cmath.phase(p[0]))
    assert len(zeros) == 3
    for b, v in zeros:
        assert v == 1 and abs(b ** 3 - 1) < 1e-12


def test_double_zero_at_origin():
    f = parse_coefficient("x*sin(2*x)")
    assert f.mu0 == 2
    assert f.alpha == pytest.approx(2.0)


def test_identity_coefficient():
    f = parse_coefficient("1")
    assert f.is_identity()


@pytest.mark.parametrize("text", ["sin(", "foo(x)", "x^", "(1 - x/0)", "", "2 ** x"])
def test_parse_errors(text):
    with pytest.raises((ParseError, SemanticError)):
        parse_coefficient(text)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse_coefficient("sin(")
    assert "position" in str(info.value)


def test_zero_coefficient_rejected():
    with pytest.raises(SemanticError):
        parse_coefficient("0")


@PROPS
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_split_reconstructs_rational_coefficient(rho, rho_prime):
    f = parse_coefficient("x*(1 - x/0.5)*(1 - x/2.5)/(1 - x/1.2)")
    moduli = (0.5, 2.5, 1.2)
    if any(abs(rho - m) < 1e-6 or abs(rho_prime - m) < 1e-6 for m in moduli):
        return
    g = split_at_modulus(f, rho, rho_prime)
    assert isinstance(g, LaurentFactoredForm)
    assert np.allclose(evaluate_coefficient(g, X), evaluate_coefficient(f, X), rtol=1e-11)
    for b, _ in g.outer.zero_points():
        assert abs(b) > rho
    for b, _ in g.outer.pole_points():
        assert abs(b) > rho_prime


def test_split_of_builtin_keeps_values():
    f = parse_coefficient("sin(x)")
    assert not split_at_modulus(f, 1.0, 1.0).has_inner()
    g = split_at_modulus(f, 4.0, 4.0)
    assert g.has_inner()
    assert np.allclose(evaluate_coefficient(g, X), np.sin(X), rtol=1e-10)


def test_split_tie_rejected():
    f = parse_coefficient("(1 - x/2)")
    with pytest.raises(TieAtThreshold):
        split_at_modulus(f, 2.0, 1.0)


def test_reciprocal_and_product():
    f = parse_coefficient("x*(1 - x/2)")
    g = f.reciprocal()
    assert np.allclose(evaluate_coefficient(f * g, X), 1.0)


def test_log_derivative_matches_difference_quotient():
    f = parse_coefficient("x*sin(2*x)")
    h = 1e-6
    fd = (evaluate_coefficient(f, X + h) - evaluate_coefficient(f, X - h)) / (2 * h)
    fd = fd / evaluate_coefficient(f, X)
    assert np.allclose(f.log_derivative(X), fd, rtol=1e-7)


def test_builtin_bound_available():
    f = parse_coefficient("sin(x)")
    val, bound = evaluate_coefficient(f, 0.5, with_bound=True)
    assert abs(val - np.sin(0.5)) <= max(bound, 1e-14)
