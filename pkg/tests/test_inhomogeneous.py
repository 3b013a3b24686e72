import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qspiral.coefficients import evaluate_coefficient, parse_coefficient
from qspiral.errors import AtPole, InvalidInput
from qspiral.expr import evaluate_solution
from qspiral.homogeneous import solve_mer_c
from qspiral.inhomogeneous import (
    RightHandSide,
    additive_decompose,
    solve_additive,
    solve_inhomogeneous,
    tail_series_eval,
)
from qspiral.rational import RationalFunction
from qspiral.spirals import SpiralKind
from qspiral.verify import sample_annulus

PROPS = settings(max_examples=25, deadline=None)
X = sample_annulus((0.3, 3.0), 80, np.random.default_rng(7))


@st.composite
def rationals(draw):
    def pt(lo, hi):
        r = math.exp(draw(st.floats(math.log(lo), math.log(hi))))
        return cmath.rect(r, draw(st.floats(-math.pi, math.pi)))

    poles = [pt(0.2, 5.0) for _ in range(draw(st.integers(1, 3)))]
    # nearly coincident poles make the partial fractions ill-conditioned
    assume(all(abs(a - b) > 0.05 for i, a in enumerate(poles) for b in poles[:i]))
    zeros = [pt(0.1, 3.0) for _ in range(draw(st.integers(0, 3)))]
    scale = pt(0.5, 2.0)
    return RationalFunction.from_roots(zeros, poles, scale=scale)


@PROPS
@given(rationals(), st.sampled_from([0.7, 1.0, 1.4]))
def test_decomposition_reconstructs(R, rho):
    if any(abs(m - rho) < 1e-3 for m in R.pole_moduli()):
        return
    d = additive_decompose(R, rho)
    rv = R(X)
    assert np.max(np.abs(d.reconstruct(X) - rv)) <= 1e-11 * np.max(np.abs(rv))
    # r0 is analytic at 0; r_inf carries the inner poles through t = 1/x
    assert all(abs(b) > rho for b in d.r0.parts)
    assert all(abs(b) > 1 / rho for b in d.r_inf.parts)


@PROPS
@given(rationals())
def test_additive_solution_residual(R):
    q = 2.0
    if any(abs(m - 1.0) < 1e-3 for m in R.pole_moduli()):
        return
    z = solve_additive(additive_decompose(R, 1.0), q).expr
    rv = R(X)
    res = np.abs(z(q * X) - z(X) - rv) / (1 + np.abs(rv))
    assert np.nanmax(res) <= 1e-8


@pytest.mark.parametrize("k", [1, 2, 3])
def test_closed_form_power_inhomogeneity(k):
    q = 2.0
    R = RationalFunction((), {0j: [0.0] * (k - 1) + [q ** (-k * (k + 1) / 2)]})
    z = solve_additive(additive_decompose(R, 1.0), q).expr
    want = -1.0 / ((q ** k - 1.0) * q ** ((k * k - k) / 2)) * X ** (-k)
    assert np.max(np.abs(z(X) / want - 1.0)) <= 1e-10


def test_constant_inhomogeneity_uses_log_derivative():
    q = 3.0
    z = solve_additive(additive_decompose(RationalFunction.constant(2.0), 1.0), q).expr
    x = X[np.abs(X) > 0.4]
    assert np.allclose(z(q * x) - z(x), 2.0, atol=1e-10)


def test_tail_series_equation():
    q = 2.0
    r = RationalFunction.from_coeffs([0.0, 1.0], [-3.0, 1.0])
    x = np.array([0.5 + 0.3j, -1.2, 2.1j])
    s = tail_series_eval(r, q, x)
    assert np.allclose(tail_series_eval(r, q, q * x) - s, r(x), atol=1e-12)


def test_tail_series_requires_zero_at_origin():
    with pytest.raises(InvalidInput):
        tail_series_eval(RationalFunction.from_coeffs([1.0], [-3.0, 1.0]), 2.0, 0.5)


def test_tail_series_at_pole():
    r = RationalFunction.from_coeffs([0.0, 1.0], [-3.0, 1.0])
    with pytest.raises(AtPole):
        tail_series_eval(r, 2.0, 6.0)


def _inh_residual(sol, m, z, q, x):
    y = evaluate_solution(sol.expr, x)
    yq = evaluate_solution(sol.expr, q * x)
    mv = np.asarray(evaluate_coefficient(parse_coefficient(m, q), x))
    zv = z(x) if callable(z) else evaluate_solution(z, x)
    return np.abs(yq - mv * y - zv) / (1 + np.abs(mv * y) + np.abs(zv))


def test_inhomogeneous_exact_rational_rhs():
    q = 2.0
    r = RationalFunction.from_coeffs([1.0], [-0.5, 1.0])
    sol = solve_inhomogeneous("(1 - x/3)", r, q)
    assert np.nanmax(_inh_residual(sol, "(1 - x/3)", r, q, X)) <= 1e-9


def test_inhomogeneous_numeric_rhs():
    q = 2.0
    z = solve_mer_c("cos(x)", q)
    sol = solve_inhomogeneous("x*sin(2*x)", z, q, rho_set=(1.0, 1.0, 0.7))
    assert np.nanmax(_inh_residual(sol, "x*sin(2*x)", z.expr, q, X)) <= 1e-8
    assert not [s for s in sol.catalog if s.kind == SpiralKind.NegN and s.v < 0]


def test_right_hand_side_wrapper_matches_solution_input():
    q = 2.0
    z = solve_mer_c("cos(x)", q)
    rhs = RightHandSide(z.expr, catalog=z.catalog)
    sol = solve_inhomogeneous("x*sin(2*x)", rhs, q)
    assert np.nanmax(_inh_residual(sol, "x*sin(2*x)", z.expr, q, X)) <= 1e-8


def test_zero_rhs_reduces_to_homogeneous():
    q = 2.0
    sol = solve_inhomogeneous("(1 - x^3)", RationalFunction.zero(), q)
    y = evaluate_solution(sol.expr, X)
    mv = 1 - X ** 3
    assert np.nanmax(np.abs(evaluate_solution(sol.expr, q * X) - mv * y) / np.abs(mv * y)) <= 1e-10
