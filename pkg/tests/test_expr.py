import numpy as np
import pytest
from hypothesis import assume, given, settings

from qspiral import expr as E
from qspiral.errors import AtSingularity
from qspiral.expr import differentiate_solution, evaluate_solution
from qspiral.numerics import PowerSeries, QParameter, theta_eval
from qspiral.rational import RationalFunction

from strategies import annulus_points

Q = QParameter.coerce(2.0)
NODES = {
    "theta": E.ThetaPower(Q, 1),
    "theta_at": E.ThetaAt(Q, 0.6 + 0.3j, -2),
    "monomial": E.MonomialPower(2.0 - 1j, 2),
    "f_a": E.FAFactor(Q, 1.7 - 0.4j, 1),
    "f_a_product": E.FAProduct(Q, [0.8, -1.1j], [1, 2]),
    "exp_g": E.ExpG(PowerSeries((0.0, 0.2, 0.1))),
    "elem": E.ModifiedElemFactor(Q, 3.0, 1),
    "log_deriv": E.ThetaLogDeriv(Q, 0.9j),
    "tail": E.TailSeries(Q, RationalFunction.from_roots([], [4.0 + 1j]), 0),
    "inverse": E.ArgInverse(E.FAFactor(Q, 2.5, 1), Q),
    "scale": E.ArgScale(E.ThetaPower(Q, 1), 0.5 + 0.5j),
}


# bases b of the spirals b q^Z on which some node above is singular
SINGULAR_BASES = (1.0, 1.0 / (0.6 + 0.3j), 0.9j, 1.0 / 2.5, 1.0 / (0.5 + 0.5j))


def _far_from_singular(x, gap=0.05):
    for b in SINGULAR_BASES:
        k = np.round(np.log(abs(x / b)) / np.log(2.0))
        if min(abs(x / (b * 2.0 ** j) - 1) for j in (k - 1, k, k + 1)) < gap:
            return False
    return True


@settings(max_examples=25, deadline=None)
@given(annulus_points(0.6, 1.7))
def test_second_derivatives_match_difference_quotients(x):
    assume(_far_from_singular(x))
    for name, node in NODES.items():
        d1 = differentiate_solution(node)
        d2 = differentiate_solution(d1)
        h = 1e-4 * abs(x)
        fd = (evaluate_solution(d1, x + h) - evaluate_solution(d1, x - h)) / (2 * h)
        exact = evaluate_solution(d2, x)
        scale = abs(exact) + abs(evaluate_solution(d1, x)) + abs(evaluate_solution(node, x))
        assert abs(exact - fd) <= 1e-5 * scale, name


def test_theta_node_matches_function():
    x = np.array([0.4 + 0.1j, 1.3j])
    assert np.allclose(evaluate_solution(E.ThetaPower(Q, 1), x), theta_eval(2.0, x))


def test_scalar_at_singularity_raises():
    with pytest.raises(AtSingularity):
        evaluate_solution(E.Quotient(E.Constant(1.0), E.ThetaPower(Q, 1)), 2.0)


def test_array_at_singularity_returns_nonfinite():
    v = evaluate_solution(E.Quotient(E.Constant(1.0), E.ThetaPower(Q, 1)), np.array([2.0, 0.7]))
    assert not np.isfinite(v[0]) and np.isfinite(v[1])


def test_constant_folding_in_products():
    node = E.prod(E.Constant(2.0), E.Constant(3.0), E.MonomialPower(1.0, 1))
    assert evaluate_solution(node, 0.5) == pytest.approx(3.0)
    assert evaluate_solution(differentiate_solution(E.Constant(4.0)), 0.5) == 0


def test_describe_is_readable():
    node = E.prod(E.ThetaPower(Q, 1), E.MonomialPower(2.0, -1))
    text = node.describe()
    assert "x" in text and isinstance(text, str)
