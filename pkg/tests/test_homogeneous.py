import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qspiral.coefficients import evaluate_coefficient, parse_coefficient
from qspiral.errors import TieAtThreshold
from qspiral.expr import evaluate_solution
from qspiral.homogeneous import solve_entire, solve_homogeneous, solve_mer_c, solve_mer_cstar
from qspiral.spirals import Spiral, SpiralCatalog, SpiralKind, merge_spirals
from qspiral.verify import count_zeros_poles, sample_annulus

PROPS = settings(max_examples=12, deadline=None)


def _residual(sol, m, q, annulus=(0.3, 3.0), n=60, seed=0):
    x = sample_annulus(annulus, n, np.random.default_rng(seed))
    y = evaluate_solution(sol.expr, x)
    yq = evaluate_solution(sol.expr, q * x)
    mv = np.asarray(evaluate_coefficient(parse_coefficient(m, q) if isinstance(m, str) else m, x))
    res = np.abs(yq - mv * y) / (np.abs(yq) + np.abs(mv * y))
    return float(np.nanmax(res))


@pytest.mark.parametrize("q", [2.0, 3.0, 1.5 + 0.5j])
@pytest.mark.parametrize("m", ["(1 - x^3)", "x^2*(1-x/2.3)/(1-x/0.7)", "3", "exp(x)", "2/x"])
def test_residual_meromorphic_at_zero(m, q):
    sol = solve_homogeneous(m, q)
    assert _residual(sol, m, q) <= 1e-10


def test_solve_entire_exp_and_polynomial():
    q = 2.0
    sol = solve_entire("exp(x)*(1 - x/1.3)", q)
    assert _residual(sol, "exp(x)*(1 - x/1.3)", q) <= 1e-10


def test_constant_coefficient_gives_theta_quotient():
    q = 2.0
    sol = solve_mer_c("5", q)
    assert len(sol.catalog) == 2
    assert all(s.kind == SpiralKind.FullZ for s in sol.catalog)
    assert sol.catalog.order_at(1.0) == 1
    assert sol.catalog.order_at(5.0) == -1
    assert sol.catalog.order_at(10.0) == -1
    assert _residual(sol, "5", q) <= 1e-12


def test_identity_coefficient_has_empty_catalog():
    sol = solve_homogeneous("1", 2.0)
    assert len(sol.catalog) == 0


def test_single_zero_gives_half_spiral():
    q = 2.0
    sol = solve_mer_c("(1 - x/0.7)", q)
    assert [(s.kind, s.v) for s in sol.catalog] == [(SpiralKind.PosNStar, 1)]
    assert sol.catalog.order_at(1.4) == 1
    assert sol.catalog.order_at(0.7) == 0


def test_cstar_requires_thresholds_off_the_data():
    with pytest.raises(TieAtThreshold):
        solve_mer_cstar("sin(2/x)", 2.0, 2.0 / math.pi, 1.0)


def test_cstar_solution_residual():
    q = 2.0
    sol = solve_mer_cstar("sin(2/x)", q, 1.0, 1.0)
    assert _residual(sol, "sin(2/x)", q, annulus=(0.4, 2.5)) <= 1e-9


@st.composite
def rational_coefficients(draw):
    def pt():
        r = math.exp(draw(st.floats(math.log(0.4), math.log(2.5))))
        return cmath.rect(r, draw(st.floats(0.3, 2.8)))

    zeros = [pt() for _ in range(draw(st.integers(0, 2)))]
    poles = [pt() for _ in range(draw(st.integers(0, 2)))]
    mu = draw(st.integers(-1, 2))
    c = draw(st.floats(0.5, 3.0))
    parts = [f"{c}"]
    if mu:
        parts.append(f"x^{mu}")
    parts += [f"(1 - x/({z.real}+{z.imag}i))" for z in zeros]
    text = "*".join(parts)
    for b in poles:
        text += f"/(1 - x/({b.real}+{b.imag}i))"
    return text


@PROPS
@given(rational_coefficients())
def test_rational_solution_residual_and_catalog(m):
    q = 2.0
    sol = solve_homogeneous(m, q)
    assert _residual(sol, m, q) <= 1e-9
    # every catalog spiral point in range carries the predicted order
    for s in sol.catalog:
        for _, z in s.points(q, 0.5, 2.0)[:1]:
            others = [w for w in sol.catalog.singular_points(0.2, 5.0) if abs(w - z) > 1e-9]
            gap = min([abs(w - z) for w in others] + [abs(z)])
            if gap < 0.05:
                continue
            got = count_zeros_poles(sol, z, gap / 3).rounded_count
            assert got == sol.catalog.order_at(z)


def test_merge_sums_full_spirals_on_one_class():
    q = 2.0
    cat = merge_spirals(q, [Spiral(1.0, SpiralKind.FullZ, -2), Spiral(4.0, SpiralKind.FullZ, 1)])
    assert len(cat) == 1 and cat.spirals[0].v == -1


def test_merge_drops_cancelled_orders():
    cat = merge_spirals(2.0, [Spiral(3.0, SpiralKind.FullZ, 1), Spiral(1.5, SpiralKind.FullZ, -1)])
    assert len(cat) == 0


def test_half_spiral_on_full_class_recorded_as_overlap():
    cat = merge_spirals(2.0, [Spiral(1.0, SpiralKind.FullZ, 1), Spiral(2.0, SpiralKind.PosNStar, 1)])
    assert len(cat) == 2 and cat.overlaps
    assert cat.order_at(4.0) == 2
    assert cat.order_at(1.0) == 1


def test_spiral_points_and_kinds():
    s = Spiral(1.0, SpiralKind.NegN, -1)
    pts = [z for _, z in s.points(2.0, 0.1, 10.0)]
    assert all(abs(z) <= 1.0 + 1e-12 for z in pts)
    assert SpiralKind.PosNStar.contains(1) and not SpiralKind.PosNStar.contains(0)
    assert SpiralKind.NegNStar.contains(-1) and not SpiralKind.NegNStar.contains(0)


def test_catalog_dict_round_trip():
    sol = solve_homogeneous("gamma(x)", 2.0)
    d = sol.catalog.to_dict()
    back = SpiralCatalog.from_dict(d)
    assert len(back) == len(sol.catalog)
    assert back.order_at(1.0) == sol.catalog.order_at(1.0)
    assert set(d["spirals"][0]) == {"base", "direction", "order", "exact"}


def test_solution_unpacks_as_pair():
    expr, cat = solve_homogeneous("3", 2.0)
    assert isinstance(cat, SpiralCatalog)
    assert np.isfinite(evaluate_solution(expr, 0.77 + 0.1j))
