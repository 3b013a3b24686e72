import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qspiral.errors import (
    AllPointsSkipped,
    AnnulusTooSmall,
    ContourTooClose,
    InvalidInput,
    NonIntegerResult,
)
from qspiral.expr import Constant, FunctionNode, MonomialPower, ThetaPower
from qspiral.numerics import TruncationPolicy
from qspiral.homogeneous import solve_homogeneous
from qspiral.rational import RationalFunction
from qspiral.verify import (
    check_catalog,
    count_zeros_poles,
    report_json,
    residual_report,
    run_selftest,
    sample_annulus,
)

PROPS = settings(max_examples=40, deadline=None)


@st.composite
def points_in_box(draw):
    return complex(draw(st.floats(-2.0, 2.0)), draw(st.floats(-2.0, 2.0)))


@PROPS
@given(st.lists(points_in_box(), max_size=4), st.lists(points_in_box(), max_size=4),
       points_in_box(), st.floats(0.2, 1.5))
def test_winding_count_matches_argument_principle(zeros, poles, center, radius):
    pts = zeros + poles
    assume(all(abs(abs(p - center) - radius) > 0.05 for p in pts))
    assume(all(abs(a - b) > 1e-3 for i, a in enumerate(pts) for b in pts[:i]))
    F = FunctionNode(RationalFunction.from_roots(zeros, poles))
    want = sum(abs(z - center) < radius for z in zeros) - sum(abs(p - center) < radius for p in poles)
    got = count_zeros_poles(F, center, radius, nodes=2048)
    assert got.rounded_count == want


def test_winding_rejects_bad_derivative():
    with pytest.raises(NonIntegerResult):
        count_zeros_poles(MonomialPower(1.0, 1), 0.0, 0.5, derivative=Constant(0.5))


def test_winding_contour_on_catalog_point():
    sol = solve_homogeneous("(1 - x^3)", 2.0)
    with pytest.raises(ContourTooClose):
        count_zeros_poles(sol, 1.9, 0.1)


def test_winding_radius_positive():
    with pytest.raises(InvalidInput):
        count_zeros_poles(MonomialPower(1.0, 1), 0.0, 0.0)


def test_residual_report_passes_and_serializes():
    sol = solve_homogeneous("gamma(x)", 2.0)
    rep = residual_report(sol, "gamma(x)", annulus=(0.4, 2.5), n_points=50)
    assert rep.passed
    assert rep.points_tested + rep.points_skipped == 50
    d = json.loads(report_json(rep))
    assert d["verdict"] == "PASS"


def test_residual_report_detects_wrong_coefficient():
    sol = solve_homogeneous("(1 - x^3)", 2.0)
    rep = residual_report(sol, "(1 - x^2)", annulus=(0.3, 3.0), n_points=30)
    assert not rep.passed


def test_residual_report_annulus_check():
    sol = solve_homogeneous("sin(2/x)", 2.0, 1.0, 1.0)
    lo, hi = sol.valid_annulus
    if math.isfinite(hi):
        with pytest.raises(AnnulusTooSmall):
            residual_report(sol, "sin(2/x)", annulus=(lo, hi))
    with pytest.raises(InvalidInput):
        residual_report(sol, "sin(2/x)", annulus=(0.0, 1.0))


def test_residual_report_all_points_skipped():
    sol = solve_homogeneous("(1 - x^3)", 2.0)
    with pytest.raises(AllPointsSkipped):
        residual_report(sol, "(1 - x^3)", annulus=(1.0, 1.0), n_points=5, guard=10.0)


def test_check_catalog_sine():
    sol = solve_homogeneous("sin(x)", 2.0)
    chk = check_catalog(sol, annulus=(0.4, 2.5), n_probes=5)
    assert chk.passed
    assert any(e["kind"] == "catalog" for e in chk.entries)


def test_sample_annulus_bounds():
    x = sample_annulus((0.5, 2.0), 500, np.random.default_rng(0))
    assert x.shape == (500,)
    assert np.all((np.abs(x) >= 0.5) & (np.abs(x) <= 2.0))


def test_selftest_passes():
    checks = run_selftest(n_points=50)
    assert checks and all(c["passed"] for c in checks)


def test_residual_trivial_constant():
    rep = residual_report(Constant(1.0), "1", annulus=(0.5, 2.0), n_points=20, q=2.0)
    assert rep.max_rel_residual == 0.0


def test_residual_theta_relation_as_equation():
    rep = residual_report(ThetaPower(2.0, 1), "-2*x", annulus=(0.3, 3.0), n_points=50, q=2.0)
    assert rep.max_rel_residual <= 1e-12


def test_residual_monotone_under_tolerance_tightening():
    sol = solve_homogeneous("sin(x)", 2.0)
    loose = residual_report(sol, "sin(x)", annulus=(0.4, 2.5), n_points=40,
                            pol=TruncationPolicy(abs_tol=2e-14))
    tight = residual_report(sol, "sin(x)", annulus=(0.4, 2.5), n_points=40,
                            pol=TruncationPolicy(abs_tol=1e-14))
    assert tight.max_rel_residual <= 2 * loose.max_rel_residual + 1e-15
