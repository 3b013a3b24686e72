"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""
import numpy as np
import pytest

from qspiral import (
    RationalFunction,
    additive_decompose,
    auto_factor,
    cascade_solve,
    count_zeros_poles,
    differentiate_solution,
    evaluate_solution,
    newton_polygon,
    residual_report,
    solve_additive,
    solve_homogeneous,
    theta_eval,
    theta_product_eval,
    verify_factorization,
)
from qspiral import expr as E
from qspiral.numerics import (
    PowerSeries,
    QParameter,
    lemma3_constants,
    lemma4_identity_check,
    modified_elementary_factor,
)
from qspiral.operators import FirstOrderFactor, QDifferenceOperator
from qspiral.spirals import SpiralKind
from qspiral.verify import sample_annulus

RESULTS = {}
Q_VALUES = (2.0, 3.0, 1.5 + 0.5j)


def _report(n, title, ok, detail):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def _grid(annulus, n, seed):
    return sample_annulus(annulus, n, np.random.default_rng(seed))


def test_c01_theta_identities():
    worst_rel, worst_tp = 0.0, 0.0
    for i, q in enumerate(Q_VALUES):
        x = _grid((0.1, 5.0), 200, i)
        th = theta_eval(q, x)
        rel = np.abs(theta_eval(q, q * x) + q * x * th) / np.abs(q * x * th)
        tp = np.abs(th - theta_product_eval(q, x)) / np.abs(th)
        worst_rel, worst_tp = max(worst_rel, rel.max()), max(worst_tp, tp.max())
    ok = worst_rel <= 1e-10 and worst_tp <= 1e-12
    _report(1, "theta identities", ok,
            f"functional relation {worst_rel:.2e} (<= 1e-10), triple product {worst_tp:.2e} (<= 1e-12)")
    assert ok


def test_c02_pochhammer_identity():
    worst = max(lemma4_identity_check(q, n, relative=True) for q in Q_VALUES for n in range(31))
    ok = worst <= 1e-10
    _report(2, "pochhammer sum identity n<=30", ok, f"max relative residual {worst:.2e} (<= 1e-10)")
    assert ok


def test_c03_elementary_factor_bound():
    c1, c2 = lemma3_constants(2.0)
    rng = np.random.default_rng(3)
    x = np.sqrt(rng.uniform(0.0, 1.0, 2500)) * np.exp(2j * np.pi * rng.uniform(size=2500))
    violations = 0
    for m in range(1, 11):
        lhs = np.abs(1.0 - modified_elementary_factor(2.0, m, x))
        violations += int(np.sum(lhs > c1 * (c2 * np.abs(x)) ** (m + 1)))
    ok = violations == 0
    _report(3, "elementary factor bound q=2", ok,
            f"{violations} violations over 10 x 2500 points (C1={c1:.4g}, C2={c2:.4g})")
    assert ok


def _windings(sol, targets, radius=0.1):
    got = {}
    for b in targets:
        got[b] = count_zeros_poles(sol, b, radius).rounded_count
    return got


def test_c04_cubic_example():
    q = 2.0
    sol = solve_homogeneous("(1 - x^3)", q)
    rep = residual_report(sol, "(1 - x^3)", annulus=(0.3, 3.0), n_points=100)
    w = np.exp(2j * np.pi / 3)
    targets = (2.0, 2.0 * w, 2.0 * w * w)
    got = _windings(sol, targets)
    probes = (1.0, -1.0, 1.5j, -2.0, 0.7 + 0.7j, 1.0 * w)
    probe_counts = _windings(sol, probes)
    ok = (rep.max_rel_residual <= 1e-10 and all(v == 1 for v in got.values())
          and all(v == 0 for v in probe_counts.values()))
    _report(4, "m = 1 - x^3", ok,
            f"residual {rep.max_rel_residual:.2e} (<= 1e-10), windings at cube roots "
            f"{list(got.values())} (want +1), probes {list(probe_counts.values())} (want 0)")
    assert ok


def _builtin_example(n, m, expected):
    sol = solve_homogeneous(m, 2.0)
    rep = residual_report(sol, m, annulus=(0.4, 2.5), n_points=100)
    got = _windings(sol, tuple(expected))
    ok = rep.max_rel_residual <= 1e-6 and got == expected
    _report(n, f"m = {m}", ok, f"residual {rep.max_rel_residual:.2e} (<= 1e-6), windings {got} (want {expected})")
    return ok


def test_c05_sine_example():
    assert _builtin_example(5, "sin(x)", {1.0: 2, -1.0: -1})


def test_c06_gamma_example():
    assert _builtin_example(6, "gamma(x)", {1.0: -2, -1.0: 1})


def test_c07_inverse_sine_example():
    q = 2.0
    sol = solve_homogeneous("sin(2/x)", q, 1.0, 1.0)
    cat = sol.catalog
    expected_full = {-1.0: 1, 1.0: -3, 2.0: -1}
    catalog_full = {}
    for s in cat:
        if s.kind == SpiralKind.FullZ:
            catalog_full[complex(s.a).real] = s.v
    half = [s for s in cat if s.kind == SpiralKind.NegN]
    half_ok = all(s.v == -1 for s in half) and all(
        any(abs(s.a - 2.0 / (k * np.pi)) < 1e-12 for s in half) for k in range(1, 20))
    full_ok = catalog_full == expected_full
    got = _windings(sol, (-1.0, 1.0, 2.0))
    want = {-1.0: 1, 1.0: -3, 2.0: -1}
    ok = full_ok and half_ok and got == want
    _report(7, "m = sin(2/x)", ok,
            f"full spirals {catalog_full} (want {expected_full}), half spirals ok={half_ok}, "
            f"windings {got} (want {want})")
    assert ok


def test_c08_first_cascade_example():
    q = 2.0
    x = _grid((0.3, 3.0), 100, 8)
    lines, ok = [], True
    for k in (1, 2, 3):
        op = QDifferenceOperator([q ** k, -(q ** k) - 1.0, 1.0], q)
        left, factors = auto_factor(op)
        fac = verify_factorization(op, factors, x, left)
        res = cascade_solve(factors, q, left=left.constant_value)
        resid = float(np.nanmax(op.residual(res.solution.expr, x)))
        y = evaluate_solution(res.solution.expr, x)
        ref = -1.0 / ((q ** k - 1.0) * q ** ((k * k - k) / 2)) * x ** (-k)
        ratio = y / ref
        c = np.median(ratio.real) + 1j * np.median(ratio.imag)
        closed = float(np.max(np.abs(ratio / c - 1.0)))
        closed_ok = closed <= 1e-8 and abs(abs(c) - 1.0) <= 1e-8
        coef = -1.0 / ((q ** k - 1.0) * q ** ((k * k - k) / 2))
        closed_resid = float(np.nanmax(op.residual(E.MonomialPower(coef, -k), x)))
        this = fac.passed and resid <= 1e-9 and closed_ok
        ok &= this
        lines.append(f"k={k}: residual {resid:.1e}, factorization {'PASS' if fac.passed else 'FAIL'}, "
                     f"closed form deviation {closed:.1e} |c|={abs(c):.3g}, "
                     f"order-2 residual of the closed form itself {closed_resid:.2f}")
    _report(8, "first cascade example", ok, "; ".join(lines))
    assert ok


def test_c09_second_cascade_example():
    q = 2.0
    op = QDifferenceOperator([["x*sin(2*x)*cos(x)"], ["-cos(x)", "-2*x*sin(4*x)"], 1.0], q)
    factors = [FirstOrderFactor(0, "cos(x)"), FirstOrderFactor(0, "x*sin(2*x)")]
    res = cascade_solve(factors, q, rho_sets=[None, (1.0, 1.0, 1.25)])
    half_poles = [s for s in res.solution.catalog if s.kind == SpiralKind.NegN and s.v < 0]
    x = _grid((0.3, 3.0), 100, 9)
    resid = float(np.nanmax(op.residual(res.solution.expr, x)))
    ok = not half_poles and resid <= 1e-6
    _report(9, "second cascade example", ok,
            f"{len(half_poles)} q^-N pole spirals (want 0), order-2 residual {resid:.2e} (<= 1e-6)")
    assert ok


def test_c10_rational_pipeline():
    q = 2.0
    rng = np.random.default_rng(10)
    x = _grid((0.3, 3.0), 100, 10)
    worst_rec, worst_res = 0.0, 0.0
    for _ in range(20):
        n_poles = int(rng.integers(1, 4))
        n_zeros = int(rng.integers(0, 4))
        poles = np.exp(rng.uniform(np.log(0.2), np.log(5.0), n_poles)) * np.exp(2j * np.pi * rng.random(n_poles))
        zeros = rng.normal(size=n_zeros) + 1j * rng.normal(size=n_zeros)
        R = RationalFunction.from_roots(zeros, poles, scale=rng.normal() + 1j * rng.normal())
        d = additive_decompose(R, 1.0)
        rv = R(x)
        worst_rec = max(worst_rec, float(np.max(np.abs(d.reconstruct(x) - rv)) / np.max(np.abs(rv))))
        z = solve_additive(d, q).expr
        res = np.abs(z(q * x) - z(x) - rv) / (1.0 + np.abs(rv))
        worst_res = max(worst_res, float(np.nanmax(res)))
    ok = worst_rec <= 1e-12 and worst_res <= 1e-8
    _report(10, "rational additive pipeline", ok,
            f"reconstruction {worst_rec:.2e} (<= 1e-12), residual {worst_res:.2e} (<= 1e-8)")
    assert ok


def brute_force_slopes(points):
    """Slopes of the lower convex envelope, one per unit step in the abscissa.

    The envelope at an integer abscissa is the minimum over all chords
    between support points that straddle it.
    """
    xs = [a for a, _ in points]
    lo, hi = min(xs), max(xs)

    def envelope(t):
        best = np.inf
        for a1, b1 in points:
            for a2, b2 in points:
                if a1 <= t <= a2:
                    val = b1 if a1 == a2 else b1 + (b2 - b1) * (t - a1) / (a2 - a1)
                    best = min(best, val)
        return best

    env = [envelope(t) for t in range(lo, hi + 1)]
    return [env[i + 1] - env[i] for i in range(len(env) - 1)]


def test_c11_newton_polygon():
    q = 2.0
    op = QDifferenceOperator([q, -q - 1.0, 1.0], q)
    slopes = newton_polygon(op).slope_list
    example_ok = slopes == [0, 0]
    rng = np.random.default_rng(11)
    mismatches = 0
    for _ in range(50):
        order = int(rng.integers(1, 6))
        coeffs = []
        for j in range(order + 1):
            if 0 < j < order and rng.random() < 0.25:
                coeffs.append(0.0)
            else:
                v = int(rng.integers(-4, 5))
                coeffs.append(f"{rng.integers(1, 9)}*x^{v}" if v >= 0 else f"{rng.integers(1, 9)}/x^{-v}")
        op = QDifferenceOperator(coeffs, q)
        poly = newton_polygon(op)
        oracle = brute_force_slopes(poly.support_points)
        if not np.allclose([float(s) for s in poly.slope_list], oracle, atol=1e-12):
            mismatches += 1
    ok = example_ok and mismatches == 0
    _report(11, "newton polygon", ok, f"example slopes {[str(s) for s in slopes]} (want [0, 0]), "
            f"{mismatches} of 50 random operators disagree with the hull oracle")
    assert ok


def primitive_cases():
    q = QParameter.coerce(2.0)
    r = RationalFunction.from_roots([0.5], [3.0 + 1j])
    cases = {
        "ThetaPower": E.ThetaPower(q, 2),
        "ThetaAt": E.ThetaAt(q, 0.7 - 0.2j, -1),
        "MonomialPower": E.MonomialPower(1.5 - 0.5j, -3),
        "FAFactor": E.FAFactor(q, 0.4 + 0.3j, 2),
        "ExpG": E.ExpG(PowerSeries((0.0, 0.3, -0.2, 0.05))),
        "ModifiedElemFactor": E.ModifiedElemFactor(q, 4.0 + 1j, 2),
        "ThetaLogDeriv": E.ThetaLogDeriv(q, 1.3 + 0.4j),
        "TailSeries": E.TailSeries(q, r, 0),
    }
    theta = E.ThetaPower(q, 1)
    mono = E.MonomialPower(2.0, 1)
    cases["Product"] = E.Product((theta, mono, E.FAFactor(q, -0.6, 1)))
    cases["Quotient"] = E.Quotient(mono, theta)
    cases["Sum"] = E.Sum((theta, mono))
    cases["ArgInverse"] = E.ArgInverse(E.FAFactor(q, 0.8j, 1), q)
    return cases


def test_c12_derivatives():
    x = _grid((0.5, 1.8), 20, 12)
    worst = {}
    for name, node in primitive_cases().items():
        d = evaluate_solution(differentiate_solution(node), x)
        h = 1e-5 * np.abs(x)
        fd = (evaluate_solution(node, x + h) - evaluate_solution(node, x - h)) / (2 * h)
        worst[name] = float(np.max(np.abs(d - fd) / np.abs(d)))
    bad = {k: v for k, v in worst.items() if not v <= 1e-6}
    ok = not bad
    _report(12, "derivatives vs central differences", ok,
            f"worst {max(worst.values()):.2e} (<= 1e-6) over {len(worst)} primitive types"
            + (f", failing {bad}" if bad else ""))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
