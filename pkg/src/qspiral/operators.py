"""Order-n q-difference operators ``sum_j m_j(x) sigma_q^j``.

Newton polygons, verification of user-supplied first-order
factorizations and cascade solving of factored operators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .coefficients import FactoredForm, FiniteFamily, LaurentFactoredForm, coerce_coefficient
from .errors import EvaluationFailure, InvalidInput, UnsupportedInput
from .expr import CoefficientNode, Expr, FunctionNode, MonomialPower, ThetaAt, evaluate_solution, prod
from .homogeneous import Solution, solve_homogeneous
from .inhomogeneous import RightHandSide, solve_inhomogeneous
from .numerics import DEFAULT_POLICY, QParameter, TruncationPolicy
from .rational import RationalFunction

__all__ = [
    "OperatorCoefficient",
    "QDifferenceOperator",
    "NewtonPolygon",
    "FirstOrderFactor",
    "FactorizationReport",
    "newton_polygon",
    "lower_hull",
    "verify_factorization",
    "auto_factor",
    "cascade_solve",
    "CascadeResult",
]

_VAL_TOL = 1e-10


def _rational_valuation(r: RationalFunction):
    num, den = r.numerator, r.denominator
    scale_n = float(np.max(np.abs(num))) if num.size else 0.0
    if scale_n == 0:
        return None, 0j
    vn = int(np.argmax(np.abs(num) > _VAL_TOL * scale_n))
    scale_d = float(np.max(np.abs(den)))
    vd = int(np.argmax(np.abs(den) > _VAL_TOL * scale_d))
    return vn - vd, complex(num[vn] / den[vd])


def _form_valuation(f):
    """Valuation at 0 and leading coefficient of a factored form."""
    if isinstance(f, FactoredForm):
        return f.mu0, f.alpha
    if not f.has_inner():
        return f.v, f.alpha
    inner = f.inner
    if not inner.exp_part.is_zero() or any(not isinstance(fam, FiniteFamily)
                                           for fam in inner.zeros + inner.poles):
        raise UnsupportedInput("coefficient is not meromorphic at 0; valuation undefined")
    # (1 - 1/(b x)) = -(1/(b x)) (1 - b x)
    v, lead = f.v, f.alpha
    for b, mult in inner.zero_points():
        v -= mult
        lead *= (-1.0 / b) ** mult
    for b, mult in inner.pole_points():
        v += mult
        lead /= (-1.0 / b) ** mult
    return v, lead


def _is_zero_spec(t) -> bool:
    if isinstance(t, str):
        return t.strip() in ("0", "0.0")
    return isinstance(t, (int, float, complex)) and t == 0


class OperatorCoefficient:
    """A coefficient ``m_j``: a factored form, a rational function or a sum of them."""

    def __init__(self, spec, q=None):
        items = spec if isinstance(spec, (list, tuple)) else [spec]
        terms = []
        for t in items:
            if isinstance(t, OperatorCoefficient):
                terms.extend(t.terms)
            elif isinstance(t, RationalFunction):
                terms.append(t)
            elif _is_zero_spec(t):
                terms.append(RationalFunction(()))
            else:
                terms.append(coerce_coefficient(t, q))
        if not terms:
            raise InvalidInput("empty coefficient")
        self.terms = tuple(terms)

    @property
    def single(self):
        """The only term, or ``None`` for a sum."""
        return self.terms[0] if len(self.terms) == 1 else None

    def evaluate(self, x, pol: TruncationPolicy = DEFAULT_POLICY):
        x = np.asarray(x, dtype=complex)
        out = np.zeros(x.shape, dtype=complex)
        for t in self.terms:
            out = out + (t.evaluate(x) if isinstance(t, RationalFunction) else t.evaluate(x, pol))
        return out

    __call__ = evaluate

    def valuation_and_leading(self):
        """``(v, c)`` with ``m(x) ~ c x^v`` at 0; ``(None, 0)`` for the zero function."""
        parts = []
        for t in self.terms:
            v, c = _rational_valuation(t) if isinstance(t, RationalFunction) else _form_valuation(t)
            if v is not None:
                parts.append((v, c))
        if not parts:
            return None, 0j
        vmin = min(v for v, _ in parts)
        lead = sum(c for v, c in parts if v == vmin)
        scale = max(abs(c) for v, c in parts if v == vmin)
        if abs(lead) > 1e-12 * scale:
            return vmin, complex(lead)
        return self._numeric_valuation(vmin)

    def _numeric_valuation(self, vmin):
        """Leading terms cancelled: read the Laurent coefficients off a small circle."""
        r = 0.5 * self._analytic_radius()
        n = 256
        x = r * np.exp(2j * np.pi * np.arange(n) / n)
        c = np.fft.fft(self.evaluate(x)) / n
        ks = np.fft.fftfreq(n, d=1.0 / n).astype(int)
        scale = float(np.max(np.abs(c)))
        if scale == 0:
            return None, 0j
        for k in sorted(ks):
            if k <= vmin:
                continue
            i = int(np.nonzero(ks == k)[0][0])
            if abs(c[i]) > 1e-9 * scale:
                return int(k), complex(c[i] / r ** k)
        return None, 0j

    def _analytic_radius(self):
        mods = []
        for t in self.terms:
            if isinstance(t, RationalFunction):
                mods += t.pole_moduli()
            else:
                mods += [abs(b) for b, _ in t.pole_points()]
        return min(mods + [1.0])

    @property
    def valuation(self):
        return self.valuation_and_leading()[0]

    def is_zero(self) -> bool:
        return self.valuation is None

    def is_constant(self) -> bool:
        """True for a single constant term."""
        t = self.single
        if isinstance(t, FactoredForm):
            return t.is_constant()
        if isinstance(t, LaurentFactoredForm):
            return not t.has_inner() and t.as_factored().is_constant()
        if isinstance(t, RationalFunction):
            return not t.parts and t.poly.size <= 1
        return False

    def constant_value(self) -> complex:
        v, c = self.valuation_and_leading()
        return 0j if v is None else c

    def zero_points(self):
        t = self.single
        if t is None:
            raise UnsupportedInput("zeros of a sum of coefficients are not known")
        if isinstance(t, RationalFunction):
            roots = np.roots(t.numerator[::-1]) if t.numerator.size > 1 else []
            return [(complex(b), 1) for b in roots if b != 0]
        return list(t.zero_points())

    def as_form(self):
        t = self.single
        if isinstance(t, (FactoredForm, LaurentFactoredForm)):
            return t
        if isinstance(t, RationalFunction) and self.is_constant():
            return FactoredForm.constant(self.constant_value())
        raise UnsupportedInput("a factored coefficient is required here")

    def __repr__(self):
        return " + ".join(str(t) for t in self.terms)


class QDifferenceOperator:
    """``sum_{j=0..n} m_j(x) sigma_q^j`` with ``m_0 m_n`` not identically zero."""

    def __init__(self, coefficients: Sequence, q):
        self.q = QParameter.coerce(q)
        self.coefficients = tuple(c if isinstance(c, OperatorCoefficient)
                                  else OperatorCoefficient(c, self.q.q) for c in coefficients)
        if len(self.coefficients) < 2:
            raise InvalidInput("an operator needs order n >= 1")
        if self.coefficients[0].is_zero() or self.coefficients[-1].is_zero():
            raise InvalidInput("m_0 and m_n must not vanish identically")

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def apply(self, y: Callable, x, pol: TruncationPolicy = DEFAULT_POLICY):
        """``(sum_j m_j sigma^j y)(x)`` and the scale ``sum_j |m_j y(q^j x)|``."""
        x = np.asarray(x, dtype=complex)
        total = np.zeros(x.shape, dtype=complex)
        scale = np.zeros(x.shape)
        for j, m in enumerate(self.coefficients):
            term = m.evaluate(x, pol) * _call(y, self.q.q ** j * x, pol)
            total = total + term
            scale = scale + np.abs(term)
        return total, scale

    def residual(self, y, x, pol: TruncationPolicy = DEFAULT_POLICY):
        """Relative residual ``|L y| / sum_j |m_j y(q^j x)|`` pointwise."""
        total, scale = self.apply(y, x, pol)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(total) / np.where(scale > 0, scale, 1.0)

    def to_dict(self):
        return {"q": {"re": self.q.q.real, "im": self.q.q.imag},
                "coeffs": [repr(c) for c in self.coefficients]}


def _call(y, x, pol):
    if isinstance(y, Expr):
        return evaluate_solution(y, x, pol)
    if isinstance(y, Solution):
        return evaluate_solution(y.expr, x, pol)
    return np.asarray(y(x), dtype=complex)


# ---------------------------------------------------------------------------
# Newton polygon


def lower_hull(points):
    """Lower convex hull of integer points sorted by abscissa (monotone chain)."""
    pts = sorted(set((int(a), int(b)) for a, b in points))
    # keep only the lowest point per column
    lowest = {}
    for a, b in pts:
        lowest[a] = min(b, lowest.get(a, b))
    pts = sorted(lowest.items())
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


@dataclass
class NewtonPolygon:
    support_points: list
    hull_vertices: list
    slopes: list  # [(Fraction slope, multiplicity)], nondecreasing

    @property
    def slope_list(self):
        """Slopes repeated by multiplicity."""
        return [s for s, mult in self.slopes for _ in range(mult)]

    def to_dict(self):
        return {"support_points": [list(p) for p in self.support_points],
                "hull_vertices": [list(p) for p in self.hull_vertices],
                "slopes": [{"slope": str(s), "multiplicity": m} for s, m in self.slopes]}


def newton_polygon(op) -> NewtonPolygon:
    """Newton polygon from the valuations of the coefficients at 0."""
    coeffs = op.coefficients if isinstance(op, QDifferenceOperator) else op
    support = []
    for j, m in enumerate(coeffs):
        v = m.valuation if isinstance(m, OperatorCoefficient) else m
        if v is not None:
            support.append((j, int(v)))
    hull = lower_hull(support)
    slopes = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        slopes.append((Fraction(y2 - y1, x2 - x1), x2 - x1))
    return NewtonPolygon(support, hull, slopes)


# ---------------------------------------------------------------------------
# factorizations


@dataclass
class FirstOrderFactor:
    """``(x^k sigma_q - alpha)`` followed on the right by ``cofactor``.

    ``alpha`` is a nonzero number or a coefficient (DSL string or form).
    """

    k: int
    alpha: object
    cofactor: object = 1.0

    def __post_init__(self):
        if isinstance(self.alpha, (int, float, complex)):
            if self.alpha == 0:
                raise InvalidInput("alpha must be nonzero")
            self.alpha = complex(self.alpha)
        k = Fraction(self.k)
        self.k = int(k) if k.denominator == 1 else k

    def alpha_coefficient(self, q=None) -> OperatorCoefficient:
        return OperatorCoefficient(self.alpha, q)

    def cofactor_coefficient(self, q=None) -> OperatorCoefficient:
        return OperatorCoefficient(self.cofactor, q)

    def to_dict(self):
        a = self.alpha
        alpha = {"re": a.real, "im": a.imag} if isinstance(a, complex) else str(a)
        return {"k": str(self.k) if isinstance(self.k, Fraction) else self.k,
                "alpha": alpha, "cofactor": str(self.cofactor)}

    @classmethod
    def from_dict(cls, d):
        a = d["alpha"]
        if isinstance(a, dict):
            a = complex(a.get("re", 0.0), a.get("im", 0.0))
        elif isinstance(a, (list, tuple)):
            a = complex(a[0], a[1])
        return cls(Fraction(str(d.get("k", 0))), a, d.get("cofactor", 1.0))


def _factored_apply(factors, left, qp, pol):
    """The map ``y -> left (x^k1 s - a1) c1 ... (x^kn s - an) cn y`` as nested closures."""
    def wrap(inner, f):
        alpha = f.alpha_coefficient(qp.q)
        k = f.k

        def g(x):
            return x ** k * inner(qp.q * x) - alpha.evaluate(x, pol) * inner(x)
        return g

    def build(y):
        cur = y
        for f in reversed(factors):
            cof = f.cofactor_coefficient(qp.q)
            cur = (lambda c, h: (lambda x: c.evaluate(x, pol) * h(x)))(cof, cur)
            cur = wrap(cur, f)
        return lambda x: left.evaluate(x, pol) * cur(x)
    return build


def _probes(qp, n_mono: int = 20):
    out = []
    for s in range(-(n_mono // 2), n_mono - n_mono // 2):
        out.append((f"x^{s}", MonomialPower(1.0, s)))
    for a, b in ((0.7 + 0.2j, -1.3 + 0.4j), (1.9j, 0.45), (-0.8, 2.6 - 0.5j)):
        out.append((f"Theta(x/{a})/Theta(x/{b})",
                    prod(ThetaAt(qp, 1.0 / a, 1), ThetaAt(qp, 1.0 / b, -1))))
    return out


@dataclass
class FactorizationReport:
    max_rel_discrepancy: float
    worst_probe: str
    worst_point: complex
    points_tested: int
    points_skipped: int
    skipped: list = field(default_factory=list)
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return self.points_tested > 0 and self.max_rel_discrepancy <= self.tolerance

    def to_dict(self):
        return {"max_rel_discrepancy": self.max_rel_discrepancy, "worst_probe": self.worst_probe,
                "worst_point": {"re": self.worst_point.real, "im": self.worst_point.imag},
                "points_tested": self.points_tested, "points_skipped": self.points_skipped,
                "tolerance": self.tolerance, "verdict": "PASS" if self.passed else "FAIL"}


def verify_factorization(op: QDifferenceOperator, factors: Sequence[FirstOrderFactor], grid,
                         left=1.0, pol: TruncationPolicy = DEFAULT_POLICY,
                         tolerance: float = 1e-9) -> FactorizationReport:
    """Compare ``op`` with ``left (x^k1 s - a1) c1 ... (x^kn s - an) cn`` on probe functions.

    The discrepancy at a point is ``|op y - F y| / sum_j |m_j y(q^j x)|``;
    points where either side is not finite are skipped and recorded.
    """
    if len(factors) != op.order:
        raise InvalidInput(f"expected {op.order} factors, got {len(factors)}")
    qp = op.q
    left = left if isinstance(left, OperatorCoefficient) else OperatorCoefficient(left, qp.q)
    grid = np.asarray(grid, dtype=complex).reshape(-1)
    build = _factored_apply(list(factors), left, qp, pol)
    worst, wprobe, wpt = 0.0, "", 0j
    tested = skipped = 0
    notes = []
    for name, probe in _probes(qp):
        def y(x, probe=probe):
            return probe._eval(np.asarray(x, dtype=complex), pol)
        with np.errstate(all="ignore"):
            a, scale = op.apply(y, grid, pol)
            b = build(y)(grid)
            ok = np.isfinite(a) & np.isfinite(b) & np.isfinite(scale) & (scale > 0)
            rel = np.where(ok, np.abs(a - b) / np.where(ok, scale, 1.0), 0.0)
        for x in grid[~ok]:
            notes.append({"probe": name, "point": complex(x),
                          "error": EvaluationFailure.__name__})
        skipped += int(np.sum(~ok))
        tested += int(np.sum(ok))
        if np.any(ok):
            i = int(np.argmax(rel))
            if rel[i] > worst:
                worst, wprobe, wpt = float(rel[i]), name, complex(grid[i])
    return FactorizationReport(worst, wprobe, wpt, tested, skipped, notes, tolerance)


def auto_factor(op: QDifferenceOperator):
    """Factor a constant-coefficient operator into ``m_n prod (sigma - lambda_i)``.

    Returns ``(left, factors)``; roots are ordered by decreasing modulus.
    """
    if not all(c.is_constant() for c in op.coefficients):
        raise UnsupportedInput("automatic factorization needs constant coefficients")
    c = np.array([m.constant_value() for m in op.coefficients], dtype=complex)
    roots = sorted(np.roots(c[::-1]), key=lambda z: (-abs(z), np.angle(z)))
    roots = [complex(round(z.real, 13), round(z.imag, 13)) if abs(z - round(z.real)) < 1e-12
             else complex(z) for z in roots]
    return OperatorCoefficient(c[-1]), [FirstOrderFactor(0, lam) for lam in roots]


# ---------------------------------------------------------------------------
# cascade


@dataclass
class CascadeResult:
    """Final solution plus the per-stage solutions (stage 1 = leftmost factor)."""

    solution: Solution
    stages: list

    def __iter__(self):
        return iter((self.solution.expr, self.solution.catalog))


def _stage_coefficient(f: FirstOrderFactor, qp) -> object:
    """Coefficient ``alpha x^{-k}`` of the stage equation."""
    mono = FactoredForm(1.0, -int(f.k))
    a = f.alpha
    if isinstance(a, complex):
        return FactoredForm(a, -int(f.k))
    return OperatorCoefficient(a, qp.q).as_form() * mono


def cascade_solve(factors: Sequence[FirstOrderFactor], q, left=1.0, rho_sets=None,
                  annulus=None, pol: TruncationPolicy = DEFAULT_POLICY) -> CascadeResult:
    """Solve ``left (x^k1 s - a1) c1 ... (x^kn s - an) cn y = 0``.

    Stage 1 solves ``w1(qx) = a1 x^{-k1} w1(x)``; stage j solves
    ``wj(qx) = aj x^{-kj} wj(x) + x^{-kj} w_{j-1}(x) / c_{j-1}(x)``; the
    result is ``y = wn / cn``.  ``rho_sets`` gives ``(rho, rho', rho'')``
    per stage (``None`` for defaults).
    """
    qp = QParameter.coerce(q)
    factors = list(factors)
    if not factors:
        raise InvalidInput("no factors")
    for i, f in enumerate(factors):
        if isinstance(f.k, Fraction):
            raise UnsupportedInput(f"stage {i + 1}: fractional slope {f.k} needs ramification")
    rho_sets = list(rho_sets) if rho_sets is not None else [None] * len(factors)
    stages = []
    prev = None
    prev_cof = None
    for i, f in enumerate(factors):
        m = _stage_coefficient(f, qp)
        rs = rho_sets[i] if i < len(rho_sets) and rho_sets[i] is not None else (1.0, 1.0, None)
        try:
            if prev is None:
                cstar = isinstance(m, LaurentFactoredForm) and m.has_inner()
                sol = solve_homogeneous(m, qp, rs[0] if cstar else None, rs[1] if cstar else None)
            else:
                rhs = _stage_rhs(prev, prev_cof, int(f.k), qp)
                sol = solve_inhomogeneous(m, rhs, qp, rs, annulus, pol)
        except Exception as exc:
            exc.args = (f"stage {i + 1}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        stages.append(sol)
        prev, prev_cof = sol, f.cofactor_coefficient(qp.q)
    final = _divide_by_cofactor(prev, prev_cof)
    return CascadeResult(final, stages)


def _stage_rhs(prev: Solution, cof: OperatorCoefficient, k: int, qp) -> RightHandSide:
    expr = prev.expr
    extra = []
    if not cof.is_constant():
        expr = prod(expr, _reciprocal_node(cof))
        extra = [(b, v) for b, v in cof.zero_points()]
    elif cof.constant_value() != 1:
        expr = prod(expr, 1.0 / cof.constant_value())
    if k:
        expr = prod(MonomialPower(1.0, -k), expr)
    return RightHandSide(expr, prev.catalog, extra)


def _divide_by_cofactor(sol: Solution, cof: OperatorCoefficient) -> Solution:
    if cof.is_constant() and cof.constant_value() == 1:
        return sol
    if cof.is_constant():
        expr = prod(sol.expr, 1.0 / cof.constant_value())
    else:
        expr = prod(sol.expr, _reciprocal_node(cof))
    out = Solution(expr, sol.catalog, sol.unmerged, list(sol.notes), sol.valid_annulus,
                   sol.decomposition, sol.homogeneous)
    if not cof.is_constant():
        out.notes.append("divided by the last cofactor; its zeros are extra poles")
    return out


def _reciprocal_node(cof: OperatorCoefficient) -> Expr:
    t = cof.single
    if isinstance(t, RationalFunction):
        return FunctionNode(RationalFunction.from_coeffs(t.denominator, t.numerator))
    return CoefficientNode(cof.as_form().reciprocal())
