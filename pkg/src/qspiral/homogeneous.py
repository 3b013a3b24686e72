"""Explicit solutions of ``y(qx) = m(x) y(x)``.

The solution is assembled from

* a theta prefactor solving ``y(qx) = alpha x^mu y(x)``;
* one ``f_a`` per zero (power +v) and per pole (power -v) of the
  normalized coefficient, which solves ``y(qx) = (1 - x/a) y(x)``;
* ``exp(G)`` absorbing the exponential factor, the convergence
  polynomials of genus > 0 families and the builtin tail corrections.

On C* the coefficient is first split by modulus; the part in 1/x is
solved in the variable t and enters the solution at the argument q/x.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import (
    BuiltinFamily,
    FactoredForm,
    FiniteFamily,
    LaurentFactoredForm,
    coerce_coefficient,
    split_at_modulus,
)
from .errors import InvalidInput, UnsupportedInput
from .expr import (
    ArgInverse,
    Constant,
    Expr,
    ExpG,
    FAProduct,
    MonomialPower,
    ThetaAt,
    prod,
)
from .numerics import PowerSeries, QParameter, g_transform
from .spirals import Spiral, SpiralCatalog, SpiralKind, merge_spirals

__all__ = [
    "Solution",
    "theta_prefactor",
    "solve_entire",
    "solve_mer_c",
    "solve_mer_cstar",
    "solve_homogeneous",
]


@dataclass
class Solution:
    """A solution tree with its merged catalog and the unmerged audit list.

    Iterating yields ``(expr, catalog)`` so it unpacks like a pair.
    """

    expr: Expr
    catalog: SpiralCatalog
    unmerged: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    valid_annulus: tuple = (0.0, float("inf"))
    decomposition: object = None
    homogeneous: object = None

    def __iter__(self):
        return iter((self.expr, self.catalog))


def theta_prefactor(q, alpha, mu: int):
    """Tree and raw spirals for a solution of ``y(qx) = alpha x^mu y(x)``.

    ``Theta^{2mu+1}(x) / (q^mu x^mu Theta^mu(-x) Theta(x/alpha))``, which
    for ``alpha = 1`` reduces to ``Theta^{2mu}(x) / (q^mu x^mu Theta^mu(-x))``.
    """
    qp = QParameter.coerce(q)
    alpha = complex(alpha)
    mu = int(mu)
    if alpha == 0:
        raise InvalidInput("alpha must be nonzero")
    parts = []
    raw = []
    if mu:
        parts += [ThetaAt(qp, 1.0, 2 * mu), MonomialPower(qp.q ** (-mu), -mu), ThetaAt(qp, -1.0, -mu)]
        raw += [Spiral(1.0, SpiralKind.FullZ, 2 * mu), Spiral(-1.0, SpiralKind.FullZ, -mu)]
    if alpha != 1:
        parts += [ThetaAt(qp, 1.0, 1), ThetaAt(qp, 1.0 / alpha, -1)]
        raw += [Spiral(1.0, SpiralKind.FullZ, 1), Spiral(alpha, SpiralKind.FullZ, -1)]
    return prod(*parts), raw


def _family_data(qp: QParameter, fams, sign: int):
    """Locations, multiplicities, exp-part and raw spirals for one side."""
    locs, mults, raw = [], [], []
    g = PowerSeries(())
    for f in fams:
        for a, v in f.enumerate_points():
            locs.append(a)
            mults.append(sign * v)
            raw.append(Spiral(a, SpiralKind.PosNStar, sign * v))
        if isinstance(f, BuiltinFamily):
            if f.genus < 0:
                raise UnsupportedInput("countable family without genus data")
            g = g + f.genus_polynomial().scaled(sign) + f.tail_log_series().scaled(sign)
        elif not isinstance(f, FiniteFamily):
            raise UnsupportedInput(f"unknown family type {type(f).__name__}")
    return locs, mults, g, raw


def _normalized_solution(qp: QParameter, form: FactoredForm):
    """Solve ``y(qx) = form(x) y(x)`` for ``form`` with alpha = 1, mu0 = 0."""
    zl, zm, zg, zraw = _family_data(qp, form.zeros, +1)
    pl, pm, pg, praw = _family_data(qp, form.poles, -1)
    g = (form.exp_part + zg + pg).trimmed()
    parts = []
    if zl or pl:
        parts.append(FAProduct(qp, zl + pl, zm + pm))
    if not g.is_zero():
        parts.append(ExpG(g_transform(qp, g)))
    return prod(*parts), zraw + praw


def _finish(expr, raw, qp, notes=()):
    merged = merge_spirals(qp, raw)
    return Solution(expr, merged, list(raw), list(notes) + list(merged.overlaps))


def solve_mer_c(m, q) -> Solution:
    """Meromorphic solution on C for a coefficient meromorphic on C.

    ``m = alpha x^mu h1 / h2`` with ``h1(0) = h2(0) = 1``; the catalog
    holds ``q^Z`` (order ``2mu + [alpha != 1]``), ``-q^Z`` (``-mu``),
    ``alpha q^Z`` (-1 when alpha != 1) and ``a q^{N*}`` for every zero
    (+) and pole (-) of ``h1 / h2``.
    """
    qp = QParameter.coerce(q)
    m = coerce_coefficient(m, qp.q)
    if isinstance(m, LaurentFactoredForm):
        if m.has_inner():
            raise InvalidInput("coefficient has content in 1/x; use solve_mer_cstar")
        m = m.as_factored()
    pre, pre_raw = theta_prefactor(qp, m.alpha, m.mu0)
    body, body_raw = _normalized_solution(qp, m.normalized())
    return _finish(prod(pre, body), pre_raw + body_raw, qp)


def solve_entire(h, q) -> Solution:
    """Entire solution for an entire coefficient with ``h(0) = 1``.

    When ``h(0) != 1`` or ``h`` vanishes at 0 the theta prefactor is
    included and the result is meromorphic on C*, as in the general case.
    """
    qp = QParameter.coerce(q)
    h = coerce_coefficient(h, qp.q)
    if isinstance(h, LaurentFactoredForm):
        h = h.as_factored()
    if h.poles:
        raise InvalidInput("an entire coefficient cannot have poles")
    if h.mu0 < 0:
        raise InvalidInput("an entire coefficient cannot have a pole at 0")
    return solve_mer_c(h, qp)


def _inverse_spiral(qp: QParameter, s: Spiral) -> Spiral:
    """Image of a t-spiral under x = q / t."""
    if s.kind is SpiralKind.FullZ:
        return Spiral(1.0 / s.a, SpiralKind.FullZ, s.v, s.exact)
    if s.kind is SpiralKind.PosNStar:
        return Spiral(1.0 / s.a, SpiralKind.NegN, s.v, s.exact)
    if s.kind is SpiralKind.NegN:
        return Spiral(1.0 / s.a, SpiralKind.PosNStar, s.v, s.exact)
    return Spiral(qp.q / s.a, SpiralKind.PosNStar, s.v, s.exact)


def solve_mer_cstar(m, q, rho: float, rho_prime: float) -> Solution:
    """Meromorphic solution on C* for a coefficient meromorphic on C*.

    ``m = alpha x^v m0(x) minf(1/x)`` after splitting at ``(rho, rho_prime)``;
    the solution is ``P(alpha, v)(x) M0(x) Minf(q/x)`` with ``M0`` solving
    ``y(qx) = m0(x) y`` and ``Minf`` solving ``y(qt) = y(t) / minf(t)``.
    """
    qp = QParameter.coerce(q)
    m = coerce_coefficient(m, qp.q)
    L = split_at_modulus(m, rho, rho_prime)
    pre, pre_raw = theta_prefactor(qp, L.alpha, L.v)
    outer, outer_raw = _normalized_solution(qp, L.outer)
    inner_expr, inner_raw = _normalized_solution(qp, L.inner.reciprocal().normalized())
    parts = [pre, outer]
    if not (isinstance(inner_expr, Constant) and inner_expr.c == 1):
        parts.append(ArgInverse(inner_expr, qp))
    raw = pre_raw + outer_raw + [_inverse_spiral(qp, s) for s in inner_raw]
    return _finish(prod(*parts), raw, qp)


def solve_homogeneous(m, q, rho: float | None = None, rho_prime: float | None = None) -> Solution:
    """Dispatch on the coefficient: C* solver when thresholds or inner content are present."""
    qp = QParameter.coerce(q)
    m = coerce_coefficient(m, qp.q)
    if isinstance(m, LaurentFactoredForm) and m.has_inner():
        if rho is None or rho_prime is None:
            raise InvalidInput("a coefficient with content in 1/x needs rho and rho_prime")
        return solve_mer_cstar(m, qp, rho, rho_prime)
    if rho is not None and rho_prime is not None:
        return solve_mer_cstar(m, qp, rho, rho_prime)
    return solve_mer_c(m, qp)
