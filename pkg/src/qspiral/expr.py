"""Solution expression trees.

Every node evaluates on numpy arrays (vectorized over sample points)
and knows its exact derivative as another tree.  Solvers build trees
out of theta functions, the entire series ``f_a``, exponentials of
power series and tail series; the verifier only ever evaluates them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AtSingularity, NonConvergence
from .numerics import (
    DEFAULT_POLICY,
    PowerSeries,
    QParameter,
    TruncationPolicy,
    _theta_sum,
    f1_series,
)

__all__ = [
    "Expr", "Constant", "MonomialPower", "ThetaAt", "ThetaPower", "ThetaDeriv",
    "FAFactor", "FADeriv", "FAProduct", "FALogSum", "ExpG", "SeriesNode",
    "ModifiedElemFactor", "ThetaLogDeriv", "TailSeries", "FunctionNode",
    "CoefficientNode", "Product", "Quotient", "Sum", "ArgInverse", "ArgScale",
    "evaluate_solution", "differentiate_solution", "prod", "add",
]


class Expr:
    """Base node.  Subclasses implement ``_eval`` and ``derivative``."""

    def _eval(self, x: np.ndarray, pol: TruncationPolicy) -> np.ndarray:
        raise NotImplementedError

    def derivative(self) -> "Expr":
        raise NotImplementedError

    def __call__(self, x, pol: TruncationPolicy = DEFAULT_POLICY):
        return evaluate_solution(self, x, pol)

    def __mul__(self, other):
        return prod(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Quotient(self, _wrap(other))

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __neg__(self):
        return prod(Constant(-1.0), self)

    def __sub__(self, other):
        return add(self, -_wrap(other))

    def describe(self) -> str:
        return type(self).__name__


def _fmt(z) -> str:
    z = complex(z)
    return f"{z.real:.6g}" if z.imag == 0 else f"({z:.6g})"


def _wrap(v) -> Expr:
    return v if isinstance(v, Expr) else Constant(v)


def _is_const(e, value=None):
    return isinstance(e, Constant) and (value is None or e.c == value)


def prod(*nodes) -> Expr:
    """Product with constant folding and flattening."""
    c = 1.0 + 0j
    rest = []
    for n in nodes:
        n = _wrap(n)
        if isinstance(n, Product):
            for m in n.children:
                if isinstance(m, Constant):
                    c *= m.c
                else:
                    rest.append(m)
        elif isinstance(n, Constant):
            c *= n.c
        else:
            rest.append(n)
    if c == 0:
        return Constant(0.0)
    if not rest:
        return Constant(c)
    if c != 1:
        rest.insert(0, Constant(c))
    return rest[0] if len(rest) == 1 else Product(tuple(rest))


def add(*nodes) -> Expr:
    """Sum with zero pruning and flattening."""
    c = 0j
    rest = []
    for n in nodes:
        n = _wrap(n)
        if isinstance(n, Sum):
            for m in n.children:
                if isinstance(m, Constant):
                    c += m.c
                else:
                    rest.append(m)
        elif isinstance(n, Constant):
            c += n.c
        else:
            rest.append(n)
    if c != 0:
        rest.insert(0, Constant(c))
    if not rest:
        return Constant(0.0)
    return rest[0] if len(rest) == 1 else Sum(tuple(rest))


# ---------------------------------------------------------------------------
# leaves


@dataclass(frozen=True, eq=False)
class Constant(Expr):
    c: complex

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))

    def _eval(self, x, pol):
        return np.full(x.shape, self.c, dtype=complex)

    def derivative(self):
        return Constant(0.0)

    def describe(self):
        return _fmt(self.c)


@dataclass(frozen=True, eq=False)
class MonomialPower(Expr):
    """``coeff * x^exponent``."""

    coeff: complex
    exponent: int

    def _eval(self, x, pol):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coeff * x ** self.exponent

    def derivative(self):
        if self.exponent == 0:
            return Constant(0.0)
        return MonomialPower(self.coeff * self.exponent, self.exponent - 1)

    def describe(self):
        return f"{_fmt(self.coeff)}*x^{self.exponent}"


@dataclass(frozen=True, eq=False)
class ThetaAt(Expr):
    """``Theta_q(scale * x) ** exponent``."""

    q: QParameter
    scale: complex = 1.0
    exponent: int = 1

    def _eval(self, x, pol):
        if self.exponent == 0:
            return np.ones(x.shape, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return _theta_sum(self.q, self.scale * x, 0, pol) ** self.exponent

    def derivative(self):
        if self.exponent == 0:
            return Constant(0.0)
        return prod(Constant(self.exponent * self.scale), ThetaDeriv(self.q, self.scale, 1),
                    ThetaAt(self.q, self.scale, self.exponent - 1))

    def describe(self):
        arg = "x" if self.scale == 1 else f"{_fmt(self.scale)}*x"
        return f"Theta({arg})^{self.exponent}"


def ThetaPower(q, exponent: int) -> ThetaAt:
    """``Theta_q(x) ** exponent``."""
    return ThetaAt(QParameter.coerce(q), 1.0, exponent)


@dataclass(frozen=True, eq=False)
class ThetaDeriv(Expr):
    """``Theta_q^{(order)}(scale * x)`` (derivative in the argument)."""

    q: QParameter
    scale: complex = 1.0
    order: int = 1

    def _eval(self, x, pol):
        y = self.scale * x
        with np.errstate(divide="ignore", invalid="ignore"):
            return _theta_sum(self.q, y, self.order, pol) / y ** self.order

    def derivative(self):
        return prod(Constant(self.scale), ThetaDeriv(self.q, self.scale, self.order + 1))


@dataclass(frozen=True, eq=False)
class FAFactor(Expr):
    """``f_a(x) ** power``."""

    q: QParameter
    a: complex
    power: int = 1

    def _eval(self, x, pol):
        return f1_series(self.q, x / self.a, 0, pol) ** self.power

    def derivative(self):
        if self.power == 0:
            return Constant(0.0)
        return prod(Constant(self.power), FADeriv(self.q, self.a, 1),
                    FAFactor(self.q, self.a, self.power - 1))

    def describe(self):
        return f"f_{{{_fmt(self.a)}}}^{self.power}"


@dataclass(frozen=True, eq=False)
class FADeriv(Expr):
    """``d^order/dx^order f_a(x)``."""

    q: QParameter
    a: complex
    order: int = 1

    def _eval(self, x, pol):
        return f1_series(self.q, x / self.a, self.order, pol) / self.a ** self.order

    def derivative(self):
        return FADeriv(self.q, self.a, self.order + 1)


def _fa_matrix(q, locs, x, order, pol):
    """Derivatives 0..order of f_a at x for every a; shape (order+1, n_a, n_x)."""
    y = x.reshape(1, -1) / locs.reshape(-1, 1)
    out = np.empty((order + 1,) + y.shape, dtype=complex)
    for k in range(order + 1):
        out[k] = f1_series(q, y, k, pol) / locs.reshape(-1, 1) ** k
    return out


class FAProduct(Expr):
    """``prod_i f_{a_i}(x) ** m_i`` evaluated in one vectorized sweep."""

    def __init__(self, q, locations, mults=None):
        self.q = QParameter.coerce(q)
        self.locations = np.asarray(locations, dtype=complex).reshape(-1)
        if mults is None:
            mults = np.ones(self.locations.shape, dtype=int)
        self.mults = np.asarray(mults, dtype=int).reshape(-1)

    def _eval(self, x, pol):
        if self.locations.size == 0:
            return np.ones(x.shape, dtype=complex)
        vals = _fa_matrix(self.q, self.locations, x, 0, pol)[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.prod(vals ** self.mults.reshape(-1, 1), axis=0).reshape(x.shape)

    def derivative(self):
        if self.locations.size == 0:
            return Constant(0.0)
        return prod(self, FALogSum(self.q, self.locations, self.mults, 1))

    def describe(self):
        return f"prod f_a ({self.locations.size} factors)"


class FALogSum(Expr):
    """``sum_i m_i d^order/dx^order log f_{a_i}(x)``."""

    def __init__(self, q, locations, mults, order: int = 1):
        self.q = QParameter.coerce(q)
        self.locations = np.asarray(locations, dtype=complex).reshape(-1)
        self.mults = np.asarray(mults, dtype=int).reshape(-1)
        self.order = int(order)

    def _eval(self, x, pol):
        n = self.order
        f = _fa_matrix(self.q, self.locations, x, n, pol)
        # g = log f: f^(k) = sum_{j<k} C(k-1, j) g^(j+1) f^(k-1-j)
        g = [None] * (n + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            for k in range(1, n + 1):
                acc = f[k].copy()
                for j in range(0, k - 1):
                    acc = acc - math.comb(k - 1, j) * g[j + 1] * f[k - 1 - j]
                g[k] = acc / f[0]
            return np.sum(g[n] * self.mults.reshape(-1, 1), axis=0).reshape(x.shape)

    def derivative(self):
        return FALogSum(self.q, self.locations, self.mults, self.order + 1)


@dataclass(frozen=True, eq=False)
class SeriesNode(Expr):
    series: PowerSeries

    def _eval(self, x, pol):
        return np.asarray(self.series(x), dtype=complex) * np.ones(x.shape)

    def derivative(self):
        d = self.series.derivative()
        return Constant(0.0) if d.is_zero() else SeriesNode(d)


@dataclass(frozen=True, eq=False)
class ExpG(Expr):
    """``exp(series(x))``."""

    series: PowerSeries

    def _eval(self, x, pol):
        return np.exp(np.asarray(self.series(x), dtype=complex)) * np.ones(x.shape)

    def derivative(self):
        d = self.series.derivative()
        if d.is_zero():
            return Constant(0.0)
        return prod(self, SeriesNode(d))

    def describe(self):
        return f"exp(G, degree {self.series.degree})"


@dataclass(frozen=True, eq=False)
class ModifiedElemFactor(Expr):
    """``f_a(x) exp(sum_{k<=p} (x/a)^k / (k (q^k - 1)))``; the p = 0 value is 1."""

    q: QParameter
    a: complex
    p: int

    def _expanded(self) -> Expr:
        if self.p == 0:
            return Constant(1.0)
        qv = self.q.q
        coeffs = [0j] + [self.a ** (-k) / (k * (qv ** k - 1.0)) for k in range(1, self.p + 1)]
        return prod(FAFactor(self.q, self.a, 1), ExpG(PowerSeries(tuple(coeffs))))

    def _eval(self, x, pol):
        return self._expanded()._eval(x, pol)

    def derivative(self):
        return self._expanded().derivative()


@dataclass(frozen=True, eq=False)
class ThetaLogDeriv(Expr):
    """``alpha x Theta'(x) / Theta(x)``; solves ``y(qx) = y(x) + alpha``."""

    q: QParameter
    alpha: complex = 1.0

    def _eval(self, x, pol):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.alpha * _theta_sum(self.q, x, 1, pol) / _theta_sum(self.q, x, 0, pol)

    def derivative(self):
        a = self.alpha
        T = ThetaAt(self.q, 1.0, 1)
        D1 = ThetaDeriv(self.q, 1.0, 1)
        D2 = ThetaDeriv(self.q, 1.0, 2)
        X = MonomialPower(1.0, 1)
        return add(prod(Constant(a), Quotient(D1, T)),
                   prod(Constant(a), X, Quotient(D2, T)),
                   prod(Constant(-a), X, Quotient(D1, T), Quotient(D1, T)))


class TailSeries(Expr):
    """``sum_{n>=1} p^{n*order} r^{(order)}(p^n x)`` with ``p = 1/q``.

    With ``order = 0`` and ``r(0) = 0`` this solves ``y(qx) = y(x) + r(x)``.
    ``r`` is any object with ``evaluate(x)``, ``derivative()`` and
    ``pole_moduli()`` (for example a rational function).
    """

    def __init__(self, q, r, order: int = 0):
        self.q = QParameter.coerce(q)
        self.r = r
        self.order = int(order)
        self._rk = r
        for _ in range(self.order):
            self._rk = self._rk.derivative()

    def _eval(self, x, pol):
        p = self.q.p
        pm = abs(p)
        mods = list(self.r.pole_moduli())
        rmin = min(mods) if mods else math.inf
        xmax = float(np.max(np.abs(x))) if x.size else 0.0
        total = np.zeros(x.shape, dtype=complex)
        quiet = 0
        pn = 1.0 + 0j
        # r(0) = 0 exactly; subtracting its rounded value stops drift
        r0 = complex(np.asarray(self.r.evaluate(np.zeros(1, dtype=complex)))[0]) if self.order == 0 else 0j
        if not np.isfinite(r0):
            r0 = 0j
        with np.errstate(divide="ignore", invalid="ignore"):
            for n in range(1, pol.max_terms + 1):
                pn = pn * p
                term = pn ** self.order * self._rk.evaluate(pn * x) - r0
                total = total + term
                settled = xmax * pm ** n <= 0.5 * rmin
                small = np.all((np.abs(term) <= pol.abs_tol * (1.0 + np.abs(total))) | ~np.isfinite(term))
                quiet = quiet + 1 if (settled and small) else 0
                if quiet >= 2:
                    return total
        raise NonConvergence(f"tail series did not converge in {pol.max_terms} terms")

    def derivative(self):
        return TailSeries(self.q, self.r, self.order + 1)

    def describe(self):
        return f"TailSeries(order {self.order})"


class FunctionNode(Expr):
    """Wraps an object with ``evaluate(x)`` and ``derivative()`` (rational functions)."""

    def __init__(self, fn):
        self.fn = fn

    def _eval(self, x, pol):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(self.fn.evaluate(x), dtype=complex) * np.ones(x.shape)

    def derivative(self):
        return FunctionNode(self.fn.derivative())


class CoefficientNode(Expr):
    """A factored coefficient form used inside a solution tree."""

    def __init__(self, form, order: int = 0):
        self.form = form
        self.order = int(order)

    def _eval(self, x, pol):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.form.evaluate(x, pol)

    def derivative(self):
        return prod(self, _CoefficientLogDeriv(self.form, 1))


class _CoefficientLogDeriv(Expr):
    def __init__(self, form, order):
        self.form = form
        self.order = order

    def _eval(self, x, pol):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.form.log_derivative(x, self.order)

    def derivative(self):
        return _CoefficientLogDeriv(self.form, self.order + 1)


# ---------------------------------------------------------------------------
# composite nodes


@dataclass(frozen=True, eq=False)
class Product(Expr):
    children: tuple

    def _eval(self, x, pol):
        out = np.ones(x.shape, dtype=complex)
        with np.errstate(invalid="ignore", over="ignore"):
            for c in self.children:
                out = out * c._eval(x, pol)
        return out

    def derivative(self):
        ch = self.children
        if len(ch) <= 4:
            terms = []
            for i, c in enumerate(ch):
                d = c.derivative()
                if _is_const(d, 0):
                    continue
                terms.append(prod(*ch[:i], d, *ch[i + 1:]))
            return add(*terms)
        parts = [Quotient(c.derivative(), c) for c in ch if not isinstance(c, Constant)]
        return prod(self, add(*parts))

    def describe(self):
        return " * ".join(c.describe() for c in self.children)


@dataclass(frozen=True, eq=False)
class Quotient(Expr):
    num: Expr
    den: Expr

    def _eval(self, x, pol):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.num._eval(x, pol) / self.den._eval(x, pol)

    def derivative(self):
        dn, dd = self.num.derivative(), self.den.derivative()
        top = add(prod(dn, self.den), prod(Constant(-1.0), self.num, dd))
        if _is_const(top, 0):
            return Constant(0.0)
        return Quotient(top, prod(self.den, self.den))

    def describe(self):
        return f"({self.num.describe()}) / ({self.den.describe()})"


@dataclass(frozen=True, eq=False)
class Sum(Expr):
    children: tuple

    def _eval(self, x, pol):
        out = np.zeros(x.shape, dtype=complex)
        for c in self.children:
            out = out + c._eval(x, pol)
        return out

    def derivative(self):
        return add(*(c.derivative() for c in self.children))

    def describe(self):
        return " + ".join(c.describe() for c in self.children)


@dataclass(frozen=True, eq=False)
class ArgInverse(Expr):
    """``child(q / x)``."""

    child: Expr
    q: QParameter

    def _eval(self, x, pol):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.child._eval(self.q.q / x, pol)

    def derivative(self):
        d = self.child.derivative()
        if _is_const(d, 0):
            return Constant(0.0)
        return prod(ArgInverse(d, self.q), MonomialPower(-self.q.q, -2))

    def describe(self):
        return f"[{self.child.describe()}](q/x)"


@dataclass(frozen=True, eq=False)
class ArgScale(Expr):
    """``child(c * x)``."""

    child: Expr
    c: complex

    def _eval(self, x, pol):
        return self.child._eval(self.c * x, pol)

    def derivative(self):
        d = self.child.derivative()
        if _is_const(d, 0):
            return Constant(0.0)
        return prod(Constant(self.c), ArgScale(d, self.c))

    def describe(self):
        return f"[{self.child.describe()}]({_fmt(self.c)}*x)"


# ---------------------------------------------------------------------------


def evaluate_solution(s: Expr, x, pol: TruncationPolicy = DEFAULT_POLICY):
    """Evaluate a tree (or an object with an ``expr`` tree) at a point or array.

    A scalar argument that lands on a singularity raises
    :class:`AtSingularity`; arrays return ``inf``/``nan`` there.
    """
    s = getattr(s, "expr", s)
    arr = np.asarray(x, dtype=complex)
    scalar = arr.ndim == 0
    with np.errstate(all="ignore"):
        val = s._eval(arr.reshape(-1), pol).reshape(arr.shape)
    if scalar:
        v = complex(val)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise AtSingularity(f"solution is singular at x = {complex(x)}")
        return v
    return val


def differentiate_solution(s: Expr) -> Expr:
    """Exact derivative tree of ``s``."""
    return getattr(s, "expr", s).derivative()
