"""Special functions behind every fundamental solution.

All routines work on complex doubles and accept either a scalar or a
numpy array for the evaluation point; array inputs are evaluated
element-wise and returned with the same shape.

The base ``q`` always satisfies ``|q| > 1`` and ``p = 1/q``.  The Jacobi
theta function used throughout is

    Theta_q(x) = sum_{n in Z} (-1)^n q^{-n(n-1)/2} x^n,

whose zeros are simple and sit on the spiral ``q^Z``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, NearPole, NonConvergence

__all__ = [
    "QParameter",
    "TruncationPolicy",
    "DEFAULT_POLICY",
    "PowerSeries",
    "qpochhammer",
    "theta_eval",
    "theta_derivative",
    "theta_product_eval",
    "theta_log_derivative",
    "f1_series",
    "f_a_eval",
    "g_transform",
    "elementary_factor",
    "modified_elementary_factor",
    "lemma3_constants",
    "lemma4_identity_check",
]


@dataclass(frozen=True)
class QParameter:
    """The dilation base ``q`` (``|q| > 1``) and its inverse ``p``.

    ``(q;q)_n`` values are memoized per instance; the cache is filled
    under a lock so instances can be shared between threads.
    """

    q: complex
    _poch: list = field(default_factory=lambda: [1.0 + 0j], init=False,
                        repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False,
                                  repr=False, compare=False)

    def __post_init__(self):
        q = complex(self.q)
        if not np.isfinite(q) or abs(q) <= 1.0:
            raise InvalidInput(f"|q| must exceed 1, got q={q!r}")
        object.__setattr__(self, "q", q)

    @classmethod
    def coerce(cls, q) -> "QParameter":
        return q if isinstance(q, QParameter) else cls(q)

    @property
    def p(self) -> complex:
        return 1.0 / self.q

    @property
    def modulus(self) -> float:
        return abs(self.q)

    def __hash__(self):
        return hash(self.q)

    def poch(self, n: int) -> complex:
        """``(q;q)_n = prod_{k=1..n} (1 - q^k)``."""
        if n < 0:
            raise InvalidInput("n must be nonnegative")
        if n >= len(self._poch):
            with self._lock:
                table = self._poch
                while len(table) <= n:
                    k = len(table)
                    table.append(table[-1] * (1.0 - self.q ** k))
        return self._poch[n]

    def poch_table(self, n: int) -> np.ndarray:
        self.poch(n)
        return np.asarray(self._poch[: n + 1], dtype=complex)


@dataclass(frozen=True)
class TruncationPolicy:
    abs_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise InvalidInput("abs_tol must be positive")
        if self.max_terms < 1:
            raise InvalidInput("max_terms must be at least 1")


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class PowerSeries:
    """Finite Taylor expansion at 0, ascending degree.

    ``declared_radius`` records the radius of convergence of the series
    this expansion stands for (``inf`` for polynomials and entire data).
    """

    coeffs: tuple = ()
    declared_radius: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        if not self.declared_radius > 0:
            raise InvalidInput("declared_radius must be positive")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def __call__(self, x):
        if not self.coeffs:
            return np.zeros_like(np.asarray(x, dtype=complex))
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=complex),
                                                np.asarray(self.coeffs))

    def derivative(self) -> "PowerSeries":
        return PowerSeries(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0),
                           self.declared_radius)

    def scaled(self, s: complex) -> "PowerSeries":
        return PowerSeries(tuple(s * c for c in self.coeffs), self.declared_radius)

    def __add__(self, other: "PowerSeries") -> "PowerSeries":
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0j] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0j] * (n - len(other.coeffs))
        return PowerSeries(tuple(u + v for u, v in zip(a, b)),
                           min(self.declared_radius, other.declared_radius))

    def __neg__(self) -> "PowerSeries":
        return self.scaled(-1.0)

    def __sub__(self, other: "PowerSeries") -> "PowerSeries":
        return self + (-other)

    def trimmed(self) -> "PowerSeries":
        c = list(self.coeffs)
        while c and c[-1] == 0:
            c.pop()
        return PowerSeries(tuple(c), self.declared_radius)


def qpochhammer(q, n: int) -> complex:
    """``(q;q)_n`` with the empty product equal to 1."""
    return QParameter.coerce(q).poch(int(n))


def _as_array(x):
    arr = np.asarray(x, dtype=complex)
    return arr, arr.ndim == 0


def _falling(n: int, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= n - j
    return out


def _theta_sum(qp: QParameter, x: np.ndarray, order: int, pol: TruncationPolicy):
    """Sum ``n^(order, falling) * c_n x^n`` over n in Z, symmetric truncation."""
    q = qp.q
    lq = math.log(abs(q))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lx = np.log(np.abs(x)) if x.size else np.zeros(0)
    lx_max = float(np.max(lx)) if x.size else 0.0
    lx_min = float(np.min(lx)) if x.size else 0.0
    total = np.full(x.shape, _falling(0, order), dtype=complex)
    t_pos = np.ones(x.shape, dtype=complex)
    t_neg = np.ones(x.shape, dtype=complex)
    quiet_pos = quiet_neg = 0
    for n in range(1, pol.max_terms + 1):
        t_pos = t_pos * (-x) / q ** (n - 1)
        t_neg = t_neg * (-1.0) / (x * q ** n)
        w_pos = _falling(n, order)
        w_neg = _falling(-n, order)
        add_pos = w_pos * t_pos
        add_neg = w_neg * t_neg
        total = total + add_pos + add_neg
        scale = 1.0 + np.abs(total)
        past_pos = (n - 1) * lq > lx_max
        past_neg = n * lq > -lx_min
        # the weight can vanish for small n (falling factorial), so test the raw term too
        small_pos = np.all(np.abs(t_pos) * max(abs(w_pos), 1.0) * (n + 1) ** order
                           <= pol.abs_tol * scale)
        small_neg = np.all(np.abs(t_neg) * max(abs(w_neg), 1.0) * (n + 1) ** order
                           <= pol.abs_tol * scale)
        quiet_pos = quiet_pos + 1 if (past_pos and small_pos) else 0
        quiet_neg = quiet_neg + 1 if (past_neg and small_neg) else 0
        if quiet_pos >= 2 and quiet_neg >= 2:
            if order == 0 and x.size:
                # exact zeros on q^Z would otherwise come out as rounding noise
                with np.errstate(divide="ignore", invalid="ignore"):
                    on = _distance_to_q_spiral(qp, x) <= 8 * np.finfo(float).eps
                total = np.where(on, 0.0, total)
            return total
    raise NonConvergence(f"theta series did not converge in {pol.max_terms} terms")


def theta_eval(q, x, pol: TruncationPolicy = DEFAULT_POLICY):
    """Jacobi theta function by its bilateral series.

    Terms are appended symmetrically (n = -N..N) until the last two on
    each side fall below ``abs_tol * (1 + |partial sum|)``.
    """
    qp = QParameter.coerce(q)
    arr, scalar = _as_array(x)
    if np.any(arr == 0):
        raise InvalidInput("theta is not defined at x = 0")
    out = _theta_sum(qp, arr, 0, pol)
    return complex(out) if scalar else out


def theta_derivative(q, x, order: int = 1, pol: TruncationPolicy = DEFAULT_POLICY):
    """``d^order/dx^order Theta_q(x)`` from the term-differentiated series."""
    qp = QParameter.coerce(q)
    arr, scalar = _as_array(x)
    if np.any(arr == 0):
        raise InvalidInput("theta is not defined at x = 0")
    if order == 0:
        out = _theta_sum(qp, arr, 0, pol)
    else:
        out = _theta_sum(qp, arr, order, pol) / arr ** order
    return complex(out) if scalar else out


def theta_product_eval(q, x, pol: TruncationPolicy = DEFAULT_POLICY):
    """Theta through the Jacobi triple product.

    prod_{k>=0} (1 - p^{k+1}) (1 - x p^k) (1 - p^{k+1}/x)

    Used as the independent cross-check of :func:`theta_eval`.
    """
    qp = QParameter.coerce(q)
    p = qp.p
    arr, scalar = _as_array(x)
    if np.any(arr == 0):
        raise InvalidInput("theta is not defined at x = 0")
    out = np.ones(arr.shape, dtype=complex)
    big = float(np.max(np.maximum(np.abs(arr), 1.0 / np.abs(arr)))) if arr.size else 1.0
    pk = 1.0 + 0j
    for k in range(pol.max_terms):
        pk1 = pk * p
        out = out * (1.0 - pk1) * (1.0 - arr * pk) * (1.0 - pk1 / arr)
        pk = pk1
        if abs(pk) * big * 4 < pol.abs_tol:
            return complex(out) if scalar else out
    raise NonConvergence(f"triple product did not converge in {pol.max_terms} factors")


def _distance_to_q_spiral(qp: QParameter, x: np.ndarray) -> np.ndarray:
    """``min_k |x / q^k - 1|`` over the two nearest powers."""
    lq = math.log(abs(qp.q))
    k0 = np.floor(np.log(np.abs(x)) / lq)
    best = np.full(x.shape, np.inf)
    for dk in (-1, 0, 1, 2):
        k = k0 + dk
        best = np.minimum(best, np.abs(x / qp.q ** k - 1.0))
    return best


def theta_log_derivative(q, x, pol: TruncationPolicy = DEFAULT_POLICY,
                         guard: float = 1e-6):
    """``x Theta'(x) / Theta(x)``; solves ``y(qx) = y(x) + 1``.

    Raises :class:`NearPole` when ``x`` lies within ``guard`` (relative)
    of a point of ``q^Z``.
    """
    qp = QParameter.coerce(q)
    arr, scalar = _as_array(x)
    if np.any(arr == 0):
        raise InvalidInput("x must be nonzero")
    if np.any(_distance_to_q_spiral(qp, arr) < guard):
        raise NearPole("x is within the pole guard of q^Z")
    out = _theta_sum(qp, arr, 1, pol) / _theta_sum(qp, arr, 0, pol)
    return complex(out) if scalar else out


def f1_series(q, y, order: int = 0, pol: TruncationPolicy = DEFAULT_POLICY):
    """``order``-th derivative of ``f_1(y) = sum y^n / (q;q)_n``.

    Summation stops once the running term is below tolerance and the
    term ratio ``|y| / |1 - q^{n+1}|`` has dropped under 1/2, which
    bounds the neglected tail by twice the last term.
    """
    qp = QParameter.coerce(q)
    qv = qp.q
    arr, scalar = _as_array(y)
    start = 1.0 / qp.poch(order) * _falling(order, order)
    term = np.full(arr.shape, start, dtype=complex)
    total = term.copy()
    ymax = float(np.max(np.abs(arr))) if arr.size else 0.0
    for n in range(order + 1, order + pol.max_terms + 1):
        term = term * arr * (n / (n - order)) / (1.0 - qv ** n)
        total = total + term
        ratio = ymax * (n + 1) / ((n + 1 - order) * (abs(qv) ** (n + 1) - 1.0))
        if ratio < 0.5 and np.all(np.abs(term) <= pol.abs_tol * (1.0 + np.abs(total))):
            return complex(total) if scalar else total
    raise NonConvergence(f"f_1 series did not converge in {pol.max_terms} terms")


def f_a_eval(q, a, x, pol: TruncationPolicy = DEFAULT_POLICY):
    """Entire solution of ``y(qx) = (1 - x/a) y(x)`` with ``y(0) = 1``.

    ``f_a(x) = f_1(x / a)``; zeros are simple, on ``a q^{N*}``.
    """
    a = complex(a)
    if a == 0:
        raise InvalidInput("a must be nonzero")
    arr, scalar = _as_array(x)
    out = f1_series(q, arr / a, 0, pol)
    return complex(out) if scalar else out


def g_transform(q, g: PowerSeries) -> PowerSeries:
    """``g_n -> g_n / (q^n - 1)``: exp of the result solves ``y(qx) = e^{g(x)} y(x)``.

    The radius of convergence grows by the factor ``|q|``.
    """
    qp = QParameter.coerce(q)
    if g.coeffs and abs(g.coeffs[0]) != 0:
        raise InvalidInput("g must vanish at 0")
    coeffs = [0j] + [c / (qp.q ** n - 1.0) for n, c in enumerate(g.coeffs) if n > 0]
    return PowerSeries(tuple(coeffs) if g.coeffs else (), g.declared_radius * qp.modulus)


def elementary_factor(m: int, x):
    """Weierstrass factor ``(1 - x) exp(sum_{k<=m} x^k / k)``, with ``E_0 = 1``."""
    arr, scalar = _as_array(x)
    if m == 0:
        out = np.ones(arr.shape, dtype=complex)
    else:
        s = sum(arr ** k / k for k in range(1, m + 1))
        out = (1.0 - arr) * np.exp(s)
    return complex(out) if scalar else out


def modified_elementary_factor(q, m: int, x, pol: TruncationPolicy = DEFAULT_POLICY):
    """``f_1(x) exp(sum_{k<=m} x^k / (k (q^k - 1)))``, with the m = 0 value 1.

    Satisfies ``F(qx) = E_m(x) F(x)`` for m >= 1.
    """
    qp = QParameter.coerce(q)
    arr, scalar = _as_array(x)
    if m == 0:
        out = np.ones(arr.shape, dtype=complex)
    else:
        s = sum(arr ** k / (k * (qp.q ** k - 1.0)) for k in range(1, m + 1))
        out = f1_series(qp, arr, 0, pol) * np.exp(s)
    return complex(out) if scalar else out


def _abs_poch(qmod: float, n: int) -> float:
    out = 1.0
    for k in range(1, n + 1):
        out *= qmod ** k - 1.0
    return out


def lemma3_constants(q) -> tuple[float, float]:
    """Constants ``(C1, C2)`` with ``|1 - F_m(x)| <= C1 (C2 |x|)^{m+1}`` on ``|x| <= 1``.

    ``F_m`` is :func:`modified_elementary_factor`; the constants use the
    positive products ``prod_{k<=n} (|q|^k - 1)``.
    """
    qm = QParameter.coerce(q).modulus
    s1 = 0.0
    for n in range(0, 500):
        term = (n + 1) / _abs_poch(qm, n + 1)
        s1 += term
        if term < 1e-18 * s1:
            break
    s2 = 0.0
    for n in range(1, 500):
        term = 1.0 / _abs_poch(qm, n)
        s2 += term
        if term < 1e-18 * s2:
            break
    c2 = math.exp(qm / (qm - 1.0))
    c1 = (s1 + s2 / (qm - 1.0)) / c2
    return c1, c2


def lemma4_identity_check(q, n: int, relative: bool = False) -> float:
    """Residual of ``(n+1)/(q;q)_{n+1} = -sum_k 1/((q^{k+1}-1)(q;q)_{n-k})``.

    With ``relative=True`` the residual is divided by the largest term
    modulus on either side.
    """
    qp = QParameter.coerce(q)
    lhs = (n + 1) / qp.poch(n + 1)
    terms = [1.0 / ((qp.q ** (k + 1) - 1.0) * qp.poch(n - k)) for k in range(n + 1)]
    resid = abs(lhs + sum(terms))
    if relative:
        scale = max([abs(lhs)] + [abs(t) for t in terms])
        return resid / scale
    return resid
