"""Coefficient functions in factored canonical form.

A coefficient is stored as

    m(x) = alpha * x^mu0 * prod(zero factors) / prod(pole factors) * exp(g(x))

where each factor family is either a finite list of points ``a`` (factor
``(1 - x/a)^v``) or a builtin Weierstrass product.  Builtin families are
normalized products (value 1 at 0); the prefactors of ``sin`` and
``gamma`` are folded into ``alpha``, ``mu0`` and ``g`` by the parser.

Builtin products are truncated after ``truncation`` members.  The
logarithm of the neglected tail is a power series with known
coefficients (Hurwitz zeta sums); it is added back so evaluation is
accurate far beyond the raw truncation error.

Coefficients on C* use :class:`LaurentFactoredForm`,
``alpha * x^v * outer(x) * inner(1/x)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union

import numpy as np
from scipy.special import zeta

from .errors import AtPole, InvalidInput, ParseError, SemanticError, TieAtThreshold
from .numerics import DEFAULT_POLICY, PowerSeries, TruncationPolicy

__all__ = [
    "FiniteFamily",
    "BuiltinFamily",
    "FactoredForm",
    "LaurentFactoredForm",
    "parse_coefficient",
    "format_coefficient",
    "evaluate_coefficient",
    "split_at_modulus",
    "form_to_dict",
    "form_from_dict",
    "coerce_coefficient",
    "EULER_GAMMA",
]

EULER_GAMMA = 0.57721566490153286060651209
DEFAULT_TRUNCATION = 200
_TAIL_TERMS = 60
_TIE_RTOL = 1e-9


# ---------------------------------------------------------------------------
# factor families


@dataclass(frozen=True)
class FiniteFamily:
    """Finitely many points ``(location, multiplicity)``; factor ``(1 - x/a)^v``."""

    points: tuple = ()

    def __post_init__(self):
        pts = tuple((complex(a), int(v)) for a, v in self.points)
        for a, v in pts:
            if a == 0:
                raise SemanticError("a zero or pole family cannot contain 0")
            if v <= 0:
                raise SemanticError("multiplicities must be positive")
        object.__setattr__(self, "points", pts)

    genus = 0

    def enumerate_points(self):
        return list(self.points)

    def product(self, x, pol: TruncationPolicy = DEFAULT_POLICY):
        x = np.asarray(x, dtype=complex)
        out = np.ones(x.shape, dtype=complex)
        for a, v in self.points:
            out = out * (1.0 - x / a) ** v
        return out

    def tail_bound(self, x, corrected: bool = True):
        return np.zeros(np.shape(x))

    def log_derivative(self, x, order: int = 1):
        return _points_log_derivative(self.points, x, order)

    def is_empty(self) -> bool:
        return not self.points


_BUILTIN_NAMES = ("sinp", "cos", "rgammap")


@dataclass(frozen=True)
class BuiltinFamily:
    """Normalized Weierstrass product of a builtin function.

    ``sinp(c)``: prod_n (1 - (c x / (n pi))^2)            (genus 0, paired)
    ``cos(c)``:  prod_n (1 - (2 c x / ((2n-1) pi))^2)     (genus 0, paired)
    ``rgammap(c)``: prod_n (1 + c x / n) exp(-c x / n)    (genus 1)

    Members ``start .. truncation`` are multiplied out; members beyond
    ``truncation`` enter through the tail-log correction.  Members below
    ``start`` have been moved elsewhere (see :func:`split_at_modulus`).
    """

    name: str
    scale: complex = 1.0
    truncation: int = DEFAULT_TRUNCATION
    start: int = 1
    mult: int = 1

    def __post_init__(self):
        if self.name not in _BUILTIN_NAMES:
            raise SemanticError(f"unknown builtin family {self.name!r}")
        object.__setattr__(self, "scale", complex(self.scale))
        if self.scale == 0:
            raise SemanticError("builtin scale must be nonzero")
        if self.truncation < 1 or self.start < 1 or self.mult < 1:
            raise SemanticError("truncation, start and mult must be positive")

    @property
    def genus(self) -> int:
        return 1 if self.name == "rgammap" else 0

    def member(self, n: int):
        c = self.scale
        if self.name == "sinp":
            a = n * math.pi / c
            return [(a, self.mult), (-a, self.mult)]
        if self.name == "cos":
            a = (2 * n - 1) * math.pi / (2 * c)
            return [(a, self.mult), (-a, self.mult)]
        return [(-n / c, self.mult)]

    def member_modulus(self, n: int) -> float:
        return abs(self.member(n)[0][0])

    def enumerate_points(self):
        out = []
        for n in range(self.start, self.truncation + 1):
            out.extend(self.member(n))
        return out

    def is_empty(self) -> bool:
        return False

    def _locations(self) -> np.ndarray:
        return np.array([a for n in range(self.start, self.truncation + 1)
                         for a, _ in self.member(n)], dtype=complex)

    def tail_log_coeffs(self) -> np.ndarray:
        """Taylor coefficients (degree 0..J) of log prod_{n > truncation} factor_n."""
        c = self.scale
        n0 = self.truncation + 1
        out = np.zeros(_TAIL_TERMS + 1, dtype=complex)
        for j in range(1, _TAIL_TERMS + 1):
            if self.name == "sinp" and j % 2 == 0:
                k = j // 2
                out[j] = -((c / math.pi) ** j) * zeta(j, n0) / k
            elif self.name == "cos" and j % 2 == 0:
                k = j // 2
                out[j] = -((c / math.pi) ** j) * zeta(j, n0 - 0.5) / k
            elif self.name == "rgammap" and j >= 2:
                out[j] = (-1) ** (j + 1) * c ** j * zeta(j, n0) / j
        out[~np.isfinite(out)] = 0
        return out * self.mult

    def tail_log_series(self) -> PowerSeries:
        return PowerSeries(tuple(self.tail_log_coeffs()),
                           self.member_modulus(self.truncation + 1))

    def genus_polynomial(self) -> PowerSeries:
        """``sum_members sum_{k<=genus} (x/a)^k / k`` for the multiplied-out members."""
        if self.genus == 0:
            return PowerSeries(())
        locs = self._locations()
        coeffs = [0j]
        for k in range(1, self.genus + 1):
            coeffs.append(self.mult * complex(np.sum(locs ** (-k))) / k)
        return PowerSeries(tuple(coeffs))

    def product(self, x, pol: TruncationPolicy = DEFAULT_POLICY):
        x = np.asarray(x, dtype=complex)
        radius = self.member_modulus(self.truncation + 1)
        if np.any(np.abs(x) >= 0.5 * radius):
            raise InvalidInput(
                f"|x| too large for truncation {self.truncation} of {self.name}; raise truncation")
        out = np.ones(x.shape, dtype=complex)
        locs = self._locations()
        flat = x.reshape(-1)
        for chunk in range(0, len(locs), 64):
            a = locs[chunk:chunk + 64][:, None]
            fac = 1.0 - flat[None, :] / a
            if self.genus == 1:
                fac = fac * np.exp(flat[None, :] / a)
            out = out * np.prod(fac, axis=0).reshape(x.shape) ** self.mult
        return out * np.exp(self.tail_log_series()(x))

    def log_derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=complex)
        out = _points_log_derivative(self.enumerate_points(), x, order)
        if self.genus and order == 1:
            out = out + self.mult * complex(np.sum(1.0 / self._locations()))
        tail = self.tail_log_series()
        for _ in range(order):
            tail = tail.derivative()
        return out + tail(x)

    def tail_bound(self, x, corrected: bool = True):
        """Bound on the relative error of the truncated product at ``x``.

        ``corrected=False`` bounds the raw truncation (no tail-log term),
        i.e. ``exp(sum_{n>N} |log factor_n|) - 1``; with the correction
        only the Taylor remainder beyond degree J is left.
        """
        ax = np.abs(np.asarray(x, dtype=complex))
        coeffs = np.abs(self.tail_log_coeffs())
        if not corrected:
            s = np.polynomial.polynomial.polyval(ax, coeffs)
            return np.expm1(s)
        r0 = self.member_modulus(self.truncation + 1)
        u = ax / r0
        j = _TAIL_TERMS + 1
        per = 2 if self.name in ("sinp", "cos") else 1
        rem = per * self.mult * float(zeta(j, self.truncation + 1)) * (ax * abs(self.scale)) ** j
        rem = rem / (1.0 - np.minimum(u, 0.99))
        return np.expm1(rem)


ZeroFamily = Union[FiniteFamily, BuiltinFamily]


def _points_log_derivative(points, x, order):
    """``d^order/dx^order sum v log(1 - x/a)``."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros(x.shape, dtype=complex)
    if not points:
        return out
    locs = np.array([a for a, _ in points], dtype=complex)
    mult = np.array([v for _, v in points], dtype=float)
    c = (-1) ** (order - 1) * math.factorial(order - 1)
    flat = x.reshape(1, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = c * mult[:, None] / (flat - locs[:, None]) ** order
    return np.sum(terms, axis=0).reshape(x.shape)


def _lah(n: int, k: int) -> float:
    return math.comb(n - 1, k - 1) * math.factorial(n) / math.factorial(k)


# ---------------------------------------------------------------------------
# forms


def _merge_finite(zeros: dict, poles: dict):
    net = {}
    for a, v in zeros.items():
        net[a] = net.get(a, 0) + v
    for a, v in poles.items():
        net[a] = net.get(a, 0) - v
    z = tuple((a, v) for a, v in net.items() if v > 0)
    p = tuple((a, -v) for a, v in net.items() if v < 0)
    return z, p


def _normalize_families(zeros, poles):
    """Combine finite families and cancel identical zero/pole entries."""
    fz, fp = {}, {}
    bz, bp = {}, {}
    for fam in zeros:
        if isinstance(fam, FiniteFamily):
            for a, v in fam.points:
                fz[a] = fz.get(a, 0) + v
        else:
            key = replace(fam, mult=1)
            bz[key] = bz.get(key, 0) + fam.mult
    for fam in poles:
        if isinstance(fam, FiniteFamily):
            for a, v in fam.points:
                fp[a] = fp.get(a, 0) + v
        else:
            key = replace(fam, mult=1)
            bp[key] = bp.get(key, 0) + fam.mult
    z, p = _merge_finite(fz, fp)
    out_z = [FiniteFamily(z)] if z else []
    out_p = [FiniteFamily(p)] if p else []
    for key in list(dict.fromkeys(list(bz) + list(bp))):
        net = bz.get(key, 0) - bp.get(key, 0)
        if net > 0:
            out_z.append(replace(key, mult=net))
        elif net < 0:
            out_p.append(replace(key, mult=-net))
    return tuple(out_z), tuple(out_p)


@dataclass(frozen=True)
class FactoredForm:
    """``alpha x^mu0 prod(zeros) / prod(poles) exp(exp_part(x))``."""

    alpha: complex = 1.0
    mu0: int = 0
    zeros: tuple = ()
    poles: tuple = ()
    exp_part: PowerSeries = field(default_factory=PowerSeries)

    def __post_init__(self):
        alpha = complex(self.alpha)
        if alpha == 0 or not cmath.isfinite(alpha):
            raise SemanticError("alpha must be a finite nonzero number")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "mu0", int(self.mu0))
        z, p = _normalize_families(tuple(self.zeros), tuple(self.poles))
        object.__setattr__(self, "zeros", z)
        object.__setattr__(self, "poles", p)
        g = self.exp_part.trimmed()
        if g.coeffs and g.coeffs[0] != 0:
            raise SemanticError("exp_part must vanish at 0 (fold constants into alpha)")
        object.__setattr__(self, "exp_part", g)
        zlocs = {a for f in z if isinstance(f, FiniteFamily) for a, _ in f.points}
        plocs = {a for f in p if isinstance(f, FiniteFamily) for a, _ in f.points}
        if zlocs & plocs:
            raise SemanticError("zero and pole locations must be disjoint")

    @classmethod
    def identity(cls) -> "FactoredForm":
        return cls()

    @classmethod
    def constant(cls, c) -> "FactoredForm":
        return cls(alpha=c)

    def is_identity(self) -> bool:
        return (self.alpha == 1 and self.mu0 == 0 and not self.zeros
                and not self.poles and self.exp_part.is_zero())

    def is_constant(self) -> bool:
        return self.mu0 == 0 and not self.zeros and not self.poles and self.exp_part.is_zero()

    @property
    def valuation(self) -> int:
        return self.mu0

    def normalized(self) -> "FactoredForm":
        """The same function with ``alpha = 1`` and ``mu0 = 0``."""
        return replace(self, alpha=1.0, mu0=0)

    def __mul__(self, other):
        if isinstance(other, LaurentFactoredForm):
            return LaurentFactoredForm.from_form(self) * other
        if not isinstance(other, FactoredForm):
            return replace(self, alpha=self.alpha * complex(other))
        return FactoredForm(self.alpha * other.alpha, self.mu0 + other.mu0,
                            self.zeros + other.zeros, self.poles + other.poles,
                            self.exp_part + other.exp_part)

    __rmul__ = __mul__

    def reciprocal(self) -> "FactoredForm":
        return FactoredForm(1.0 / self.alpha, -self.mu0, self.poles, self.zeros, -self.exp_part)

    def __truediv__(self, other):
        if isinstance(other, (FactoredForm, LaurentFactoredForm)):
            return self * other.reciprocal()
        return replace(self, alpha=self.alpha / complex(other))

    def __pow__(self, k: int):
        k = int(k)
        if k == 0:
            return FactoredForm()
        base = self if k > 0 else self.reciprocal()
        n = abs(k)
        z = tuple(_scale_family(f, n) for f in base.zeros)
        p = tuple(_scale_family(f, n) for f in base.poles)
        return FactoredForm(base.alpha ** n, base.mu0 * n, z, p, base.exp_part.scaled(n))

    def zero_points(self):
        return [pt for f in self.zeros for pt in f.enumerate_points()]

    def pole_points(self):
        return [pt for f in self.poles for pt in f.enumerate_points()]

    def evaluate(self, x, pol: TruncationPolicy = DEFAULT_POLICY):
        x = np.asarray(x, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.alpha * x ** self.mu0 if self.mu0 else np.full(x.shape, self.alpha)
            for f in self.zeros:
                out = out * f.product(x, pol)
            for f in self.poles:
                out = out / f.product(x, pol)
            if not self.exp_part.is_zero():
                out = out * np.exp(self.exp_part(x))
        return out

    def log_derivative(self, x, order: int = 1):
        """``d^order/dx^order log m(x)``."""
        x = np.asarray(x, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.zeros(x.shape, dtype=complex)
            if self.mu0:
                out = out + self.mu0 * (-1) ** (order - 1) * math.factorial(order - 1) / x ** order
            for f in self.zeros:
                out = out + f.log_derivative(x, order)
            for f in self.poles:
                out = out - f.log_derivative(x, order)
        g = self.exp_part
        for _ in range(order):
            g = g.derivative()
        return out + g(x)

    def tail_bound(self, x, corrected: bool = True):
        x = np.asarray(x, dtype=complex)
        total = np.zeros(x.shape)
        for f in self.zeros + self.poles:
            total = total + f.tail_bound(x, corrected)
        return total

    def __str__(self):
        return format_coefficient(self)


def _scale_family(f, n):
    if isinstance(f, FiniteFamily):
        return FiniteFamily(tuple((a, v * n) for a, v in f.points))
    return replace(f, mult=f.mult * n)


@dataclass(frozen=True)
class LaurentFactoredForm:
    """``alpha x^v outer(x) inner(1/x)`` with normalized ``outer`` and ``inner``."""

    alpha: complex = 1.0
    v: int = 0
    outer: FactoredForm = field(default_factory=FactoredForm)
    inner: FactoredForm = field(default_factory=FactoredForm)

    def __post_init__(self):
        alpha = complex(self.alpha)
        if alpha == 0:
            raise SemanticError("alpha must be nonzero")
        object.__setattr__(self, "alpha", alpha)
        for part in (self.outer, self.inner):
            if part.alpha != 1 or part.mu0 != 0:
                raise SemanticError("outer and inner parts must have alpha = 1 and mu0 = 0")

    @classmethod
    def from_form(cls, f: FactoredForm) -> "LaurentFactoredForm":
        return cls(f.alpha, f.mu0, f.normalized(), FactoredForm())

    def has_inner(self) -> bool:
        return not self.inner.is_identity()

    def as_factored(self) -> FactoredForm:
        if self.has_inner():
            raise SemanticError("form has content in 1/x; not meromorphic at 0")
        return FactoredForm(self.alpha, self.v, self.outer.zeros, self.outer.poles,
                            self.outer.exp_part)

    def __mul__(self, other):
        if isinstance(other, FactoredForm):
            other = LaurentFactoredForm.from_form(other)
        if not isinstance(other, LaurentFactoredForm):
            return replace(self, alpha=self.alpha * complex(other))
        return LaurentFactoredForm(self.alpha * other.alpha, self.v + other.v,
                                   self.outer * other.outer, self.inner * other.inner)

    __rmul__ = __mul__

    def reciprocal(self) -> "LaurentFactoredForm":
        return LaurentFactoredForm(1.0 / self.alpha, -self.v, self.outer.reciprocal(),
                                   self.inner.reciprocal())

    def zero_points(self):
        """Zeros in the x-plane (inner zeros mapped through t = 1/x)."""
        return self.outer.zero_points() + [(1.0 / b, v) for b, v in self.inner.zero_points()]

    def pole_points(self):
        return self.outer.pole_points() + [(1.0 / b, v) for b, v in self.inner.pole_points()]

    def evaluate(self, x, pol: TruncationPolicy = DEFAULT_POLICY):
        x = np.asarray(x, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.alpha * x ** self.v * self.outer.evaluate(x, pol)
            if self.has_inner():
                out = out * self.inner.evaluate(1.0 / x, pol)
        return out

    def log_derivative(self, x, order: int = 1):
        """``d^order/dx^order log m(x)``; the inner part goes through t = 1/x."""
        x = np.asarray(x, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.outer.log_derivative(x, order)
            if self.v:
                out = out + self.v * (-1) ** (order - 1) * math.factorial(order - 1) / x ** order
            if self.has_inner():
                t = 1.0 / x
                for j in range(1, order + 1):
                    out = out + (-1) ** order * _lah(order, j) * x ** (-order - j) \
                        * self.inner.log_derivative(t, j)
        return out

    def tail_bound(self, x, corrected: bool = True):
        x = np.asarray(x, dtype=complex)
        return self.outer.tail_bound(x, corrected) + self.inner.tail_bound(1.0 / x, corrected)

    def __str__(self):
        return format_coefficient(self)


Coefficient = Union[FactoredForm, LaurentFactoredForm]


def evaluate_coefficient(f, x, pol: TruncationPolicy = DEFAULT_POLICY, with_bound: bool = False):
    """Evaluate a factored coefficient.

    Returns the value (scalar or array).  With ``with_bound=True`` a
    pair ``(value, relative_tail_bound)`` is returned instead.  A scalar
    ``x`` sitting on a pole raises :class:`AtPole`.
    """
    arr = np.asarray(x, dtype=complex)
    scalar = arr.ndim == 0
    for b, _ in f.pole_points():
        if np.any(arr == b):
            raise AtPole(f"x = {b} is a pole of the coefficient")
    if isinstance(f, LaurentFactoredForm) or f.mu0 < 0:
        if np.any(arr == 0):
            raise AtPole("x = 0 is singular for this coefficient")
    val = f.evaluate(arr, pol)
    if scalar:
        val = complex(val)
    if with_bound:
        bound = f.tail_bound(arr)
        return val, (float(bound) if scalar else bound)
    return val


# ---------------------------------------------------------------------------
# splitting at a modulus


def _check_tie(mod: float, rho: float):
    if abs(mod - rho) <= _TIE_RTOL * rho:
        raise TieAtThreshold(f"a zero/pole of modulus {mod} sits on the threshold {rho}")


def _split_family_list(families, rho, in_t: bool):
    """Partition families of one side by modulus in the x-plane.

    ``in_t`` says the families live in the variable t = 1/x.  Returns
    ``(stay, moved_points, alpha_factor, v_shift, stay_exp)`` where the moved
    points are expressed in the *other* variable and ``stay_exp`` is an
    extra exp-part (in the family's own variable) from genus factors.
    """
    stay, moved = [], []
    alpha, vshift = 1.0 + 0j, 0
    extra = PowerSeries(())
    for fam in families:
        def goes(mod_x):
            _check_tie(mod_x, rho)
            return (mod_x > rho) if in_t else (mod_x <= rho)

        if isinstance(fam, FiniteFamily):
            keep = []
            for a, v in fam.points:
                mod_x = 1.0 / abs(a) if in_t else abs(a)
                if goes(mod_x):
                    moved.append((1.0 / a, v))
                    # (1 - y/a) = (-y/a) (1 - a/y): y-power +1 per multiplicity
                    alpha *= (-1.0 / a) ** v
                    vshift += v
                else:
                    keep.append((a, v))
            if keep:
                stay.append(FiniteFamily(tuple(keep)))
            continue
        n = fam.start
        while n <= fam.truncation:
            mod_y = fam.member_modulus(n)
            mod_x = 1.0 / mod_y if in_t else mod_y
            if not goes(mod_x):
                break
            for a, v in fam.member(n):
                moved.append((1.0 / a, v))
                alpha *= (-1.0 / a) ** v
                vshift += v
            if fam.genus:
                for a, v in fam.member(n):
                    extra = extra + PowerSeries(tuple([0j] + [v * a ** (-k) / k for k in range(1, fam.genus + 1)]))
            n += 1
        if n > fam.truncation:
            raise SemanticError(
                f"threshold moves every truncated member of {fam.name}; raise truncation")
        # check the next member for a tie as well
        mod_y = fam.member_modulus(n)
        _check_tie(1.0 / mod_y if in_t else mod_y, rho)
        stay.append(replace(fam, start=n))
    return stay, moved, alpha, vshift, extra


def split_at_modulus(f, rho: float, rho_prime: float) -> LaurentFactoredForm:
    """Multiplicative split of a coefficient on C* by modulus.

    Zeros with ``|a| > rho`` and poles with ``|a| > rho_prime`` end up in
    the outer part (a function of x); the others end up in the inner part
    (a function of 1/x).  Both parts are normalized to 1 at their origin;
    the constants collect in ``alpha`` and ``v``.  A member whose modulus
    equals a threshold raises :class:`TieAtThreshold`.
    """
    if not (rho > 0 and rho_prime > 0):
        raise InvalidInput("thresholds must be positive")
    L = f if isinstance(f, LaurentFactoredForm) else LaurentFactoredForm.from_form(f)
    alpha, v = L.alpha, L.v

    oz_stay, oz_move, a1, s1, oz_extra = _split_family_list(L.outer.zeros, rho, False)
    op_stay, op_move, a2, s2, op_extra = _split_family_list(L.outer.poles, rho_prime, False)
    iz_stay, iz_move, a3, s3, iz_extra = _split_family_list(L.inner.zeros, rho, True)
    ip_stay, ip_move, a4, s4, ip_extra = _split_family_list(L.inner.poles, rho_prime, True)

    # outer zero (1 - x/a) -> (-x/a)(1 - t a): x-power +1; inner zero moved out: x-power -1
    alpha = alpha * a1 / a2 * a3 / a4
    v = v + s1 - s2 - s3 + s4
    outer_exp = L.outer.exp_part + oz_extra - op_extra
    inner_exp = L.inner.exp_part + iz_extra - ip_extra
    outer = FactoredForm(1.0, 0,
                         tuple(oz_stay) + ((FiniteFamily(tuple(iz_move)),) if iz_move else ()),
                         tuple(op_stay) + ((FiniteFamily(tuple(ip_move)),) if ip_move else ()),
                         outer_exp)
    inner = FactoredForm(1.0, 0,
                         tuple(iz_stay) + ((FiniteFamily(tuple(oz_move)),) if oz_move else ()),
                         tuple(ip_stay) + ((FiniteFamily(tuple(op_move)),) if op_move else ()),
                         inner_exp)
    return LaurentFactoredForm(alpha, v, outer, inner)


# ---------------------------------------------------------------------------
# DSL: tokenizer


_CONSTANTS = {
    "pi": math.pi,
    "e": math.e,
    "i": 1j,
    "omega3": cmath.exp(2j * math.pi / 3),
}


@dataclass
class _Tok:
    kind: str  # num, name, op, end
    text: str
    pos: int
    value: object = None


def _tokenize(text: str):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE" and j + 1 < n and (
                    text[j + 1].isdigit() or (text[j + 1] in "+-" and j + 2 < n and text[j + 2].isdigit())):
                j += 2
                while j < n and text[j].isdigit():
                    j += 1
            lit = text[i:j]
            try:
                val = Fraction(lit)
            except ValueError:
                raise ParseError(f"bad number {lit!r}", i, ("number",)) from None
            if j < n and text[j] == "i" and not (j + 1 < n and (text[j + 1].isalnum() or text[j + 1] == "_")):
                val = complex(val) * 1j
                j += 1
            toks.append(_Tok("num", lit, i, val))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("name", text[i:j], i))
            i = j
            continue
        if ch in "+-*/^(),":
            toks.append(_Tok("op", ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i, ("number", "name", "operator"))
    toks.append(_Tok("end", "", n))
    return toks


# exact-where-possible scalar arithmetic: Fraction for real rationals, complex otherwise

def _num(v):
    if isinstance(v, Fraction):
        return v
    v = complex(v)
    return v


def _mul(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a * b
    return complex(a) * complex(b)


def _div(a, b):
    if (isinstance(b, Fraction) and b == 0) or complex(b) == 0:
        raise SemanticError("division by zero in a constant")
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a / b
    return complex(a) / complex(b)


def _add(a, b):
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a + b
    return complex(a) + complex(b)


def _ipow(a, k: int):
    if isinstance(a, Fraction):
        return a ** k
    return complex(a) ** k


# ---------------------------------------------------------------------------
# DSL: parser


@dataclass
class _Mono:
    coeff: object
    power: int
    loc: object = None  # exact x-zero for "x/c", exact t-zero for "1/(c*x)"
    loc_kind: str = ""


@dataclass
class _Acc:
    """Running product while parsing: a Laurent factored form under construction."""

    const: object = Fraction(1)
    xpow: int = 0
    oz: dict = field(default_factory=dict)
    op: dict = field(default_factory=dict)
    iz: dict = field(default_factory=dict)
    ip: dict = field(default_factory=dict)
    obz: list = field(default_factory=list)
    obp: list = field(default_factory=list)
    ibz: list = field(default_factory=list)
    ibp: list = field(default_factory=list)
    oexp: PowerSeries = field(default_factory=PowerSeries)
    iexp: PowerSeries = field(default_factory=PowerSeries)
    laurent: bool = False

    def mul(self, o: "_Acc"):
        self.const = _mul(self.const, o.const)
        self.xpow += o.xpow
        for src, dst in ((o.oz, self.oz), (o.op, self.op), (o.iz, self.iz), (o.ip, self.ip)):
            for a, v in src.items():
                dst[a] = dst.get(a, 0) + v
        self.obz += o.obz
        self.obp += o.obp
        self.ibz += o.ibz
        self.ibp += o.ibp
        self.oexp = self.oexp + o.oexp
        self.iexp = self.iexp + o.iexp
        self.laurent = self.laurent or o.laurent
        return self

    def power(self, k: int):
        out = _Acc()
        if k == 0:
            return out
        src = self if k > 0 else self.inverse()
        n = abs(k)
        out.const = _ipow(src.const, n)
        out.xpow = src.xpow * n
        out.oz = {a: v * n for a, v in src.oz.items()}
        out.op = {a: v * n for a, v in src.op.items()}
        out.iz = {a: v * n for a, v in src.iz.items()}
        out.ip = {a: v * n for a, v in src.ip.items()}
        out.obz = [replace(f, mult=f.mult * n) for f in src.obz]
        out.obp = [replace(f, mult=f.mult * n) for f in src.obp]
        out.ibz = [replace(f, mult=f.mult * n) for f in src.ibz]
        out.ibp = [replace(f, mult=f.mult * n) for f in src.ibp]
        out.oexp = src.oexp.scaled(n)
        out.iexp = src.iexp.scaled(n)
        out.laurent = src.laurent
        return out

    def inverse(self):
        out = _Acc()
        out.const = _div(Fraction(1), self.const)
        out.xpow = -self.xpow
        out.oz, out.op = dict(self.op), dict(self.oz)
        out.iz, out.ip = dict(self.ip), dict(self.iz)
        out.obz, out.obp = list(self.obp), list(self.obz)
        out.ibz, out.ibp = list(self.ibp), list(self.ibz)
        out.oexp, out.iexp = -self.oexp, -self.iexp
        out.laurent = self.laurent
        return out

    def build(self):
        oz, op = _merge_finite(self.oz, self.op)
        iz, ip = _merge_finite(self.iz, self.ip)
        outer_z = ((FiniteFamily(oz),) if oz else ()) + tuple(self.obz)
        outer_p = ((FiniteFamily(op),) if op else ()) + tuple(self.obp)
        inner_z = ((FiniteFamily(iz),) if iz else ()) + tuple(self.ibz)
        inner_p = ((FiniteFamily(ip),) if ip else ()) + tuple(self.ibp)
        alpha = complex(self.const)
        if alpha == 0:
            raise SemanticError("the coefficient is identically zero")
        if self.laurent or inner_z or inner_p or not self.iexp.is_zero():
            outer = FactoredForm(1.0, 0, outer_z, outer_p, self.oexp)
            inner = FactoredForm(1.0, 0, inner_z, inner_p, self.iexp)
            return LaurentFactoredForm(alpha, self.xpow, outer, inner)
        return FactoredForm(alpha, self.xpow, outer_z, outer_p, self.oexp)


def _poly_roots(coeffs):
    """Roots (with multiplicity) of sum coeffs[k] x^k, coeffs[0] != 0."""
    nz = [k for k, c in enumerate(coeffs) if c != 0]
    deg = nz[-1]
    if len(nz) == 2 and nz[0] == 0:
        # binomial c0 + cn x^n: exact roots on a circle
        r = (-coeffs[0] / coeffs[deg]) ** (1.0 / deg)
        roots = [r * cmath.exp(2j * math.pi * k / deg) for k in range(deg)]
        return [(z, 1) for z in roots]
    raw = np.roots(np.asarray(coeffs[: deg + 1], dtype=complex)[::-1])
    out = []
    for z in raw:
        for idx, (w, m) in enumerate(out):
            if abs(z - w) <= 1e-6 * max(1.0, abs(w)):
                out[idx] = ((w * m + z) / (m + 1), m + 1)
                break
        else:
            out.append((complex(z), 1))
    return out


class _Parser:
    def __init__(self, text: str, q=None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.q = q

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.tok
        if t.kind == "op" and t.text == text:
            return self.advance()
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.pos, (repr(text),))

    def at(self, text):
        return self.tok.kind == "op" and self.tok.text == text

    def parse(self):
        acc = self.form()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos, ("'*'", "'/'", "end"))
        return acc.build()

    # form := ["-"] factor (("*"|"/") factor)*
    def form(self) -> _Acc:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        acc = self.factor()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            f = self.factor()
            acc.mul(f if op == "*" else f.inverse())
        if neg:
            acc.const = _mul(acc.const, Fraction(-1))
        return acc

    def int_exponent(self) -> int:
        sign = 1
        if self.at("-"):
            self.advance()
            sign = -1
        t = self.tok
        if t.kind != "num" or not isinstance(t.value, Fraction) or t.value.denominator != 1:
            raise ParseError("exponent must be an integer", t.pos, ("integer",))
        self.advance()
        return sign * int(t.value)

    def factor(self) -> _Acc:
        acc = self.atom()
        if self.at("^"):
            self.advance()
            acc = acc.power(self.int_exponent())
        return acc

    def constant_name(self, name, pos):
        if name == "q":
            if self.q is None:
                raise ParseError("'q' used but no q value supplied", pos, ())
            return complex(self.q)
        if name in _CONSTANTS:
            return _CONSTANTS[name]
        raise ParseError(f"unknown name {name!r}", pos,
                         ("x", "exp", "sin", "cos", "gamma", "sinp", "rgammap") + tuple(_CONSTANTS))

    def atom(self) -> _Acc:
        t = self.tok
        if t.kind == "num":
            self.advance()
            acc = _Acc()
            acc.const = _num(t.value)
            return acc
        if t.kind == "name":
            name = t.text
            if name == "x":
                self.advance()
                acc = _Acc()
                acc.xpow = 1
                return acc
            if name == "exp":
                self.advance()
                self.expect("(")
                monos = self.laurent_poly()
                self.expect(")")
                return self._exp(monos)
            if name in ("sin", "cos", "gamma", "sinp", "rgammap"):
                return self.builtin()
            self.advance()
            acc = _Acc()
            acc.const = _num(self.constant_name(name, t.pos))
            return acc
        if self.at("("):
            self.advance()
            monos = self.laurent_poly()
            self.expect(")")
            return self._poly_factor(monos, t.pos)
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.pos,
                         ("number", "x", "(", "exp", "sin", "cos", "gamma"))

    # laurent_poly := ["-"] mono (("+"|"-") mono)*
    def laurent_poly(self):
        monos = []
        sign = Fraction(1)
        if self.at("-"):
            self.advance()
            sign = Fraction(-1)
        elif self.at("+"):
            self.advance()
        while True:
            m = self.mono()
            m.coeff = _mul(m.coeff, sign)
            monos.append(m)
            if self.at("+"):
                self.advance()
                sign = Fraction(1)
            elif self.at("-"):
                self.advance()
                sign = Fraction(-1)
            else:
                return monos

    # mono := mfactor (("*"|"/") mfactor)*
    def mono(self) -> _Mono:
        items = [("*", self.mfactor())]
        while self.at("*") or self.at("/"):
            op = self.advance().text
            items.append((op, self.mfactor()))
        coeff, power = Fraction(1), 0
        for op, (c, k, _) in items:
            if op == "*":
                coeff, power = _mul(coeff, c), power + k
            else:
                coeff, power = _div(coeff, c), power - k
        m = _Mono(coeff, power)
        # exact locations: "x/c" and "1/(c*x)"
        if len(items) == 2 and items[1][0] == "/":
            (c0, k0, _), (c1, k1, _) = items[0][1], items[1][1]
            if k0 == 1 and k1 == 0 and c0 == 1:
                m.loc, m.loc_kind = c1, "x"
            elif k0 == 0 and k1 == 1 and c0 == 1:
                m.loc, m.loc_kind = c1, "t"
        elif len(items) == 1 and items[0][1][1] == 1 and items[0][1][0] == 1:
            m.loc, m.loc_kind = Fraction(1), "x"
        return m

    def mfactor(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            c, k = _num(t.value), 0
        elif t.kind == "name" and t.text == "x":
            self.advance()
            c, k = Fraction(1), 1
        elif t.kind == "name":
            self.advance()
            c, k = _num(self.constant_name(t.text, t.pos)), 0
        elif self.at("("):
            self.advance()
            monos = self.laurent_poly()
            self.expect(")")
            if len({m.power for m in monos}) != 1:
                raise ParseError("nested sums are only allowed as constants", t.pos, ())
            c, k = Fraction(0), monos[0].power
            for m in monos:
                c = _add(c, m.coeff)
        else:
            raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.pos,
                             ("number", "x", "(", "constant"))
        if self.at("^"):
            self.advance()
            e = self.int_exponent()
            c, k = _ipow(c, e), k * e
        return (c, k, None)

    def _exp(self, monos) -> _Acc:
        acc = _Acc()
        const = 0j
        pos, neg = {}, {}
        for m in monos:
            if m.power == 0:
                const += complex(m.coeff)
            elif m.power > 0:
                pos[m.power] = pos.get(m.power, 0) + complex(m.coeff)
            else:
                neg[-m.power] = neg.get(-m.power, 0) + complex(m.coeff)
        if const != 0:
            acc.const = cmath.exp(const)
        if pos:
            acc.oexp = PowerSeries(tuple(pos.get(k, 0) for k in range(max(pos) + 1)))
        if neg:
            acc.iexp = PowerSeries(tuple(neg.get(k, 0) for k in range(max(neg) + 1)))
            acc.laurent = True
        return acc

    def _poly_factor(self, monos, pos) -> _Acc:
        acc = _Acc()
        terms = {}
        for m in monos:
            terms[m.power] = _add(terms.get(m.power, Fraction(0)), m.coeff)
        terms = {k: c for k, c in terms.items() if complex(c) != 0}
        if not terms:
            raise SemanticError("factor is identically zero")
        if set(terms) == {0}:
            acc.const = terms[0]
            return acc
        # exact single-point factors "(1 - x/c)" and "(1 - 1/(c*x))"
        if len(monos) == 2 and complex(terms.get(0, 0)) == 1 and monos[1].loc is not None:
            m = monos[1]
            if m.power == 1 and m.loc_kind == "x" and abs(complex(m.coeff) * complex(m.loc) + 1) < 1e-12:
                acc.oz[complex(m.loc)] = 1
                return acc
            if m.power == -1 and m.loc_kind == "t" and abs(complex(m.coeff) * complex(m.loc) + 1) < 1e-12:
                acc.iz[complex(m.loc)] = 1
                acc.laurent = True
                return acc
        lo, hi = min(terms), max(terms)
        if hi <= 0:
            # polynomial in t = 1/x
            coeffs = [complex(terms.get(-k, 0)) for k in range(-hi, -lo + 1)]
            acc.const = _num(terms[hi])
            acc.xpow = hi
            for z, v in _poly_roots([c / coeffs[0] for c in coeffs]):
                acc.iz[z] = acc.iz.get(z, 0) + v
            acc.laurent = True
            return acc
        coeffs = [complex(terms.get(k, 0)) for k in range(lo, hi + 1)]
        acc.const = _num(terms[lo])
        acc.xpow = lo
        for z, v in _poly_roots([c / coeffs[0] for c in coeffs]):
            acc.oz[z] = acc.oz.get(z, 0) + v
        return acc

    def builtin(self) -> _Acc:
        t = self.advance()
        name = t.text
        self.expect("(")
        arg_pos = self.tok.pos
        arg = self.mono()
        if arg.power not in (1, -1):
            raise ParseError("builtin argument must be c*x or c/x", arg_pos, ("c*x", "c/x"))
        scale = complex(arg.coeff)
        extra = []
        while self.at(","):
            self.advance()
            extra.append(self.int_exponent())
        self.expect(")")
        if len(extra) > 2:
            raise ParseError("too many builtin arguments", t.pos, ("')'",))
        trunc = extra[0] if extra else DEFAULT_TRUNCATION
        start = extra[1] if len(extra) > 1 else 1
        inner = arg.power == -1
        acc = _Acc()
        acc.laurent = inner

        def fam(kind):
            return BuiltinFamily(kind, scale, trunc, start)

        def add_x(k):
            # powers of the builtin's own variable: t = 1/x contributes x^-k
            acc.xpow += -k if inner else k

        if name == "sin":
            acc.const = scale
            add_x(1)
            (acc.ibz if inner else acc.obz).append(fam("sinp"))
        elif name in ("sinp", "cos"):
            (acc.ibz if inner else acc.obz).append(fam(name))
        elif name == "rgammap":
            (acc.ibz if inner else acc.obz).append(fam("rgammap"))
        elif name == "gamma":
            # Gamma(c y) = exp(-gamma c y) / (c y prod (1 + c y/n) e^{-c y/n})
            acc.const = 1.0 / scale
            add_x(-1)
            g = PowerSeries((0j, -EULER_GAMMA * scale))
            if inner:
                acc.iexp = g
            else:
                acc.oexp = g
            (acc.ibp if inner else acc.obp).append(fam("rgammap"))
        return acc


def parse_coefficient(text: str, q=None):
    """Parse the coefficient DSL into a :class:`FactoredForm` or :class:`LaurentFactoredForm`.

    Grammar::

        form   := ["-"] factor (("*" | "/") factor)*
        factor := atom ["^" int]
        atom   := number | constant | "x" | "(" poly ")" | "exp" "(" poly ")"
                | builtin "(" arg ["," N ["," start]] ")"
        builtin := sin | cos | gamma | sinp | rgammap
        arg    := c "*" x | c "/" x

    ``poly`` is a Laurent polynomial in x.  ``(1 - x/c)`` and
    ``(1 - 1/(c*x))`` keep ``c`` exact; other polynomials are factored
    numerically (binomials exactly).  Constants: ``pi``, ``e``, ``i``,
    ``omega3`` and ``q`` (when a value is supplied).
    """
    if not isinstance(text, str):
        raise ParseError("coefficient must be a string", 0, ("string",))
    return _Parser(text, q).parse()


# ---------------------------------------------------------------------------
# canonical printer


def _cnum(z) -> str:
    z = complex(z)
    sign = "+" if (z.imag > 0 or (z.imag == 0 and math.copysign(1, z.imag) > 0)) else "-"
    return f"({z.real!r}{sign}{abs(z.imag)!r}i)"


def _family_terms(fams, var: str):
    out = []
    for f in fams:
        if isinstance(f, FiniteFamily):
            for a, v in f.points:
                core = f"(1 - x/{_cnum(a)})" if var == "x" else f"(1 - 1/({_cnum(a)}*x))"
                out.append(core if v == 1 else f"{core}^{v}")
        else:
            arg = f"{_cnum(f.scale)}*x" if var == "x" else f"{_cnum(f.scale)}/x"
            extra = ""
            if f.truncation != DEFAULT_TRUNCATION or f.start != 1:
                extra = f", {f.truncation}" + (f", {f.start}" if f.start != 1 else "")
            core = f"{f.name}({arg}{extra})"
            out.append(core if f.mult == 1 else f"{core}^{f.mult}")
    return out


def _exp_term(g: PowerSeries, var: str):
    if g.is_zero():
        return []
    parts = []
    for k, c in enumerate(g.coeffs):
        if k == 0 or c == 0:
            continue
        parts.append(f"{_cnum(c)}*x^{k if var == 'x' else -k}")
    return [f"exp({' + '.join(parts)})"]


def format_coefficient(f) -> str:
    """Canonical DSL text; ``parse_coefficient`` reads it back unchanged."""
    if isinstance(f, LaurentFactoredForm):
        alpha, xp = f.alpha, f.v
        num = _family_terms(f.outer.zeros, "x") + _family_terms(f.inner.zeros, "t")
        den = _family_terms(f.outer.poles, "x") + _family_terms(f.inner.poles, "t")
        exps = _exp_term(f.outer.exp_part, "x") + _exp_term(f.inner.exp_part, "t")
    else:
        alpha, xp = f.alpha, f.mu0
        num = _family_terms(f.zeros, "x")
        den = _family_terms(f.poles, "x")
        exps = _exp_term(f.exp_part, "x")
    head = [_cnum(alpha)]
    if xp:
        head.append(f"x^{xp}")
    text = " * ".join(head + num + exps)
    for d in den:
        text += f" / {d}"
    return text


# ---------------------------------------------------------------------------
# JSON form


def _c2d(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _d2c(d):
    if isinstance(d, dict):
        return complex(d.get("re", 0.0), d.get("im", 0.0))
    return complex(d)


def _fams_to_list(fams):
    out = []
    for f in fams:
        if isinstance(f, FiniteFamily):
            out.extend({**_c2d(a), "mult": v} for a, v in f.points)
        else:
            out.append({"builtin": f.name, "scale": _c2d(f.scale), "truncation": f.truncation,
                        "start": f.start, "mult": f.mult})
    return out


def _fams_from_list(items):
    pts, fams = [], []
    for it in items:
        if "builtin" in it:
            fams.append(BuiltinFamily(it["builtin"], _d2c(it.get("scale", 1.0)),
                                      int(it.get("truncation", DEFAULT_TRUNCATION)),
                                      int(it.get("start", 1)), int(it.get("mult", 1))))
        else:
            pts.append((_d2c(it), int(it.get("mult", 1))))
    return ((FiniteFamily(tuple(pts)),) if pts else ()) + tuple(fams)


def form_to_dict(f) -> dict:
    if isinstance(f, LaurentFactoredForm):
        return {"alpha": _c2d(f.alpha), "v": f.v,
                "outer": form_to_dict(f.outer), "inner": form_to_dict(f.inner)}
    return {"alpha": _c2d(f.alpha), "mu0": f.mu0,
            "zeros": _fams_to_list(f.zeros), "poles": _fams_to_list(f.poles),
            "exp_part": [_c2d(c) for c in f.exp_part.coeffs[1:]]}


def form_from_dict(d: dict):
    if "outer" in d or "inner" in d:
        return LaurentFactoredForm(_d2c(d.get("alpha", 1.0)), int(d.get("v", 0)),
                                   form_from_dict(d.get("outer", {})),
                                   form_from_dict(d.get("inner", {})))
    g = [0j] + [_d2c(c) for c in d.get("exp_part", [])]
    return FactoredForm(_d2c(d.get("alpha", 1.0)), int(d.get("mu0", 0)),
                        _fams_from_list(d.get("zeros", [])), _fams_from_list(d.get("poles", [])),
                        PowerSeries(tuple(g) if len(g) > 1 else ()))


def coerce_coefficient(spec, q=None):
    """Accept a DSL string, JSON dict, number, or an existing form."""
    if isinstance(spec, (FactoredForm, LaurentFactoredForm)):
        return spec
    if isinstance(spec, str):
        return parse_coefficient(spec, q)
    if isinstance(spec, dict):
        return form_from_dict(spec)
    if isinstance(spec, (int, float, complex)):
        return FactoredForm.constant(spec)
    raise InvalidInput(f"cannot interpret {spec!r} as a coefficient")
