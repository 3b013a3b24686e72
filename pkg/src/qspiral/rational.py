"""Rational functions kept in partial-fraction form.

``R(x) = poly(x) + sum_b sum_{j=1..k_b} c_{b,j} / (x - b)^j``

Principal parts are what the additive decomposition needs, so they are
the stored representation; numerator/denominator views are derived.
A pole at ``b = 0`` is allowed and carries negative Laurent terms.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import InvalidInput

__all__ = ["RationalFunction"]

_MERGE_RTOL = 1e-10


def _trim(c):
    c = np.asarray(c, dtype=complex).reshape(-1)
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1] if nz.size else np.zeros(0, dtype=complex)


def _padd(a, b):
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    n = max(a.size, b.size)
    out = np.zeros(n, dtype=complex)
    out[: a.size] += a
    out[: b.size] += b
    return out


def _taylor_shift(coeffs, b):
    """Coefficients of ``p(b + h)`` in h (ascending)."""
    c = np.asarray(coeffs, dtype=complex)
    n = len(c)
    out = np.zeros(n, dtype=complex)
    deriv = c.copy()
    fact = 1.0
    for j in range(n):
        out[j] = P.polyval(b, deriv) / fact if deriv.size else 0
        deriv = P.polyder(deriv) if deriv.size > 1 else np.zeros(0, dtype=complex)
        fact *= j + 1
    return out


def _cluster_roots(roots):
    out = []
    for z in roots:
        for i, (w, m) in enumerate(out):
            if abs(z - w) <= 1e-6 * max(1.0, abs(w)):
                out[i] = ((w * m + z) / (m + 1), m + 1)
                break
        else:
            out.append((complex(z), 1))
    return out


class RationalFunction:
    """Rational function with exact arithmetic on its partial fractions."""

    def __init__(self, poly=(), poles=None):
        self.poly = _trim(poly)
        parts = {}
        items = poles.items() if isinstance(poles, dict) else (poles or [])
        for b, cs in items:
            cs = _trim(cs)
            if cs.size == 0:
                continue
            b = complex(b)
            for key in parts:
                if abs(key - b) <= _MERGE_RTOL * max(1.0, abs(b)):
                    b = key
                    break
            old = parts.get(b, np.zeros(0, dtype=complex))
            n = max(len(old), len(cs))
            new = np.zeros(n, dtype=complex)
            new[: len(old)] += old
            new[: len(cs)] += cs
            new = _trim(new)
            if new.size:
                parts[b] = new
            else:
                parts.pop(b, None)
        self.parts = parts

    # construction ---------------------------------------------------------

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def constant(cls, c):
        return cls([c])

    @classmethod
    def from_coeffs(cls, num, den):
        """From numerator/denominator coefficients, ascending powers of x."""
        num, den = _trim(num), _trim(den)
        if den.size == 0:
            raise InvalidInput("denominator must be nonzero")
        if num.size == 0:
            return cls()
        # strip common factors of x
        while num.size and den.size > 1 and num[0] == 0 and den[0] == 0:
            num, den = num[1:], den[1:]
        quot, rem = P.polydiv(num, den) if num.size >= den.size else (np.zeros(0), num)
        roots = _cluster_roots(np.roots(den[::-1])) if den.size > 1 else []
        lead = den[-1]
        parts = {}
        for b, k in roots:
            # R(b + h) = N(b + h) / (h^k E(h)); take the first k terms of N/E
            others = [(c, m) for c, m in roots if c != b]
            e = np.array([lead], dtype=complex)
            for c, m in others:
                for _ in range(m):
                    e = P.polymul(e, [b - c, 1.0])
            n_sh = _taylor_shift(rem, b) if rem.size else np.zeros(1, dtype=complex)
            n_sh = np.concatenate([n_sh, np.zeros(k)])[:k]
            e = np.concatenate([e, np.zeros(k)])[:k]
            s = np.zeros(k, dtype=complex)
            for j in range(k):
                s[j] = (n_sh[j] - np.dot(s[:j], e[j:0:-1])) / e[0]
            # s[j] is the coefficient of h^{j-k}
            parts[b] = s[::-1]
        out = cls(quot, parts)
        return out.reduced()

    @classmethod
    def from_roots(cls, zeros, poles, scale=1.0):
        num = np.array([complex(scale)])
        for z in zeros:
            num = P.polymul(num, [-complex(z), 1.0])
        den = np.array([1.0 + 0j])
        for b in poles:
            den = P.polymul(den, [-complex(b), 1.0])
        return cls.from_coeffs(num, den)

    def reduced(self, tol: float = 1e-10):
        """Drop principal-part coefficients that are negligible (cancelled poles)."""
        scale = 1.0 + max([float(np.max(np.abs(c))) for c in self.parts.values()] + [0.0]
                          + [float(np.max(np.abs(self.poly))) if self.poly.size else 0.0])
        parts = {}
        for b, cs in self.parts.items():
            cs = cs.copy()
            cs[np.abs(cs) <= tol * scale] = 0
            parts[b] = cs
        return RationalFunction(self.poly, parts)

    # views ----------------------------------------------------------------

    def poles(self):
        """List of ``(b, order)``."""
        return [(b, len(cs)) for b, cs in self.parts.items()]

    def pole_moduli(self):
        return [abs(b) for b in self.parts if b != 0]

    def principal_part(self, b) -> "RationalFunction":
        b = complex(b)
        for key, cs in self.parts.items():
            if abs(key - b) <= _MERGE_RTOL * max(1.0, abs(b)):
                return RationalFunction((), {key: cs})
        return RationalFunction()

    def polynomial_part(self) -> "RationalFunction":
        return RationalFunction(self.poly)

    def is_zero(self) -> bool:
        return self.poly.size == 0 and not self.parts

    @property
    def denominator(self) -> np.ndarray:
        den = np.array([1.0 + 0j])
        for b, cs in self.parts.items():
            for _ in range(len(cs)):
                den = P.polymul(den, [-b, 1.0])
        return den

    @property
    def numerator(self) -> np.ndarray:
        den = self.denominator
        num = P.polymul(self.poly, den) if self.poly.size else np.zeros(1, dtype=complex)
        for b, cs in self.parts.items():
            k = len(cs)
            rest = np.array([1.0 + 0j])
            for c, ds in self.parts.items():
                if c != b:
                    for _ in range(len(ds)):
                        rest = P.polymul(rest, [-c, 1.0])
            for j, cj in enumerate(cs, start=1):
                term = rest * cj
                for _ in range(k - j):
                    term = P.polymul(term, [-b, 1.0])
                num = _padd(num, term)
        return _trim(num)

    # evaluation -----------------------------------------------------------

    def evaluate(self, x):
        x = np.asarray(x, dtype=complex)
        out = P.polyval(x, self.poly) if self.poly.size else np.zeros(x.shape, dtype=complex)
        out = np.asarray(out, dtype=complex) * np.ones(x.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            for b, cs in self.parts.items():
                u = 1.0 / (x - b)
                out = out + u * P.polyval(u, cs)
        return out

    __call__ = evaluate

    def value_at_zero(self) -> complex:
        if any(b == 0 for b in self.parts):
            raise InvalidInput("pole at 0")
        return complex(self.evaluate(np.array(0j)))

    def derivative(self) -> "RationalFunction":
        parts = {}
        for b, cs in self.parts.items():
            d = np.zeros(len(cs) + 1, dtype=complex)
            for j, c in enumerate(cs, start=1):
                d[j] = -j * c  # d/dx (x-b)^-j = -j (x-b)^-(j+1)
            parts[b] = d
        poly = P.polyder(self.poly) if self.poly.size > 1 else ()
        return RationalFunction(poly, parts)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, RationalFunction):
            other = RationalFunction.constant(other)
        poly = _padd(self.poly, other.poly)
        return RationalFunction(poly, list(self.parts.items()) + list(other.parts.items()))

    __radd__ = __add__

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        if not isinstance(other, RationalFunction):
            other = RationalFunction.constant(other)
        return self + (-other)

    def scaled(self, c) -> "RationalFunction":
        c = complex(c)
        return RationalFunction(self.poly * c, {b: cs * c for b, cs in self.parts.items()})

    def __mul__(self, c):
        if isinstance(c, RationalFunction):
            return RationalFunction.from_coeffs(P.polymul(self.numerator, c.numerator),
                                                P.polymul(self.denominator, c.denominator))
        return self.scaled(c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"RationalFunction(poly={self.poly.tolist()}, poles={ {b: cs.tolist() for b, cs in self.parts.items()} })"

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        def c(z):
            return {"re": complex(z).real, "im": complex(z).imag}
        return {"num": [c(z) for z in self.numerator], "den": [c(z) for z in self.denominator]}

    @classmethod
    def from_dict(cls, d: dict) -> "RationalFunction":
        def z(v):
            if isinstance(v, dict):
                return complex(v.get("re", 0.0), v.get("im", 0.0))
            if isinstance(v, (list, tuple)):
                return complex(v[0], v[1])
            return complex(v)
        num = [z(v) for v in d.get("num", [])]
        den = [z(v) for v in d.get("den", [1.0])]
        return cls.from_coeffs(num, den)
