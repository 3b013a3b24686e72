"""Solutions of ``y(qx) = m(x) y(x) + r(x)``.

With ``M`` a homogeneous solution, ``y = M z`` turns the equation into
``z(qx) = z(x) + R(x)`` with ``R(x) = r(x) / M(qx)``.  ``R`` is split as

    R(x) = r0(x) + alpha + r_inf(1/x)

(poles of modulus > rho in ``r0``, the others in ``r_inf``, both
vanishing at 0) and each piece has an explicit solution: a tail series
for ``r0``, ``alpha x Theta'/Theta`` for the constant and a tail series
in ``t = 1/x`` entered at the argument ``q/x`` for ``r_inf``.

When ``R`` is not rational its principal parts are extracted by contour
integrals (pole orders are known from the homogeneous catalogs) and the
analytic remainder is expanded in a Laurent series by FFT.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import FactoredForm, LaurentFactoredForm, coerce_coefficient
from .errors import AnnulusTooSmall, AtPole, DegenerateInput, InvalidInput, TieAtThreshold
from .expr import (
    ArgInverse,
    ArgScale,
    Constant,
    Expr,
    FunctionNode,
    SeriesNode,
    TailSeries,
    ThetaLogDeriv,
    add,
    evaluate_solution,
    prod,
)
from .homogeneous import Solution, solve_homogeneous
from .numerics import DEFAULT_POLICY, PowerSeries, QParameter, TruncationPolicy, g_transform
from .rational import RationalFunction
from .spirals import Spiral, SpiralKind, merge_spirals, same_class

__all__ = [
    "AdditiveDecomposition",
    "additive_decompose",
    "solve_additive",
    "tail_series_eval",
    "solve_inhomogeneous",
    "extract_principal_parts",
    "RightHandSide",
]

_TIE_RTOL = 1e-9
_PP_NODES = 256
_LAURENT_NODES = 1024


@dataclass
class AdditiveDecomposition:
    """``R(x) = r0(x) + alpha_rho + r_inf(1/x)``."""

    r0: RationalFunction
    alpha_rho: complex
    r_inf: RationalFunction
    rho: float

    def reconstruct(self, x):
        x = np.asarray(x, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.r0(x) + self.alpha_rho + self.r_inf(1.0 / x)


def _pp_value_at_zero(b: complex, cs) -> complex:
    return complex(sum(c * (-b) ** (-(j + 1)) for j, c in enumerate(cs)))


def _pp_in_t(b: complex, cs):
    """Principal part at ``b != 0`` rewritten in ``t = 1/x``: pole at ``1/b``.

    ``(x - b)^-j = (-b)^-j (1 + 1/(b s))^j`` with ``s = t - 1/b``, so the
    coefficient of ``s^-m`` is ``(-b)^-j C(j, m) b^-m``.
    """
    k = len(cs)
    out = np.zeros(k, dtype=complex)
    for j, c in enumerate(cs, start=1):
        for m in range(1, j + 1):
            out[m - 1] += c * (-b) ** (-j) * math.comb(j, m) * b ** (-m)
    return out


def additive_decompose(R: RationalFunction, rho: float) -> AdditiveDecomposition:
    """Split ``R`` by pole modulus around ``rho``.

    Poles with ``|b| > rho`` go to ``r0`` (normalized by subtracting
    their value at 0, which is added to ``alpha``); poles with
    ``|b| <= rho``, including Laurent terms at 0, go to ``r_inf``.
    ``R = 0`` returns the all-zero decomposition.
    """
    if not (rho > 0):
        raise InvalidInput("rho must be positive")
    if not isinstance(R, RationalFunction):
        raise InvalidInput("additive_decompose expects a RationalFunction")
    if R.is_zero():
        return AdditiveDecomposition(RationalFunction(), 0j, RationalFunction(), rho)
    alpha = complex(R.poly[0]) if R.poly.size else 0j
    r0_poly = np.concatenate([[0j], R.poly[1:]]) if R.poly.size > 1 else np.zeros(0, dtype=complex)
    r0_parts, inf_parts, inf_poly = {}, {}, np.zeros(1, dtype=complex)
    const0 = 0j
    for b, cs in R.parts.items():
        if b == 0:
            poly = np.zeros(len(cs) + 1, dtype=complex)
            poly[1:] = cs
            inf_poly = np.concatenate([inf_poly, np.zeros(max(0, len(poly) - len(inf_poly)))])
            inf_poly[: len(poly)] += poly
            continue
        mod = abs(b)
        if abs(mod - rho) <= _TIE_RTOL * rho:
            raise TieAtThreshold(f"pole {b} has modulus equal to rho = {rho}")
        if mod > rho:
            v0 = _pp_value_at_zero(b, cs)
            r0_parts[b] = cs
            const0 -= v0
            alpha += v0
        else:
            ct = _pp_in_t(b, cs)
            t_pole = 1.0 / b
            inf_parts[t_pole] = ct
            inf_poly[0] -= _pp_value_at_zero(t_pole, ct)
    if r0_parts:
        r0_poly = np.concatenate([r0_poly, np.zeros(max(0, 1 - len(r0_poly)))])
        r0_poly[0] += const0
    r0 = RationalFunction(r0_poly, r0_parts)
    r_inf = RationalFunction(inf_poly, inf_parts)
    return AdditiveDecomposition(r0, alpha, r_inf, rho)


def _split_poly(r: RationalFunction):
    """``(pole part with constant, positive-degree polynomial)`` of ``r``."""
    head = r.poly[:1] if r.poly.size else ()
    tail = np.concatenate([[0j], r.poly[1:]]) if r.poly.size > 1 else np.zeros(0)
    return RationalFunction(head, r.parts), PowerSeries(tuple(tail))


def _additive_piece(qp: QParameter, r: RationalFunction) -> Expr:
    """Solution of ``w(qx) = w(x) + r(x)`` for ``r(0) = 0``."""
    poles, poly = _split_poly(r)
    parts = []
    if not poles.is_zero():
        parts.append(TailSeries(qp, poles))
    if not poly.is_zero():
        parts.append(SeriesNode(g_transform(qp, poly)))
    return add(*parts)


def _pole_class_exact(qp, b, others):
    return not any(same_class(qp, b, c) is not None for c in others if c != b)


def solve_additive(dec: AdditiveDecomposition, q) -> Solution:
    """Solution of ``z(qx) = z(x) + R(x)`` from an additive decomposition.

    ``z = sum_{n>=1} r0(p^n x) + alpha x Theta'/Theta - W(q/x)`` where
    ``W(t) = sum_{n>=1} r_inf(p^n t)``.  Poles: ``q^Z`` (simple) iff
    ``alpha != 0``, ``b q^{N*}`` for poles of ``r0`` and ``b q^{-N}`` for
    the inner poles of ``R``.
    """
    qp = QParameter.coerce(q)
    parts = []
    raw = []
    outer = [b for b in dec.r0.parts]
    inner = [1.0 / c for c in dec.r_inf.parts]
    classes = outer + inner + ([1.0] if dec.alpha_rho != 0 else [])
    if not dec.r0.is_zero():
        parts.append(_additive_piece(qp, dec.r0))
        for b, cs in dec.r0.parts.items():
            raw.append(Spiral(b, SpiralKind.PosNStar, -len(cs), _pole_class_exact(qp, b, classes)))
    if dec.alpha_rho != 0:
        parts.append(ThetaLogDeriv(qp, dec.alpha_rho))
        raw.append(Spiral(1.0, SpiralKind.FullZ, -1, _pole_class_exact(qp, 1.0, classes)))
    if not dec.r_inf.is_zero():
        w = _additive_piece(qp, dec.r_inf)
        parts.append(ArgInverse(prod(Constant(-1.0), w), qp))
        for c, cs in dec.r_inf.parts.items():
            b = 1.0 / c
            raw.append(Spiral(b, SpiralKind.NegN, -len(cs), _pole_class_exact(qp, b, classes)))
    expr = add(*parts)
    merged = merge_spirals(qp, raw)
    return Solution(expr, merged, raw, list(merged.overlaps))


def tail_series_eval(r: RationalFunction, q, x, pol: TruncationPolicy = DEFAULT_POLICY):
    """``sum_{n>=1} r(p^n x)`` for a rational ``r`` with ``r(0) = 0``."""
    qp = QParameter.coerce(q)
    if abs(r.value_at_zero()) > 1e-12 * (1.0 + float(np.sum(np.abs(r.poly)))):
        raise InvalidInput("r must vanish at 0")
    arr = np.asarray(x, dtype=complex)
    scalar = arr.ndim == 0
    for b in r.parts:
        k = same_class(qp, b, complex(np.ravel(arr)[0])) if scalar else None
        if k is not None and k >= 1:
            raise AtPole(f"x = {complex(x)} is a pole of the tail series")
    return evaluate_solution(TailSeries(qp, r), x, pol)


# ---------------------------------------------------------------------------
# non-rational right-hand sides


@dataclass
class _Source:
    """Evaluable ``r`` with a way to bound its pole order at a point."""

    expr: Expr
    order_at: object
    points: object  # callable (r_min, r_max) -> array of singular/zero points


@dataclass
class RightHandSide:
    """Evaluable right-hand side with its known singular data.

    ``catalog`` lists spirals of zeros and poles (may be ``None``) and
    ``point_poles`` isolated poles ``(b, order)`` off any spiral.
    """

    expr: Expr
    catalog: object = None
    point_poles: list = field(default_factory=list)


def _as_source(r, qp: QParameter) -> _Source:
    if isinstance(r, RightHandSide):
        cat, extra = r.catalog, list(r.point_poles)

        def order_at(b):
            v = cat.order_at(b) if cat is not None else 0
            for c, k in extra:
                if abs(c - b) <= 1e-9 * max(1.0, abs(b)):
                    v -= k
            return v

        def points(lo, hi):
            pts = list(cat.singular_points(lo, hi)) if cat is not None else []
            pts += [c for c, _ in extra if lo <= abs(c) <= hi]
            return np.array(pts, dtype=complex)

        return _Source(r.expr, order_at, points)
    if isinstance(r, RationalFunction):
        poles = r.poles()

        def order_at(b):
            for c, k in poles:
                if abs(c - b) <= 1e-9 * max(1.0, abs(b)):
                    return -k
            return 0

        def points(lo, hi):
            return np.array([c for c, _ in poles if lo <= abs(c) <= hi], dtype=complex)

        return _Source(FunctionNode(r), order_at, points)
    if isinstance(r, Solution):
        cat = r.catalog

        def points(lo, hi):
            return cat.singular_points(lo, hi)

        return _Source(r.expr, cat.order_at, points)
    if isinstance(r, Expr):
        return _Source(r, lambda b: 0, lambda lo, hi: np.zeros(0, dtype=complex))
    raise InvalidInput(f"unsupported right-hand side {type(r).__name__}")


def _auto_rho(moduli):
    """Splitting radius in the widest log-gap of pole moduli around 1."""
    return _best_gap(list(moduli), 0.5, 2.0)[0]


def _dedupe(points):
    out = []
    for z in points:
        if not any(abs(z - w) <= 1e-9 * abs(z) for w in out):
            out.append(complex(z))
    return out


def _best_gap(moduli, lo, hi):
    """Geometric midpoint of the widest log-gap of ``moduli`` inside ``[lo, hi]``."""
    pts = sorted([lo] + [m for m in moduli if lo < m < hi] + [hi])
    best, where = -1.0, math.sqrt(lo * hi)
    for a, b in zip(pts, pts[1:]):
        g = math.log(b / a)
        if g > best:
            best, where = g, math.sqrt(a * b)
    return where, best


def extract_principal_parts(R: Expr, poles, others, pol: TruncationPolicy = DEFAULT_POLICY,
                            nodes: int = _PP_NODES) -> RationalFunction:
    """Principal parts of ``R`` at ``poles`` (list of ``(b, order)``).

    Each contour is the circle about ``b`` with radius half the distance to
    the nearest other point of ``others`` (and to 0).
    """
    if not poles:
        return RationalFunction()
    theta = 2 * np.pi * np.arange(nodes) / nodes
    e = np.exp(1j * theta)
    centers, radii = [], []
    allpts = np.asarray(list(others), dtype=complex)
    for b, _ in poles:
        d = np.abs(allpts - b)
        d = d[d > 1e-9 * abs(b)]
        near = min(float(d.min()) if d.size else math.inf, abs(b))
        centers.append(b)
        radii.append(0.5 * near)
    xs = np.concatenate([b + r * e for b, r in zip(centers, radii)])
    vals = evaluate_solution(R, xs, pol).reshape(len(centers), nodes)
    parts = {}
    for i, ((b, k), r) in enumerate(zip(poles, radii)):
        cs = np.array([np.mean(vals[i] * (r * e) ** j) for j in range(1, k + 1)])
        parts[b] = cs
    return RationalFunction((), parts)


def _laurent_coeffs(F: Expr, radius: float, pol, nodes: int = _LAURENT_NODES):
    """Scaled Laurent coefficients ``c_n r^n`` (n = -N/2 .. N/2-1) of ``F`` on ``|x| = r``."""
    theta = 2 * np.pi * np.arange(nodes) / nodes
    x = radius * np.exp(1j * theta)
    vals = evaluate_solution(F, x, pol)
    if not np.all(np.isfinite(vals)):
        raise AnnulusTooSmall(f"remainder is singular on |x| = {radius:.6g}")
    c = np.fft.fft(vals) / nodes
    n = np.fft.fftfreq(nodes, d=1.0 / nodes).astype(int)
    scale = float(np.max(np.abs(vals)))
    return n, c, scale


def _trim_noise(ns, cs, radius, scale, positive):
    """Unscaled coefficients whose scaled size is above the rounding floor."""
    keep = {}
    floor = 1e-15 * scale
    for n, c in zip(ns, cs):
        if (positive and n >= 0) or (not positive and n < 0):
            if abs(c) > floor:
                with np.errstate(over="ignore", under="ignore"):
                    keep[int(n)] = complex(c * np.exp(-float(n) * math.log(radius)))
    return keep


@dataclass
class _Numeric:
    decomposition: AdditiveDecomposition
    valid: tuple
    poles: list = field(default_factory=list)


def _numeric_decomposition(qp, M: Solution, src: _Source, rho2, annulus, pol):
    lo, hi = annulus
    qm = qp.modulus
    wide_lo, wide_hi = lo / qm ** 2, hi * qm ** 2
    cand = list(src.points(wide_lo, wide_hi))
    for w in M.catalog.singular_points(wide_lo * qm, wide_hi * qm):
        cand.append(w / qp.q)
    cand = _dedupe(cand)
    poles = []
    for b in cand:
        k = max(0, M.catalog.order_at(qp.q * b) - min(src.order_at(b), 0))
        if k > 0:
            poles.append((b, k))
    pole_mods = [abs(b) for b, _ in poles]
    r_out, gap_out = _best_gap(pole_mods, hi, wide_hi)
    r_in, gap_in = _best_gap(pole_mods, wide_lo, lo)
    inside = [(b, k) for b, k in poles if r_in < abs(b) < r_out]
    R = _RHS(src.expr, M.expr, qp)
    pp = extract_principal_parts(R, inside, cand, pol)
    F = _Minus(R, pp)
    n_o, c_o, s_o = _laurent_coeffs(F, r_out, pol)
    n_i, c_i, s_i = _laurent_coeffs(F, r_in, pol)
    pos = _trim_noise(n_o, c_o, r_out, s_o, True)
    neg = _trim_noise(n_i, c_i, r_in, s_i, False)
    deg = max(pos) if pos else 0
    poly = np.zeros(deg + 1, dtype=complex)
    for n, c in pos.items():
        poly[n] = c
    parts = dict(pp.parts)
    if neg:
        ndeg = max(-n for n in neg)
        cs = np.zeros(ndeg, dtype=complex)
        for n, c in neg.items():
            cs[-n - 1] = c
        parts[0j] = cs
    total = RationalFunction(poly, parts)
    if rho2 is None:
        rho2 = _auto_rho(pole_mods)
    dec = additive_decompose(total, rho2)
    below = [m for m in pole_mods if m <= r_in]
    above = [m for m in pole_mods if m >= r_out]
    valid = (max(below) if below else wide_lo, min(above) if above else wide_hi)
    return _Numeric(dec, valid, poles)


class _RHS(Expr):
    """``r(x) / M(qx)``."""

    def __init__(self, r: Expr, M: Expr, qp: QParameter):
        self.r, self.M, self.qp = r, M, qp

    def _eval(self, x, pol):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.r._eval(x, pol) / self.M._eval(self.qp.q * x, pol)

    def derivative(self):
        return (self.r / ArgScale(self.M, self.qp.q)).derivative()


class _Minus(Expr):
    def __init__(self, F: Expr, g: RationalFunction):
        self.F, self.g = F, g

    def _eval(self, x, pol):
        return self.F._eval(x, pol) - self.g.evaluate(x)

    def derivative(self):
        return add(self.F.derivative(), prod(Constant(-1.0), FunctionNode(self.g.derivative())))


def _is_zero_coefficient(m) -> bool:
    if m is None:
        return True
    if isinstance(m, (int, float, complex)) and m == 0:
        return True
    if isinstance(m, str) and m.strip() in ("0", "0.0"):
        return True
    return False


def _is_zero_rhs(r) -> bool:
    if r is None:
        return True
    if isinstance(r, RationalFunction):
        return r.is_zero()
    if isinstance(r, (int, float, complex)):
        return r == 0
    return False


def solve_inhomogeneous(m, r, q, rho_set=(1.0, 1.0, None), annulus=None,
                        pol: TruncationPolicy = DEFAULT_POLICY) -> Solution:
    """Meromorphic solution of ``y(qx) = m(x) y(x) + r(x)``.

    ``r`` is a :class:`RationalFunction`, a previous :class:`Solution`
    (cascades) or a bare expression tree.  ``rho_set = (rho, rho', rho'')``:
    the first two split ``m`` on C*, the third splits ``R = r / M(qx)``
    (``None`` picks a radius in the widest gap of pole moduli near 1).
    ``annulus`` is the working annulus (default ``0.1 <= |x| <= 10|q|``);
    the returned solution is valid on an annulus containing it, stored in
    ``Solution.notes`` and the ``valid_annulus`` attribute.
    """
    qp = QParameter.coerce(q)
    rho, rho_p, rho2 = rho_set
    rho, rho_p = float(rho), float(rho_p)
    rho2 = None if rho2 is None else float(rho2)
    if isinstance(r, (int, float, complex)) and r != 0:
        r = RationalFunction.constant(r)
    if _is_zero_coefficient(m):
        src = _as_source(r, qp)
        expr = ArgScale(src.expr, 1.0 / qp.q)
        sol = Solution(expr, merge_spirals(qp, []), [], ["m = 0: y(x) = r(x/q)"])
        sol.valid_annulus = (0.0, math.inf)
        return sol
    m = coerce_coefficient(m, qp.q)
    cstar = isinstance(m, LaurentFactoredForm) and m.has_inner()
    M = solve_homogeneous(m, qp, rho if cstar else None, rho_p if cstar else None)
    if _is_zero_rhs(r):
        M.valid_annulus = (0.0, math.inf)
        return M
    if annulus is None:
        annulus = (0.1, 10.0 * qp.modulus)
    lo, hi = annulus
    if not (0 < lo < hi):
        raise InvalidInput("annulus must satisfy 0 < r_min < r_max")
    trivial_M = isinstance(M.expr, Constant) and M.expr.c == 1
    if trivial_M and isinstance(r, RationalFunction):
        dec = additive_decompose(r, _auto_rho(r.pole_moduli()) if rho2 is None else rho2)
        z = solve_additive(dec, qp)
        z.valid_annulus = (0.0, math.inf)
        z.decomposition = dec
        return z
    src = _as_source(r, qp)
    num = _numeric_decomposition(qp, M, src, rho2, annulus, pol)
    z = solve_additive(num.decomposition, qp)
    expr = prod(M.expr, z.expr)
    possible = [Spiral(s.a, s.kind, s.v, exact=False) for s in z.unmerged]
    for b, k in num.poles:
        if not (num.valid[0] < abs(b) < num.valid[1]):
            kind = SpiralKind.PosNStar if abs(b) > num.decomposition.rho else SpiralKind.NegN
            possible.append(Spiral(b, kind, -k, exact=False))
    raw = list(M.unmerged) + possible
    merged = merge_spirals(qp, raw)
    sol = Solution(expr, merged, raw, list(merged.overlaps)
                   + [f"valid for {num.valid[0]:.6g} < |x| < {num.valid[1]:.6g}"])
    sol.valid_annulus = num.valid
    sol.decomposition = num.decomposition
    sol.homogeneous = M
    return sol
