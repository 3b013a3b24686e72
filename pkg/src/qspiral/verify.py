"""Independent numerical checks of solutions.

* residual of the functional equation at random annulus points;
* zero/pole counting by the argument principle, and a catalog check
  that compares those counts with the predicted spirals.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import coerce_coefficient
from .errors import (
    AllPointsSkipped,
    AnnulusTooSmall,
    ContourTooClose,
    InvalidInput,
    NonIntegerResult,
)
from .expr import Expr, evaluate_solution, differentiate_solution
from .homogeneous import Solution
from .inhomogeneous import RightHandSide
from .numerics import DEFAULT_POLICY, QParameter, TruncationPolicy
from .rational import RationalFunction
from .spirals import SpiralCatalog, same_class

__all__ = [
    "ResidualReport",
    "WindingResult",
    "CatalogCheck",
    "sample_annulus",
    "residual_report",
    "count_zeros_poles",
    "check_catalog",
    "report_json",
]

GUARD_RTOL = 1e-3
INTEGER_THRESHOLD = 0.2


def _c(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


@dataclass
class ResidualReport:
    max_rel_residual: float
    worst_point: complex
    points_tested: int
    points_skipped: int
    skipped: list = field(default_factory=list)
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        if self.points_tested < 1:
            return False
        return self.max_rel_residual <= self.tolerance

    def to_dict(self):
        d = {"max_rel_residual": self.max_rel_residual, "worst_point": _c(self.worst_point),
             "points_tested": self.points_tested, "points_skipped": self.points_skipped,
             "skipped": [_c(z) for z in self.skipped],
             "tolerance": self.tolerance, "verdict": "PASS" if self.passed else "FAIL"}
        return d


@dataclass
class WindingResult:
    center: complex
    radius: float
    raw_integral: complex
    rounded_count: int
    distance_to_integer: float

    def to_dict(self):
        return {"center": _c(self.center), "radius": self.radius,
                "raw_integral": _c(self.raw_integral), "rounded_count": self.rounded_count,
                "distance_to_integer": self.distance_to_integer}


@dataclass
class CatalogCheck:
    """One line per tested point: catalog points first, then probe disks."""

    entries: list

    @property
    def passed(self) -> bool:
        return all(e["passed"] for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e["passed"]]

    def to_dict(self):
        out = []
        for e in self.entries:
            d = dict(e)
            d["point"] = _c(d["point"])
            out.append(d)
        return {"entries": out, "verdict": "PASS" if self.passed else "FAIL"}


def report_json(report) -> str:
    """Serialize any report object of this module."""
    return json.dumps(report.to_dict(), indent=2)


def sample_annulus(annulus, n: int, rng) -> np.ndarray:
    """``n`` points on log-spaced circles with random angles."""
    lo, hi = annulus
    if not (0 < lo <= hi):
        raise InvalidInput("annulus must satisfy 0 < r_min <= r_max")
    radii = np.exp(np.linspace(math.log(lo), math.log(hi), n))
    return radii * np.exp(1j * rng.uniform(0.0, 2 * np.pi, n))


# ---------------------------------------------------------------------------
# residuals


def _unpack(Y):
    if isinstance(Y, Solution):
        return Y.expr, Y.catalog, Y.valid_annulus
    if isinstance(Y, Expr):
        return Y, None, (0.0, math.inf)
    raise InvalidInput(f"cannot verify object of type {type(Y).__name__}")


def _rhs_eval(r, x, pol):
    if r is None:
        return np.zeros(x.shape, dtype=complex)
    if isinstance(r, RationalFunction):
        return r.evaluate(x)
    if isinstance(r, Solution):
        return evaluate_solution(r.expr, x, pol)
    if isinstance(r, RightHandSide):
        return evaluate_solution(r.expr, x, pol)
    if isinstance(r, Expr):
        return evaluate_solution(r, x, pol)
    if isinstance(r, (int, float, complex)):
        return np.full(x.shape, complex(r))
    raise InvalidInput(f"unsupported right-hand side {type(r).__name__}")


def _coefficient_eval(m, x, pol):
    if hasattr(m, "evaluate") and not isinstance(m, (str, dict)):
        try:
            return np.asarray(m.evaluate(x, pol), dtype=complex)
        except TypeError:
            return np.asarray(m.evaluate(x), dtype=complex)
    return coerce_coefficient(m).evaluate(x, pol)


def _singular_points(catalog, r, m, lo, hi):
    pts = []
    if catalog is not None:
        pts += list(catalog.singular_points(lo, hi))
    for src in (r, m):
        if isinstance(src, RationalFunction):
            pts += [b for b, _ in src.poles()]
        elif isinstance(src, Solution):
            pts += list(src.catalog.singular_points(lo, hi))
        elif hasattr(src, "pole_points") and hasattr(src, "zero_points"):
            pts += [b for b, _ in src.pole_points()]
    return np.array([p for p in pts if lo <= abs(p) <= hi], dtype=complex)


def _near(x, pts, rtol):
    if pts.size == 0:
        return np.zeros(x.shape, dtype=bool)
    d = np.abs(x.reshape(-1, 1) - pts.reshape(1, -1))
    return np.any(d <= rtol * np.abs(pts).reshape(1, -1), axis=1)


def residual_report(Y, m, r=None, annulus=(0.3, 3.0), n_points: int = 100, q=None,
                    seed: int = 42, guard: float = GUARD_RTOL,
                    pol: TruncationPolicy = DEFAULT_POLICY,
                    tolerance: float = 1e-9) -> ResidualReport:
    """Relative residual of ``Y(qx) = m(x) Y(x) + r(x)`` on random annulus points.

    The residual at ``x`` is ``|Y(qx) - mY - r| / (1 + |mY| + |r|)``.
    Points within ``guard * |b|`` of a cataloged point ``b`` (at ``x`` or
    ``qx``) or of a coefficient pole are skipped and reported.
    """
    expr, catalog, valid = _unpack(Y)
    if q is None:
        if catalog is None:
            raise InvalidInput("q is required when Y carries no catalog")
        q = catalog.q
    qp = QParameter.coerce(q)
    lo, hi = annulus
    if lo <= 0:
        raise InvalidInput("r_min must be positive")
    if valid[0] > lo or valid[1] < hi * qp.modulus:
        raise AnnulusTooSmall(f"solution valid for {valid[0]:.6g} < |x| < {valid[1]:.6g}; "
                              f"the check needs {lo:.6g} <= |x| <= {hi * qp.modulus:.6g}")
    if isinstance(m, str) or isinstance(m, dict):
        m = coerce_coefficient(m, qp.q)
    rng = np.random.default_rng(seed)
    x = sample_annulus(annulus, n_points, rng)
    pts = _singular_points(catalog, r, m, lo / 2, hi * qp.modulus * 2)
    skip = _near(x, pts, guard) | _near(qp.q * x, pts, guard)
    xs = x[~skip]
    if xs.size == 0:
        raise AllPointsSkipped("every sample point fell into a guard zone")
    with np.errstate(all="ignore"):
        y0 = evaluate_solution(expr, xs, pol)
        y1 = evaluate_solution(expr, qp.q * xs, pol)
        mv = _coefficient_eval(m, xs, pol)
        rv = _rhs_eval(r, xs, pol)
        my = mv * y0
        res = np.abs(y1 - my - rv) / (1.0 + np.abs(my) + np.abs(rv))
    res = np.where(np.isfinite(res), res, np.inf)
    i = int(np.argmax(res))
    return ResidualReport(float(res[i]), complex(xs[i]), int(xs.size), int(skip.sum()),
                          [complex(z) for z in x[skip]], tolerance)


# ---------------------------------------------------------------------------
# argument principle


def count_zeros_poles(F, center, radius: float, nodes: int = 512, catalog=None,
                      guard: float = GUARD_RTOL, derivative=None,
                      pol: TruncationPolicy = DEFAULT_POLICY) -> WindingResult:
    """``(1/2 pi i) \\oint F'/F`` on ``|x - center| = radius`` by the trapezoid rule."""
    if isinstance(F, Solution):
        catalog = F.catalog if catalog is None else catalog
        F = F.expr
    center = complex(center)
    if radius <= 0:
        raise InvalidInput("radius must be positive")
    if catalog is not None:
        lo = max(abs(center) - radius, 0.0) * 0.9
        pts = catalog.singular_points(max(lo, 1e-300), (abs(center) + radius) * 1.1)
        for p in pts:
            if abs(abs(p - center) - radius) <= guard * abs(p):
                raise ContourTooClose(f"contour passes within the guard zone of {p:.6g}")
    dF = differentiate_solution(F) if derivative is None else derivative
    e = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    x = center + radius * e
    with np.errstate(all="ignore"):
        f = evaluate_solution(F, x, pol)
        df = evaluate_solution(dF, x, pol)
        ratio = df / f
    if not np.all(np.isfinite(ratio)):
        raise ContourTooClose("F or F' is singular or zero on the contour")
    # dx = i r e dtheta
    raw = complex(np.mean(ratio * radius * e))
    n = int(round(raw.real))
    dist = abs(raw - n)
    result = WindingResult(center, float(radius), raw, n, float(dist))
    if dist >= INTEGER_THRESHOLD:
        raise NonIntegerResult(f"winding integral {raw:.6g} is not close to an integer",
                               result)
    return result


def _expected_range(catalog: SpiralCatalog, b):
    """``(lo, hi)`` bounds for the order at ``b``; inexact entries widen the range."""
    exact = catalog.order_at(b)
    lo = hi = exact
    for s in catalog.spirals:
        if s.exact:
            continue
        k = same_class(catalog.q, s.a, b)
        if k is not None and s.kind.contains(k):
            if s.v < 0:
                lo += s.v
            else:
                hi += s.v
    return lo, hi


def check_catalog(F, catalog: SpiralCatalog | None = None, annulus=(0.4, 2.5),
                  n_probes: int = 20, seed: int = 42, nodes: int = 512,
                  pol: TruncationPolicy = DEFAULT_POLICY) -> CatalogCheck:
    """Compare argument-principle counts with the catalog.

    Every catalog point in the annulus gets a circle of radius
    ``min(0.05 |b|, 0.45 * distance to the nearest other point)``;
    ``n_probes`` random disks away from all points must count 0.
    """
    if isinstance(F, Solution):
        catalog = F.catalog if catalog is None else catalog
        F = F.expr
    if catalog is None:
        raise InvalidInput("a catalog is required")
    lo, hi = annulus
    qm = abs(complex(catalog.q))
    dF = differentiate_solution(F)
    pts = catalog.singular_points(lo, hi)
    context = catalog.singular_points(lo / qm, hi * qm)
    entries = []
    for b in pts:
        others = context[np.abs(context - b) > 1e-9 * abs(b)]
        near = float(np.min(np.abs(others - b))) if others.size else math.inf
        radius = min(0.05 * abs(b), 0.45 * near)
        want = _expected_range(catalog, b)
        entry = {"point": complex(b), "radius": radius, "expected": list(want), "kind": "catalog"}
        try:
            w = count_zeros_poles(F, b, radius, nodes, derivative=dF, pol=pol)
            entry.update(counted=w.rounded_count, distance_to_integer=w.distance_to_integer,
                         passed=want[0] <= w.rounded_count <= want[1])
        except (ContourTooClose, NonIntegerResult) as exc:
            entry.update(counted=None, passed=False, error=str(exc))
        entries.append(entry)
    rng = np.random.default_rng(seed)
    placed = tries = 0
    while placed < n_probes and tries < 50 * n_probes:
        tries += 1
        c = sample_annulus(annulus, 1, rng)[0] * math.exp(rng.uniform(-0.3, 0.3))
        if not (lo <= abs(c) <= hi):
            continue
        d = float(np.min(np.abs(context - c))) if context.size else math.inf
        radius = min(0.05 * abs(c), 0.45 * d)
        if radius < 1e-3 * abs(c):
            continue
        placed += 1
        entry = {"point": complex(c), "radius": radius, "expected": [0, 0], "kind": "probe"}
        try:
            w = count_zeros_poles(F, c, radius, nodes, derivative=dF, pol=pol)
            entry.update(counted=w.rounded_count, distance_to_integer=w.distance_to_integer,
                         passed=w.rounded_count == 0)
        except (ContourTooClose, NonIntegerResult) as exc:
            entry.update(counted=None, passed=False, error=str(exc))
        entries.append(entry)
    return CatalogCheck(entries)


# ---------------------------------------------------------------------------
# self-test suites


def run_selftest(seed: int = 42, n_points: int = 200) -> list:
    """Theta identities, the Pochhammer sum identity and the elementary-factor bound.

    Returns one dict per check with the measured value, the tolerance
    and a verdict.
    """
    from .numerics import (
        lemma3_constants,
        lemma4_identity_check,
        modified_elementary_factor,
        theta_eval,
        theta_product_eval,
    )

    rng = np.random.default_rng(seed)
    out = []
    for q in (2.0, 3.0, 1.5 + 0.5j):
        x = sample_annulus((0.1, 5.0), n_points, rng)
        th = theta_eval(q, x)
        rel = np.abs(theta_eval(q, q * x) + q * x * th) / np.maximum(np.abs(q * x * th), 1e-300)
        out.append({"check": f"theta functional relation q={q}", "value": float(rel.max()),
                    "tolerance": 1e-10})
        prod_ = theta_product_eval(q, x)
        rel = np.abs(th - prod_) / np.abs(prod_)
        out.append({"check": f"theta series vs triple product q={q}", "value": float(rel.max()),
                    "tolerance": 1e-12})
        worst = max(lemma4_identity_check(q, n, relative=True) for n in range(31))
        out.append({"check": f"pochhammer sum identity q={q}, n<=30", "value": float(worst),
                    "tolerance": 1e-10})
    c1, c2 = lemma3_constants(2.0)
    r = np.sqrt(rng.uniform(0.0, 1.0, 2500))
    x = r * np.exp(1j * rng.uniform(0.0, 2 * np.pi, 2500))
    violations = 0
    for m in range(1, 11):
        lhs = np.abs(1.0 - modified_elementary_factor(2.0, m, x))
        violations += int(np.sum(lhs > c1 * (c2 * np.abs(x)) ** (m + 1)))
    out.append({"check": "elementary factor bound q=2, m=1..10", "value": float(violations),
                "tolerance": 0.0})
    for d in out:
        d["passed"] = bool(d["value"] <= d["tolerance"])
    return out
