"""Command-line front end.

Subcommands: ``solve``, ``verify``, ``polygon``, ``grid`` and ``selftest``.
Exit codes: 0 pass, 1 verification failure, 2 usage or problem error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .coefficients import LaurentFactoredForm, coerce_coefficient, format_coefficient
from .errors import QSpiralError
from .expr import evaluate_solution
from .homogeneous import solve_homogeneous
from .inhomogeneous import solve_inhomogeneous
from .numerics import QParameter, TruncationPolicy
from .operators import (
    FirstOrderFactor,
    OperatorCoefficient,
    QDifferenceOperator,
    auto_factor,
    cascade_solve,
    newton_polygon,
    verify_factorization,
)
from .rational import RationalFunction
from .verify import check_catalog, residual_report, run_selftest, sample_annulus

__all__ = ["ProblemSpec", "load_problem", "build_parser", "main"]

DEFAULT_TOLERANCES = {"homogeneous": 1e-9, "inhomogeneous": 1e-8, "operator": 1e-7,
                      "factorization": 1e-9}


class UsageError(Exception):
    pass


def _complex(v, name="value"):
    if isinstance(v, dict):
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(v[0], v[1])
    if isinstance(v, (int, float)):
        return complex(v)
    raise UsageError(f"{name}: expected a number or {{re, im}}")


@dataclass
class ProblemSpec:
    """A parsed problem file."""

    q: complex
    kind: str
    m: object = None
    r: object = None
    rhos: tuple = (1.0, 1.0, None)
    coeffs: list = field(default_factory=list)
    factors: list | None = None
    annulus: tuple = (0.3, 3.0)
    grid: tuple = (40, 64)
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    tolerance: float = 1e-9
    raw: dict = field(default_factory=dict)

    @property
    def spec_hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_problem(data: dict) -> ProblemSpec:
    """Validate a problem dictionary."""
    if not isinstance(data, dict):
        raise UsageError("problem must be a JSON object")
    if "q" not in data:
        raise UsageError("problem needs q")
    q = _complex(data["q"], "q")
    QParameter(q)
    if "coeffs" in data:
        kind = "operator"
    elif "r" in data:
        kind = "inhomogeneous"
    elif "m" in data:
        kind = "homogeneous"
    else:
        raise UsageError("problem needs m, r or coeffs")
    kind = data.get("kind", kind)
    if kind not in DEFAULT_TOLERANCES or kind == "factorization":
        raise UsageError(f"unknown problem kind {kind!r}")
    annulus = tuple(float(v) for v in data.get("annulus", (0.3, 3.0)))
    if len(annulus) != 2 or not (0 < annulus[0] < annulus[1]):
        raise UsageError("annulus must be [r_min, r_max] with 0 < r_min < r_max")
    grid = tuple(int(v) for v in data.get("grid", (40, 64)))
    if len(grid) != 2 or min(grid) < 1:
        raise UsageError("grid must be [n_radial, n_angular] with entries >= 1")
    tol = dict(data.get("tolerances", {}))
    policy = TruncationPolicy(float(tol.get("abs_tol", 1e-14)), int(tol.get("max_terms", 10000)))
    rho2 = data.get("rho_second")
    rhos = (float(data.get("rho", 1.0)), float(data.get("rho_prime", data.get("rho", 1.0))),
            None if rho2 is None else float(rho2))
    spec = ProblemSpec(q, kind, annulus=annulus, grid=grid, policy=policy, rhos=rhos, raw=data,
                       tolerance=float(tol.get("residual", DEFAULT_TOLERANCES[kind])))
    if kind in ("homogeneous", "inhomogeneous"):
        if "m" not in data:
            raise UsageError("problem needs m")
        spec.m = data["m"] if isinstance(data["m"], (str, dict)) else _complex(data["m"], "m")
        if kind == "inhomogeneous":
            r = data["r"]
            if not isinstance(r, dict) or "num" not in r:
                raise UsageError("r must be {num: [...], den: [...]}")
            spec.r = RationalFunction.from_dict(r)
    else:
        spec.coeffs = list(data["coeffs"])
        if "factors" in data:
            spec.factors = [FirstOrderFactor.from_dict(f) for f in data["factors"]]
    return spec


def _has_inner(m, q):
    form = coerce_coefficient(m, q)
    return isinstance(form, LaurentFactoredForm) and form.has_inner()


def _solve(spec: ProblemSpec):
    q = spec.q
    if spec.kind == "homogeneous":
        inner = _has_inner(spec.m, q)
        rho, rho_p = (spec.rhos[0], spec.rhos[1]) if inner or "rho" in spec.raw else (None, None)
        return solve_homogeneous(spec.m, q, rho, rho_p), None
    if spec.kind == "inhomogeneous":
        ann = (min(spec.annulus[0], 0.1), max(spec.annulus[1], 10 * abs(q)))
        return solve_inhomogeneous(spec.m, spec.r, q, spec.rhos, ann, spec.policy), None
    op = QDifferenceOperator(spec.coeffs, q)
    left = 1.0
    factors = spec.factors
    if factors is None:
        left, factors = auto_factor(op)
    result = cascade_solve(factors, q, left)
    return result.solution, (op, left, factors)


def _catalog_json(sol):
    return [s.to_dict() for s in sol.catalog.spirals]


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args, spec: ProblemSpec) -> int:
    sol, _ = _solve(spec)
    payload = {
        "kind": spec.kind,
        "q": {"re": spec.q.real, "im": spec.q.imag},
        "solution": sol.expr.describe(),
        "catalog": _catalog_json(sol),
        "unmerged": [s.to_dict() for s in sol.unmerged],
        "notes": list(sol.notes),
        "valid_annulus": [sol.valid_annulus[0], sol.valid_annulus[1]
                          if math.isfinite(sol.valid_annulus[1]) else None],
    }
    if spec.kind != "operator":
        form = coerce_coefficient(spec.m, spec.q)
        payload["m"] = format_coefficient(form)
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_verify(args, spec: ProblemSpec) -> int:
    sol, opdata = _solve(spec)
    report = {"kind": spec.kind, "seed": args.seed}
    ok = True
    if spec.kind == "operator":
        op, left, factors = opdata
        rng = np.random.default_rng(args.seed)
        x = sample_annulus(spec.annulus, args.points, rng)
        pts = sol.catalog.singular_points(spec.annulus[0] / 2, spec.annulus[1] * 2 * abs(spec.q))
        keep = np.ones(x.shape, dtype=bool)
        for j in range(op.order + 1):
            xj = spec.q ** j * x
            if pts.size:
                d = np.abs(xj.reshape(-1, 1) - pts.reshape(1, -1))
                keep &= ~np.any(d <= 1e-3 * np.abs(pts).reshape(1, -1), axis=1)
        res = op.residual(sol.expr, x[keep], spec.policy)
        res = np.where(np.isfinite(res), res, np.inf)
        worst = float(res.max()) if res.size else math.inf
        report["order_n_residual"] = {"max_rel_residual": worst, "points_tested": int(keep.sum()),
                                      "points_skipped": int((~keep).sum()),
                                      "tolerance": spec.tolerance}
        ok &= bool(keep.any()) and worst <= spec.tolerance
        fr = verify_factorization(op, factors, x[keep], left, spec.policy)
        report["factorization"] = fr.to_dict()
        ok &= fr.passed
    else:
        rep = residual_report(sol, spec.m, spec.r, spec.annulus, args.points, spec.q, args.seed,
                              pol=spec.policy, tolerance=spec.tolerance)
        report["residual"] = rep.to_dict()
        ok &= rep.passed
        if spec.kind == "homogeneous" and not args.no_catalog:
            chk = check_catalog(sol, annulus=spec.annulus, seed=args.seed, pol=spec.policy)
            report["catalog_check"] = chk.to_dict()
            ok &= chk.passed
    report["verdict"] = "PASS" if ok else "FAIL"
    _emit(json.dumps(report, indent=2, default=str) + "\n", args.out)
    return 0 if ok else 1


def cmd_polygon(args, spec: ProblemSpec) -> int:
    if spec.kind == "operator":
        op = QDifferenceOperator(spec.coeffs, spec.q)
    else:
        m = coerce_coefficient(spec.m, spec.q)
        op = QDifferenceOperator([OperatorCoefficient(m * -1.0), 1.0], spec.q)
    poly = newton_polygon(op)
    _emit(json.dumps(poly.to_dict(), indent=2) + "\n", args.out)
    return 0


def cmd_grid(args, spec: ProblemSpec) -> int:
    sol, _ = _solve(spec)
    n_rad, n_ang = spec.grid
    lo, hi = spec.annulus
    rng = np.random.default_rng(args.seed)
    radii = np.exp(np.linspace(math.log(lo), math.log(hi), n_rad))
    offsets = rng.uniform(0.0, 2 * np.pi / n_ang, n_rad)
    ang = 2 * np.pi * np.arange(n_ang) / n_ang
    x = (radii[:, None] * np.exp(1j * (ang[None, :] + offsets[:, None]))).reshape(-1)
    y = evaluate_solution(sol.expr, x, spec.policy)
    # a cell is flagged when a cataloged pole lies within one grid step
    step = max(math.log(hi / lo) / max(n_rad - 1, 1), 2 * np.pi / n_ang)
    pts = sol.catalog.singular_points(lo / 2, hi * 2, poles_only=True)
    near = ~np.isfinite(y)
    if pts.size:
        d = np.abs(x.reshape(-1, 1) - pts.reshape(1, -1)) / np.abs(pts).reshape(1, -1)
        near |= np.any(d <= 0.5 * step, axis=1)
    buf = io.StringIO()
    buf.write(f"# spec_hash={spec.spec_hash} seed={args.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "abs_y", "arg_y", "near_singularity"])
    with np.errstate(all="ignore"):
        for xi, yi, ni in zip(x, y, near):
            w.writerow([repr(float(xi.real)), repr(float(xi.imag)), repr(float(abs(yi))),
                        repr(float(np.angle(yi))), int(ni)])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest(args.seed)
    ok = all(r["passed"] for r in results)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']}: {r['value']:.3g} "
              f"(tolerance {r['tolerance']:.3g})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qspiral",
                                     description="Meromorphic solutions of q-difference equations")
    parser.add_argument("--seed", type=int, default=42, help="seed for all sampling (default 42)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("solve", "solve and print the catalog"),
                           ("verify", "solve and run the numerical checks"),
                           ("polygon", "Newton polygon slopes"),
                           ("grid", "evaluate on a polar grid and write CSV")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--problem", required=True, help="problem JSON file")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        if name == "verify":
            p.add_argument("--points", type=int, default=100, help="residual sample points")
            p.add_argument("--no-catalog", action="store_true", help="skip the winding checks")
    p = sub.add_parser("selftest", help="theta, Pochhammer and elementary-factor checks")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    if args.command == "selftest":
        return cmd_selftest(args)
    try:
        with open(args.problem) as fh:
            data = json.load(fh)
        spec = load_problem(data)
        handler = {"solve": cmd_solve, "verify": cmd_verify,
                   "polygon": cmd_polygon, "grid": cmd_grid}[args.command]
        return handler(args, spec)
    except (UsageError, QSpiralError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"qspiral: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
