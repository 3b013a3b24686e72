"""q-spirals: discrete sets ``a q^S`` carrying a zero/pole order."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidInput
from .numerics import QParameter

__all__ = ["SpiralKind", "Spiral", "SpiralCatalog", "merge_spirals", "same_class"]


class SpiralKind(str, Enum):
    """Index set of a spiral ``a q^S``."""

    FullZ = "Z"         # n in Z
    PosNStar = "N*"     # n >= 1
    NegN = "-N"         # n <= 0
    NegNStar = "-N*"    # n <= -1

    def contains(self, n: int) -> bool:
        if self is SpiralKind.FullZ:
            return True
        if self is SpiralKind.PosNStar:
            return n >= 1
        if self is SpiralKind.NegN:
            return n <= 0
        return n <= -1


@dataclass(frozen=True)
class Spiral:
    """``a q^S`` with order ``v`` (positive: zeros, negative: poles).

    ``exact=False`` marks an upper estimate: the points may carry poles
    of order at most ``|v|`` (or nothing at all).
    """

    a: complex
    kind: SpiralKind
    v: int
    exact: bool = True

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "kind", SpiralKind(self.kind))
        if self.a == 0:
            raise InvalidInput("spiral base point must be nonzero")

    def points(self, q, r_min: float, r_max: float):
        """Points ``a q^n`` (n in S) with ``r_min <= |.| <= r_max``, as (n, point)."""
        qp = QParameter.coerce(q)
        lq = math.log(qp.modulus)
        la = math.log(abs(self.a))
        lo = math.floor((math.log(max(r_min, 1e-300)) - la) / lq) - 1
        hi = math.ceil((math.log(r_max) - la) / lq) + 1
        out = []
        for n in range(lo, hi + 1):
            if not self.kind.contains(n):
                continue
            z = self.a * qp.q ** n
            if r_min <= abs(z) <= r_max:
                out.append((n, z))
        return out

    def to_dict(self) -> dict:
        return {"base": {"re": self.a.real, "im": self.a.imag}, "direction": self.kind.value,
                "order": self.v, "exact": self.exact}

    @classmethod
    def from_dict(cls, d: dict) -> "Spiral":
        a = d.get("base", d.get("a"))
        a = complex(a["re"], a["im"]) if isinstance(a, dict) else complex(a)
        kind = d.get("direction", d.get("kind"))
        return cls(a, SpiralKind(kind), int(d["order"]), bool(d.get("exact", True)))


def same_class(q, a, b, rtol: float = 1e-9):
    """Return k with ``b = a q^k`` (within ``rtol``), else ``None``."""
    qp = QParameter.coerce(q)
    a, b = complex(a), complex(b)
    k = round(math.log(abs(b / a)) / math.log(qp.modulus))
    if abs(b - a * qp.q ** k) <= rtol * abs(b):
        return k
    return None


def _canonical(q, a):
    """Representative of ``a q^Z`` with ``1 <= |rep| < |q|`` and the shift used."""
    qp = QParameter.coerce(q)
    k = math.floor(math.log(abs(a)) / math.log(qp.modulus) + 1e-12)
    rep = a / qp.q ** k
    if abs(rep) >= qp.modulus * (1 - 1e-10):
        rep, k = rep / qp.q, k + 1
    return rep, k


def _class_key(q, a):
    rep, k = _canonical(q, a)
    return (round(rep.real, 8) + 0.0, round(rep.imag, 8) + 0.0), k


@dataclass
class SpiralCatalog:
    """Merged list of spirals plus notes on overlapping entries."""

    q: complex
    spirals: list = field(default_factory=list)
    overlaps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"q": {"re": complex(self.q).real, "im": complex(self.q).imag},
                "spirals": [s.to_dict() for s in self.spirals],
                "overlaps": list(self.overlaps)}

    @classmethod
    def from_dict(cls, d: dict) -> "SpiralCatalog":
        q = d["q"]
        q = complex(q["re"], q["im"]) if isinstance(q, dict) else complex(q)
        return cls(q, [Spiral.from_dict(s) for s in d.get("spirals", [])], list(d.get("overlaps", [])))

    def order_at(self, x, rtol: float = 1e-9) -> int:
        """Total exact order at the point ``x``."""
        total = 0
        for s in self.spirals:
            if not s.exact:
                continue
            k = same_class(self.q, s.a, x, rtol)
            if k is not None and s.kind.contains(k):
                total += s.v
        return total

    def singular_points(self, r_min: float, r_max: float, poles_only: bool = False):
        """Catalog points (exact or not) in the annulus, without duplicates.

        With ``poles_only`` only spirals of negative order are used.
        """
        pts = []
        for s in self.spirals:
            if poles_only and s.v > 0:
                continue
            for _, z in s.points(self.q, r_min, r_max):
                if not any(abs(z - w) <= 1e-9 * abs(z) for w in pts):
                    pts.append(z)
        return np.array(pts, dtype=complex)

    def __iter__(self):
        return iter(self.spirals)

    def __len__(self):
        return len(self.spirals)


def merge_spirals(q, spirals) -> SpiralCatalog:
    """Merge raw spiral entries.

    * Exact full spirals on one class sum their orders.
    * Exact half spirals with the same base and kind sum their orders.
    * A half spiral on the class of a full spiral is kept separately and
      recorded as an overlap, as are half spirals on one class with
      different shifts (their supports differ by finitely many points).
    * Inexact entries (possible poles) are absorbed by an exact full
      spiral on their class; inexact half spirals of one class and kind
      collapse to the one with the largest support.
    * Entries whose order sums to zero are dropped.
    """
    qp = QParameter.coerce(q)
    full = {}       # class key -> [rep, order]
    half = {}       # (class key, shift, kind) -> Spiral
    loose = []
    for s in spirals:
        if s.v == 0:
            continue
        key, k = _class_key(qp, s.a)
        if not s.exact:
            loose.append((key, k, s))
        elif s.kind is SpiralKind.FullZ:
            if key in full:
                full[key][1] += s.v
            else:
                full[key] = [_canonical(qp, s.a)[0], s.v]
        else:
            hk = (key, k, s.kind)
            if hk in half:
                h = half[hk]
                half[hk] = Spiral(h.a, h.kind, h.v + s.v)
            else:
                half[hk] = s
    out = [Spiral(rep, SpiralKind.FullZ, v) for rep, v in full.values() if v != 0]
    full_keys = {key for key, (rep, v) in full.items() if v != 0}
    overlaps = []
    by_class = {}
    for (key, k, kind), h in half.items():
        if h.v == 0:
            continue
        if key in full_keys:
            overlaps.append(f"half spiral {h.a:.6g} q^{kind.value} lies on a full spiral of its class")
        by_class.setdefault(key, []).append(h)
        out.append(h)
    for members in by_class.values():
        if len(members) > 1:
            names = ", ".join(f"{h.a:.6g} q^{h.kind.value}" for h in members)
            overlaps.append(f"half spirals {names} share a class")
    inexact = {}
    for key, k, s in loose:
        if key in full_keys:
            continue
        if s.kind is SpiralKind.FullZ:
            ik = (key, SpiralKind.FullZ)
            prev = inexact.get(ik)
            v = min(s.v, prev[1].v) if prev else s.v
            inexact[ik] = (0, Spiral(_canonical(qp, s.a)[0], SpiralKind.FullZ, v, exact=False))
            continue
        if (key, SpiralKind.FullZ) in inexact:
            continue
        ik = (key, s.kind)
        prev = inexact.get(ik)
        if prev is None:
            inexact[ik] = (k, s)
            continue
        pk, ps = prev
        # support a q^{N*} grows as the shift decreases; a q^{-N} as it increases
        wider = k < pk if s.kind in (SpiralKind.PosNStar,) else k > pk
        keep_k, keep = (k, s) if wider else (pk, ps)
        inexact[ik] = (keep_k, Spiral(keep.a, keep.kind, min(s.v, ps.v), exact=False))
    for (key, kind), (_, s) in inexact.items():
        if kind is not SpiralKind.FullZ and (key, SpiralKind.FullZ) in inexact:
            continue
        out.append(s)
    return SpiralCatalog(qp.q, out, overlaps)
