"""Exact per-simplex certificates for PL maps.

``certify_nonvanishing`` decides whether the origin lies in the convex hull of
a simplex's vertex values; ``certify_bound`` decides ``|g - f| < eps`` on every
simplex.  Both work on the rational values of the stored numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ..complex import PLMap, PLScalarField, SimplicialComplex, transport_values
from ..errors import CarrierMismatch
from ..exact import fmt, fraction_array, is_exact, min_norm_point


@dataclass(frozen=True)
class SimplexVerdict:
    simplex: tuple[int, ...]
    passed: bool
    witness: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"simplex": list(self.simplex), "pass": self.passed, "witness": self.witness}


@dataclass(frozen=True)
class Certificate:
    kind: str
    verdicts: tuple[SimplexVerdict, ...]
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def failures(self) -> list[SimplexVerdict]:
        return [v for v in self.verdicts if not v.passed]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "pass": self.passed,
            "n_simplices": len(self.verdicts),
            "n_failed": len(self.failures()),
            "notes": self.notes,
            "verdicts": [v.to_json() for v in self.verdicts],
        }

    def summary(self) -> dict:
        fails = self.failures()
        return {
            "kind": self.kind,
            "pass": self.passed,
            "n_simplices": len(self.verdicts),
            "n_failed": len(fails),
            "first_failures": [v.to_json() for v in fails[:5]],
            "notes": self.notes,
        }


def merge(kind: str, certs: Iterable[Certificate], **notes) -> Certificate:
    verdicts = tuple(v for c in certs for v in c.verdicts)
    return Certificate(kind, verdicts, dict(notes))


def hull_avoids_origin(rows: Sequence[Sequence]) -> tuple[bool, dict]:
    """Exact decision of ``0 not in conv(rows)`` with a checkable witness."""
    m = len(rows[0])
    for i in range(m):
        col = [r[i] for r in rows]
        if all(c > 0 for c in col):
            return True, {"axis": i, "sign": 1}
        if all(c < 0 for c in col):
            return True, {"axis": i, "sign": -1}
    norm_sq, point, weights = min_norm_point(rows)
    if norm_sq > 0:
        return True, {"direction": [fmt(c) for c in point], "margin_sq": fmt(norm_sq)}
    return False, {"barycentric": [fmt(w) for w in weights]}


def _axis_fastpath(vals: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per simplex: whether some coordinate has one strict sign on all vertices."""
    pos = np.asarray(vals > 0, dtype=bool).all(axis=1)
    neg = np.asarray(vals < 0, dtype=bool).all(axis=1)
    ok = pos.any(axis=1) | neg.any(axis=1)
    axis = np.where(pos.any(axis=1), pos.argmax(axis=1), neg.argmax(axis=1))
    sign = np.where(pos.any(axis=1), 1, -1)
    return ok, axis, sign


def certify_nonvanishing(g: PLMap, simplices: Iterable[Sequence[int]] | None = None,
                         coords: int | None = None) -> Certificate:
    """Per simplex: pass iff the origin is not in the hull of g's vertex values.

    Defaults to the maximal simplices (a face's hull lies in its facet's hull).
    ``coords`` restricts the test to the leading coordinates.
    """
    K = g.complex
    values = g.values if coords is None else g.values[:, :coords]
    simplices = list(K.facets if simplices is None else (tuple(s) for s in simplices))
    verdicts: dict[int, SimplexVerdict] = {}
    groups: dict[int, list[int]] = {}
    for k, s in enumerate(simplices):
        groups.setdefault(len(s), []).append(k)
    for size, members in groups.items():
        arr = np.array([simplices[k] for k in members], dtype=np.int64).reshape(-1, size)
        ok, axis, sign = _axis_fastpath(values[arr])
        for j, k in enumerate(members):
            s = simplices[k]
            if ok[j]:
                verdicts[k] = SimplexVerdict(s, True, {"axis": int(axis[j]), "sign": int(sign[j])})
            else:
                passed, witness = hull_avoids_origin([values[v] for v in s])
                verdicts[k] = SimplexVerdict(s, passed, witness)
    return Certificate("nonvanishing", tuple(verdicts[k] for k in range(len(simplices))))


def _common_carrier(target: SimplicialComplex, *objs) -> None:
    for o in objs:
        if not target.is_refinement_of(o.complex):
            raise CarrierMismatch(
                f"{type(o).__name__} is carried by a complex that {target!r} does not refine")


def vertex_bound_margins(f: PLMap, g: PLMap, eps: PLScalarField) -> tuple[list[bool], list[Fraction], list[Fraction]]:
    """Exact per-vertex squared movement and tolerance on g's carrier."""
    K = g.complex
    _common_carrier(K, f, eps)
    fv = transport_values(f.values, f.complex, K, exact=True)
    ev = transport_values(eps.values, eps.complex, K, exact=True)
    gv = g.values if is_exact(g.values) else fraction_array(g.values)
    if fv.shape != gv.shape:
        raise CarrierMismatch(f"maps have different target dimensions {fv.shape} vs {gv.shape}")
    ok, d2s, e2s = [], [], []
    for v in range(K.n_vertices):
        diff = gv[v] - fv[v]
        d2 = sum((x * x for x in diff), Fraction(0))
        e = ev[v]
        if e == 0:
            good = d2 == 0
        else:
            good = e > 0 and d2 < e * e
        ok.append(good)
        d2s.append(d2)
        e2s.append(e * e if e >= 0 else -e * e)
    return ok, d2s, e2s


def certify_bound(f: PLMap, g: PLMap, eps: PLScalarField,
                  simplices: Iterable[Sequence[int]] | None = None) -> Certificate:
    """Per simplex of g's carrier: ``|g - f| < eps`` everywhere off the zero set of eps.

    |g - f| is convex and eps affine on a simplex, so the vertex checks are
    exact.  Where eps vanishes at a vertex, g must equal f there exactly.
    """
    K = g.complex
    ok, d2s, e2s = vertex_bound_margins(f, g, eps)
    simplices = K.facets if simplices is None else [tuple(s) for s in simplices]
    verdicts = []
    for s in simplices:
        bad = [v for v in s if not ok[v]]
        if bad:
            v = bad[0]
            verdicts.append(SimplexVerdict(s, False, {
                "vertex": v, "dist_sq": fmt(d2s[v]), "eps_sq": fmt(e2s[v])}))
        else:
            v = max(s, key=lambda u: d2s[u] - e2s[u])
            verdicts.append(SimplexVerdict(s, True, {
                "tightest_vertex": v, "margin_sq": fmt(e2s[v] - d2s[v])}))
    return Certificate("pointwise-bound", tuple(verdicts))


def bound_violations(cert: Certificate) -> list[int]:
    """Vertices named by failing verdicts of a bound certificate."""
    return sorted({v.witness["vertex"] for v in cert.failures() if "vertex" in v.witness})
