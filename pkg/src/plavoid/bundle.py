"""Sections of locally trivial bundles over a simplicial base.

A bundle is described by trivializing patches (vertex sets of the base), a
fiber atlas with a fiber target, and affine transitions between patch fiber
coordinates on the overlaps.  A section is stored patchwise: one PL map per
patch, meaningful on the subcomplex spanned by that patch.

Section avoidance runs one gluing pass per patch, budgeted by a partition of
unity on the base, and pushes every change to the other patches through the
transitions so the representatives stay coherent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .avoid_core.certificates import Certificate, certify_bound, merge
from .avoid_core.regions import DEFAULT_MAX_RETRIES, DEFAULT_MAX_SUBDIV
from .charts import Atlas, EuclideanSpace, LipschitzTarget, certify_clearance
from .complex import PLMap, PLScalarField, SimplicialComplex, VertexRegion, distance_field, transport_values
from .errors import (CertificationFailed, CocycleViolation, ConstraintViolated, CoverageGap,
                     PreconditionError, SubbundleViolation)
from .exact import _solve, as_float, fmt, fraction_array, is_exact, to_fraction
from .glue import RelativeConstraint, _glue, _seed_sequence, pass_tolerance


def _inverse(M: np.ndarray) -> np.ndarray:
    n = len(M)
    rows = [[to_fraction(x) for x in r] for r in M]
    cols = []
    for k in range(n):
        col = _solve(rows, [Fraction(int(i == k)) for i in range(n)])
        if col is None:
            raise CocycleViolation("singular transition matrix")
        cols.append(col)
    return np.array(cols, dtype=object).T.copy()


@dataclass(frozen=True, eq=False)
class AffineTransition:
    """``y -> M y + b`` on fiber coordinates; stored with exact entries."""

    M: np.ndarray
    b: np.ndarray

    @classmethod
    def make(cls, M, b=None) -> "AffineTransition":
        M = fraction_array(np.asarray(M, dtype=object))
        b = fraction_array(np.zeros(len(M), dtype=object) if b is None else np.asarray(b, dtype=object))
        return cls(M, b)

    @classmethod
    def identity(cls, p: int) -> "AffineTransition":
        return cls.make(np.eye(p, dtype=int).astype(object))

    def apply(self, y):
        if is_exact(y):
            return self.M.dot(y) + self.b
        return as_float(self.M) @ np.asarray(y, float) + as_float(self.b)

    def compose(self, other: "AffineTransition") -> "AffineTransition":
        """``self o other``."""
        return AffineTransition(self.M.dot(other.M), self.M.dot(other.b) + self.b)

    def inverse(self) -> "AffineTransition":
        Mi = _inverse(self.M)
        return AffineTransition(Mi, -Mi.dot(self.b))

    def equals(self, other: "AffineTransition") -> bool:
        return bool(np.all(self.M == other.M) and np.all(self.b == other.b))

    def to_json(self) -> dict:
        return {"M": [[fmt(x) for x in r] for r in self.M], "b": [fmt(x) for x in self.b]}


@dataclass(frozen=True, eq=False)
class BundleSpec:
    """Patches ``S_i`` (vertex sets), fiber data, and per-vertex transitions.

    ``transitions[(i, j)][v]`` maps patch-``j`` fiber coordinates to patch-``i``
    ones at the overlap vertex ``v``.
    """

    base: SimplicialComplex
    patches: tuple
    fiber_atlas: Atlas
    target: LipschitzTarget
    transitions: Mapping

    @classmethod
    def build(cls, base: SimplicialComplex, patches: Sequence, fiber_atlas: Atlas,
              target: LipschitzTarget, components: Mapping) -> "BundleSpec":
        """``components[(i, j)]`` lists ``(vertices, M, b)`` triples, one per overlap component.

        Identity self-transitions and the inverses of listed transitions are
        filled in when missing.
        """
        patches = tuple(frozenset(int(v) for v in S) for S in patches)
        p = fiber_atlas.manifold.ambient_dim
        trans: dict = {}
        for (i, j), comps in components.items():
            table = {}
            for verts, M, b in comps:
                t = AffineTransition.make(M, b)
                for v in verts:
                    table[int(v)] = t
            trans[(i, j)] = table
        for (i, j), table in list(trans.items()):
            if (j, i) not in trans:
                cache = {}
                trans[(j, i)] = {v: cache.setdefault(id(t), t.inverse()) for v, t in table.items()}
        for i, S in enumerate(patches):
            ident = AffineTransition.identity(p)
            trans[(i, i)] = {v: ident for v in S}
        spec = cls(base, patches, fiber_atlas, target, trans)
        spec.check_overlaps()
        return spec

    def check_overlaps(self) -> None:
        for i, Si in enumerate(self.patches):
            for j, Sj in enumerate(self.patches):
                if i == j:
                    continue
                missing = (Si & Sj) - set(self.transitions.get((i, j), {}))
                if missing:
                    raise CocycleViolation(f"no transition ({i},{j}) at overlap vertices {sorted(missing)[:5]}")

    def check_cocycle(self) -> None:
        for i, Si in enumerate(self.patches):
            for v, t in self.transitions[(i, i)].items():
                if not t.equals(AffineTransition.identity(len(t.b))):
                    raise CocycleViolation(f"t_{i}{i} is not the identity at vertex {v}")
            for j, Sj in enumerate(self.patches):
                for v in Si & Sj:
                    tij, tji = self.transitions[(i, j)][v], self.transitions[(j, i)][v]
                    if not tij.compose(tji).equals(AffineTransition.identity(len(tij.b))):
                        raise CocycleViolation(f"t_{i}{j} o t_{j}{i} != id at vertex {v}")
                    for k, Sk in enumerate(self.patches):
                        if v in Sk:
                            lhs = self.transitions[(i, k)][v]
                            rhs = tij.compose(self.transitions[(j, k)][v])
                            if not lhs.equals(rhs):
                                raise CocycleViolation(f"t_{i}{k} != t_{i}{j} o t_{j}{k} at vertex {v}")

    def check_subbundle(self) -> None:
        """Transitions must carry the fiber target into itself (checked on spanning points)."""
        ev = self.target.evaluator
        pts = target_points(ev)
        seen = set()
        for (i, j), table in self.transitions.items():
            for v, t in table.items():
                if id(t) in seen:
                    continue
                seen.add(id(t))
                for z in pts:
                    if ev.clear_exact(t.apply(z)):
                        raise SubbundleViolation(f"transition ({i},{j}) at vertex {v} moves the target")

    def validate(self) -> None:
        self.check_overlaps()
        self.check_cocycle()
        self.check_subbundle()

    def on(self, K: SimplicialComplex) -> "BundleSpec":
        """Carry patches and transitions to a refinement of the base."""
        if K is self.base:
            return self
        ws = K.weights_to(self.base)
        patches = tuple(frozenset(v for v, w in enumerate(ws) if all(u in S for u in w))
                        for S in self.patches)
        trans = {}
        for (i, j), table in self.transitions.items():
            new = {}
            for v, w in enumerate(ws):
                if v in patches[i] and v in patches[j]:
                    new[v] = table[min(w)]
            trans[(i, j)] = new
        return BundleSpec(K, patches, self.fiber_atlas, self.target, trans)

    def to_json(self) -> dict:
        return {"patches": [sorted(S) for S in self.patches],
                "fiber_atlas": self.fiber_atlas.to_json(), "target": self.target.to_json(),
                "transitions": {f"{i},{j}": {str(v): t.to_json() for v, t in sorted(tab.items())}
                                for (i, j), tab in sorted(self.transitions.items()) if i != j}}


def target_points(evaluator) -> list:
    """A few exact points spanning the target (for the sub-bundle check)."""
    if hasattr(evaluator, "points"):
        return evaluator.points()
    A = fraction_array(evaluator.A)
    c = fraction_array(evaluator.c)
    p = len(c)
    Ainv = _inverse(A)
    pts = [c]
    for k in range(p - evaluator.q):
        pts.append(c + Ainv[:, k])
    return pts


@dataclass(frozen=True, eq=False)
class Section:
    """Patch representatives on a common base complex (rows outside a patch are unused)."""

    complex: SimplicialComplex
    reps: tuple

    def rep(self, i: int) -> PLMap:
        return PLMap(self.complex, self.reps[i])

    def coherence_residual(self, spec: BundleSpec) -> float | Fraction:
        """Largest overlap mismatch ``|t_ij(g_j) - g_i|`` at vertices and overlap midpoints."""
        spec = spec.on(self.complex)
        worst = Fraction(0) if is_exact(self.reps[0]) else 0.0
        for (i, j), table in spec.transitions.items():
            if i == j:
                continue
            both = spec.patches[i] & spec.patches[j]
            for s in self.complex.simplices:
                if len(s) > 2 or not all(v in both for v in s):
                    continue
                if len(s) == 2 and table[s[0]] is not table[s[1]]:
                    continue
                t = table[s[0]]
                w = Fraction(1, len(s))
                gi = sum((self.reps[i][v] * (w if is_exact(self.reps[i]) else float(w)) for v in s))
                gj = sum((self.reps[j][v] * (w if is_exact(self.reps[j]) else float(w)) for v in s))
                diff = t.apply(gj) - gi
                r = max(abs(x) for x in diff)
                worst = max(worst, r)
        return worst


def _fill_unused(reps: list, patches) -> None:
    """Rows outside a patch get a valid fiber point borrowed from another patch."""
    for i, S in enumerate(patches):
        for v in range(len(reps[i])):
            if v not in S:
                j = next(j for j, T in enumerate(patches) if v in T)
                reps[i][v] = reps[j][v]


def _patch_simplices(K: SimplicialComplex, S: frozenset) -> list:
    return [s for s in K.simplices if all(v in S for v in s)]


def base_partition(K: SimplicialComplex, patches: Sequence[frozenset], exact: bool):
    """``u_i`` from distances to the complement of each patch interior."""
    n = K.n_vertices
    m = np.zeros((n, len(patches)))
    for i, S in enumerate(patches):
        mask = np.zeros(n, dtype=bool)
        mask[list(S)] = True
        inner = K.interior(mask)
        if inner.all():
            m[:, i] = 1.0
        elif inner.any():
            m[:, i] = distance_field(K, np.flatnonzero(~inner)).values
            m[~inner, i] = 0.0
    total = m.sum(axis=1)
    if np.any(total == 0):
        bad = np.flatnonzero(total == 0)[:5].tolist()
        raise CoverageGap(f"base vertices {bad} lie in no patch interior")
    if not exact:
        return m / total[:, None]
    mf = fraction_array(m)
    out = np.empty(m.shape, dtype=object)
    for v in range(n):
        s = sum(mf[v], Fraction(0))
        for i in range(m.shape[1]):
            out[v, i] = mf[v, i] / s
    return out


@dataclass(frozen=True, eq=False)
class SectionResult:
    section: Section
    spec: BundleSpec
    bounds: tuple
    clearances: tuple
    residual: object
    partition: np.ndarray

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.bounds) and all(c.passed for c in self.clearances)

    def summary(self) -> dict:
        return {"bounds": [c.summary() for c in self.bounds],
                "clearances": [c.summary() for c in self.clearances],
                "coherence_residual": fmt(self.residual)}


def _clear_on(g: PLMap, evaluator, simplices) -> bool:
    if evaluator.exact_simplices:
        return all(evaluator.simplex_clear_exact([g.values[v] for v in s]) for s in simplices)
    return certify_clearance(g, evaluator, simplices=set(simplices)).passed


def _section_avoid(spec: BundleSpec, f: Section, tol: PLScalarField, seed, *,
                   max_retries: int = DEFAULT_MAX_RETRIES,
                   max_subdiv: int = DEFAULT_MAX_SUBDIV) -> SectionResult:
    if f.complex is not spec.base:
        raise PreconditionError("section must live on the bundle base")
    if spec.target.q <= spec.base.dim:
        from .errors import CodimensionTooSmall
        raise CodimensionTooSmall(f"fiber codimension {spec.target.q} does not exceed dim base")
    exact = is_exact(f.reps[0])
    part = base_partition(spec.base, spec.patches, exact)
    streams = _seed_sequence(seed).spawn(len(spec.patches))
    K = spec.base
    reps = [r.copy() for r in f.reps]
    cur_spec = spec
    for i in range(len(spec.patches)):
        _fill_unused(reps, spec.on(K).patches)
        u = transport_values(part[:, i], spec.base, K, exact=False)
        t = tol.on(K, exact=True).values
        ti = pass_tolerance(t, u, i)
        res = _glue(PLMap(K, reps[i]), PLScalarField(K, ti), spec.fiber_atlas, spec.target,
                    streams[i], max_retries=max_retries, max_subdiv=max_subdiv, certify=False)
        K2 = res.g.complex
        new_spec = spec.on(K2)
        moved_from = transport_values(reps[i], K, K2, exact=exact)
        reps = [transport_values(r, K, K2, exact=exact) for r in reps]
        reps[i] = res.g.values
        changed = [v for v in new_spec.patches[i]
                   if any(a != b for a, b in zip(res.g.values[v], moved_from[v]))]
        for j in range(len(spec.patches)):
            if j == i:
                continue
            table = new_spec.transitions[(j, i)]
            for v in changed:
                if v in new_spec.patches[j]:
                    reps[j][v] = table[v].apply(reps[i][v])
        K = K2
        cur_spec = new_spec
    out = Section(K, tuple(reps))
    bounds, clears = [], []
    for i, S in enumerate(cur_spec.patches):
        simplices = [s for s in _patch_simplices(K, S) if len(s) == K.dim + 1 or _is_facet_in(K, s, S)]
        fi = PLMap(f.complex, f.reps[i])
        bounds.append(certify_bound(fi, out.rep(i), tol, simplices=simplices))
        clears.append(certify_clearance(out.rep(i), spec.target.evaluator, simplices=simplices)
                      if spec.target.evaluator.exact_simplices else
                      certify_clearance(out.rep(i), spec.target.evaluator, simplices=set(_patch_simplices(K, S))))
    return SectionResult(out, cur_spec, tuple(bounds), tuple(clears), out.coherence_residual(spec), part)


def _is_facet_in(K: SimplicialComplex, s: tuple, S: frozenset) -> bool:
    """``s`` is maximal among simplices spanned by ``S``."""
    sset = set(s)
    for t in K.facets:
        if sset < set(t) and all(v in S for v in t):
            return False
    return True


def section_avoid_result(spec: BundleSpec, f: Section, eps: PLScalarField, C: VertexRegion | None = None,
                         seed=0, **budgets) -> SectionResult:
    spec.validate()
    if eps.complex is not f.complex:
        eps = eps.on(f.complex)
    if not all(e > 0 for e in eps.values):
        raise PreconditionError("tolerance must be strictly positive")
    tol = eps
    if C is not None and len(C):
        for i, S in enumerate(spec.patches):
            simplices = [s for s in C.simplices() if all(v in S for v in s)]
            if simplices and not _clear_on(f.rep(i), spec.target.evaluator, simplices):
                raise ConstraintViolated(f"the section meets the target over C in patch {i}")
        rc = RelativeConstraint.build(C)
        tol = PLScalarField(f.complex, np.array([to_fraction(e) * to_fraction(float(x))
                                                 for e, x in zip(eps.values, rc.eta.values)], dtype=object))
    res = _section_avoid(spec, f, tol, seed, **budgets)
    if not res.passed:
        bad = next(c for c in (*res.bounds, *res.clearances) if not c.passed)
        raise CertificationFailed(f"{bad.kind} certificate failed for a patch", bad)
    return res


def section_avoid(spec: BundleSpec, f: Section, eps: PLScalarField, C: VertexRegion | None = None,
                  seed=0, **budgets) -> Section:
    """Move the section off the sub-bundle fiberwise within ``eps`` (fixed on ``C``)."""
    return section_avoid_result(spec, f, eps, C, seed, **budgets).section


# --- fixtures -----------------------------------------------------------------------------------

def circle_base(n: int = 24) -> SimplicialComplex:
    from .complex import build_complex
    ang = 2 * np.pi * np.arange(n) / n
    pts = np.column_stack([np.cos(ang), np.sin(ang)])
    return build_complex(pts, [(k, (k + 1) % n) for k in range(n)], name="circle")


def mobius_bundle(n: int = 24, exact: bool = False) -> tuple[BundleSpec, Section]:
    """Circle base, fiber 3-space, target the first axis, a half-turn on one overlap.

    Returns the bundle and the zero section (which lies in the target).
    """
    from .charts import AffineSubspaceTarget, AffineChart
    K = circle_base(n)
    half = n // 2
    S0 = frozenset(list(range(0, half + 1)) + [n - 1])
    S1 = frozenset(list(range(half - 1, n)) + [0])
    ev = AffineSubspaceTarget(np.eye(3), np.zeros(3), 2, "axis")
    atlas = Atlas(EuclideanSpace(3), (AffineChart.identity(3, name="fiber"),))
    target = LipschitzTarget(2, (True,), ev, "axis")
    flip = np.diag([1, -1, -1]).astype(object)
    comps = {(0, 1): [((half - 1, half), flip, None), ((n - 1, 0), np.eye(3, dtype=int).astype(object), None)]}
    spec = BundleSpec.build(K, (S0, S1), atlas, target, comps)
    zero = np.zeros((n, 3))
    reps = (fraction_array(zero), fraction_array(zero)) if exact else (zero.copy(), zero.copy())
    return spec, Section(K, reps)
