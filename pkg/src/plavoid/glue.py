"""Global avoidance by gluing chart-local passes, plus unions and the relative variant.

Gluing runs one chart-local pass per chart, in atlas order.  Pass ``i`` gets
the tolerance ``(eps/2) v_i`` plus a small floor on the support of ``v_i``,
where ``(v_i)`` is a partition of unity subordinate to the pulled-back cover;
the floors sum to less than ``eps/4`` so the total movement stays below
``eps``.  Each pass leaves vertices outside the support of ``v_i``
bit-identical, so a simplex keeps the clearance certified by the last pass
that moved any of its vertices.

Unions of targets are handled by successive gluing runs whose tolerance is
capped by a fraction of the clearance already attained.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .avoid_core.certificates import Certificate, SimplexVerdict, certify_bound, merge
from .avoid_core.regions import DEFAULT_MAX_RETRIES, DEFAULT_MAX_SUBDIV
from .charts import Atlas, ChartPass, LipschitzTarget, _chart_pass, certify_bound_on, certify_clearance
from .complex import (PLMap, PLScalarField, SimplicialComplex, VertexRegion, distance_field,
                      refine_chain, subdivide, transport_values)
from .errors import (CertificationFailed, ConstraintViolated, CoverageGap, PreconditionError,
                     ZeroClearance)
from .exact import as_float, fmt, fraction_array, to_fraction

BUDGET_READING = "eps_i = sum_{j<=i} v_j * eps (summation index on v)"


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _like(values: np.ndarray, exact: bool) -> np.ndarray:
    return fraction_array(values) if exact else as_float(values)


# --- partition of unity -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Partition:
    """Vertex values ``v[:, i]`` of a partition of unity on ``complex``."""

    complex: SimplicialComplex
    values: np.ndarray
    interiors: np.ndarray

    def member(self, i: int) -> PLScalarField:
        return PLScalarField(self.complex, self.values[:, i].copy())

    def sums(self) -> list:
        return [sum(row, Fraction(0) if self.values.dtype == object else 0.0) for row in self.values]

    def is_exact_unity(self) -> bool:
        return self.values.dtype == object and all(s == 1 for s in self.sums())


def partition_of_unity(f: PLMap, atlas: Atlas, exact: bool | None = None,
                       max_rounds: int = 3) -> tuple[PLMap, Partition]:
    """Partition ``u_i = m_i / sum_j m_j`` with ``m_i`` the distance to the complement of the
    interior of ``f^{-1}(U_i)`` (``m_i = 1`` when that interior is everything).

    The carrier is subdivided when some vertex lies in no interior; the
    (possibly refined) map is returned alongside the partition.
    """
    exact = f.exact if exact is None else exact
    K0 = f.complex
    cur = f
    for _ in range(max_rounds + 1):
        K = cur.complex
        n = K.n_vertices
        interiors = np.zeros((n, len(atlas)), dtype=bool)
        m = np.zeros((n, len(atlas)))
        for i in range(len(atlas)):
            inner = K.interior(atlas.membership(i, cur.floats()))
            interiors[:, i] = inner
            if inner.all():
                m[:, i] = 1.0
            elif inner.any():
                d = distance_field(K, np.flatnonzero(~inner)).values
                # a component with no outside vertex is wholly inside the chart
                m[:, i] = np.where(np.isfinite(d), d, 1.0)
                m[~inner, i] = 0.0
        total = m.sum(axis=1)
        if np.all(total > 0):
            if exact:
                mf = fraction_array(m)
                vals = np.empty(m.shape, dtype=object)
                for v in range(n):
                    s = sum(mf[v], Fraction(0))
                    for i in range(m.shape[1]):
                        vals[v, i] = mf[v, i] / s
            else:
                vals = m / total[:, None]
            return cur, Partition(K, vals, interiors)
        cur = f.on(refine_chain(subdivide(K, 1), K0))
    bad = np.flatnonzero(m.sum(axis=1) == 0)[:5].tolist()
    raise CoverageGap(f"vertices {bad} lie in no chart interior after {max_rounds} subdivisions")


# --- gluing ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GlueResult:
    g: PLMap
    partition: Partition
    passes: tuple
    bound: Certificate
    clearance: Certificate
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.bound.passed and self.clearance.passed

    def summary(self) -> dict:
        return {
            "bound": self.bound.summary(),
            "clearance": self.clearance.summary(),
            "passes": [{"chart": p.chart_name, "moved": p.moved, "free_vertices": int(p.free.sum())}
                       for p in self.passes],
            "partition_exact_unity": self.partition.is_exact_unity(),
            "notes": self.notes,
        }


def pass_tolerance(tol, v, i: int):
    """``(tol/2) v + 2^{-(i+2)} (tol/2) [v > 0]`` vertexwise."""
    floor = Fraction(1, 2 ** (i + 2))
    out = []
    for t, x in zip(tol, v):
        half = to_fraction(t) / 2
        out.append(half * to_fraction(x) + (floor * half if x > 0 else 0))
    return np.array([float(x) for x in out])


def _glue(f: PLMap, tol: PLScalarField, atlas: Atlas, target: LipschitzTarget, seed, *,
          max_retries: int = DEFAULT_MAX_RETRIES, max_subdiv: int = DEFAULT_MAX_SUBDIV,
          certify: bool = True) -> GlueResult:
    """Gluing with a tolerance that may vanish at vertices (those are left untouched)."""
    if len(target.meets) != len(atlas):
        raise PreconditionError("target needs one meets-flag per chart")
    f0, part = partition_of_unity(f, atlas)
    tol0 = tol.on(f0.complex) if tol.complex is not f0.complex else tol
    streams = _seed_sequence(seed).spawn(len(atlas))
    cur = f0
    passes = []
    for i, chart in enumerate(atlas.charts):
        K = cur.complex
        v = transport_values(part.values[:, i], part.complex, K, exact=False)
        t = tol0.on(K, exact=True).values if tol0.exact else tol0.on(K).values
        ti = pass_tolerance(t, v, i)
        res = _chart_pass(cur, PLScalarField(K, ti), chart, target.q, target.meets[i],
                          np.random.default_rng(streams[i]),
                          max_retries=max_retries, max_subdiv=max_subdiv)
        passes.append(res)
        cur = res.g
    notes = {"budget_reading": BUDGET_READING, "n_charts": len(atlas)}
    if not certify:
        empty = Certificate("pointwise-bound", ())
        return GlueResult(cur, part, tuple(passes), empty, Certificate("clearance", ()), notes)
    bound = certify_bound_on(atlas.manifold, f, cur, tol)
    clear = certify_clearance(cur, target.evaluator)
    return GlueResult(cur, part, tuple(passes), bound, clear, notes)


def _raise_on_failure(res) -> None:
    for cert in (res.bound, res.clearance):
        if not cert.passed:
            raise CertificationFailed(f"{cert.kind} certificate failed", cert)


def _check_eps(f: PLMap, eps: PLScalarField) -> PLScalarField:
    if eps.complex is not f.complex:
        eps = eps.on(f.complex)
    if not all(e > 0 for e in eps.values):
        raise PreconditionError("tolerance must be strictly positive")
    return eps


def glue_avoid_result(f: PLMap, eps: PLScalarField, atlas: Atlas, target: LipschitzTarget,
                      seed=0, **budgets) -> GlueResult:
    eps = _check_eps(f, eps)
    res = _glue(f, eps, atlas, target, seed, **budgets)
    _raise_on_failure(res)
    return res


def glue_avoid(f: PLMap, eps: PLScalarField, atlas: Atlas, target: LipschitzTarget,
               seed=0, **budgets) -> PLMap:
    """Perturb ``f`` within ``eps`` so that it misses the closure of ``target``."""
    return glue_avoid_result(f, eps, atlas, target, seed, **budgets).g


# --- unions -------------------------------------------------------------------------------

def star_lower_bounds(g: PLMap, evaluator) -> np.ndarray:
    """Per vertex: the least simplex lower bound over its closed star."""
    K = g.complex
    gv = g.floats()
    out = np.full(K.n_vertices, np.inf)
    for s in K.facets:
        lb = evaluator.simplex_lower_bound(gv[list(s)])
        for v in s:
            out[v] = min(out[v], lb)
    return out


def _checked_bounds(g: PLMap, evaluator) -> np.ndarray:
    lb = star_lower_bounds(g, evaluator)
    if np.any(lb <= 0):
        bad = np.flatnonzero(lb <= 0)[:5].tolist()
        raise ZeroClearance(f"target {evaluator.name!r} reports zero clearance near vertices {bad} "
                            "of a map certified to avoid it")
    return lb


def _sample_lower_bounds(g: PLMap, evaluator) -> float:
    gv = g.floats()
    vals = [evaluator.lower_bound(sum(gv[v] * float(w) for v, w in zip(s, b)))
            for s, b in g.complex.sample_points()]
    return float(min(vals))


@dataclass(frozen=True, eq=False)
class UnionResult:
    g: PLMap
    stages: tuple
    bound: Certificate
    clearances: tuple
    safety: tuple
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.bound.passed and all(c.passed for c in self.clearances) and all(self.safety)

    def summary(self) -> dict:
        return {"bound": self.bound.summary(),
                "clearances": [c.summary() for c in self.clearances],
                "monotone_safety": list(self.safety), "notes": self.notes}


Targets = Sequence[tuple[Atlas, LipschitzTarget]]


def _finite_union(f: PLMap, tol: PLScalarField, targets: Targets, seed, **budgets) -> UnionResult:
    if not targets:
        raise PreconditionError("at least one target is required")
    streams = _seed_sequence(seed).spawn(len(targets))
    cur = f
    stages = []
    safety = []
    history = []
    for k, (atlas, target) in enumerate(targets):
        K = cur.complex
        t = as_float(tol.on(K).values) * 2.0 ** -(k + 1)
        if k:
            lbs = np.min([_checked_bounds(cur, tg.evaluator) for _, tg in targets[:k]], axis=0)
            t = np.minimum(t, 0.5 * lbs)
        t[as_float(tol.on(K).values) == 0] = 0.0
        res = _glue(cur, PLScalarField(K, t), atlas, target, streams[k], **budgets)
        _raise_on_failure(res)
        stages.append(res)
        cur = res.g
        # earlier targets must still be cleared
        ok = all(certify_clearance(cur, tg.evaluator).passed for _, tg in targets[:k])
        safety.append(ok)
        history.append([_sample_lower_bounds(cur, tg.evaluator) for _, tg in targets[:k + 1]])
        if not ok:
            raise CertificationFailed(f"pass {k} destroyed an earlier clearance")
    manifold = targets[0][0].manifold
    bound = certify_bound_on(manifold, f, cur, tol)
    clears = tuple(certify_clearance(cur, tg.evaluator) for _, tg in targets)
    return UnionResult(cur, tuple(stages), bound, clears, tuple(safety),
                       {"sample_clearances": [[fmt(x) for x in h] for h in history],
                        "share": "2^-(k+1) eps per target"})


def avoid_finite_union_result(f: PLMap, eps: PLScalarField, targets: Targets, seed=0,
                              **budgets) -> UnionResult:
    eps = _check_eps(f, eps)
    res = _finite_union(f, eps, targets, seed, **budgets)
    if not res.passed:
        cert = res.bound if not res.bound.passed else next(c for c in res.clearances if not c.passed)
        raise CertificationFailed(f"{cert.kind} certificate failed", cert)
    return res


def avoid_finite_union(f: PLMap, eps: PLScalarField, targets: Targets, seed=0, **budgets) -> PLMap:
    """Miss every target in ``targets``; later passes are capped by half the attained clearance."""
    return avoid_finite_union_result(f, eps, targets, seed, **budgets).g


# --- countable unions ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClearanceLedger:
    """Clearances ``delta[j][i][s]`` of stage ``j`` to target ``i`` at sample ``s`` (``j >= i``).

    Values are exact squared distances (or rational lower bounds for sphere
    targets) evaluated on the final carrier.
    """

    samples: tuple
    delta_sq: tuple
    eta_mins: tuple
    movement_factor: Fraction

    def ratio_checks(self, exact: bool = True, tol: float = 1e-12) -> list[dict]:
        rows = []
        for i in range(len(self.delta_sq)):
            for j in range(i, len(self.delta_sq) - 1):
                a, b = self.delta_sq[j][i], self.delta_sq[j + 1][i]
                c = 1 - Fraction(1, 2 ** (j + 2))
                if exact:
                    ok = all(y >= c * c * x for x, y in zip(a, b))
                else:
                    cf = float(c)
                    ok = all(np.sqrt(float(y)) >= cf * np.sqrt(float(x)) * (1 - tol) for x, y in zip(a, b))
                rows.append({"target": i, "stage": j, "pass": ok})
        return rows

    def positive(self) -> bool:
        return all(x > 0 for stage in self.delta_sq for row in stage for x in row)

    def holds(self, exact: bool = True) -> bool:
        return self.positive() and all(r["pass"] for r in self.ratio_checks(exact))

    def to_json(self, exact: bool = True) -> dict:
        mins = [[fmt(min(row)) for row in stage] for stage in self.delta_sq]
        return {"n_samples": len(self.samples), "min_delta_sq": mins,
                "eta_min": [fmt(x) for x in self.eta_mins],
                "movement_factor": fmt(self.movement_factor),
                "ratio_checks": self.ratio_checks(exact), "holds": self.holds(exact)}


@dataclass(frozen=True, eq=False)
class CountableResult:
    g: PLMap
    maps: tuple
    ledger: ClearanceLedger
    bound: Certificate
    clearances: tuple

    @property
    def passed(self) -> bool:
        return self.bound.passed and all(c.passed for c in self.clearances) and self.ledger.holds()


def movement_factor(k_max: int) -> Fraction:
    return Fraction(1, 2) + sum((Fraction(1, 2 ** (k + 2)) for k in range(k_max)), Fraction(0))


def _countable_union(f: PLMap, tol: PLScalarField, targets: Targets, k_max: int, seed,
                     **budgets) -> CountableResult:
    if k_max < 1:
        raise PreconditionError("k_max must be at least 1")
    if len(targets) < k_max + 1:
        raise PreconditionError(f"{k_max + 1} targets needed for k_max = {k_max}")
    targets = list(targets)[:k_max + 1]
    streams = _seed_sequence(seed).spawn(k_max + 1)
    atlas0, target0 = targets[0]
    res = _glue(f, PLScalarField(f.complex, as_float(tol.values) * 0.5), atlas0, target0, streams[0],
                **budgets)
    _raise_on_failure(res)
    maps = [res.g]
    eta_mins = []
    for k in range(k_max):
        g = maps[-1]
        K = g.complex
        lbs = np.min([_checked_bounds(g, tg.evaluator) for _, tg in targets[:k + 1]], axis=0)
        eps_k = as_float(tol.on(K).values)
        eta = 2.0 ** -(k + 2) * np.minimum(eps_k, lbs)
        eta[eps_k == 0] = 0.0
        eta_mins.append(float(eta[eta > 0].min()) if np.any(eta > 0) else 0.0)
        atlas, target = targets[k + 1]
        nxt = _glue(g, PLScalarField(K, eta), atlas, target, streams[k + 1], **budgets)
        _raise_on_failure(nxt)
        maps.append(nxt.g)
    final = maps[-1]
    Kf = final.complex
    samples = tuple(Kf.sample_points())
    per_stage = []
    for j, gj in enumerate(maps):
        vals = transport_values(gj.values, gj.complex, Kf, exact=True)
        pts = [sum((vals[v] * w for v, w in zip(s, b))) for s, b in samples]
        per_stage.append(tuple(tuple(targets[i][1].evaluator.clearance_sq_exact(x) for x in pts)
                               for i in range(j + 1)))
    ledger = ClearanceLedger(samples, tuple(per_stage), tuple(to_fraction(x) for x in eta_mins),
                             movement_factor(k_max))
    scaled = PLScalarField(tol.complex, np.array([to_fraction(e) * ledger.movement_factor
                                                  for e in tol.values], dtype=object))
    bound = certify_bound_on(atlas0.manifold, f, final, scaled)
    clears = tuple(certify_clearance(final, tg.evaluator) for _, tg in targets)
    return CountableResult(final, tuple(maps), ledger, bound, clears)


def avoid_countable_union_result(f: PLMap, eps: PLScalarField, targets: Targets, k_max: int,
                                 seed=0, **budgets) -> CountableResult:
    eps = _check_eps(f, eps)
    res = _countable_union(f, eps, targets, k_max, seed, **budgets)
    if not res.passed:
        raise CertificationFailed("countable-union certificates or ledger failed")
    return res


def avoid_countable_union(f: PLMap, eps: PLScalarField, targets: Targets, k_max: int, seed=0,
                          **budgets) -> tuple[PLMap, ClearanceLedger]:
    """Stages ``g_0..g_{k_max}``; stage ``k+1`` moves less than ``2^{-k-2}`` of the clearance."""
    res = avoid_countable_union_result(f, eps, targets, k_max, seed, **budgets)
    return res.g, res.ledger


# --- relative variant -------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RelativeConstraint:
    region: VertexRegion
    eta: PLScalarField

    @classmethod
    def build(cls, C: VertexRegion) -> "RelativeConstraint":
        K = C.complex
        if len(C) == 0:
            return cls(C, PLScalarField(K, np.ones(K.n_vertices)))
        d = distance_field(K, C).values
        finite = d[np.isfinite(d)]
        top = float(finite.max())
        if top == 0:
            return cls(C, PLScalarField(K, np.zeros(K.n_vertices)))
        eta = np.where(np.isfinite(d), d / top, 1.0)
        eta[list(C.indices)] = 0.0
        return cls(C, PLScalarField(K, eta))


def constraint_clear(f: PLMap, C: VertexRegion, targets: Targets) -> bool:
    """Exact check that ``f`` misses every target on the closed region ``C``."""
    simplices = C.simplices()
    if not simplices:
        return True
    for _, tg in targets:
        ev = tg.evaluator
        if ev.exact_simplices:
            if not all(ev.simplex_clear_exact([f.values[v] for v in s]) for s in simplices):
                return False
        else:
            cert = certify_clearance(f, ev, simplices=set(simplices))
            if not cert.passed:
                return False
    return True


def relative_avoid_result(f: PLMap, eps: PLScalarField, C: VertexRegion, targets: Targets, seed=0,
                          k_max: int | None = None, **budgets):
    """Avoid ``targets`` without touching ``f`` on the vertices of ``C``.

    ``targets`` is a list of ``(atlas, target)`` pairs; with ``k_max`` the
    countable-union schedule is used, otherwise the finite-union one (a
    single target reduces to plain gluing).
    """
    eps = _check_eps(f, eps)
    if C.complex is not f.complex:
        raise PreconditionError("constraint region must live on the map's carrier")
    if not constraint_clear(f, C, targets):
        raise ConstraintViolated("the map meets a target on the constrained region")
    rc = RelativeConstraint.build(C)
    tol = PLScalarField(f.complex, np.array([to_fraction(e) * to_fraction(float(x))
                                             for e, x in zip(eps.values, rc.eta.values)], dtype=object))
    if k_max is not None:
        res = _countable_union(f, tol, targets, k_max, seed, **budgets)
    else:
        res = _finite_union(f, tol, targets, seed, **budgets)
    if not res.passed:
        raise CertificationFailed("relative avoidance certificates failed")
    return res, rc


def relative_avoid(f: PLMap, eps: PLScalarField, C: VertexRegion, targets: Targets, seed=0,
                   k_max: int | None = None, **budgets) -> PLMap:
    return relative_avoid_result(f, eps, C, targets, seed, k_max, **budgets)[0].g
