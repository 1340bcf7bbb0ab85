"""Threshold regions and the randomized shrinking system.

A :class:`LevelSets` holds, per coordinate, the vertex sets on which a map is
large positive (``upper``) or large negative (``lower``).  A
:class:`ShrinkSystem` thickens each ``upper`` set by a random radius of the
graph distance field; vertices at distance at most ``r`` form ``inside`` and
those at distance at least ``r + delta`` form ``outside``.  The shells in
between must have no common point, which is checked per simplex: every
obligated simplex lies entirely inside or entirely outside for some index.
Failing simplices are handled by redrawing radii and by bisecting their
longest edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from ..complex import (PLMap, PLScalarField, SimplicialComplex, VertexRegion, bisect_edges,
                       distance_field, refine_chain, subdivide, transport_values)
from ..errors import PreconditionError, RetryBudgetExceeded, SubdivisionBudgetExceeded
from ..exact import as_float, fraction_array, is_exact
from .certificates import Certificate, SimplexVerdict, hull_avoids_origin

DEFAULT_MAX_RETRIES = 8
DEFAULT_MAX_SUBDIV = 40


@dataclass(frozen=True, eq=False)
class LevelSets:
    """Per-coordinate threshold sets on ``complex``.

    ``upper[v, i]`` marks vertices of F_i, ``lower[v, i]`` those of G_i.
    ``pinned`` vertices carry zero tolerance: they are forced into F_i or G_i
    by the sign of f_i, and ``dead[v, i]`` marks a pinned vertex with
    ``f_i == 0``, which belongs to neither.
    """

    complex: SimplicialComplex
    upper: np.ndarray
    lower: np.ndarray
    pinned: np.ndarray
    dead: np.ndarray
    thresholds: tuple = (Fraction(1), Fraction(1, 2))
    mode: str = "vertex"
    rounds: int = 0

    @property
    def n_indices(self) -> int:
        return self.upper.shape[1]

    def F(self, i: int) -> VertexRegion:
        return VertexRegion.from_mask(self.complex, self.upper[:, i])

    def G(self, i: int) -> VertexRegion:
        return VertexRegion.from_mask(self.complex, self.lower[:, i])


def _vertex_levels(K: SimplicialComplex, f: np.ndarray, tol: np.ndarray,
                   pinned: np.ndarray) -> LevelSets:
    free = ~pinned
    pos = np.asarray(f > 0, dtype=bool)
    neg = np.asarray(f < 0, dtype=bool)
    upper = (free[:, None] & np.asarray(f >= tol[:, None], dtype=bool)) | (pinned[:, None] & pos)
    lower = (free[:, None] & np.asarray(f <= -tol[:, None], dtype=bool)) | (pinned[:, None] & neg)
    dead = pinned[:, None] & ~pos & ~neg
    return LevelSets(K, upper, lower, pinned.copy(), dead)


def _strict_upper(K: SimplicialComplex, h: np.ndarray) -> np.ndarray:
    """Vertices with ``h >= 0`` plus every vertex of a simplex where ``h > 0`` somewhere."""
    out = np.asarray(h >= 0, dtype=bool).copy()
    hot = np.asarray(h > 0, dtype=bool)
    for s in K.facets:
        if any(hot[v] for v in s):
            out[list(s)] = True
    return out


def level_sets(f: PLMap, eps: PLScalarField, mode: str = "vertex", max_rounds: int = 6) -> LevelSets:
    """Vertex regions F_i, G_i sandwiched between the thresholds ``eps`` and ``eps/2``.

    ``mode="vertex"`` takes the vertices with ``f_i >= eps``; the spanned
    subcomplex then lies in ``{f_i >= eps}``.  ``mode="strict"`` also covers
    every point with ``f_i >= eps``: it adds the vertices of each simplex on
    which ``f_i - eps`` is somewhere positive and subdivides until all of them
    satisfy ``f_i >= eps/2``.
    """
    if mode not in ("vertex", "strict"):
        raise ValueError(f"unknown level-set mode {mode!r}")
    K = f.complex
    eps = eps.on(K) if eps.complex is not K else eps
    if not all(e > 0 for e in eps.values):
        raise PreconditionError("tolerance must be strictly positive")
    if mode == "vertex":
        fv = f.values if f.exact else as_float(f.values)
        ev = eps.values if eps.exact else as_float(eps.values)
        return _vertex_levels(K, fv, ev, np.zeros(K.n_vertices, dtype=bool))

    f_ex, e_ex = f.as_exact(), eps.as_exact()
    cur = K
    for rounds in range(max_rounds + 1):
        fv = transport_values(f_ex.values, K, cur, exact=True)
        ev = transport_values(e_ex.values, K, cur, exact=True)
        upper = np.zeros(fv.shape, dtype=bool)
        lower = np.zeros(fv.shape, dtype=bool)
        ok = True
        for i in range(fv.shape[1]):
            upper[:, i] = _strict_upper(cur, fv[:, i] - ev)
            lower[:, i] = _strict_upper(cur, -fv[:, i] - ev)
            ok &= all(fv[v, i] * 2 >= ev[v] for v in np.flatnonzero(upper[:, i]))
            ok &= all(-fv[v, i] * 2 >= ev[v] for v in np.flatnonzero(lower[:, i]))
        if ok:
            n = cur.n_vertices
            return LevelSets(cur, upper, lower, np.zeros(n, dtype=bool),
                             np.zeros(upper.shape, dtype=bool), mode="strict", rounds=rounds)
        cur = refine_chain(subdivide(cur, 1), K)
    raise SubdivisionBudgetExceeded(f"threshold sandwich not reached in {max_rounds} rounds")


# --- colouring ---------------------------------------------------------------

@dataclass(frozen=True)
class _Draw:
    side: np.ndarray   # +1 grow from F, -1 grow from G, 0 everything inside
    u: np.ndarray      # relative radius in (0, 1)


def _random_draw(levels: LevelSets, rng: np.random.Generator) -> _Draw:
    m = levels.n_indices
    side = np.zeros(m, dtype=np.int64)
    for i in range(m):
        has_f, has_g = levels.upper[:, i].any(), levels.lower[:, i].any()
        if has_f and has_g:
            side[i] = 1 if rng.random() < 0.5 else -1
        elif has_g:
            side[i] = -2
    u = rng.uniform(0.05, 0.95, size=m)
    return _Draw(side, u)


def _min_edge(K: SimplicialComplex) -> float:
    return float(K.edge_lengths.min()) if len(K.edge_lengths) else 1.0


def _colour(levels: LevelSets, draw: _Draw | None, radii=None, delta=None):
    """Return ``inside``, ``outside`` (N x m bool), radii and shell widths."""
    K = levels.complex
    n, m = levels.upper.shape
    inside = np.zeros((n, m), dtype=bool)
    outside = np.zeros((n, m), dtype=bool)
    r_out = np.zeros(m)
    d_out = np.zeros(m)
    h = _min_edge(K)
    for i in range(m):
        up, lo = levels.upper[:, i], levels.lower[:, i]
        live = ~levels.dead[:, i]
        if radii is not None:
            centre = up if up.any() else lo
            if not centre.any():
                inside[:, i] = live
                continue
            d = distance_field(K, np.flatnonzero(centre)).values
            r = float(radii[i])
            dl = float(delta[i]) if delta is not None else 1e-3 * h
            near, far = d <= r, d >= r + dl
            if up.any():
                inside[:, i], outside[:, i] = near & live, far & live
            else:
                inside[:, i], outside[:, i] = far & live, near & live
            r_out[i], d_out[i] = r, dl
            continue
        side = draw.side[i]
        if side == 0:
            inside[:, i] = live
            continue
        if side == -2:
            outside[:, i] = live
            continue
        centre, other = (up, lo) if side == 1 else (lo, up)
        d = distance_field(K, np.flatnonzero(centre)).values
        finite = d[np.isfinite(d)]
        reach = d[other]
        D = float(reach.min()) if np.isfinite(reach).any() else float(finite.max()) + 1.0
        r = float(draw.u[i]) * D
        dl = min(1e-3 * h, (D - r) / 4)
        near, far = d <= r, d >= r + dl
        if side == 1:
            inside[:, i], outside[:, i] = near & live, far & live
        else:
            inside[:, i], outside[:, i] = far & live, near & live
        r_out[i], d_out[i] = r, dl
    return inside, outside, r_out, d_out


def obligated_groups(K: SimplicialComplex, pinned: np.ndarray) -> list[np.ndarray]:
    """Simplices (grouped by size) with at least one free vertex."""
    free = ~pinned
    out = []
    for k in range(1, K.dim + 2):
        arr = K.simplices_of_size(k)
        if len(arr):
            keep = free[arr].any(axis=1)
            if keep.any():
                out.append(arr[keep])
    return out


def _mono(arr: np.ndarray, inside: np.ndarray, outside: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ins = inside[arr].all(axis=1)
    outs = outside[arr].all(axis=1)
    ok_i = ins | outs
    ok = ok_i.any(axis=1)
    idx = ok_i.argmax(axis=1)
    side = np.where(ins[np.arange(len(arr)), idx], 1, -1)
    return ok, idx, side


@dataclass(frozen=True, eq=False)
class ShrinkSystem:
    """Inside/outside colouring certified on ``complex``.

    ``V(i)`` is the open star of the inside vertices and ``W(i)`` the open
    star of the complement of the outside vertices.  ``accepted`` lists
    simplices touching pinned vertices that passed a direct hull check
    instead, and ``deferred`` those whose pinned face already meets zero.
    """

    levels: LevelSets
    inside: np.ndarray
    outside: np.ndarray
    radii: np.ndarray
    delta: np.ndarray
    accepted: frozenset = frozenset()
    deferred: frozenset = frozenset()
    attempts: int = 1
    subdivision_levels: int = 0

    @property
    def complex(self) -> SimplicialComplex:
        return self.levels.complex

    def V(self, i: int) -> VertexRegion:
        return VertexRegion.from_mask(self.complex, self.inside[:, i], "open-star")

    def W(self, i: int) -> VertexRegion:
        return VertexRegion.from_mask(self.complex, ~self.outside[:, i], "open-star")

    def check_nesting(self) -> bool:
        """F_i inside V_i, and the closure of V_i away from G_i and the outside set."""
        L = self.levels
        ok = bool(np.all(~L.upper | self.inside) and np.all(~L.lower | self.outside))
        return ok and not np.any(self.inside & self.outside)

    def certificate(self) -> Certificate:
        verdicts = []
        for arr in obligated_groups(self.complex, self.levels.pinned):
            ok, idx, side = _mono(arr, self.inside, self.outside)
            for j, s in enumerate(map(tuple, arr.tolist())):
                if s in self.deferred:
                    verdicts.append(SimplexVerdict(s, True, {"deferred": True}))
                elif ok[j]:
                    verdicts.append(SimplexVerdict(s, True, {"index": int(idx[j]),
                                                             "side": "inside" if side[j] > 0 else "outside"}))
                elif s in self.accepted:
                    verdicts.append(SimplexVerdict(s, True, {"hull": True}))
                else:
                    verdicts.append(SimplexVerdict(s, False, {}))
        return Certificate("shrink", tuple(verdicts))


def pinned_faces_unclear(K: SimplicialComplex, groups: list[np.ndarray], pinned: np.ndarray,
                         pinned_values) -> frozenset:
    """Obligated simplices whose pinned face has the origin in its value hull."""
    cache: dict[tuple[int, ...], bool] = {}
    out = set()
    for arr in groups:
        has_pin = pinned[arr].any(axis=1)
        for row in arr[has_pin].tolist():
            face = tuple(v for v in row if pinned[v])
            if face not in cache:
                cache[face] = not hull_avoids_origin([pinned_values[v] for v in face])[0]
            if cache[face]:
                out.add(tuple(row))
    return frozenset(out)


Acceptor = Callable[[LevelSets, np.ndarray, np.ndarray, list], list]


@dataclass
class _Stage:
    """Mutable refinement state: the current complex and data transported to it."""

    root: SimplicialComplex
    f_root: np.ndarray
    tol_root: np.ndarray
    K: SimplicialComplex = None
    f: np.ndarray = None
    tol: np.ndarray = None
    pinned: np.ndarray = None
    pin_values: object = None
    scale: float = 1.0

    def __post_init__(self):
        self.K = self.root
        self.f = as_float(self.f_root)
        self.tol = as_float(self.tol_root)
        self.pinned = np.array([t == 0 for t in self.tol_root], dtype=bool)
        self.pin_values = self.f_root

    def refine(self, edges):
        self.K = refine_chain(bisect_edges(self.K, edges), self.root)
        M = self.K.transport_matrix(self.root)
        self.f = np.asarray(M @ as_float(self.f_root))
        self.tol = np.asarray(M @ as_float(self.tol_root))
        n_old = len(self.pinned)
        self.pinned = np.concatenate([self.pinned, np.zeros(self.K.n_vertices - n_old, dtype=bool)])


def _refine_edges(K: SimplicialComplex, bad: list[tuple[int, ...]], pinned: np.ndarray) -> list:
    edges = []
    pos = K.vertices
    for s in bad:
        best, best_len = None, -1.0
        for a_i in range(len(s)):
            for b_i in range(a_i + 1, len(s)):
                a, b = s[a_i], s[b_i]
                if pinned[a] and pinned[b]:
                    continue
                ln = float(np.sum((pos[a] - pos[b]) ** 2))
                if ln > best_len:
                    best, best_len = (a, b), ln
        if best is not None:
            edges.append(best)
    return edges


def run_shrink(stage: _Stage, m: int, rng: np.random.Generator, *, radii=None, delta=None,
               max_retries: int = DEFAULT_MAX_RETRIES, max_subdiv: int = DEFAULT_MAX_SUBDIV,
               accept: Acceptor | None = None) -> ShrinkSystem:
    """Colour, certify, and refine ``stage`` in place until every obligated simplex is monochrome."""
    keep_draw = None
    attempts = 0
    worst: list = []
    for level in range(max_subdiv + 1):
        levels = _vertex_levels(stage.K, stage.f[:, :m], stage.scale * stage.tol, stage.pinned)
        groups = obligated_groups(stage.K, stage.pinned)
        deferred = pinned_faces_unclear(stage.K, groups, stage.pinned, stage.pin_values) \
            if stage.pinned.any() else frozenset()
        best = None
        n_tries = 1 if radii is not None else max_retries
        for t in range(n_tries):
            attempts += 1
            if radii is None:
                draw = keep_draw if (t == 0 and keep_draw is not None) else _random_draw(levels, rng)
            else:
                draw = None
            inside, outside, r, dl = _colour(levels, draw, radii, delta)
            bad = []
            for arr in groups:
                ok, _, _ = _mono(arr, inside, outside)
                bad.extend(s for s in map(tuple, arr[~ok].tolist()) if s not in deferred)
            accepted = frozenset()
            if bad and accept is not None:
                pinned_bad = [s for s in bad if stage.pinned[list(s)].any()]
                if pinned_bad:
                    passed = accept(levels, inside, outside, pinned_bad)
                    accepted = frozenset(passed)
                    bad = [s for s in bad if s not in accepted]
            if not bad:
                return ShrinkSystem(levels, inside, outside, r, dl, accepted, deferred,
                                    attempts, level)
            if best is None or len(bad) < len(best[0]):
                best = (bad, draw)
        worst = best[0]
        keep_draw = best[1]
        if level == max_subdiv:
            break
        edges = _refine_edges(stage.K, worst, stage.pinned)
        if not edges:
            break
        stage.refine(edges)
    raise RetryBudgetExceeded(
        f"{len(worst)} simplices lie in every shell after {attempts} draws", simplices=worst)


def shrink(levels: LevelSets, seed=0, *, radii=None, delta=None,
           max_retries: int = DEFAULT_MAX_RETRIES,
           max_subdiv: int = DEFAULT_MAX_SUBDIV) -> ShrinkSystem:
    """Certified shrinking system for ``levels``; refines the carrier as needed.

    With explicit ``radii`` (and optionally ``delta``) the shells are placed
    literally and only subdivision is used to reach the certificate.
    """
    K = levels.complex
    m = levels.n_indices
    if K.dim > m - 1:
        from ..errors import DimensionMismatch
        raise DimensionMismatch(f"{m} region pairs cannot shrink a {K.dim}-dimensional complex")
    if np.any(levels.upper & levels.lower):
        from ..errors import RegionsIntersect
        raise RegionsIntersect("F_i and G_i share a vertex")
    # encode the regions as a sign field so refinement can rebuild them
    sign = levels.upper.astype(float) - levels.lower.astype(float)
    # averages of +-1 reach the threshold 1 only when the whole carrier lies in the region
    stage = _Stage(K, sign, np.ones(K.n_vertices))
    rng = np.random.default_rng(seed)
    return run_shrink(stage, m, rng, radii=radii, delta=delta,
                      max_retries=max_retries, max_subdiv=max_subdiv)
