"""Finite geometric simplicial complexes and piecewise-linear data on them.

A complex produced by refinement remembers its parent together with exact
rational barycentric weights of every new vertex over the parent's vertices.
Fields and maps are transported along that chain, exactly when asked to, so a
PL object defined on a coarse complex can be compared with one defined on any
of its refinements without approximation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import BadIndex, CarrierMismatch, DegenerateSimplex, EmptyRegion, RegionsIntersect
from .exact import as_float, fraction_array, is_exact, to_fraction

Weights = dict  # vertex index -> Fraction


def _closure(facets: Iterable[Sequence[int]], n_vertices: int) -> tuple[tuple[int, ...], ...]:
    faces = {(v,) for v in range(n_vertices)}
    for s in facets:
        s = tuple(sorted(s))
        for k in range(1, len(s) + 1):
            faces.update(itertools.combinations(s, k))
    return tuple(sorted(faces, key=lambda t: (len(t), t)))


def _exact_rank(rows: list[list[Fraction]]) -> int:
    rows = [r[:] for r in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                f = rows[i][col] / rows[rank][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    """Embedded complex; ``simplices`` is downward closed and sorted by size.

    ``parent``/``weights`` are set on refinements: ``weights[v]`` maps parent
    vertex indices to the exact barycentric weight of vertex ``v``.
    """

    vertices: np.ndarray
    simplices: tuple[tuple[int, ...], ...]
    parent: "SimplicialComplex | None" = None
    weights: "tuple[Weights, ...] | None" = field(default=None, repr=False)
    name: str = ""

    def __repr__(self) -> str:
        return (f"SimplicialComplex(name={self.name!r}, n_vertices={self.n_vertices}, "
                f"n_simplices={len(self.simplices)}, dim={self.dim})")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def dim(self) -> int:
        return max(len(s) for s in self.simplices) - 1

    @cached_property
    def simplex_index(self) -> dict[tuple[int, ...], int]:
        return {s: i for i, s in enumerate(self.simplices)}

    @cached_property
    def facets(self) -> tuple[tuple[int, ...], ...]:
        """Maximal simplices."""
        covered = set()
        for s in self.simplices:
            if len(s) > 1:
                covered.update(itertools.combinations(s, len(s) - 1))
        return tuple(s for s in self.simplices if s not in covered)

    @cached_property
    def edges(self) -> np.ndarray:
        e = [s for s in self.simplices if len(s) == 2]
        return np.array(e, dtype=np.int64).reshape(-1, 2)

    def simplices_of_size(self, k: int) -> np.ndarray:
        return self._by_size.get(k, np.zeros((0, k), dtype=np.int64))

    @cached_property
    def _by_size(self) -> dict[int, np.ndarray]:
        groups: dict[int, list] = {}
        for s in self.simplices:
            groups.setdefault(len(s), []).append(s)
        return {k: np.array(v, dtype=np.int64) for k, v in groups.items()}

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        if len(self.edges) == 0:
            return np.zeros(0)
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return np.sqrt((d * d).sum(axis=1))

    @cached_property
    def graph(self) -> csr_matrix:
        n = self.n_vertices
        e = self.edges
        w = self.edge_lengths
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.concatenate([w, w])
        return csr_matrix((data, (rows, cols)), shape=(n, n))

    def interior(self, mask: np.ndarray) -> np.ndarray:
        """Vertices of ``mask`` whose whole closed star has its vertices in ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        out = mask.copy()
        e = self.edges
        if len(e):
            out[e[:, 0][~mask[e[:, 1]]]] = False
            out[e[:, 1][~mask[e[:, 0]]]] = False
        return out

    def ancestors(self) -> list["SimplicialComplex"]:
        chain, k = [], self
        while k is not None:
            chain.append(k)
            k = k.parent
        return chain

    def root(self) -> "SimplicialComplex":
        return self.ancestors()[-1]

    def is_refinement_of(self, other: "SimplicialComplex") -> bool:
        return any(k is other for k in self.ancestors())

    def weights_to(self, ancestor: "SimplicialComplex") -> tuple[Weights, ...]:
        """Exact barycentric weights of every vertex over ``ancestor``'s vertices."""
        if ancestor is self:
            return tuple({v: Fraction(1)} for v in range(self.n_vertices))
        cache = self.__dict__.setdefault("_weights_cache", {})
        key = id(ancestor)
        if key in cache:
            return cache[key]
        if self.parent is None:
            raise CarrierMismatch("complex is not a refinement of the given carrier")
        upper = self.parent.weights_to(ancestor)
        out = []
        for w in self.weights:
            acc: dict[int, Fraction] = {}
            for pv, pw in w.items():
                for av, aw in upper[pv].items():
                    acc[av] = acc.get(av, Fraction(0)) + pw * aw
            out.append(acc)
        result = tuple(out)
        cache[key] = result
        return result

    def transport_matrix(self, ancestor: "SimplicialComplex") -> csr_matrix:
        cache = self.__dict__.setdefault("_matrix_cache", {})
        if id(ancestor) not in cache:
            ws = self.weights_to(ancestor)
            rows, cols, data = [], [], []
            for i, w in enumerate(ws):
                for j, x in w.items():
                    rows.append(i)
                    cols.append(j)
                    data.append(float(x))
            cache[id(ancestor)] = csr_matrix((data, (rows, cols)),
                                             shape=(self.n_vertices, ancestor.n_vertices))
        return cache[id(ancestor)]

    def sample_points(self) -> list[tuple[tuple[int, ...], tuple[Fraction, ...]]]:
        """Vertices plus the barycenter of every simplex of positive dimension."""
        out = []
        for s in self.simplices:
            w = Fraction(1, len(s))
            out.append((s, tuple(w for _ in s)))
        return out

    def carrier_of(self, weights: Weights) -> tuple[int, ...]:
        return tuple(sorted(v for v, w in weights.items() if w != 0))


def build_complex(vertices, simplices, name: str = "") -> SimplicialComplex:
    """Validate raw vertex/simplex data and close it under taking faces."""
    raw = [list(v) for v in vertices]
    if not raw:
        raise BadIndex("complex needs at least one vertex")
    dims = {len(v) for v in raw}
    if len(dims) != 1:
        raise BadIndex("vertices have inconsistent dimensions")
    exact_pos = [[to_fraction(c) for c in v] for v in raw]
    pos = np.array([[float(c) for c in v] for v in exact_pos], dtype=float).reshape(len(raw), -1)
    n = len(raw)
    facets = set()
    for s in simplices:
        s = tuple(int(i) for i in s)
        if not s:
            continue
        if any(i < 0 or i >= n for i in s):
            raise BadIndex(f"simplex {s} references a vertex outside 0..{n - 1}")
        if len(set(s)) != len(s):
            raise BadIndex(f"simplex {s} repeats a vertex")
        s = tuple(sorted(s))
        if len(s) > 1:
            base = exact_pos[s[0]]
            rows = [[a - b for a, b in zip(exact_pos[i], base)] for i in s[1:]]
            if _exact_rank(rows) < len(s) - 1:
                raise DegenerateSimplex(f"simplex {s} has affinely dependent vertices")
        facets.add(s)
    return SimplicialComplex(pos, _closure(facets, n), name=name)


def _flatten(child: SimplicialComplex, ancestor: SimplicialComplex) -> SimplicialComplex:
    return SimplicialComplex(child.vertices, child.simplices, parent=ancestor,
                             weights=child.weights_to(ancestor), name=child.name)


def _barycentric_once(K: SimplicialComplex) -> SimplicialComplex:
    # original vertices keep their indices; barycenters of higher simplices follow
    new_index: dict[tuple[int, ...], int] = {}
    positions = [p for p in K.vertices]
    weights: list[Weights] = [{v: Fraction(1)} for v in range(K.n_vertices)]
    for s in K.simplices:
        if len(s) == 1:
            new_index[s] = s[0]
            continue
        new_index[s] = len(positions)
        positions.append(K.vertices[list(s)].mean(axis=0))
        weights.append({v: Fraction(1, len(s)) for v in s})

    chains: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for s in K.simplices:
        if len(s) == 1:
            chains[s] = [(new_index[s],)]
            continue
        acc = []
        for face in itertools.combinations(s, len(s) - 1):
            for c in chains[face]:
                acc.append(c + (new_index[s],))
        chains[s] = acc
    facets = [c for s in K.facets for c in chains[s]]
    verts = np.array(positions, dtype=float).reshape(len(positions), K.vertices.shape[1])
    return SimplicialComplex(verts, _closure(facets, len(positions)), parent=K,
                             weights=tuple(weights), name=K.name)


def subdivide(K: SimplicialComplex, rounds: int = 1) -> SimplicialComplex:
    """Barycentric subdivision applied ``rounds`` times.

    The result's ``parent`` is ``K`` and its ``weights`` are relative to ``K``
    (the refinement map).  ``rounds == 0`` returns ``K`` itself.
    """
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    out = K
    for _ in range(rounds):
        out = _barycentric_once(out)
    if rounds > 1:
        out = _flatten(out, K)
    return out


def bisect_edges(K: SimplicialComplex, edges: Iterable[Sequence[int]]) -> SimplicialComplex:
    """Stellar subdivision at the midpoint of each listed edge of ``K``.

    Local refinement: only simplices containing a bisected edge are split.
    Old vertices keep their indices; the result's parent is ``K``.
    """
    todo = []
    seen = set()
    for a, b in edges:
        e = (min(a, b), max(a, b))
        if e not in seen:
            seen.add(e)
            todo.append(e)
    if not todo:
        return K
    facets: dict[int, tuple[int, ...]] = dict(enumerate(K.facets))
    by_vertex: dict[int, set[int]] = {}
    for fid, s in facets.items():
        for v in s:
            by_vertex.setdefault(v, set()).add(fid)
    positions = list(K.vertices)
    weights: list[Weights] = [{v: Fraction(1)} for v in range(K.n_vertices)]
    next_fid = len(facets)
    for a, b in todo:
        shared = by_vertex.get(a, set()) & by_vertex.get(b, set())
        if not shared:
            continue
        m = len(positions)
        positions.append((positions[a] + positions[b]) / 2)
        w: dict[int, Fraction] = {}
        for src in (weights[a], weights[b]):
            for k, x in src.items():
                w[k] = w.get(k, Fraction(0)) + x / 2
        weights.append(w)
        for fid in list(shared):
            s = facets.pop(fid)
            for v in s:
                by_vertex[v].discard(fid)
            for drop in (b, a):
                new = tuple(sorted(m if v == drop else v for v in s))
                facets[next_fid] = new
                for v in new:
                    by_vertex.setdefault(v, set()).add(next_fid)
                next_fid += 1
    verts = np.array(positions, dtype=float).reshape(len(positions), K.vertices.shape[1])
    return SimplicialComplex(verts, _closure(facets.values(), len(positions)), parent=K,
                             weights=tuple(weights), name=K.name)


def refine_chain(K: SimplicialComplex, ancestor: SimplicialComplex) -> SimplicialComplex:
    """Collapse a multi-step refinement so that ``parent`` is ``ancestor``."""
    if K is ancestor or K.parent is ancestor:
        return K
    return _flatten(K, ancestor)


def transport_values(values: np.ndarray, src: SimplicialComplex, dst: SimplicialComplex,
                     exact: bool | None = None) -> np.ndarray:
    """Re-express vertex data of ``src`` on its refinement ``dst`` by affine interpolation."""
    values = np.asarray(values) if not is_exact(values) else values
    if exact is None:
        exact = is_exact(values)
    if dst is src:
        return fraction_array(values) if exact and not is_exact(values) else values.copy()
    if not dst.is_refinement_of(src):
        raise CarrierMismatch("target complex does not refine the source carrier")
    if not exact:
        mat = dst.transport_matrix(src)
        return np.asarray(mat @ as_float(values))
    src_vals = values if is_exact(values) else fraction_array(values)
    ws = dst.weights_to(src)
    tail = src_vals.shape[1:]
    out = np.empty((dst.n_vertices,) + tail, dtype=object)
    for i, w in enumerate(ws):
        acc = None
        for j, x in w.items():
            term = src_vals[j] * x
            acc = term if acc is None else acc + term
        out[i] = acc
    return out


@dataclass(frozen=True, eq=False)
class PLScalarField:
    complex: SimplicialComplex
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.complex.n_vertices:
            raise CarrierMismatch(
                f"field has {len(self.values)} values for {self.complex.n_vertices} vertices")

    @property
    def exact(self) -> bool:
        return is_exact(self.values)

    def on(self, K: SimplicialComplex, exact: bool | None = None) -> "PLScalarField":
        return PLScalarField(K, transport_values(self.values, self.complex, K, exact))

    def as_exact(self) -> "PLScalarField":
        return self if self.exact else PLScalarField(self.complex, fraction_array(self.values))

    def floats(self) -> np.ndarray:
        return as_float(self.values)

    def is_strictly_positive(self) -> bool:
        return all(v > 0 for v in self.values)

    def at(self, simplex: Sequence[int], bary: Sequence) -> object:
        return sum((self.values[v] * w for v, w in zip(simplex, bary)), 0)


@dataclass(frozen=True, eq=False)
class PLMap:
    """Vertex values of an affine-per-simplex map into ``target_dim``-space."""

    complex: SimplicialComplex
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or len(self.values) != self.complex.n_vertices:
            raise CarrierMismatch(
                f"map values of shape {self.values.shape} do not match "
                f"{self.complex.n_vertices} vertices")
        if not self.exact and not np.all(np.isfinite(self.values)):
            raise ValueError("map values must be finite")

    @property
    def target_dim(self) -> int:
        return self.values.shape[1]

    @property
    def exact(self) -> bool:
        return is_exact(self.values)

    def on(self, K: SimplicialComplex, exact: bool | None = None) -> "PLMap":
        return PLMap(K, transport_values(self.values, self.complex, K, exact))

    def as_exact(self) -> "PLMap":
        return self if self.exact else PLMap(self.complex, fraction_array(self.values))

    def floats(self) -> np.ndarray:
        return as_float(self.values)

    def at(self, simplex: Sequence[int], bary: Sequence) -> np.ndarray:
        return sum((self.values[v] * w for v, w in zip(simplex, bary)))


@dataclass(frozen=True, eq=False)
class VertexRegion:
    """A vertex set read as the spanned closed subcomplex or as its open star."""

    complex: SimplicialComplex
    indices: frozenset
    mode: str = "closed"

    def __post_init__(self):
        if self.mode not in ("closed", "open-star"):
            raise ValueError(f"unknown region mode {self.mode!r}")
        bad = [i for i in self.indices if not 0 <= i < self.complex.n_vertices]
        if bad:
            raise BadIndex(f"region vertices {sorted(bad)} out of range")

    @classmethod
    def of(cls, K: SimplicialComplex, indices: Iterable[int], mode: str = "closed") -> "VertexRegion":
        return cls(K, frozenset(int(i) for i in indices), mode)

    @classmethod
    def from_mask(cls, K: SimplicialComplex, mask, mode: str = "closed") -> "VertexRegion":
        return cls(K, frozenset(np.flatnonzero(np.asarray(mask, dtype=bool)).tolist()), mode)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.complex.n_vertices, dtype=bool)
        if self.indices:
            m[list(self.indices)] = True
        return m

    def __len__(self) -> int:
        return len(self.indices)

    def simplices(self) -> list[tuple[int, ...]]:
        """Closed mode: simplices spanned by the set.  Open-star: simplices meeting it."""
        if self.mode == "closed":
            return [s for s in self.complex.simplices if all(v in self.indices for v in s)]
        return [s for s in self.complex.simplices if any(v in self.indices for v in s)]

    def on(self, K: SimplicialComplex) -> "VertexRegion":
        """Carry the region to a refinement: a new vertex belongs iff its carrier does."""
        if K is self.complex:
            return self
        ws = K.weights_to(self.complex)
        if self.mode == "closed":
            keep = [i for i, w in enumerate(ws) if all(v in self.indices for v in w)]
        else:
            keep = [i for i, w in enumerate(ws) if any(v in self.indices for v in w)]
        return VertexRegion(K, frozenset(keep), self.mode)


def distance_field(K: SimplicialComplex, region) -> PLScalarField:
    """Graph-geodesic distance along edges (Euclidean edge lengths) to ``region``.

    Zero exactly on the region's vertices; ``inf`` on components it misses.
    """
    idx = sorted(region.indices) if isinstance(region, VertexRegion) else sorted(int(i) for i in region)
    if not idx:
        raise EmptyRegion("distance to an empty region is undefined")
    d = dijkstra(K.graph, directed=False, indices=idx, min_only=True)
    d = np.asarray(d, dtype=float)
    d[idx] = 0.0
    return PLScalarField(K, d)


def urysohn(K: SimplicialComplex, F, G, lo=0.0, hi=1.0) -> PLScalarField:
    """Vertexwise ``lo + (hi-lo) d_F/(d_F+d_G)``: ``lo`` on F, ``hi`` on G.

    With an empty region the constant midpoint field is returned.
    """
    f_idx = set(F.indices if isinstance(F, VertexRegion) else F)
    g_idx = set(G.indices if isinstance(G, VertexRegion) else G)
    if f_idx & g_idx:
        raise RegionsIntersect(f"regions share vertices {sorted(f_idx & g_idx)[:5]}")
    n = K.n_vertices
    if not f_idx or not g_idx:
        return PLScalarField(K, np.full(n, (lo + hi) / 2, dtype=float))
    dF = distance_field(K, f_idx).values
    dG = distance_field(K, g_idx).values
    out = np.empty(n, dtype=float)
    for v in range(n):
        a, b = dF[v], dG[v]
        if v in f_idx:
            out[v] = lo
        elif v in g_idx:
            out[v] = hi
        elif np.isinf(a) and np.isinf(b):
            out[v] = (lo + hi) / 2
        elif np.isinf(a):
            out[v] = hi
        elif np.isinf(b):
            out[v] = lo
        else:
            out[v] = lo + (hi - lo) * (a / (a + b))
    return PLScalarField(K, out)
