"""Manifold atlases, codimension-q targets and the chart-local avoidance pass.

Maps into a manifold Y are stored as PL maps into Y's ambient coordinates:
Euclidean space is its own ambient space, and a sphere is read through
radial projection (a vertex value ``y`` stands for ``y/|y|``).  A chart sends
its domain onto an open image region of p-space and is given with a declared
Lipschitz constant for its inverse.

A target Z is described per chart: where a chart meets Z, the chart image of
Z lies in the subspace of vectors whose last ``q`` coordinates vanish.  The
chart-local pass pushes those ``q`` coordinates off zero with the kernel,
keeps the leading ``p - q`` coordinates, and maps back.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .avoid_core.certificates import Certificate, SimplexVerdict, certify_bound, hull_avoids_origin
from .avoid_core.kernel import KernelResult, _kernel, as_rng
from .avoid_core.regions import DEFAULT_MAX_RETRIES, DEFAULT_MAX_SUBDIV
from .complex import PLMap, PLScalarField, SimplicialComplex, transport_values
from .errors import CodimensionTooSmall, PointOutsideImage, PreconditionError
from .exact import as_float, fmt, fraction_array, is_exact, min_norm_point, to_fraction


def _fr_row(y) -> list[Fraction]:
    return [to_fraction(c) for c in y]


def _dot(a, b):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def _round_up(x: float) -> float:
    return math.nextafter(x, math.inf)


def _round_down(x: float) -> float:
    return math.nextafter(x, -math.inf)


# --- manifolds -----------------------------------------------------------------

@dataclass(frozen=True)
class EuclideanSpace:
    dim: int
    kind: str = field(default="euclidean", init=False)

    @property
    def ambient_dim(self) -> int:
        return self.dim

    def normalize(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float)

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(as_float(a) - as_float(b)))

    def within(self, a, b, eps) -> bool:
        """Exact ``d(a, b) < eps`` (``a == b`` when ``eps == 0``)."""
        a, b, eps = _fr_row(a), _fr_row(b), to_fraction(eps)
        d2 = sum(((x - y) ** 2 for x, y in zip(a, b)), Fraction(0))
        return d2 == 0 if eps == 0 else (eps > 0 and d2 < eps * eps)

    def to_json(self) -> dict:
        return {"kind": "euclidean", "dim": self.dim}


@dataclass(frozen=True)
class Sphere:
    """Round m-sphere in (m+1)-space with the chordal metric times ``sqrt(scale_sq)``."""

    dim: int
    scale_sq: Fraction = Fraction(1)
    kind: str = field(default="sphere", init=False)

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    @property
    def scale(self) -> float:
        return math.sqrt(self.scale_sq)

    def normalize(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return y / np.linalg.norm(y, axis=-1, keepdims=True)

    def distance(self, a, b) -> float:
        return self.scale * float(np.linalg.norm(self.normalize(as_float(a)) - self.normalize(as_float(b))))

    def within(self, a, b, eps) -> bool:
        """Exact ``d(a/|a|, b/|b|) < eps`` through the cosine, without square roots."""
        a, b, eps = _fr_row(a), _fr_row(b), to_fraction(eps)
        aa, bb, ab = _dot(a, a), _dot(b, b), _dot(a, b)
        if aa == 0 or bb == 0:
            return False
        if eps == 0:
            return ab > 0 and ab * ab == aa * bb
        if eps < 0:
            return False
        # chord^2 = 2 - 2 cos  <  eps^2 / scale^2   <=>   cos > t
        t = 1 - eps * eps / (2 * to_fraction(self.scale_sq))
        if ab > 0 and t <= 0:
            return True
        if ab <= 0 and t >= 0:
            return False
        if ab > 0:
            return ab * ab > t * t * aa * bb
        return ab * ab < t * t * aa * bb

    def to_json(self) -> dict:
        return {"kind": "sphere", "dim": self.dim, "scale_sq": fmt(to_fraction(self.scale_sq))}


# --- image regions ---------------------------------------------------------------

@dataclass(frozen=True)
class AllSpace:
    kind: str = field(default="all", init=False)

    def contains(self, a) -> bool:
        return bool(np.all(np.isfinite(a)))

    def clearance(self, a) -> float:
        return 1.0

    def to_json(self) -> dict:
        return {"kind": "all"}


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float
    kind: str = field(default="ball", init=False)

    def contains(self, a) -> bool:
        return bool(np.linalg.norm(np.asarray(a, float) - np.asarray(self.center, float)) < self.radius)

    def clearance(self, a) -> float:
        r = _round_up(float(np.linalg.norm(np.asarray(a, float) - np.asarray(self.center, float))))
        return _round_down(self.radius - r)

    def to_json(self) -> dict:
        return {"kind": "ball", "center": [fmt(float(c)) for c in self.center], "radius": fmt(float(self.radius))}


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple
    kind: str = field(default="box", init=False)

    def contains(self, a) -> bool:
        a = np.asarray(a, float)
        return bool(np.all(a > np.asarray(self.lo, float)) and np.all(a < np.asarray(self.hi, float)))

    def clearance(self, a) -> float:
        a = np.asarray(a, float)
        margin = min(np.min(a - np.asarray(self.lo, float)), np.min(np.asarray(self.hi, float) - a))
        return _round_down(float(margin))

    def to_json(self) -> dict:
        return {"kind": "box", "lo": [fmt(float(c)) for c in self.lo], "hi": [fmt(float(c)) for c in self.hi]}


def clearance_to_complement(chart, a) -> float:
    """Distance from ``a`` to the complement of the chart image (1 for the whole space)."""
    a = np.asarray(a, dtype=float)
    if not chart.image.contains(a):
        raise PointOutsideImage(f"point {a.tolist()} is not inside the image of chart {chart.name!r}")
    c = chart.image.clearance(a)
    if c <= 0:
        raise PointOutsideImage(f"point {a.tolist()} is on the boundary of chart {chart.name!r}")
    return c


# --- charts --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffineChart:
    """``a = A (y - c)`` on Euclidean space; the inverse is Lipschitz with constant ``lipschitz``."""

    A: np.ndarray
    c: np.ndarray
    image: object = AllSpace()
    lipschitz: float = 1.0
    name: str = "affine"
    safety: float = field(default=1.0, init=False)

    @classmethod
    def identity(cls, p: int, center=None, image=None, name: str = "identity") -> "AffineChart":
        c = np.zeros(p) if center is None else np.asarray(center, dtype=float)
        return cls(np.eye(p), c, image or AllSpace(), 1.0, name)

    @property
    def p(self) -> int:
        return len(self.c)

    def in_domain(self, Y: np.ndarray) -> np.ndarray:
        return np.ones(len(Y), dtype=bool)

    def forward(self, Y: np.ndarray) -> np.ndarray:
        return (np.asarray(Y, float) - self.c) @ self.A.T

    def inverse(self, Aa: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.A, np.asarray(Aa, float).T).T + self.c

    def to_json(self) -> dict:
        return {"kind": "affine", "name": self.name, "A": [[fmt(float(x)) for x in r] for r in self.A],
                "c": [fmt(float(x)) for x in self.c], "image": self.image.to_json(),
                "lipschitz": fmt(float(self.lipschitz))}


@dataclass(frozen=True, eq=False)
class StereographicChart:
    """Projection of the sphere from ``pole`` onto the span of ``frame``.

    ``frame`` has orthonormal columns orthogonal to the unit vector ``pole``;
    the chart origin is the antipode of the pole.  The inverse is 2-Lipschitz
    for the unit chordal metric, so ``2 * scale`` for the scaled one.
    """

    pole: np.ndarray
    frame: np.ndarray
    image: object = AllSpace()
    scale: float = 1.0
    name: str = "stereo"
    safety: float = field(default=0.5, init=False)

    @property
    def p(self) -> int:
        return self.frame.shape[1]

    @property
    def lipschitz(self) -> float:
        return 2.0 * self.scale

    def in_domain(self, Y: np.ndarray) -> np.ndarray:
        Yn = Y / np.linalg.norm(Y, axis=1, keepdims=True)
        return 1.0 - Yn @ self.pole > 1e-9

    def forward(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, float)
        Yn = Y / np.linalg.norm(Y, axis=1, keepdims=True)
        return (Yn @ self.frame) / (1.0 - Yn @ self.pole)[:, None]

    def inverse(self, Aa: np.ndarray) -> np.ndarray:
        Aa = np.asarray(Aa, float)
        s = np.sum(Aa * Aa, axis=1, keepdims=True)
        return (2.0 * Aa @ self.frame.T + (s - 1.0) * self.pole) / (s + 1.0)

    def to_json(self) -> dict:
        return {"kind": "stereographic", "name": self.name,
                "pole": [fmt(float(x)) for x in self.pole],
                "frame": [[fmt(float(x)) for x in r] for r in self.frame],
                "image": self.image.to_json(), "scale": fmt(float(self.scale))}


def orthonormal_frame(pole: np.ndarray) -> np.ndarray:
    """Columns completing ``pole`` to an orthonormal basis (deterministic)."""
    pole = np.asarray(pole, float)
    q, _ = np.linalg.qr(np.column_stack([pole, np.eye(len(pole))]))
    basis = q[:, 1:len(pole)]
    return basis * np.sign(np.sum(basis, axis=0, keepdims=True) + 1e-300)


def validate_chart(chart, samples: int = 64, seed: int = 0, tol: float = 1e-9, radius: float = 2.0) -> None:
    """Spot-check ``forward(inverse(a)) == a`` and the declared Lipschitz constant."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-radius, radius, size=(samples, chart.p))
    pts = np.array([a for a in pts if chart.image.contains(a)])
    if len(pts) < 2:
        return
    back = chart.forward(chart.inverse(pts))
    if np.max(np.abs(back - pts)) > tol * (1 + np.max(np.abs(pts))):
        raise PreconditionError(f"chart {chart.name!r}: forward(inverse(a)) != a")
    Y = chart.inverse(pts)
    for a, b, ya, yb in zip(pts[:-1], pts[1:], Y[:-1], Y[1:]):
        if isinstance(chart, StereographicChart):
            d = chart.scale * np.linalg.norm(ya - yb)
        else:
            d = np.linalg.norm(ya - yb)
        if d > chart.lipschitz * np.linalg.norm(a - b) * (1 + tol):
            raise PreconditionError(f"chart {chart.name!r}: declared Lipschitz constant too small")


@dataclass(frozen=True, eq=False)
class Atlas:
    manifold: object
    charts: tuple

    def __post_init__(self):
        for ch in self.charts:
            if ch.p != self.manifold.dim:
                raise PreconditionError(f"chart {ch.name!r} has dimension {ch.p}, manifold {self.manifold.dim}")

    def __len__(self) -> int:
        return len(self.charts)

    def membership(self, i: int, Y: np.ndarray) -> np.ndarray:
        """Which ambient points lie in the domain of chart ``i`` (image test included)."""
        chart = self.charts[i]
        Y = as_float(Y)
        ok = chart.in_domain(Y)
        out = np.zeros(len(Y), dtype=bool)
        if ok.any():
            A = chart.forward(Y[ok])
            out[np.flatnonzero(ok)] = [chart.image.contains(a) for a in A]
        return out

    def to_json(self) -> dict:
        return {"manifold": self.manifold.to_json(), "charts": [c.to_json() for c in self.charts]}


# --- targets ---------------------------------------------------------------------

def _min_norm_float(points: np.ndarray) -> float:
    """Float minimum norm over the hull of a few points (face enumeration)."""
    P = np.asarray(points, float)
    best = np.inf
    k = len(P)
    for size in range(1, k + 1):
        for sub in itertools.combinations(range(k), size):
            base = P[sub[0]]
            if size == 1:
                best = min(best, float(base @ base))
                continue
            D = P[list(sub[1:])] - base
            G = D @ D.T
            try:
                mu = np.linalg.solve(G, -D @ base)
            except np.linalg.LinAlgError:
                continue
            lam0 = 1.0 - mu.sum()
            if lam0 < -1e-15 or np.any(mu < -1e-15):
                continue
            x = base + mu @ D
            best = min(best, float(x @ x))
    return best


@dataclass(frozen=True, eq=False)
class AffineSubspaceTarget:
    """``Z = {y : last q coordinates of A (y - c) vanish}`` in Euclidean space."""

    A: np.ndarray
    c: np.ndarray
    q: int
    name: str = "subspace"
    exact_simplices: bool = field(default=True, init=False)

    @classmethod
    def point(cls, z, name: str = "point") -> "AffineSubspaceTarget":
        z = np.asarray(z, float)
        return cls(np.eye(len(z)), z, len(z), name)

    @property
    def a_norm(self) -> float:
        if np.array_equal(self.A, np.eye(len(self.A))):
            return 1.0
        return _round_up(float(np.linalg.norm(self.A, 2)))

    def _proj(self, y) -> np.ndarray:
        return ((as_float(np.atleast_2d(y)) - self.c) @ self.A.T)[:, -self.q:]

    def _proj_exact(self, y) -> list[Fraction]:
        yy = [to_fraction(v) - to_fraction(float(c)) for v, c in zip(y, self.c)]
        rows = self.A[-self.q:]
        return [sum((to_fraction(float(a)) * v for a, v in zip(r, yy)), Fraction(0)) for r in rows]

    def lower_bound(self, y) -> float:
        return _round_down(float(np.linalg.norm(self._proj(y)[0])) / self.a_norm) if self.q else 0.0

    def clearance_sq_exact(self, y) -> Fraction:
        v = self._proj_exact(y)
        return _dot(v, v) / to_fraction(self.a_norm) ** 2

    def simplex_lower_bound(self, Y) -> float:
        d2 = _min_norm_float(self._proj(Y))
        return max(0.0, (math.sqrt(d2) * (1 - 1e-9)) / self.a_norm)

    def clear_exact(self, y) -> bool:
        return any(v != 0 for v in self._proj_exact(y))

    def simplex_clear_exact(self, Y) -> bool:
        return hull_avoids_origin([self._proj_exact(y) for y in Y])[0]

    def chart(self, image=None) -> AffineChart:
        """An affine chart in which Z sits in the last-q-zero subspace."""
        K = float(np.linalg.norm(np.linalg.inv(self.A), 2))
        if np.array_equal(self.A, np.eye(len(self.A))):
            K = 1.0
        return AffineChart(self.A, self.c, image or AllSpace(), _round_up(K) if K != 1.0 else 1.0,
                           name=f"{self.name}-chart")

    def to_json(self) -> dict:
        return {"kind": "affine-subspace", "name": self.name, "q": self.q,
                "A": [[fmt(float(x)) for x in r] for r in self.A], "c": [fmt(float(x)) for x in self.c]}


@dataclass(frozen=True, eq=False)
class SpherePointTarget:
    """A single point ``z`` of a sphere (unit vector in ambient coordinates)."""

    z: np.ndarray
    scale_sq: Fraction = Fraction(1)
    name: str = "sphere-point"
    exact_simplices: bool = field(default=False, init=False)

    @property
    def q(self) -> int:
        return len(self.z) - 1

    def lower_bound(self, y) -> float:
        y = as_float(y)
        d = np.linalg.norm(y / np.linalg.norm(y) - self.z)
        return _round_down(math.sqrt(self.scale_sq) * float(d) * (1 - 1e-12))

    def clearance_sq_exact(self, y) -> Fraction:
        """Rational lower bound on the squared distance: the ray through z instead of z."""
        y, z = _fr_row(y), _fr_row(self.z)
        yy, yz, zz = _dot(y, y), _dot(y, z), _dot(z, z)
        ray = yy - (yz * yz / zz if yz > 0 else 0)
        return to_fraction(self.scale_sq) * ray / yy

    def simplex_lower_bound(self, Y) -> float:
        Y = as_float(Y)
        rmax = float(np.max(np.linalg.norm(Y, axis=1)))
        T = rmax + 1.0
        pts = np.vstack([Y, Y - T * self.z])
        d2 = _min_norm_float(pts)
        return max(0.0, math.sqrt(self.scale_sq) * math.sqrt(d2) * (1 - 1e-9) / rmax)

    def clear_exact(self, y) -> bool:
        y, z = _fr_row(y), _fr_row(self.z)
        if all(v == 0 for v in y):
            return False
        if _dot(y, z) <= 0:
            return True
        return any(y[i] * z[j] != y[j] * z[i] for i in range(len(y)) for j in range(i + 1, len(y)))

    def to_json(self) -> dict:
        return {"kind": "sphere-point", "name": self.name, "z": [fmt(float(x)) for x in self.z],
                "scale_sq": fmt(to_fraction(self.scale_sq))}


@dataclass(frozen=True, eq=False)
class LipschitzTarget:
    """Codimension ``q`` with per-chart ``meets`` flags and a distance evaluator."""

    q: int
    meets: tuple
    evaluator: object
    name: str = "Z"

    def __post_init__(self):
        if self.q < 1:
            raise PreconditionError("codimension must be at least 1")

    def validate(self, atlas: Atlas, samples: Sequence | None = None, tol: float = 1e-12) -> None:
        """Check that sampled points of Z land on the last-q-zero subspace of meeting charts."""
        if len(self.meets) != len(atlas):
            raise PreconditionError("one meets-flag per chart required")
        for y in samples or ():
            y = np.atleast_2d(np.asarray(y, float))
            if self.evaluator.lower_bound(y[0]) > tol:
                raise PreconditionError(f"sample {y[0].tolist()} is not on the target")
            for i, ch in enumerate(atlas.charts):
                if atlas.membership(i, y)[0]:
                    if not self.meets[i]:
                        raise PreconditionError(f"target meets chart {ch.name!r} but is flagged otherwise")
                    tail = ch.forward(y)[0, ch.p - self.q:]
                    if np.max(np.abs(tail)) > tol:
                        raise PreconditionError(f"target is not a coordinate subspace in chart {ch.name!r}")

    def to_json(self) -> dict:
        return {"name": self.name, "q": self.q, "meets": list(self.meets),
                "evaluator": self.evaluator.to_json()}


def euclidean_point_target(z, name: str = "point") -> tuple[Atlas, LipschitzTarget]:
    """Single-chart atlas and target for a point of Euclidean space."""
    ev = AffineSubspaceTarget.point(z, name)
    atlas = Atlas(EuclideanSpace(len(ev.c)), (ev.chart(),))
    return atlas, LipschitzTarget(ev.q, (True,), ev, name)


def euclidean_subspace_target(A, c, q: int, name: str = "subspace") -> tuple[Atlas, LipschitzTarget]:
    ev = AffineSubspaceTarget(np.asarray(A, float), np.asarray(c, float), q, name)
    atlas = Atlas(EuclideanSpace(len(ev.c)), (ev.chart(),))
    return atlas, LipschitzTarget(q, (True,), ev, name)


def sphere_atlas(m: int, scale_sq=Fraction(1), north=None) -> Atlas:
    """Two stereographic charts with poles ``north`` and ``-north``."""
    N = np.zeros(m + 1)
    N[-1] = 1.0
    if north is not None:
        N = np.asarray(north, float)
    scale = math.sqrt(scale_sq)
    frame = orthonormal_frame(N)
    charts = (StereographicChart(N, frame, AllSpace(), scale, "from-north"),
              StereographicChart(-N, frame, AllSpace(), scale, "from-south"))
    return Atlas(Sphere(m, to_fraction(scale_sq)), charts)


def sphere_point_target(atlas: Atlas, z, name: str = "pole") -> LipschitzTarget:
    """Target ``{z}`` on a sphere atlas; it is met by the charts not projecting from ``z``."""
    z = np.asarray(z, float)
    meets = tuple(bool(atlas.membership(i, z[None, :])[0]) for i in range(len(atlas)))
    ev = SpherePointTarget(z, atlas.manifold.scale_sq, name)
    for i, ch in enumerate(atlas.charts):
        if meets[i] and np.max(np.abs(ch.forward(z[None, :]))) > 1e-12:
            raise PreconditionError(f"point target must sit at the origin of chart {ch.name!r}")
    return LipschitzTarget(atlas.manifold.dim, meets, ev, name)


# --- certificates on manifolds ---------------------------------------------------------

def _exact_rows(values) -> np.ndarray:
    return values if is_exact(values) else fraction_array(values)


def certify_bound_on(manifold, f: PLMap, g: PLMap, eps: PLScalarField) -> Certificate:
    """``d(f, g) < eps``: exact per simplex in Euclidean space, at samples on spheres."""
    if manifold.kind == "euclidean":
        return certify_bound(f, g, eps)
    K = g.complex
    fv = transport_values(f.values, f.complex, K, exact=True)
    ev = transport_values(eps.values, eps.complex, K, exact=True)
    gv = _exact_rows(g.values)
    verdicts = []
    for s, bary in K.sample_points():
        fx = sum((fv[v] * w for v, w in zip(s, bary)))
        gx = sum((gv[v] * w for v, w in zip(s, bary)))
        ex = sum((ev[v] * w for v, w in zip(s, bary)), Fraction(0))
        ok = manifold.within(fx, gx, ex)
        verdicts.append(SimplexVerdict(s, ok, {"sample": "barycenter", "eps": fmt(ex)}))
    return Certificate("pointwise-bound", tuple(verdicts), {"granularity": "samples"})


def certify_clearance(g: PLMap, evaluator, simplices=None) -> Certificate:
    """``g`` misses the closure of the target: per simplex where decidable, else at samples."""
    K = g.complex
    gv = g.values
    verdicts = []
    if evaluator.exact_simplices:
        for s in (K.facets if simplices is None else simplices):
            ok = evaluator.simplex_clear_exact([gv[v] for v in s])
            verdicts.append(SimplexVerdict(tuple(s), ok, {"target": evaluator.name}))
        return Certificate("clearance", tuple(verdicts), {"granularity": "simplices"})
    ge = _exact_rows(gv)
    for s, bary in K.sample_points():
        if simplices is not None and s not in simplices:
            continue
        gx = sum((ge[v] * w for v, w in zip(s, bary)))
        verdicts.append(SimplexVerdict(s, evaluator.clear_exact(gx), {"target": evaluator.name,
                                                                      "sample": "barycenter"}))
    return Certificate("clearance", tuple(verdicts), {"granularity": "samples"})


# --- the chart-local pass ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChartPass:
    g: PLMap
    kernel: KernelResult | None
    free: np.ndarray
    eps_prime: np.ndarray
    chart_name: str

    @property
    def moved(self) -> bool:
        return self.kernel is not None


def _chart_pass(f: PLMap, tol: PLScalarField, chart, q: int, meets: bool, rng, *,
                max_retries: int = DEFAULT_MAX_RETRIES,
                max_subdiv: int = DEFAULT_MAX_SUBDIV) -> ChartPass:
    """One chart-local step; ``tol`` may vanish (those vertices are pinned)."""
    K = f.complex
    n = K.dim
    if q <= n:
        raise CodimensionTooSmall(f"codimension {q} does not exceed dim K = {n}")
    if tol.complex is not K:
        tol = tol.on(K)
    N = K.n_vertices
    if not meets:
        return ChartPass(f, None, np.zeros(N, dtype=bool), np.zeros(N), chart.name)
    p = chart.p
    fv = f.floats()
    dom = chart.in_domain(fv)
    a_full = np.zeros((N, p))
    region = np.zeros(N, dtype=bool)
    if dom.any():
        a_full[dom] = chart.forward(fv[dom])
        region[dom] = [chart.image.contains(a) for a in a_full[dom]]
    eta = np.zeros(N)
    eta[region] = [chart.image.clearance(a) for a in a_full[region]]
    tolf = as_float(tol.values)
    free = K.interior(region) & (tolf > 0) & (eta > 0)
    eps_p = np.where(free, np.minimum(tolf / chart.lipschitz, eta) * chart.safety, 0.0)
    if not free.any():
        return ChartPass(f, None, free, eps_p, chart.name)

    alpha = a_full[:, p - q:]
    res = _kernel(PLMap(K, alpha), PLScalarField(K, eps_p), n + 1, rng,
                  max_retries=max_retries, max_subdiv=max_subdiv)
    K2 = res.g.complex
    beta = as_float(res.g.values)
    lead = transport_values(a_full[:, :p - q], K, K2, exact=False)
    alpha2 = transport_values(alpha, K, K2, exact=False)
    gamma = np.hstack([lead, beta])
    moved = np.any(beta != alpha2, axis=1)
    moved[:N] &= free
    f2 = transport_values(f.values, K, K2, exact=f.exact)
    out = f2.copy()
    idx = np.flatnonzero(moved)
    if len(idx):
        back = chart.inverse(gamma[idx])
        if f.exact:
            for j, v in enumerate(idx):
                out[v] = np.array([to_fraction(float(x)) for x in back[j]], dtype=object)
        else:
            out[idx] = back
    return ChartPass(PLMap(K2, out), res, free, eps_p, chart.name)


def chart_local_avoid(f: PLMap, eps: PLScalarField, chart, target: LipschitzTarget, *,
                      meets: bool = True, seed=0, max_retries: int = DEFAULT_MAX_RETRIES,
                      max_subdiv: int = DEFAULT_MAX_SUBDIV) -> PLMap:
    """Move ``f`` off the target inside one chart, within ``eps``.

    Vertices whose closed star maps into the chart domain are perturbed in
    the last ``q`` chart coordinates; everything else is left bit-identical.
    """
    if eps.complex is not f.complex:
        eps = eps.on(f.complex)
    if not all(e > 0 for e in eps.values):
        raise PreconditionError("tolerance must be strictly positive")
    return _chart_pass(f, eps, chart, target.q, meets, as_rng(seed),
                       max_retries=max_retries, max_subdiv=max_subdiv).g
