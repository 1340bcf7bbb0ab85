"""Splitting the eigenvalues of SU(2)-valued fields.

An element of SU(2) is stored as a unit quaternion ``(a, b, c, d)``::

    U = [[a + ib,  c + id],
         [-c + id, a - ib]]

so that ``|U - V|_F = sqrt(2) |q - q'|``.  The field lives on the 3-sphere with
the chordal metric scaled by ``sqrt(2)``, which makes every distance below a
Frobenius distance.  A matrix of SU(2) has a repeated eigenvalue exactly when
it is ``+I`` or ``-I``: two points of a 3-manifold, hence codimension 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bundle import BundleSpec, Section, section_avoid_result
from .charts import (AllSpace, Atlas, LipschitzTarget, Sphere, SpherePointTarget, StereographicChart,
                     orthonormal_frame)
from .complex import PLMap, PLScalarField, SimplicialComplex, VertexRegion, build_complex
from .errors import DimensionMismatch, NotUnitary, PreconditionError
from .exact import as_float, fmt, fraction_array, is_exact, to_fraction
from .glue import avoid_finite_union_result, relative_avoid_result

FROBENIUS_SQ = Fraction(2)
UNIT_TOL = 1e-9
IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_to_su2(q) -> np.ndarray:
    a, b, c, d = (float(x) for x in q)
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]])


def su2_to_quat(U, tol: float = UNIT_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.shape != (2, 2):
        raise NotUnitary(f"expected a 2x2 matrix, got shape {U.shape}")
    if np.max(np.abs(U @ U.conj().T - np.eye(2))) > tol:
        raise NotUnitary("matrix is not unitary")
    if abs(np.linalg.det(U) - 1) > tol:
        raise NotUnitary("determinant is not 1")
    return np.array([U[0, 0].real, U[0, 0].imag, U[0, 1].real, U[0, 1].imag])


def quat_mul(p, q) -> np.ndarray:
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return np.array([a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
                     a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
                     a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
                     a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2], dtype=object)


def conjugation_matrix(w) -> np.ndarray:
    """4x4 matrix of ``q -> w q w^-1``; exact when ``w`` has rational entries."""
    w = np.array([to_fraction(x) for x in w], dtype=object)
    nsq = sum(x * x for x in w)
    wbar = np.array([w[0], -w[1], -w[2], -w[3]], dtype=object) / nsq
    cols = []
    for k in range(4):
        e = np.array([Fraction(int(i == k)) for i in range(4)], dtype=object)
        cols.append(quat_mul(quat_mul(w, e), wbar))
    return np.array(cols, dtype=object).T.copy()


def spectral_clearance(U) -> float:
    """Frobenius distance from ``U`` to ``{+I, -I}``; zero iff ``|trace U| = 2``."""
    q = su2_to_quat(U)
    return math.sqrt(2.0) * float(min(np.linalg.norm(q - IDENTITY), np.linalg.norm(q + IDENTITY)))


def trace_margin(q) -> float:
    """``2 - |trace U|`` for the matrix read off the (normalized) quaternion."""
    q = as_float(q)
    return 2.0 - 2.0 * abs(q[0]) / float(np.linalg.norm(q))


@dataclass(frozen=True, eq=False)
class SpectralTarget:
    """Distance evaluator for ``{+I, -I}`` on the quaternion sphere."""

    plus: SpherePointTarget
    minus: SpherePointTarget
    name: str = "repeated-eigenvalue"
    exact_simplices: bool = False

    @classmethod
    def make(cls, scale_sq=FROBENIUS_SQ) -> "SpectralTarget":
        return cls(SpherePointTarget(IDENTITY, scale_sq, "+I"), SpherePointTarget(-IDENTITY, scale_sq, "-I"))

    @property
    def q(self) -> int:
        return 3

    def lower_bound(self, y) -> float:
        return min(self.plus.lower_bound(y), self.minus.lower_bound(y))

    def clearance_sq_exact(self, y) -> Fraction:
        return min(self.plus.clearance_sq_exact(y), self.minus.clearance_sq_exact(y))

    def simplex_lower_bound(self, Y) -> float:
        return min(self.plus.simplex_lower_bound(Y), self.minus.simplex_lower_bound(Y))

    def clear_exact(self, y) -> bool:
        return self.plus.clear_exact(y) and self.minus.clear_exact(y)

    def points(self) -> list:
        return [fraction_array(IDENTITY), fraction_array(-IDENTITY)]

    def to_json(self) -> dict:
        return {"kind": "su2-repeated-eigenvalue", "name": self.name, "points": ["+I", "-I"]}


def su2_atlas(conjugator=None) -> tuple[Atlas, LipschitzTarget]:
    """Stereographic charts from ``+I`` and ``-I`` and the target ``{+I, -I}``.

    Each chart sees exactly one target point, at its origin.  With a
    ``conjugator`` ``w`` the chart frames are rotated by ``q -> w q w^-1``, so
    conjugated fields have the same chart coordinates as the originals.
    """
    frame = orthonormal_frame(IDENTITY)
    if conjugator is not None:
        frame = as_float(conjugation_matrix(conjugator)) @ frame
    scale = math.sqrt(FROBENIUS_SQ)
    charts = (StereographicChart(IDENTITY.copy(), frame, AllSpace(), scale, "from+I"),
              StereographicChart(-IDENTITY, frame, AllSpace(), scale, "from-I"))
    atlas = Atlas(Sphere(3, FROBENIUS_SQ), charts)
    return atlas, LipschitzTarget(3, (True, True), SpectralTarget.make(), "repeated-eigenvalue")


def su2_point_targets(atlas: Atlas) -> list[tuple[Atlas, LipschitzTarget]]:
    """``{+I}`` and ``{-I}`` as separate targets (for the finite-union route)."""
    out = []
    for z, name in ((IDENTITY, "+I"), (-IDENTITY, "-I")):
        meets = tuple(bool(atlas.membership(i, z[None, :])[0]) for i in range(len(atlas)))
        out.append((atlas, LipschitzTarget(3, meets, SpherePointTarget(z, FROBENIUS_SQ, name), name)))
    return out


@dataclass(frozen=True, eq=False)
class UnitaryField:
    """Per-vertex SU(2) matrices as quaternions; simplices interpolate linearly then normalize."""

    complex: SimplicialComplex
    quats: np.ndarray

    def __post_init__(self):
        if self.quats.ndim != 2 or self.quats.shape != (self.complex.n_vertices, 4):
            raise PreconditionError("a unitary field needs one quaternion per vertex")
        norms = np.linalg.norm(as_float(self.quats), axis=1)
        if np.max(np.abs(norms - 1.0)) > UNIT_TOL:
            raise NotUnitary("vertex quaternions must have unit norm")

    @classmethod
    def from_matrices(cls, K: SimplicialComplex, mats, exact: bool = False) -> "UnitaryField":
        q = np.array([su2_to_quat(U) for U in mats])
        return cls(K, fraction_array(q) if exact else q)

    @classmethod
    def constant(cls, K: SimplicialComplex, U, exact: bool = False) -> "UnitaryField":
        return cls.from_matrices(K, [U] * K.n_vertices, exact)

    @property
    def exact(self) -> bool:
        return is_exact(self.quats)

    def matrices(self) -> np.ndarray:
        return np.array([quat_to_su2(q / np.linalg.norm(q)) for q in as_float(self.quats)])

    def as_map(self) -> PLMap:
        return PLMap(self.complex, self.quats)

    def sample_margins(self) -> list[tuple[tuple, float]]:
        """``2 - |trace|`` at vertices and simplex barycenters."""
        qv = as_float(self.quats)
        out = []
        for s, bary in self.complex.sample_points():
            x = sum(qv[v] * float(w) for v, w in zip(s, bary))
            out.append((s, trace_margin(x)))
        return out

    def to_json(self) -> dict:
        rows = []
        for U in self.matrices():
            rows.append([[[fmt(z.real), fmt(z.imag)] for z in r] for r in U])
        return {"matrices": rows, "quaternions": [[fmt(x) for x in q] for q in self.quats]}


@dataclass(frozen=True, eq=False)
class SplitResult:
    v: object
    certificates: dict
    min_margin: float
    relative: bool

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates.values()) and self.min_margin > 0

    def summary(self) -> dict:
        return {"passed": self.passed, "min_trace_margin": fmt(self.min_margin),
                "certificates": {k: c.summary() for k, c in self.certificates.items()},
                "norm": "Frobenius (operator norm is within a factor sqrt(2))"}


def _det3(R) -> Fraction:
    return (R[0, 0] * (R[1, 1] * R[2, 2] - R[1, 2] * R[2, 1])
            - R[0, 1] * (R[1, 0] * R[2, 2] - R[1, 2] * R[2, 0])
            + R[0, 2] * (R[1, 0] * R[2, 1] - R[1, 1] * R[2, 0]))


def _check_conjugations(bundle: BundleSpec) -> None:
    # conjugations are exactly the rotations of the pure-imaginary part (SO(3), not O(3))
    for (i, j), table in bundle.transitions.items():
        for v, t in table.items():
            M = t.M
            ok = (all(x == 0 for x in t.b) and np.all(M.T.dot(M) == np.eye(4, dtype=int))
                  and all(M[k, 0] == int(k == 0) for k in range(4)) and _det3(M[1:, 1:]) == 1)
            if not ok:
                raise PreconditionError(f"transition ({i},{j}) at vertex {v} is not a unitary conjugation")


def split_eigenvalues_result(u, eps: PLScalarField, bundle: BundleSpec | None = None,
                             C: VertexRegion | None = None, seed=0, conjugator=None,
                             **budgets) -> SplitResult:
    if bundle is not None:
        if not isinstance(u, Section):
            raise PreconditionError("a bundle run needs the field as a Section")
        if bundle.base.dim > 2:
            raise DimensionMismatch("eigenvalue splitting needs a base of dimension at most 2")
        _check_conjugations(bundle)
        res = section_avoid_result(bundle, u, eps, C=C, seed=seed, **budgets)
        certs = {f"bound[{i}]": c for i, c in enumerate(res.bounds)}
        certs.update({f"clearance[{i}]": c for i, c in enumerate(res.clearances)})
        margins = []
        for i, S in enumerate(res.spec.patches):
            qv = as_float(res.section.reps[i])
            for s, bary in res.section.complex.sample_points():
                if all(v in S for v in s):
                    margins.append(trace_margin(sum(qv[v] * float(w) for v, w in zip(s, bary))))
        return SplitResult(res.section, certs, min(margins), C is not None)

    if not isinstance(u, UnitaryField):
        raise PreconditionError("expected a UnitaryField")
    if u.complex.dim > 2:
        raise DimensionMismatch("eigenvalue splitting needs a complex of dimension at most 2")
    atlas, _ = su2_atlas(conjugator)
    targets = su2_point_targets(atlas)
    f = u.as_map()
    if C is not None:
        res, _ = relative_avoid_result(f, eps, C, targets, seed, **budgets)
    else:
        res = avoid_finite_union_result(f, eps, targets, seed, **budgets)
    v = UnitaryField(res.g.complex, res.g.values)
    certs = {"bound": res.bound}
    certs.update({f"clearance[{tg.name}]": c for (_, tg), c in zip(targets, res.clearances)})
    margin = min(m for _, m in v.sample_margins())
    return SplitResult(v, certs, margin, C is not None)


def split_eigenvalues(u, eps: PLScalarField, bundle: BundleSpec | None = None,
                      C: VertexRegion | None = None, seed=0, conjugator=None, **budgets):
    """Perturb ``u`` within ``eps`` (Frobenius) so no point has a repeated eigenvalue.

    ``conjugator`` rotates the chart frames; running on ``w u w*`` with
    ``conjugator=w`` reproduces the conjugate of the plain run.
    """
    return split_eigenvalues_result(u, eps, bundle, C, seed, conjugator, **budgets).v


# --- fixtures -----------------------------------------------------------------------------------

def torus_complex(n: int = 7, R: float = 2.0, r: float = 1.0) -> SimplicialComplex:
    """``n x n`` periodic grid, each square split into two triangles (``2 n^2`` triangles)."""
    if n < 3:
        raise PreconditionError("a triangulated torus needs n >= 3")
    pts = []
    for i in range(n):
        for j in range(n):
            a, b = 2 * np.pi * i / n, 2 * np.pi * j / n
            pts.append([(R + r * np.cos(b)) * np.cos(a), (R + r * np.cos(b)) * np.sin(a), r * np.sin(b)])
    idx = lambda i, j: (i % n) * n + (j % n)  # noqa: E731
    tris = []
    for i in range(n):
        for j in range(n):
            tris.append((idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)))
            tris.append((idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)))
    return build_complex(pts, tris, name="torus")


def diag_phase(theta: float) -> np.ndarray:
    return np.diag([np.exp(1j * theta), np.exp(-1j * theta)])
