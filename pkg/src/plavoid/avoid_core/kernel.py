"""Perturbing a PL map off the origin of (n+1)-space.

The construction keeps ``f`` where one coordinate is already large and
replaces every other coordinate by a small bump ``eps * phi_i`` whose sign is
fixed on the inside and outside parts of a certified shrinking system.  The
result is re-checked exactly: nonvanishing per simplex and the pointwise
bound per vertex.

Vertices where the tolerance is zero are *pinned*: the output equals the input
there bit for bit.  Only the internal entry point accepts pins; it is used by
the chart-local, relative and bundle passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..complex import PLMap, PLScalarField, transport_values
from ..errors import CarrierMismatch, CertificationFailed, DimensionMismatch, PreconditionError
from ..exact import fraction_array, is_exact, to_fraction
from .certificates import Certificate, certify_bound, certify_nonvanishing, hull_avoids_origin
from .regions import (DEFAULT_MAX_RETRIES, DEFAULT_MAX_SUBDIV, ShrinkSystem, _Stage,
                      obligated_groups, run_shrink)


@dataclass(frozen=True, eq=False)
class KernelResult:
    g: PLMap
    system: ShrinkSystem
    nonvanishing: Certificate
    bound: Certificate
    scale: float

    @property
    def deferred(self) -> frozenset:
        return self.system.deferred

    @property
    def passed(self) -> bool:
        return self.nonvanishing.passed and self.bound.passed


def prescale_factor(m: int) -> float:
    """Tolerance factor so the construction's ``2 sqrt(m)`` error lands under the bound."""
    return 1.0 / (2.0 * math.sqrt(m) + 1.0)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _phi(K, inside: np.ndarray, outside: np.ndarray) -> np.ndarray:
    """+1 on ``inside``, -1 on ``outside``, distance interpolation in between."""
    from ..complex import urysohn
    if not outside.any():
        return np.ones(K.n_vertices)
    if not inside.any():
        return -np.ones(K.n_vertices)
    return urysohn(K, np.flatnonzero(outside), np.flatnonzero(inside), -1.0, 1.0).values


def _construct(stage: _Stage, levels, inside, outside, m: int, scale: float, f_out: np.ndarray):
    """Output vertex values on the stage complex (``f_out`` already transported)."""
    K = stage.K
    exact = is_exact(f_out)
    g = f_out.copy()
    keep_any = stage.pinned
    for i in range(m):
        keep = levels.upper[:, i] | levels.lower[:, i] | keep_any
        bump = scale * stage.tol * _phi(K, inside[:, i], outside[:, i])
        idx = np.flatnonzero(~keep)
        if exact:
            for v in idx:
                g[v, i] = to_fraction(float(bump[v]))
        else:
            g[idx, i] = bump[idx]
    return g


def _output_values(stage: _Stage, f: PLMap) -> np.ndarray:
    if f.exact:
        return transport_values(f.values, f.complex, stage.K, exact=True)
    out = stage.f.copy()
    n0 = f.complex.n_vertices
    out[:n0] = f.values  # old vertices keep their values bit for bit
    return out


def _kernel(f: PLMap, tol: PLScalarField, m: int, rng, *, max_retries: int = DEFAULT_MAX_RETRIES,
            max_subdiv: int = DEFAULT_MAX_SUBDIV, radii=None) -> KernelResult:
    """Avoid zero in the first ``m`` coordinates; later coordinates are carried along.

    ``tol`` may vanish at vertices (pins).  Simplices whose pinned face
    already meets zero cannot be repaired and are reported as deferred.
    """
    K0 = f.complex
    scale = prescale_factor(m)
    stage = _Stage(K0, f.values, tol.values, scale=scale)
    rng = as_rng(rng)

    def accept(levels, inside, outside, simplices):
        f_out = _output_values(stage, f)
        g = _construct(stage, levels, inside, outside, m, scale, f_out)
        return [s for s in simplices if hull_avoids_origin([g[v, :m] for v in s])[0]]

    system = run_shrink(stage, m, rng, radii=radii, max_retries=max_retries,
                        max_subdiv=max_subdiv, accept=accept if stage.pinned.any() else None)
    f_out = _output_values(stage, f)
    g_vals = _construct(stage, system.levels, system.inside, system.outside, m, scale, f_out)
    g = PLMap(stage.K, g_vals)

    checked = [tuple(s) for arr in obligated_groups(stage.K, stage.pinned) for s in arr.tolist()
               if tuple(s) not in system.deferred]
    nonvanishing = certify_nonvanishing(g, checked, coords=m)
    bound = certify_bound(f, g, tol)
    return KernelResult(g, system, nonvanishing, bound, scale)


def _validate(f: PLMap, eps: PLScalarField) -> PLScalarField:
    if eps.complex is not f.complex:
        if f.complex.is_refinement_of(eps.complex):
            eps = eps.on(f.complex)
        else:
            raise CarrierMismatch("tolerance and map live on unrelated complexes")
    if not all(e > 0 for e in eps.values):
        raise PreconditionError("tolerance must be strictly positive")
    m = f.target_dim
    if f.complex.dim > m - 1:
        raise DimensionMismatch(
            f"a {f.complex.dim}-dimensional complex cannot avoid a point of {m}-space in general")
    return eps


def avoid_zero_result(f: PLMap, eps: PLScalarField, seed=0, *,
                      max_retries: int = DEFAULT_MAX_RETRIES,
                      max_subdiv: int = DEFAULT_MAX_SUBDIV, radii=None) -> KernelResult:
    """Like :func:`avoid_zero` but returns the shrinking system and both certificates."""
    eps = _validate(f, eps)
    res = _kernel(f, eps, f.target_dim, seed, max_retries=max_retries,
                  max_subdiv=max_subdiv, radii=radii)
    if not res.passed:
        cert = res.nonvanishing if not res.nonvanishing.passed else res.bound
        raise CertificationFailed(f"{cert.kind} certificate failed", cert)
    return res


def avoid_zero(f: PLMap, eps: PLScalarField, seed=0, *,
               max_retries: int = DEFAULT_MAX_RETRIES,
               max_subdiv: int = DEFAULT_MAX_SUBDIV) -> PLMap:
    """Return a PL map ``g`` with ``g != 0`` everywhere and ``|g - f| < eps``.

    The target dimension must exceed the dimension of the complex.  ``g`` may
    live on a refinement of ``f``'s carrier; both properties are certified
    exactly before returning.
    """
    return avoid_zero_result(f, eps, seed, max_retries=max_retries,
                             max_subdiv=max_subdiv).g
