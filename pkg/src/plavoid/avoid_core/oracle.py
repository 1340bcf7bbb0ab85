"""Constant-shift oracle: an independent route to the same contract.

On a compact carrier the tolerance has a positive minimum, and subtracting a
small generic constant vector moves the image of a low-dimensional complex off
the origin.  Candidates are drawn from a seeded generator and kept only if the
exact certificates pass.
"""

from __future__ import annotations

import numpy as np

from ..complex import PLMap, PLScalarField
from ..errors import OracleExhausted, PreconditionError
from ..exact import to_fraction
from .certificates import certify_bound, certify_nonvanishing

DEFAULT_SAMPLES = 256


def oracle_constant_shift(f: PLMap, eps: PLScalarField, seed=0,
                          samples: int = DEFAULT_SAMPLES) -> PLMap:
    K = f.complex
    if eps.complex is not K:
        eps = eps.on(K)
    # no dimension check: a forced zero shows up as exhaustion, independently of the kernel
    p = f.target_dim
    e_min = min(eps.values)
    if not e_min > 0:
        raise PreconditionError("tolerance must be strictly positive")
    rng = np.random.default_rng(seed)
    radius = 0.999 * float(e_min)
    for _ in range(samples):
        direction = rng.standard_normal(p)
        direction /= np.linalg.norm(direction)
        v = direction * radius * rng.uniform(0.1, 1.0)
        if f.exact:
            shift = np.array([to_fraction(float(c)) for c in v], dtype=object)
            g = PLMap(K, f.values - shift)
        else:
            g = PLMap(K, f.values - v)
        if certify_nonvanishing(g).passed and certify_bound(f, g, eps).passed:
            return g
    raise OracleExhausted(f"no constant shift among {samples} samples clears the origin")
