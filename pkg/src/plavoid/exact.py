"""Exact rational helpers shared by the certificates.

Floats are converted with ``Fraction(x)``, which is exact, so every decision
made here is a decision about the stored binary values and never an
approximation.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

Number = "float | int | Fraction"


def to_fraction(x) -> Fraction:
    """Exact conversion of ints, floats, Fractions and ``"p/q"``/decimal strings."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(float(x)):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(float(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def parse_number(x, exact: bool):
    """Parse a JSON number or numeric string; Fractions in exact mode, floats otherwise."""
    value = to_fraction(x) if isinstance(x, str) else x
    if exact:
        return to_fraction(value)
    return float(value)


def fraction_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    flat_in = arr.reshape(-1)
    flat_out = out.reshape(-1)
    for k, v in enumerate(flat_in):
        flat_out[k] = to_fraction(v)
    return out


def is_exact(values) -> bool:
    return isinstance(values, np.ndarray) and values.dtype == object


def as_float(values) -> np.ndarray:
    return np.asarray(values, dtype=float)


def fmt(x) -> str:
    """Render a number for JSON: ``"p/q"`` for Fractions, ``repr`` for floats."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _solve(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan on a square Fraction system; ``None`` when singular."""
    n = len(rhs)
    a = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [vr - factor * vc for vr, vc in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def _dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(u, v)), Fraction(0))


def min_norm_point(points: Iterable[Sequence]) -> tuple[Fraction, list[Fraction], list[Fraction]]:
    """Exact minimum-norm point of the convex hull of ``points``.

    Returns ``(squared_norm, point, weights)`` where ``point = sum(w_k p_k)``.
    Every affinely independent subset is projected onto its affine hull and
    the feasible projection of least norm wins (Caratheodory on the optimal
    face).  Intended for the handful of points spanned by one simplex.
    """
    pts = [[to_fraction(c) for c in p] for p in points]
    if not pts:
        raise ValueError("empty point set")
    m = len(pts)
    best = None
    for size in range(1, m + 1):
        for subset in itertools.combinations(range(m), size):
            base = pts[subset[0]]
            dirs = [[c - b for c, b in zip(pts[j], base)] for j in subset[1:]]
            if dirs:
                gram = [[_dot(u, v) for v in dirs] for u in dirs]
                rhs = [-_dot(u, base) for u in dirs]
                mu = _solve(gram, rhs)
                if mu is None:
                    continue
                lam0 = 1 - sum(mu, Fraction(0))
                lams = [lam0, *mu]
            else:
                lams = [Fraction(1)]
            if any(l < 0 for l in lams):
                continue
            point = [sum((lams[k] * pts[j][c] for k, j in enumerate(subset)), Fraction(0))
                     for c in range(len(base))]
            norm_sq = _dot(point, point)
            if best is None or norm_sq < best[0]:
                weights = [Fraction(0)] * m
                for k, j in enumerate(subset):
                    weights[j] = lams[k]
                best = (norm_sq, point, weights)
                if norm_sq == 0:
                    return best
    assert best is not None
    return best


def hull_distance_lower(points: Iterable[Sequence]) -> float:
    """Float lower bound on the distance from the origin to the hull of ``points``."""
    norm_sq, _, _ = min_norm_point(points)
    if norm_sq == 0:
        return 0.0
    return math.sqrt(float(norm_sq)) * (1.0 - 1e-12)


def sqrt_floor(x: Fraction) -> float:
    """A float ``s`` with ``s*s <= x`` (checked exactly)."""
    s = math.sqrt(float(x))
    while s > 0 and Fraction(s) * Fraction(s) > x:
        s = math.nextafter(s, 0.0)
    return s
