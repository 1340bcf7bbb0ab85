"""Seeded random instances shared by the unit, property and acceptance tests."""

from __future__ import annotations

import numpy as np

from plavoid import PLMap, PLScalarField, build_complex


def point_cloud(rng, k: int):
    return build_complex(rng.uniform(-1, 1, (k, 2)), [(i,) for i in range(k)])


def path(rng, k: int):
    xs = np.cumsum(rng.uniform(0.2, 1.0, k))
    return build_complex(xs[:, None], [(i, i + 1) for i in range(k - 1)])


def grid(rng, a: int, b: int, jitter: float = 0.15):
    pts = np.array([[i, j] for i in range(a) for j in range(b)], dtype=float)
    pts += rng.uniform(-jitter, jitter, pts.shape)
    tris = []
    for i in range(a - 1):
        for j in range(b - 1):
            v = i * b + j
            tris += [(v, v + b, v + b + 1), (v, v + 1, v + b + 1)]
    return build_complex(pts, tris)


def random_complex(rng, dim: int):
    if dim == 0:
        return point_cloud(rng, int(rng.integers(1, 4)))
    if dim == 1:
        return path(rng, int(rng.integers(2, 6)))
    return grid(rng, int(rng.integers(2, 4)), int(rng.integers(2, 4)))


def random_instance(seed: int, dim: int | None = None, extra: int = 1):
    """``(f, eps)`` with ``f`` into ``(dim + extra)``-space, entries in [-1, 1], eps in [0.05, 0.5]."""
    rng = np.random.default_rng(seed)
    if dim is None:
        dim = int(rng.integers(0, 3))
    K = random_complex(rng, dim)
    f = PLMap(K, rng.uniform(-1, 1, (K.n_vertices, dim + extra)))
    eps = PLScalarField(K, rng.uniform(0.05, 0.5, K.n_vertices))
    return f, eps


def near_origin_instance(seed: int, dim: int):
    """Like :func:`random_instance` but with f small, so the origin is genuinely in the way."""
    f, eps = random_instance(seed, dim)
    return PLMap(f.complex, f.values * 0.2), eps
