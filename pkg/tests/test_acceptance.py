"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Every check below re-measures the outcome with plain numpy or exact rationals
rather than trusting the result object's own verdict.
"""

import os
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np

from plavoid import (PLMap, PLScalarField, VertexRegion, avoid_finite_union, build_complex, certify_bound,
                     certify_nonvanishing, euclidean_point_target, oracle_constant_shift, sphere_atlas,
                     sphere_point_target)
from plavoid.avoid_core import avoid_zero_result
from plavoid.bundle import mobius_bundle, section_avoid_result
from plavoid.charts import certify_clearance
from plavoid.cli import DEMOS, demo_config, run
from plavoid.complex import transport_values
from plavoid.errors import ConstraintViolated, DimensionMismatch
from plavoid.exact import as_float, fraction_array
from plavoid.glue import (avoid_countable_union_result, avoid_finite_union_result, glue_avoid_result,
                          movement_factor, partition_of_unity, relative_avoid_result)
from plavoid.io import dumps
from plavoid.matrix import UnitaryField, quat_to_su2, split_eigenvalues_result, torus_complex

from acceptance_log import record
from instances import path, point_cloud, random_instance

I2 = np.eye(2, dtype=complex)


def moved_within(f, g, eps, scale=1.0):
    """Vertexwise ``scale * |g - f| < eps`` on g's carrier, recomputed in floats."""
    fv = as_float(transport_values(f.values, f.complex, g.complex, exact=False))
    ev = as_float(transport_values(eps.values, eps.complex, g.complex, exact=False))
    d = scale * np.linalg.norm(as_float(g.values) - fv, axis=1)
    return bool(np.all(d < ev)), float(np.max(d / ev))


def origin_free_hull(rows):
    """Origin outside the convex hull of ``rows``: exact check via a separating coordinate sign or LP."""
    from scipy.optimize import linprog
    P = np.asarray(rows, float)
    n = len(P)
    res = linprog(np.zeros(n), A_eq=np.vstack([P.T, np.ones(n)]), b_eq=np.r_[np.zeros(P.shape[1]), 1],
                  bounds=[(0, None)] * n, method="highs")
    return res.status == 2


def test_kernel_contract():
    t0 = time.perf_counter()
    n, ok, audited = 0, 0, 0
    for seed in range(210):
        f, eps = random_instance(seed, dim=seed % 3)
        res = avoid_zero_result(f, eps, seed=seed)
        g = res.g
        n += 1
        good = (certify_nonvanishing(g).passed and certify_bound(f, g, eps).passed
                and moved_within(f, g, eps)[0])
        # independent LP audit on a subsample
        if seed % 10 == 0:
            audited += 1
            good = good and all(origin_free_hull(g.values[list(s)]) for s in g.complex.facets)
        ok += good
    elapsed = time.perf_counter() - t0
    passed = ok == n and n >= 200 and elapsed < 60
    record("kernel contract", passed, f"{ok}/{n} instances, {audited} LP-audited, {elapsed:.1f}s")
    assert passed


def test_obstruction_guard():
    K = build_complex([[0.0], [1.0]], [(0, 1)])
    f = PLMap(K, np.array([[-1.0], [1.0]]))
    try:
        avoid_zero_result(f, PLScalarField(K, np.full(2, 0.1)))
        rejected = False
    except DimensionMismatch:
        rejected = True
    report, _, code = run(demo_config("interval"))
    rejected = rejected and code == 2 and report["diagnostics"]["error"] == "DimensionMismatch"
    record("obstruction guard", rejected, "interval into the line, sign change")
    assert rejected


def test_oracle_cross_check():
    n, ok = 0, 0
    for seed in range(1000, 1100):
        f, eps = random_instance(seed, dim=seed % 3)
        a = avoid_zero_result(f, eps, seed=seed).g
        b = oracle_constant_shift(f, eps, seed=seed)
        n += 1
        ok += all(certify_nonvanishing(g).passed and certify_bound(f, g, eps).passed for g in (a, b))
    passed = n >= 100 and ok == n
    record("oracle cross-check", passed, f"{ok}/{n} instances, both outputs certified")
    assert passed


def sphere_instance(seed):
    """A point cloud or path into the 2-sphere, clustered around the north pole."""
    rng = np.random.default_rng(seed)
    K = point_cloud(rng, 3) if seed % 2 else path(rng, int(rng.integers(2, 6)))
    pts = rng.normal(size=(K.n_vertices, 3)) * 0.4 + [0, 0, 1]
    if seed % 5 == 0:
        pts[0] = [0, 0, 1]
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    return PLMap(K, pts), PLScalarField(K, rng.uniform(0.05, 0.5, K.n_vertices))


def sample_clear_of(g, z):
    """Normalized vertex and edge-midpoint samples all differ from ``z``."""
    vals = as_float(g.values)
    for s in g.complex.simplices:
        x = vals[list(s)].mean(axis=0)
        if np.linalg.norm(x / np.linalg.norm(x) - z) == 0:
            return False
    return True


def test_gluing_budget():
    atlas = sphere_atlas(1)
    tg = sphere_point_target(atlas, [0.0, 1.0])
    circle = build_complex([[0.0]], [(0,)])
    f = PLMap(circle, np.array([[0.0, 1.0]]))
    eps = PLScalarField(circle, np.array([0.1]))
    res = glue_avoid_result(f, eps, atlas, tg)
    y = res.g.values[0] / np.linalg.norm(res.g.values[0])
    fixture_ok = res.passed and 0 < np.arctan2(abs(y[0]), y[1]) < 0.1

    atlas2 = sphere_atlas(2)
    north = np.array([0.0, 0.0, 1.0])
    tg2 = sphere_point_target(atlas2, north)
    n, ok, unity = 0, 0, 0
    for seed in range(60):
        f, eps = sphere_instance(seed)
        res = glue_avoid_result(f, eps, atlas2, tg2, seed=seed)
        within, _ = moved_within(f, res.g, eps)
        n += 1
        ok += res.passed and within and sample_clear_of(res.g, north)
        fx = PLMap(f.complex, fraction_array(f.values))
        unity += partition_of_unity(fx, atlas2, exact=True)[1].is_exact_unity()
    passed = fixture_ok and n >= 50 and ok == n and unity == n
    record("gluing budget", passed, f"circle fixture {'ok' if fixture_ok else 'FAILED'}, {ok}/{n} sphere "
                                    f"instances, exact unity {unity}/{n}")
    assert passed


def test_finite_unions():
    n, ok = 0, 0
    for seed in range(2000, 2055):
        f, eps = random_instance(seed, dim=seed % 3)
        rng = np.random.default_rng(seed + 1)
        p = f.target_dim
        targets = [euclidean_point_target(rng.uniform(-0.5, 0.5, p)) for _ in range(2)]
        res = avoid_finite_union_result(f, eps, targets, seed=seed)
        n += 1
        ok += (all(res.safety) and moved_within(f, res.g, eps)[0]
               and all(origin_free_hull(as_float(res.g.values[list(s)]) - tg.evaluator.c)
                       for _, tg in targets for s in res.g.complex.facets))
    passed = n >= 50 and ok == n
    record("finite unions", passed, f"{ok}/{n} two-target instances, monotone safety held")
    assert passed


def countable_run(exact):
    K = build_complex([[0.0], [1.0], [2.0]], [(0, 1), (1, 2)])
    vals = np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
    f = PLMap(K, fraction_array(vals) if exact else vals)
    eps = PLScalarField(K, np.full(3, 1.0))
    targets = [euclidean_point_target([2.0 ** -k, 0.0]) for k in range(11)]
    return f, eps, avoid_countable_union_result(f, eps, targets, 10, seed=4)


def test_countable_union_ledger():
    f, eps, ra = countable_run(exact=True)
    exact_ok = ra.ledger.holds(exact=True)
    f2, eps2, rf = countable_run(exact=False)
    float_ok = rf.ledger.positive() and all(r["pass"] for r in rf.ledger.ratio_checks(exact=False, tol=1e-12))
    factor = movement_factor(10)
    assert factor == Fraction(1, 2) + sum(Fraction(1, 2 ** (k + 2)) for k in range(10))
    move_ok = all(moved_within(fx, r.g, PLScalarField(fx.complex, np.full(3, float(factor))))[0]
                  for fx, r in ((f, ra), (f2, rf)))
    passed = exact_ok and float_ok and move_ok
    record("countable-union ledger", passed, f"k_max=10, exact {exact_ok}, float(1e-12) {float_ok}, "
                                             f"movement < {float(factor):.6f} eps {move_ok}")
    assert passed


def test_relative_exactness():
    n, ok, seed = 0, 0, 3000
    while n < 55:
        seed += 1
        f, eps = random_instance(seed, dim=seed % 3)
        rng = np.random.default_rng(seed)
        K = f.complex
        k = int(rng.integers(1, max(2, K.n_vertices)))
        C = VertexRegion.of(K, sorted(rng.choice(K.n_vertices, size=k, replace=False).tolist()))
        targets = [euclidean_point_target(np.zeros(f.target_dim))]
        try:
            res, _ = relative_avoid_result(f, eps, C, targets, seed=seed)
        except ConstraintViolated:
            continue
        n += 1
        g = res.g
        ws = g.complex.weights_to(K)
        same = all(np.array_equal(g.values[v], f.values[next(iter(w))])
                   for v, w in enumerate(ws) if len(w) == 1 and next(iter(w)) in C.indices)
        ok += same and moved_within(f, g, eps)[0]
    passed = ok == n >= 50
    record("relative exactness", passed, f"{ok}/{n} instances bit-equal on C")
    assert passed


def test_fibration_variant():
    rows = []
    for exact in (False, True):
        spec, f = mobius_bundle(exact=exact)
        eps = PLScalarField(spec.base, np.full(spec.base.n_vertices, 0.1))
        res = section_avoid_result(spec, f, eps, seed=3)
        resid = res.residual
        good = res.passed and (resid == 0 if exact else resid <= 1e-9)
        rows.append((good, resid))
    passed = all(g for g, _ in rows)
    record("fibration variant", passed, f"Moebius residual float {float(rows[0][1]):.1e}, "
                                        f"rational {rows[1][1]}")
    assert passed


def su2_samples(field_quats, K):
    """Normalized matrices at vertices and edge midpoints."""
    q = as_float(field_quats)
    out = []
    for s in K.simplices:
        if len(s) <= 2:
            x = q[list(s)].mean(axis=0)
            out.append((s, quat_to_su2(x / np.linalg.norm(x))))
    return out


def test_su2_application():
    K = torus_complex()
    u = UnitaryField.constant(K, I2)
    t0 = time.perf_counter()
    res = split_eigenvalues_result(u, PLScalarField(K, np.full(K.n_vertices, 0.1)), seed=1)
    elapsed = time.perf_counter() - t0
    Kv = res.v.complex
    uq = transport_values(u.quats, K, Kv, exact=False)
    samples_v = su2_samples(res.v.quats, Kv)
    samples_u = dict(su2_samples(uq, Kv))
    trace_ok = all(abs(np.trace(V)) < 2 for _, V in samples_v)
    dist_ok = all(np.linalg.norm(samples_u[s] - V) < 0.1 for s, V in samples_v)

    C = [v for v in range(K.n_vertices) if v % 7 < 2]
    mats = [np.diag([1j, -1j]) if v in C else I2 for v in range(K.n_vertices)]
    u2 = UnitaryField.from_matrices(K, mats)
    rel = split_eigenvalues_result(u2, PLScalarField(K, np.full(K.n_vertices, 0.5)),
                                   C=VertexRegion.of(K, C), seed=1)
    ws = rel.v.complex.weights_to(K)
    fixed = all(np.array_equal(rel.v.quats[k], u2.quats[next(iter(w))])
                for k, w in enumerate(ws) if len(w) == 1 and next(iter(w)) in C)
    passed = res.passed and trace_ok and dist_ok and elapsed < 30 and rel.passed and fixed
    record("SU(2) eigenvalue splitting", passed,
           f"{len(K.facets)} triangles, {len(samples_v)} samples, {elapsed:.2f}s, relative bit-exact {fixed}")
    assert passed


def test_determinism():
    same = all(dumps(run(demo_config(name))[0]) == dumps(run(demo_config(name))[0]) for name in DEMOS)
    # across processes with different hash seeds
    outs = []
    for hs in ("0", "12345"):
        env = dict(os.environ, PYTHONHASHSEED=hs)
        outs.append(subprocess.run([sys.executable, "-m", "plavoid", "demo", "torus"], env=env,
                                   capture_output=True, check=False).stdout)
    cross = outs[0] == outs[1] and len(outs[0]) > 0
    passed = same and cross
    record("determinism", passed, f"in-process {same}, cross-process {cross}")
    assert passed
