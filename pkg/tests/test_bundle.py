from fractions import Fraction

import numpy as np
import pytest

from plavoid import PLScalarField, VertexRegion
from plavoid.bundle import (AffineTransition, BundleSpec, Section, circle_base, mobius_bundle,
                            section_avoid_result)
from plavoid.charts import AffineChart, AffineSubspaceTarget, Atlas, EuclideanSpace, LipschitzTarget
from plavoid.errors import CocycleViolation, ConstraintViolated, SubbundleViolation


def segment_axis_distance(a, b):
    """Distance from the segment [a, b] to the first coordinate axis (numpy oracle)."""
    a, b = np.asarray(a, float)[1:], np.asarray(b, float)[1:]
    d = b - a
    t = 0.0 if not d.any() else np.clip(-a @ d / (d @ d), 0, 1)
    return float(np.linalg.norm(a + t * d))


def check_rep(res, i, eps):
    K = res.section.complex
    S = res.spec.patches[i]
    rep = np.asarray(res.section.reps[i], dtype=float)
    for s in K.facets:
        if all(v in S for v in s):
            assert segment_axis_distance(rep[s[0]], rep[s[-1]]) > 0
    assert max(np.max(np.abs(rep[v])) for v in S) < eps


@pytest.mark.parametrize("exact", [False, True])
def test_mobius_section(exact):
    spec, f = mobius_bundle(exact=exact)
    eps = PLScalarField(spec.base, np.full(spec.base.n_vertices, 0.1))
    res = section_avoid_result(spec, f, eps, seed=3)
    assert res.passed
    assert res.residual == 0
    for i in range(2):
        check_rep(res, i, 0.1)


def test_mobius_twist_is_real():
    spec, _ = mobius_bundle()
    flips = [t for v, t in spec.transitions[(0, 1)].items() if not t.equals(AffineTransition.identity(3))]
    assert len(flips) == 2
    assert flips[0].M[1][1] == -1


def test_fixed_arc_is_untouched():
    spec, f0 = mobius_bundle(exact=True)
    n = spec.base.n_vertices
    # push the section off the axis on an arc inside patch 0 only
    reps = [r.copy() for r in f0.reps]
    arc = [2, 3, 4, 5]
    for v in arc:
        for r in reps:
            r[v] = np.array([Fraction(0), Fraction(1, 20), Fraction(0)], dtype=object)
    f = Section(spec.base, tuple(reps))
    C = VertexRegion.of(spec.base, arc)
    eps = PLScalarField(spec.base, np.full(n, 0.2))
    res = section_avoid_result(spec, f, eps, C=C, seed=1)
    K = res.section.complex
    ws = K.weights_to(spec.base)
    for v, w in enumerate(ws):
        if set(w) <= set(arc) and len(w) == 1:
            assert list(res.section.reps[0][v]) == list(reps[0][next(iter(w))])


def test_constraint_violated_on_arc():
    spec, f = mobius_bundle()
    eps = PLScalarField(spec.base, np.full(spec.base.n_vertices, 0.2))
    with pytest.raises(ConstraintViolated):
        section_avoid_result(spec, f, eps, C=VertexRegion.of(spec.base, [2, 3]))


def trivial_bundle(M=None, b=None):
    K = circle_base(12)
    S0, S1 = list(range(0, 7)) + [11], list(range(5, 12)) + [0]
    ev = AffineSubspaceTarget(np.eye(3), np.zeros(3), 2, "axis")
    atlas = Atlas(EuclideanSpace(3), (AffineChart.identity(3),))
    target = LipschitzTarget(2, (True,), ev, "axis")
    I = np.eye(3, dtype=int).astype(object)
    comps = {(0, 1): [((5, 6), I if M is None else M, b), ((11, 0), I, None)]}
    return BundleSpec.build(K, (S0, S1), atlas, target, comps)


def test_trivial_bundle_gives_global_map():
    spec = trivial_bundle()
    z = np.zeros((12, 3))
    res = section_avoid_result(spec, Section(spec.base, (z, z.copy())), PLScalarField(spec.base, np.full(12, 0.1)))
    assert res.passed and res.residual == 0


def test_subbundle_violation():
    spec = trivial_bundle(b=np.array([0, 1, 0], dtype=object))
    with pytest.raises(SubbundleViolation):
        spec.validate()


def test_cocycle_violation():
    spec = trivial_bundle()
    bad = dict(spec.transitions)
    bad[(1, 0)] = {v: AffineTransition.make(np.diag([1, -1, 1]).astype(object)) for v in bad[(1, 0)]}
    broken = BundleSpec(spec.base, spec.patches, spec.fiber_atlas, spec.target, bad)
    with pytest.raises(CocycleViolation):
        broken.check_cocycle()


def test_missing_overlap_transition():
    spec = trivial_bundle()
    bad = dict(spec.transitions)
    bad[(0, 1)] = {5: bad[(0, 1)][5]}
    with pytest.raises(CocycleViolation):
        BundleSpec(spec.base, spec.patches, spec.fiber_atlas, spec.target, bad).check_overlaps()


def test_coherence_residual_detects_mismatch():
    spec, f = mobius_bundle()
    reps = [r.copy() for r in f.reps]
    reps[1][12] = [0.0, 0.5, 0.0]
    assert Section(spec.base, tuple(reps)).coherence_residual(spec) == pytest.approx(0.5)


def test_transition_algebra():
    t = AffineTransition.make(np.array([[0, -1], [1, 0]], dtype=object), np.array([1, 2], dtype=object))
    assert t.compose(t.inverse()).equals(AffineTransition.identity(2))
    y = t.apply(np.array([Fraction(1, 3), Fraction(0)], dtype=object))
    assert list(y) == [1, Fraction(7, 3)]
