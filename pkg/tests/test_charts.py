import numpy as np
import pytest

from plavoid import (AffineChart, LipschitzTarget, PLMap, PLScalarField, build_complex, certify_bound,
                     chart_local_avoid)
from plavoid.charts import (AffineSubspaceTarget, AllSpace, Ball, Box, StereographicChart, certify_clearance,
                            clearance_to_complement, orthonormal_frame, sphere_atlas, sphere_point_target,
                            validate_chart)
from plavoid.errors import CodimensionTooSmall, PointOutsideImage, PreconditionError

INTERVAL = build_complex([[0.0], [1.0]], [(0, 1)])


def const(K, x):
    return PLScalarField(K, np.full(K.n_vertices, float(x)))


def axis_target():
    ev = AffineSubspaceTarget(np.eye(3), np.zeros(3), 2, "axis")
    return ev, LipschitzTarget(2, (True,), ev, "axis")


def test_clearance_examples():
    assert clearance_to_complement(AffineChart.identity(2), np.array([5.0, -3.0])) == 1
    ball = AffineChart.identity(2, image=Ball((0.0, 0.0), 1.0))
    assert clearance_to_complement(ball, np.zeros(2)) == pytest.approx(1.0)
    assert clearance_to_complement(ball, np.array([0.6, 0.0])) == pytest.approx(0.4)
    with pytest.raises(PointOutsideImage):
        clearance_to_complement(ball, np.array([2.0, 0.0]))
    box = AffineChart.identity(2, image=Box((-1.0, -1.0), (1.0, 2.0)))
    assert clearance_to_complement(box, np.array([0.5, 0.0])) == pytest.approx(0.5)


def test_axis_example_keeps_first_coordinate():
    ev, tg = axis_target()
    f = PLMap(INTERVAL, np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    eps = const(INTERVAL, 0.1)
    g = chart_local_avoid(f, eps, AffineChart.identity(3), tg)
    S = g.complex
    t = S.vertices[:, 0]
    assert np.array_equal(g.values[:, 0], t)
    assert np.all(np.linalg.norm(g.values[:, 1:], axis=1) > 0)
    assert certify_bound(f, g, eps).passed and certify_clearance(g, ev).passed


def test_map_outside_chart_is_unchanged():
    _, tg = axis_target()
    far = AffineChart.identity(3, center=[10.0, 0, 0], image=Ball((0.0, 0.0, 0.0), 1.0))
    f = PLMap(INTERVAL, np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    g = chart_local_avoid(f, const(INTERVAL, 0.1), far, tg)
    assert g is f or np.array_equal(g.values, f.values)


def test_ball_image_near_boundary_stays_inside():
    z = np.array([0.99, 0.0])
    ev = AffineSubspaceTarget.point(z)
    chart = AffineChart(np.eye(2), z, Ball((0.99, 0.0), 1.0), 1.0, "ball")
    tg = LipschitzTarget(2, (True,), ev)
    P = build_complex([[0.0]], [(0,)])
    f = PLMap(P, z[None, :].copy())
    g = chart_local_avoid(f, const(P, 1.0), chart, tg)
    a = chart.forward(g.values)[0]
    assert chart.image.contains(a)
    assert 0 < np.linalg.norm(g.values[0] - z) < 0.01


def test_codimension_must_exceed_dimension():
    ev = AffineSubspaceTarget(np.eye(2), np.zeros(2), 1, "line")
    tg = LipschitzTarget(1, (True,), ev)
    f = PLMap(INTERVAL, np.zeros((2, 2)))
    with pytest.raises(CodimensionTooSmall):
        chart_local_avoid(f, const(INTERVAL, 0.1), AffineChart.identity(2), tg)
    with pytest.raises(PreconditionError):
        LipschitzTarget(0, (True,), ev)


def test_stereographic_round_trip_and_lipschitz():
    rng = np.random.default_rng(0)
    pole = np.array([0.0, 0.0, 1.0])
    ch = StereographicChart(pole, orthonormal_frame(pole), AllSpace(), 1.0, "n")
    a = rng.normal(size=(100, 2))
    assert np.max(np.abs(ch.forward(ch.inverse(a)) - a)) < 1e-12
    validate_chart(ch)
    bad = AffineChart(np.eye(2) * 2, np.zeros(2), AllSpace(), 0.1, "shrunk")
    with pytest.raises(PreconditionError):
        validate_chart(bad)


def test_sphere_target_sits_at_chart_origin():
    atlas = sphere_atlas(1)
    tg = sphere_point_target(atlas, [0.0, 1.0])
    assert tg.meets == (False, True)
    assert tg.q == 1
    tg.validate(atlas, samples=[[0.0, 1.0]])
