import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plavoid import (PLMap, PLScalarField, avoid_zero, build_complex, certify_bound, certify_nonvanishing,
                     level_sets, oracle_constant_shift, shrink)
from plavoid.avoid_core import avoid_zero_result, prescale_factor
from plavoid.complex import transport_values
from plavoid.errors import DimensionMismatch, OracleExhausted
from plavoid.exact import fraction_array

from instances import near_origin_instance, random_instance

INTERVAL = build_complex([[0.0], [1.0]], [(0, 1)])
POINT = build_complex([[0.0]], [(0,)])


def const(K, x):
    return PLScalarField(K, np.full(K.n_vertices, float(x)))


def test_level_sets_direct_threshold():
    K = build_complex([[0.0], [0.5], [1.0]], [(0, 1), (1, 2)])
    L = level_sets(PLMap(K, np.array([[-1.0], [0.0], [1.0]])), const(K, 0.5))
    assert L.F(0).indices == {2} and L.G(0).indices == {0}


def test_level_sets_zero_map_is_empty():
    L = level_sets(PLMap(INTERVAL, np.zeros((2, 1))), const(INTERVAL, 0.3))
    assert not L.upper.any() and not L.lower.any()


def test_level_sets_strict_sandwich():
    L = level_sets(PLMap(INTERVAL, np.array([[0.4], [0.6]])), const(INTERVAL, 0.5), mode="strict")
    fv = transport_values(np.array([[0.4], [0.6]]), INTERVAL, L.complex, exact=True)
    F = L.F(0).indices
    assert 1 in F
    assert all(fv[v, 0] >= 0.25 for v in F)
    assert L.rounds == 0  # {0.4, 0.6} already sits above eps/2


def test_shrink_interval_explicit_radii():
    f = PLMap(INTERVAL, np.array([[1.0, -0.1], [0.1, 1.0]]))
    L = level_sets(f, const(INTERVAL, 0.5))
    assert L.F(0).indices == {0} and L.F(1).indices == {1}
    S = shrink(L, radii=np.array([0.3, 0.4]))
    assert S.certificate().passed and S.check_nesting()


@pytest.mark.parametrize("seed", range(5))
def test_shrink_triangle_random(seed):
    K = build_complex([[0, 0], [1, 0], [0, 1]], [(0, 1, 2)])
    f = PLMap(K, np.eye(3))
    S = shrink(level_sets(f, const(K, 0.5)), seed=seed)
    assert S.certificate().passed and S.check_nesting()


def test_avoid_zero_point():
    g = avoid_zero(PLMap(POINT, np.array([[0.0]])), const(POINT, 1.0))
    assert 0 < abs(g.values[0, 0]) < 1


def test_avoid_zero_interval_in_plane():
    f = PLMap(INTERVAL, np.array([[-0.5, 0.0], [0.5, 0.0]]))
    eps = const(INTERVAL, 0.1)
    g = avoid_zero(f, eps)
    assert certify_nonvanishing(g).passed and certify_bound(f, g, eps).passed
    o = oracle_constant_shift(f, eps)
    assert certify_nonvanishing(o).passed and certify_bound(f, o, eps).passed


def test_interval_into_line_is_rejected():
    f = PLMap(INTERVAL, np.array([[-1.0], [1.0]]))
    with pytest.raises(DimensionMismatch):
        avoid_zero(f, const(INTERVAL, 0.1))
    with pytest.raises(OracleExhausted):
        oracle_constant_shift(f, const(INTERVAL, 0.1))


def test_oracle_point_and_shift_shape():
    o = oracle_constant_shift(PLMap(POINT, np.zeros((1, 2))), const(POINT, 1.0))
    assert 0 < np.linalg.norm(o.values[0]) < 1
    f = PLMap(INTERVAL, np.array([[-0.5, 0.0], [0.5, 0.0]]))
    o = oracle_constant_shift(f, const(INTERVAL, 0.1), seed=3)
    shift = f.values - o.values
    assert np.allclose(shift[0], shift[1]) and o.values[0, 1] != 0


def test_prescale_factor():
    assert prescale_factor(4) == pytest.approx(1 / 5)


def test_kernel_keeps_f_on_level_sets():
    f, eps = near_origin_instance(5, 2)
    f = PLMap(f.complex, f.values.copy())
    f.values[0] = [1.0, -1.0, 0.0]
    res = avoid_zero_result(f, eps, seed=0)
    L = res.system.levels
    fv = transport_values(f.values, f.complex, res.g.complex, exact=False)
    for i in range(3):
        on = L.upper[:, i] | L.lower[:, i]
        assert np.array_equal(res.g.values[on, i], fv[on, i])


def test_kernel_is_deterministic():
    f, eps = near_origin_instance(9, 2)
    a = avoid_zero(f, eps, seed=4)
    b = avoid_zero(f, eps, seed=4)
    assert a.complex.n_vertices == b.complex.n_vertices and np.array_equal(a.values, b.values)


def test_kernel_rational_mode():
    f, eps = near_origin_instance(2, 1)
    fx = PLMap(f.complex, fraction_array(f.values))
    g = avoid_zero(fx, eps.as_exact())
    assert g.exact and certify_nonvanishing(g).passed


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), dim=st.integers(0, 2))
def test_kernel_contract_property(seed, dim):
    f, eps = near_origin_instance(seed, dim)
    res = avoid_zero_result(f, eps, seed=seed)
    assert res.nonvanishing.passed and res.bound.passed
    assert res.system.certificate().passed


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_oracle_agrees_on_contract(seed):
    f, eps = random_instance(seed, int(seed % 3))
    g = oracle_constant_shift(f, eps, seed=seed)
    assert certify_nonvanishing(g).passed and certify_bound(f, g, eps).passed
