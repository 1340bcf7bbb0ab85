from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from plavoid import PLMap, PLScalarField, build_complex, certify_bound, certify_nonvanishing, subdivide
from plavoid.avoid_core import hull_avoids_origin
from plavoid.avoid_core.certificates import bound_violations
from plavoid.errors import CarrierMismatch


def lp_hull_contains_origin(rows) -> bool:
    """Independent route: feasibility of sum w_i y_i = 0, sum w_i = 1, w >= 0."""
    Y = np.asarray(rows, float)
    A_eq = np.vstack([Y.T, np.ones(len(Y))])
    b_eq = np.zeros(Y.shape[1] + 1)
    b_eq[-1] = 1
    res = linprog(np.zeros(len(Y)), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * len(Y), method="highs")
    return res.status == 0


EDGE = build_complex([[0.0], [1.0]], [(0, 1)])
TRI = build_complex([[0, 0], [1, 0], [0, 1]], [(0, 1, 2)])


def test_nonvanishing_examples():
    assert certify_nonvanishing(PLMap(TRI, np.tile([1.0, 0.0], (3, 1)))).passed
    bad = certify_nonvanishing(PLMap(EDGE, np.array([[-1.0, 0.0], [1.0, 0.0]])))
    assert not bad.passed and bad.failures()[0].simplex == (0, 1)
    assert certify_nonvanishing(PLMap(TRI, np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))).passed


def test_bound_examples():
    f = PLMap(EDGE, np.array([[0.0, 0.0], [1.0, 0.0]]))
    eps = PLScalarField(EDGE, np.array([0.1, 0.1]))
    assert certify_bound(f, f, eps).passed
    far = PLMap(EDGE, np.array([[0.2, 0.0], [0.2, 0.0]]))
    assert not certify_bound(PLMap(EDGE, np.zeros((2, 2))), far, eps).passed
    g = PLMap(EDGE, np.array([[0.0, 0.05], [1.0, 0.05]]))
    cert = certify_bound(f, g, PLScalarField(EDGE, np.array([0.04, 0.06])))
    assert not cert.passed and bound_violations(cert) == [0]


def test_bound_on_refinement_and_mismatch():
    f = PLMap(EDGE, np.array([[0.0, 0.0], [1.0, 0.0]]))
    S = subdivide(EDGE, 1)
    g = f.on(S)
    assert certify_bound(f, g, PLScalarField(EDGE, np.array([0.1, 0.1]))).passed
    other = build_complex([[0.0], [1.0]], [(0, 1)])
    with pytest.raises(CarrierMismatch):
        certify_bound(f, PLMap(other, f.values), PLScalarField(EDGE, np.array([0.1, 0.1])))


def test_certificate_json_has_rational_witnesses():
    cert = certify_nonvanishing(PLMap(TRI, np.array([[1.0, 0.2], [0.3, 1.0], [1.0, 1.0]])))
    doc = cert.to_json()
    assert doc["pass"] and doc["n_simplices"] == 1
    assert set(doc["verdicts"][0]["witness"]) in ({"axis", "sign"}, {"direction", "margin_sq"})


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.integers(-4, 4), min_size=2, max_size=2), min_size=1, max_size=3))
def test_hull_decision_matches_linear_programming(rows):
    ok, _ = hull_avoids_origin([[Fraction(x) for x in r] for r in rows])
    assert ok == (not lp_hull_contains_origin(rows))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3), min_size=1, max_size=4))
def test_passing_witness_separates(rows):
    ok, w = hull_avoids_origin([[Fraction(x) for x in r] for r in rows])
    if ok and "direction" in w:
        d = [Fraction(x) for x in w["direction"]]
        assert all(sum(a * Fraction(b) for a, b in zip(d, r)) > 0 for r in rows)
