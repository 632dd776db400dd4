import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptrhc.estimator import PEWindow, estimator_rhs, pe_metric

finite = st.floats(-1e3, 1e3)


def test_rhs_value():
    D = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]])
    e = np.array([1.0, 1.0, 1.0])
    assert np.array_equal(estimator_rhs(D, e), [-4.0, -2.0])
    assert np.array_equal(estimator_rhs(D, e, gain=0.5), [-2.0, -1.0])


def test_rhs_shape_mismatch():
    with pytest.raises(ValueError):
        estimator_rhs(np.eye(3), np.ones(2))


@given(arrays(float, (3, 3), elements=finite), arrays(float, 3, elements=finite),
       arrays(float, 3, elements=finite))
@settings(max_examples=100, deadline=None)
def test_cross_term_cancels(D, e, err):
    cross = e @ D @ err
    drift = err @ estimator_rhs(D, e)
    assert abs(cross + drift) <= 1e-9 * (1 + abs(cross))


def test_window_trapezoid():
    w = PEWindow(1.0, 2)
    D = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]])
    for k in range(11):
        w.push(k * 0.1, D)
    assert w.span == pytest.approx(1.0)
    assert np.allclose(w.integral(), D.T @ D)
    assert pe_metric(w) == pytest.approx(1.0)


def test_window_eviction():
    w = PEWindow(0.5, 1)
    for k in range(20):
        w.push(k * 0.1, np.array([[float(k)]]))
    assert w.span <= 0.5 + 1e-12
    # samples 14..19 remain: trapezoid of k^2 with spacing 0.1
    vals = np.arange(14, 20.0) ** 2
    assert w.integral()[0, 0] == pytest.approx(0.1 * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


def test_rank_deficient_regressor_is_not_exciting():
    w = PEWindow(5.0, 2)
    D = np.array([[1.0, 1.0], [2.0, 2.0], [0.0, 0.0]])
    for k in range(10):
        w.push(k * 0.5, D)
    assert pe_metric(w) == pytest.approx(0.0, abs=1e-12)


def test_empty_window():
    assert pe_metric(PEWindow(5.0, 3)) == 0.0
    with pytest.raises(ValueError):
        PEWindow(0.0, 3)
