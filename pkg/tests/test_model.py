import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptrhc.model import (
    PARAM_NAMES, Constant, HivParams, Sinusoid, canonical_unknowns, hiv_full,
    hiv_jacobian, hiv_rhs, hiv_split, linear_model,
)
from adaptrhc.oracle import fd_jacobian

TRUE = HivParams()

states = st.tuples(st.floats(0.1, 2000), st.floats(0.1, 500), st.floats(0.1, 5e4)).map(np.array)
subsets = st.sets(st.sampled_from(PARAM_NAMES), min_size=1)


def test_rhs_by_hand():
    y = np.array([1000.0, 10.0, 1000.0])
    got = hiv_rhs(y, TRUE)
    infection = 9e-5 * 1000.0 * 1000.0
    assert got == pytest.approx([36 - 108 - infection, infection - 5.0, 5000.0 - 3000.0], rel=1e-15)


def test_split_regressor_columns():
    m = hiv_split(["k", "s", "mu1"], TRUE)
    assert m.param_names == ("s", "mu1", "k")
    D = m.D(np.array([2.0, 3.0, 5.0]))
    assert np.array_equal(D, [[1, 0, 0], [0, -3, 0], [0, 0, 3]])


@given(states, subsets)
@settings(max_examples=60, deadline=None)
def test_split_reassembles_full_model(y, unknown):
    m = hiv_split(unknown, TRUE)
    theta = TRUE.as_array()[list(m.ci)]
    full = hiv_rhs(y, TRUE)
    assert np.allclose(m.g(y) + m.D(y) @ theta, full, rtol=1e-12, atol=1e-9)
    assert np.allclose(m.f(y, theta), full, rtol=1e-12, atol=1e-9)


@given(states, subsets)
@settings(max_examples=60, deadline=None)
def test_jacobian_matches_differences(y, unknown):
    m = hiv_split(unknown, TRUE)
    theta = TRUE.as_array()[list(m.ci)] * 1.7
    fd = fd_jacobian(lambda z: m.f(z, theta), y, 1e-4)
    assert np.allclose(m.jac_f(y, theta), fd, rtol=1e-7, atol=1e-7)
    assert np.allclose(m.jac_g(y) + m.jac_DTheta(y, theta), m.jac_f(y, theta), atol=1e-12)


def test_jacobian_structure():
    J = hiv_jacobian([1.0, 2.0, 3.0], [0.5, 500.0], ["mu1", "k"], TRUE)
    expect = [[-0.108 - 9e-5 * 3, 0, -9e-5], [9e-5 * 3, -0.5, 9e-5], [0, 500.0, -3.0]]
    assert np.allclose(J, expect, rtol=1e-15)


def test_hessian_contraction():
    m = hiv_full(TRUE)
    lam = np.array([2.0, 7.0, -1.0])
    H = m.hess_contract([1.0, 1.0, 1.0], TRUE.as_array(), lam)
    assert H[0, 2] == H[2, 0] == pytest.approx(5 * 9e-5)
    assert np.count_nonzero(H) == 2


def test_params_validation():
    with pytest.raises(ValueError, match="mu2"):
        HivParams(mu2=0.0)
    with pytest.raises(ValueError):
        HivParams(s=float("nan"))
    assert TRUE.replace(k=400).k == 400
    assert HivParams.from_array(TRUE.as_array()) == TRUE


def test_unknown_names():
    assert canonical_unknowns(["μ1", "β"]) == ("beta", "mu1")
    with pytest.raises(ValueError, match="empty"):
        canonical_unknowns([])
    with pytest.raises(ValueError, match="gamma"):
        canonical_unknowns(["gamma"])


def test_signals():
    assert Constant(3.0)(123.0) == 3.0
    s = Sinusoid(36.0, 0.9, np.pi / 1000)
    assert s(0.0) == pytest.approx(3.6)
    assert s(1000.0) == pytest.approx(68.4)


def test_linear_model():
    A = np.array([[0.0, 1.0], [-2.0, -0.5]])
    m = linear_model(A)
    y = np.array([0.3, -1.0])
    assert np.allclose(m.f(y, None), A @ y)
    assert np.array_equal(m.jac_f(y, None), A)
    assert m.D(y).shape == (2, 0)
    with pytest.raises(ValueError):
        linear_model(np.ones((2, 3)))


def test_theta_shape_checked():
    m = hiv_split(["s"], TRUE)
    with pytest.raises(ValueError, match="length 1"):
        m.f([1.0, 1.0, 1.0], [1.0, 2.0])
