import math

import numpy as np
import pytest

from adaptrhc.integrate import NonFiniteError, StepperKind, model_step, step
from adaptrhc.model import HivParams, hiv_full, hiv_rhs


def integrate_exp(kind, h, t_end=1.0):
    y = np.array([1.0])
    for i in range(int(round(t_end / h))):
        y = step(lambda t, z: -z, i * h, y, h, kind)
    return abs(y[0] - math.exp(-t_end))


def order_ratio(kind, h=0.05):
    return integrate_exp(kind, h) / integrate_exp(kind, h / 2)


def test_euler_order():
    assert 1.8 <= order_ratio(StepperKind.FORWARD_EULER) <= 2.2


def test_rk4_order():
    assert 14 <= order_ratio(StepperKind.RUNGE_KUTTA_4) <= 18


def test_parse():
    assert StepperKind.parse("RK4") is StepperKind.RUNGE_KUTTA_4
    assert StepperKind.parse("forward-euler") is StepperKind.FORWARD_EULER
    with pytest.raises(ValueError, match="midpoint"):
        StepperKind.parse("midpoint")


def test_bad_step():
    with pytest.raises(ValueError):
        step(lambda t, y: y, 0.0, [1.0], 0.0)
    with pytest.raises(NonFiniteError):
        step(lambda t, y: y * np.inf, 0.0, [1.0], 0.1)


@pytest.mark.parametrize("kind", list(StepperKind))
def test_model_step_matches_generic(kind):
    p = HivParams()
    m = hiv_full(p)
    y0 = np.array([1000.0, 10.0, 1000.0])
    u = np.array([1.0, -2.0, 3.0])
    ref = y0
    for i in range(4):
        ref = step(lambda t, z: hiv_rhs(z, p) + u, 0.0, ref, 0.0025, kind)
    got = model_step(m.family, y0, p.as_array(), m.cf, m.ci, u, 0.01, int(kind), 4)
    assert np.allclose(got, ref, rtol=1e-14)
