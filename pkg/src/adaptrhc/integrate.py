"""Fixed-step explicit integrators for the real-time and prediction axes."""
from __future__ import annotations

from enum import IntEnum

import numpy as np

from ._accel import all_finite, jit
from .model import f_eval


class StepperKind(IntEnum):
    FORWARD_EULER = 0
    RUNGE_KUTTA_4 = 1

    @classmethod
    def parse(cls, value) -> "StepperKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"euler": cls.FORWARD_EULER, "forward_euler": cls.FORWARD_EULER,
                   "rk4": cls.RUNGE_KUTTA_4, "runge_kutta_4": cls.RUNGE_KUTTA_4}
        if key not in aliases:
            raise ValueError(f"unknown stepper {value!r}; use 'euler' or 'rk4'")
        return aliases[key]


class NonFiniteError(FloatingPointError):
    """Raised when an integration produces inf or NaN."""

    def __init__(self, message, t=None, index=None):
        super().__init__(message)
        self.t = t
        self.index = index


def step(rhs, t, y, h, kind=StepperKind.RUNGE_KUTTA_4):
    """Advance ``y' = rhs(t, y)`` by one step of size ``h``."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h!r}")
    y = np.asarray(y, dtype=float)
    if kind == StepperKind.FORWARD_EULER:
        out = y + h * np.asarray(rhs(t, y))
    else:
        k1 = np.asarray(rhs(t, y))
        k2 = np.asarray(rhs(t + 0.5 * h, y + 0.5 * h * k1))
        k3 = np.asarray(rhs(t + 0.5 * h, y + 0.5 * h * k2))
        k4 = np.asarray(rhs(t + h, y + h * k3))
        out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(out).all():
        raise NonFiniteError(f"non-finite state after step from t={t!r}", t=t)
    return out


@jit
def _forced_rhs(family, y, theta, cf, ci, u):
    return f_eval(family, y, theta, cf, ci) + u


@jit
def model_step(family, y, theta, cf, ci, u, h, kind, substeps):
    """Advance ``y' = f(y, theta) + u`` over ``h`` with ``theta`` and ``u`` held.

    Returns the new state; the caller checks finiteness.
    """
    dt = h / substeps
    z = y.copy()
    for _ in range(substeps):
        if kind == 0:
            z = z + dt * _forced_rhs(family, z, theta, cf, ci, u)
        else:
            k1 = _forced_rhs(family, z, theta, cf, ci, u)
            k2 = _forced_rhs(family, z + 0.5 * dt * k1, theta, cf, ci, u)
            k3 = _forced_rhs(family, z + 0.5 * dt * k2, theta, cf, ci, u)
            k4 = _forced_rhs(family, z + dt * k3, theta, cf, ci, u)
            z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not all_finite(z):
            return z
    return z
