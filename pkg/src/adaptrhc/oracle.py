"""Slow, independent reference computations used to validate the solver.

Nothing here is on the real-time path. The shooting solver shares only the
forward Euler-Lagrange integration with the continuation method.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .model import HivParams
from .nrhc import NrhcConfig, forward_kernel


class InfectedFreeRegime(ValueError):
    """The infected equilibrium has a negative infected-cell count."""

    def __init__(self, message, point):
        super().__init__(message)
        self.point = point


@dataclass
class ShootingResult:
    lambda0: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def costate_residual(lam0, y_t, theta_hat, x_t, cfg: NrhcConfig, model, T) -> np.ndarray:
    """Terminal costate ``lam*(T)`` reached from ``lam0`` by the forward sweep."""
    N = cfg.N_tau
    ys = np.zeros((N + 1, model.n))
    lams = np.zeros((N + 1, model.n))
    bad = forward_kernel(model.family, np.ascontiguousarray(y_t, dtype=float),
                         np.ascontiguousarray(lam0, dtype=float),
                         np.ascontiguousarray(x_t, dtype=float),
                         np.ascontiguousarray(theta_hat, dtype=float),
                         model.cf, model.ci, cfg.Q, cfg.Rinv, T / N, int(cfg.stepper), ys, lams)
    if bad >= 0:
        return np.full(model.n, np.inf)
    return lams[-1].copy()


def shoot_tpbvp(y_t, theta_hat, x_t, cfg: NrhcConfig, model, T, lam_guess=None,
                max_iter=50, tol=1e-8) -> ShootingResult:
    """Solve ``lam*(T; lam0) = 0`` for the initial costate by damped Newton.

    The Jacobian comes from central differences with step
    ``1e-6 * (1 + |lam_i|)``; each accepted step must strictly reduce the
    residual norm (step halving, at most 40 halvings).
    """
    if not T > 0:
        raise ValueError("shooting needs a positive horizon")

    def residual(lam):
        return costate_residual(lam, y_t, theta_hat, x_t, cfg, model, T)

    lam = np.zeros(model.n) if lam_guess is None else np.array(lam_guess, dtype=float)
    F = residual(lam)
    norm = float(np.linalg.norm(F))
    history = [norm]
    it = 0
    while it < max_iter:
        if norm <= tol * (1.0 + np.linalg.norm(lam)):
            return ShootingResult(lam, norm, it, True, history)
        it += 1
        J = np.empty((model.n, model.n))
        for j in range(model.n):
            dl = 1e-6 * (1.0 + abs(lam[j]))
            step = np.zeros(model.n)
            step[j] = dl
            J[:, j] = (residual(lam + step) - residual(lam - step)) / (2.0 * dl)
        try:
            direction = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        for _ in range(40):
            trial = lam + scale * direction
            F_trial = residual(trial)
            n_trial = float(np.linalg.norm(F_trial))
            if n_trial < norm:
                lam, F, norm = trial, F_trial, n_trial
                history.append(norm)
                break
            scale *= 0.5
        else:
            break
    converged = norm <= tol * (1.0 + np.linalg.norm(lam))
    return ShootingResult(lam, norm, it, converged, history)


def steady_state(params: HivParams) -> np.ndarray:
    """Infected equilibrium of the HIV model."""
    p = params
    x1 = p.mu1 * p.mu2 / (p.beta * p.k)
    x2 = (p.s - p.d * x1) / p.mu1
    x3 = p.k * x2 / p.mu2
    point = np.array([x1, x2, x3])
    if x2 < 0:
        raise InfectedFreeRegime(
            f"s={p.s} is below d*x1={p.d * x1}; only the infection-free equilibrium exists",
            point)
    return point


def fd_gradient(field, point, h=1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar field."""
    point = np.asarray(point, dtype=float)
    grad = np.empty(point.size)
    for i in range(point.size):
        step = np.zeros(point.size)
        step[i] = h
        grad[i] = (field(point + step) - field(point - step)) / (2.0 * h)
    return grad


def fd_jacobian(fn, point, h=1e-6) -> np.ndarray:
    """Central-difference Jacobian; column ``i`` uses step ``h * (1 + |x_i|)``."""
    point = np.asarray(point, dtype=float)
    cols = []
    for i in range(point.size):
        hi = h * (1.0 + abs(point[i]))
        step = np.zeros(point.size)
        step[i] = hi
        cols.append((np.asarray(fn(point + step)) - np.asarray(fn(point - step))) / (2.0 * hi))
    return np.column_stack(cols)


def lq_riccati(A, Q, R, T, rtol=1e-12, atol=1e-14) -> np.ndarray:
    """``P(0)`` for ``min int_0^T (y'Qy + u'Ru)`` subject to ``y' = Ay + u``.

    Integrates ``-P' = Q + A'P + PA - P R^{-1} P`` backward from ``P(T) = 0``
    with an adaptive solver. The optimal initial costate is ``2 P(0) y(0)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Rinv = np.linalg.inv(np.atleast_2d(np.asarray(R, dtype=float)))
    n = A.shape[0]
    if T == 0:
        return np.zeros((n, n))

    def rate(s, p):
        # s runs backward in time: s = T - tau
        P = p.reshape(n, n)
        return (Q + A.T @ P + P @ A - P @ Rinv @ P).ravel()

    sol = solve_ivp(rate, (0.0, T), np.zeros(n * n), method="DOP853", rtol=rtol, atol=atol)
    P = sol.y[:, -1].reshape(n, n)
    return 0.5 * (P + P.T)
