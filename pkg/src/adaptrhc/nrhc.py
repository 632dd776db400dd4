"""Real-time nonlinear receding horizon control by backward-sweep continuation.

Each sample solves one finite-horizon problem on the prediction axis tau:
the Euler-Lagrange equations are integrated forward from the live state and
costate, the Riccati pair (S, c) is integrated backward from the horizon end,
and the costate is advanced one sample along real time. No iteration.

Cost convention: ``e'Qe + u'Ru`` without a factor 1/2, so ``H_u = 2Ru + lam``,
``u = -R^{-1} lam / 2`` and ``H_uu = 2R``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._accel import all_finite, jit, mm, mtm, mtv, mv
from .integrate import NonFiniteError, StepperKind
from .model import ModelSpec, f_eval, fy_eval, hess_eval

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


def _spd(name, M):
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * (1 + np.abs(M).max())):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(0.5 * (M + M.T))[0] <= 0:
        raise ValueError(f"{name} must be positive definite")


@dataclass
class NrhcConfig:
    """Weights, horizon schedule and grids for the receding horizon solver.

    ``A_s`` is the continuation gain (residual obeys ``dF/dt = -A_s F``);
    ``N_tau`` is the fixed number of tau intervals, so the tau step is
    ``T(t) / N_tau``.
    """

    Q: np.ndarray
    R: np.ndarray
    T_f: float = 0.1
    alpha: float = 0.01
    A_s: np.ndarray | None = None
    t_s: float = 0.01
    N_tau: int = 20
    stepper: StepperKind = StepperKind.RUNGE_KUTTA_4
    divergence_threshold: float = 1e6
    estimator_gain: float = 1.0
    Rinv: np.ndarray = field(init=False, repr=False)
    L: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.Q = np.ascontiguousarray(np.atleast_2d(np.asarray(self.Q, dtype=float)))
        self.R = np.ascontiguousarray(np.atleast_2d(np.asarray(self.R, dtype=float)))
        n = self.Q.shape[0]
        if self.A_s is None:
            self.A_s = 60.0 * np.eye(n)
        self.A_s = np.ascontiguousarray(np.atleast_2d(np.asarray(self.A_s, dtype=float)))
        self.stepper = StepperKind.parse(self.stepper)
        for name in ("Q", "R", "A_s"):
            if getattr(self, name).shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
        _spd("Q", self.Q)
        _spd("R", self.R)
        if np.linalg.eigvals(self.A_s).real.min() <= 0:
            raise ValueError("A_s must have eigenvalues with positive real part")
        for name in ("T_f", "alpha", "t_s", "divergence_threshold"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if int(self.N_tau) != self.N_tau or self.N_tau < 1:
            raise ValueError("N_tau must be an integer >= 1")
        self.N_tau = int(self.N_tau)
        self.Rinv = np.ascontiguousarray(np.linalg.inv(self.R))
        self.L = 0.5 * self.Rinv

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def diagonal(cls, q, r, a_s=60.0, **kwargs) -> "NrhcConfig":
        q = np.asarray(q, dtype=float)
        return cls(Q=np.diag(q), R=np.diag(np.asarray(r, dtype=float)),
                   A_s=a_s * np.eye(q.size), **kwargs)


@dataclass
class SimState:
    t: float
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    theta_hat: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "lam", "theta_hat"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))

    @property
    def e(self) -> np.ndarray:
        return self.y - self.x


class SweepWorkspace:
    """Trajectories on the tau grid for one forward/backward solve."""

    def __init__(self, n: int, N_tau: int):
        self.n = n
        self.N_tau = N_tau
        self.tau = np.zeros(N_tau + 1)
        self.y_star = np.zeros((N_tau + 1, n))
        self.lambda_star = np.zeros((N_tau + 1, n))
        self.G = np.zeros((N_tau + 1, n, n))
        self.K = np.zeros((N_tau + 1, n, n))
        self.S = np.zeros((N_tau + 1, n, n))
        self.c = np.zeros((N_tau + 1, n))
        self.F = np.zeros(n)
        self.T = 0.0

    def set_horizon(self, T: float) -> None:
        self.T = float(T)
        self.tau[:] = np.linspace(0.0, self.T, self.N_tau + 1)

    @property
    def h(self) -> float:
        return self.T / self.N_tau

    def max_asymmetry(self) -> float:
        """Largest ``|S - S^T| / (1 + |S|)`` over the grid (max-norms)."""
        diff = np.abs(self.S - np.transpose(self.S, (0, 2, 1))).max(axis=(1, 2))
        scale = 1.0 + np.abs(self.S).max(axis=(1, 2))
        return float((diff / scale).max())


class HamiltonianGradients(NamedTuple):
    H_y: np.ndarray
    f_y: np.ndarray
    H_yy: np.ndarray


class StepResult(NamedTuple):
    u: np.ndarray
    lam: np.ndarray
    F_norm: float
    J: float
    T: float
    c0: np.ndarray


def horizon(t, T_f, alpha):
    """Horizon length ``T_f (1 - exp(-alpha t))`` and its time derivative."""
    decay = math.exp(-alpha * t)
    return T_f * (1.0 - decay), T_f * alpha * decay


def control_from_costate(lam, R):
    lam = np.asarray(lam, dtype=float)
    return -0.5 * np.linalg.solve(np.atleast_2d(R), lam)


def hamiltonian(y, lam, theta_hat, x, u, cfg: NrhcConfig, model: ModelSpec) -> float:
    e = np.asarray(y, float) - np.asarray(x, float)
    u = np.asarray(u, float)
    f = model.f(y, theta_hat) + u
    return float(e @ cfg.Q @ e + u @ cfg.R @ u + np.asarray(lam, float) @ f)


def hamiltonian_gradients(y, lam, theta_hat, e, cfg: NrhcConfig, model: ModelSpec):
    """``H_y`` (as a vector), ``f_y`` and ``H_yy`` at one point.

    The control enters additively, so ``f_u = I`` and ``H_uy = 0``; the sweep
    coefficients are ``G = f_y``, ``L = R^{-1}/2`` and ``K = H_yy``.
    """
    lam = np.asarray(lam, dtype=float)
    f_y = model.jac_f(y, theta_hat)
    H_y = 2.0 * (cfg.Q @ np.asarray(e, dtype=float)) + f_y.T @ lam
    H_yy = 2.0 * cfg.Q + model.hess_contract(y, theta_hat, lam)
    return HamiltonianGradients(H_y, f_y, H_yy)


# -- kernels -----------------------------------------------------------------


@jit
def _hy(family, y, lam, x, theta, cf, ci, Q):
    return 2.0 * mv(Q, y - x) + mtv(fy_eval(family, y, theta, cf, ci), lam)


@jit
def _euler_lagrange(family, z, x, theta, cf, ci, Q, Rinv, n):
    y = z[:n].copy()
    lam = z[n:].copy()
    out = np.empty(2 * n)
    out[:n] = f_eval(family, y, theta, cf, ci) - 0.5 * mv(Rinv, lam)
    out[n:] = -_hy(family, y, lam, x, theta, cf, ci, Q)
    return out


@jit
def forward_kernel(family, y0, lam0, x, theta, cf, ci, Q, Rinv, h, kind, ys, lams):
    """Integrate state and costate forward over the tau grid.

    Returns -1 on success, else the index of the first non-finite node.
    """
    N = ys.shape[0] - 1
    n = y0.shape[0]
    z = np.empty(2 * n)
    z[:n] = y0
    z[n:] = lam0
    ys[0] = y0
    lams[0] = lam0
    for i in range(N):
        if kind == 0:
            z = z + h * _euler_lagrange(family, z, x, theta, cf, ci, Q, Rinv, n)
        else:
            k1 = _euler_lagrange(family, z, x, theta, cf, ci, Q, Rinv, n)
            k2 = _euler_lagrange(family, z + 0.5 * h * k1, x, theta, cf, ci, Q, Rinv, n)
            k3 = _euler_lagrange(family, z + 0.5 * h * k2, x, theta, cf, ci, Q, Rinv, n)
            k4 = _euler_lagrange(family, z + h * k3, x, theta, cf, ci, Q, Rinv, n)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not all_finite(z):
            return i + 1
        ys[i + 1] = z[:n]
        lams[i + 1] = z[n:]
    return -1


@jit
def coefficient_kernel(family, ys, lams, theta, cf, ci, Q, G, K):
    """Evaluate ``G = f_y`` and ``K = H_yy`` at every stored forward node."""
    for i in range(ys.shape[0]):
        y = ys[i].copy()
        G[i] = fy_eval(family, y, theta, cf, ci)
        K[i] = 2.0 * Q + hess_eval(family, y, theta, lams[i].copy(), cf, ci)


@jit
def _riccati_rates(S, c, G, K, L):
    SL = mm(S, L)
    dS = -mtm(G, S) - mm(S, G) + mm(SL, S) - K
    dc = -mtv(G, c) + mv(SL, c)
    return dS, dc


@jit
def riccati_kernel(G, K, L, h, kind, cT, S, c):
    """Integrate ``S' = -G'S - SG + SLS - K``, ``c' = -(G' - SL)c`` backward.

    Starts from ``S = 0`` and ``c = cT`` at the last node. Coefficients between
    nodes are linearly interpolated for the RK4 midpoint stages. Returns -1 on
    success, else the index of the first non-finite node.
    """
    N = G.shape[0] - 1
    S[N] = 0.0
    c[N] = cT
    for i in range(N, 0, -1):
        Si = S[i].copy()
        cvec = c[i].copy()
        if kind == 0:
            dS, dc = _riccati_rates(Si, cvec, G[i], K[i], L)
            S[i - 1] = Si - h * dS
            c[i - 1] = cvec - h * dc
        else:
            Gm = 0.5 * (G[i] + G[i - 1])
            Km = 0.5 * (K[i] + K[i - 1])
            dS1, dc1 = _riccati_rates(Si, cvec, G[i], K[i], L)
            dS2, dc2 = _riccati_rates(Si - 0.5 * h * dS1, cvec - 0.5 * h * dc1, Gm, Km, L)
            dS3, dc3 = _riccati_rates(Si - 0.5 * h * dS2, cvec - 0.5 * h * dc2, Gm, Km, L)
            dS4, dc4 = _riccati_rates(Si - h * dS3, cvec - h * dc3, G[i - 1], K[i - 1], L)
            S[i - 1] = Si - (h / 6.0) * (dS1 + 2.0 * dS2 + 2.0 * dS3 + dS4)
            c[i - 1] = cvec - (h / 6.0) * (dc1 + 2.0 * dc2 + 2.0 * dc3 + dc4)
        if not (all_finite(S[i - 1]) and all_finite(c[i - 1])):
            return i - 1
    return -1


@jit
def _terminal_c(family, ys, lams, x, theta, cf, ci, Q, A_s, dT):
    N = ys.shape[0] - 1
    H_y = _hy(family, ys[N].copy(), lams[N].copy(), x, theta, cf, ci, Q)
    return H_y * (1.0 + dT) - mv(A_s, lams[N].copy())


@jit
def _horizon_cost(ys, lams, x, Q, R, Rinv, h):
    N = ys.shape[0] - 1
    total = 0.0
    for i in range(N + 1):
        e = ys[i] - x
        u = -0.5 * mv(Rinv, lams[i].copy())
        w = 0.5 if (i == 0 or i == N) else 1.0
        total += w * (e @ mv(Q, e) + u @ mv(R, u))
    return h * total


@jit
def solve_kernel(family, y, lam, x, theta, cf, ci, Q, R, Rinv, L, A_s, T, dT, t_s, kind,
                 threshold, ys, lams, G, K, S, c, lam_out):
    """Forward sweep, backward sweep and one costate step for one sample.

    Returns ``(status, index, |F|, J)`` with status 0 on success, 1 for a
    non-finite forward node, 2 for |F| above ``threshold``, 3 for a
    non-finite backward node and 4 for a non-finite costate.
    """
    N = ys.shape[0] - 1
    h = T / N
    bad = forward_kernel(family, y, lam, x, theta, cf, ci, Q, Rinv, h, kind, ys, lams)
    if bad >= 0:
        return 1, bad, np.nan, np.nan
    F = lams[N]
    F_norm = np.sqrt(F @ F)
    if F_norm > threshold:
        return 2, N, F_norm, np.nan
    coefficient_kernel(family, ys, lams, theta, cf, ci, Q, G, K)
    cT = _terminal_c(family, ys, lams, x, theta, cf, ci, Q, A_s, dT)
    bad = riccati_kernel(G, K, L, h, kind, cT, S, c)
    if bad >= 0:
        return 3, bad, F_norm, np.nan
    rate = -_hy(family, y, lam, x, theta, cf, ci, Q) + c[0]
    lam_out[:] = lam + t_s * rate
    if not all_finite(lam_out):
        return 4, 0, F_norm, np.nan
    return 0, -1, F_norm, _horizon_cost(ys, lams, x, Q, R, Rinv, h)


# -- public operations ---------------------------------------------------------


def _check_ws(ws, cfg, model):
    if ws is None:
        return SweepWorkspace(model.n, cfg.N_tau)
    if ws.n != model.n or ws.N_tau != cfg.N_tau:
        raise ValueError("workspace does not match model/config dimensions")
    return ws


def forward_sweep(state: SimState, cfg: NrhcConfig, model: ModelSpec, workspace=None, T=None):
    """Fill ``y_star``, ``lambda_star`` and the residual ``F`` of ``workspace``.

    ``T`` defaults to the scheduled horizon at ``state.t``.
    """
    ws = _check_ws(workspace, cfg, model)
    if T is None:
        T, _ = horizon(state.t, cfg.T_f, cfg.alpha)
    ws.set_horizon(T)
    bad = forward_kernel(model.family, state.y, state.lam, state.x, state.theta_hat,
                         model.cf, model.ci, cfg.Q, cfg.Rinv, ws.h, int(cfg.stepper),
                         ws.y_star, ws.lambda_star)
    if bad >= 0:
        raise NonFiniteError(f"forward sweep produced a non-finite value at tau node {bad} "
                             f"(t={state.t:.6g})", t=state.t, index=bad)
    ws.F[:] = ws.lambda_star[-1]
    return ws


def terminal_c(ws: SweepWorkspace, state: SimState, cfg: NrhcConfig, model: ModelSpec, dT_dt):
    """``c(T, t) = H_y|_{tau=T} (1 + dT/dt) - A_s F``, drive state frozen."""
    return _terminal_c(model.family, ws.y_star, ws.lambda_star, state.x, state.theta_hat,
                       model.cf, model.ci, cfg.Q, cfg.A_s, float(dT_dt))


def riccati_sweep(G, K, L, h, cT, kind=StepperKind.RUNGE_KUTTA_4, S=None, c=None):
    """Backward sweep on given coefficient trajectories; returns ``(S, c)``."""
    G = np.ascontiguousarray(G, dtype=float)
    K = np.ascontiguousarray(K, dtype=float)
    N1, n, _ = G.shape
    S = np.zeros((N1, n, n)) if S is None else S
    c = np.zeros((N1, n)) if c is None else c
    bad = riccati_kernel(G, K, np.ascontiguousarray(L, dtype=float), float(h), int(kind),
                         np.ascontiguousarray(cT, dtype=float), S, c)
    if bad >= 0:
        raise NonFiniteError(f"backward sweep produced a non-finite value at tau node {bad}",
                             index=bad)
    return S, c


def backward_sweep(workspace: SweepWorkspace, state: SimState, cfg: NrhcConfig,
                   model: ModelSpec, dT_dt: float) -> np.ndarray:
    """Fill ``S`` and ``c`` on the stored forward trajectory; return ``c(0, t)``."""
    ws = workspace
    coefficient_kernel(model.family, ws.y_star, ws.lambda_star, state.theta_hat,
                       model.cf, model.ci, cfg.Q, ws.G, ws.K)
    cT = terminal_c(ws, state, cfg, model, dT_dt)
    try:
        riccati_sweep(ws.G, ws.K, cfg.L, ws.h, cT, cfg.stepper, ws.S, ws.c)
    except NonFiniteError as exc:
        exc.t = state.t
        raise
    return ws.c[0].copy()


def costate_rate(state: SimState, c0, model: ModelSpec, cfg: NrhcConfig) -> np.ndarray:
    """``d lam / dt = -H_y|_{tau=0} + c(0, t)``."""
    H_y = _hy(model.family, state.y, state.lam, state.x, state.theta_hat, model.cf, model.ci, cfg.Q)
    return -H_y + np.asarray(c0, dtype=float)


def horizon_cost(ws: SweepWorkspace, x, cfg: NrhcConfig) -> float:
    """Trapezoidal ``int (e'Qe + u'Ru) dtau`` along the predicted trajectory."""
    return float(_horizon_cost(ws.y_star, ws.lambda_star, np.ascontiguousarray(x, dtype=float),
                               cfg.Q, cfg.R, cfg.Rinv, ws.h))


def nrhc_step(state: SimState, cfg: NrhcConfig, model: ModelSpec, workspace=None) -> StepResult:
    """One sampling interval of the real-time solver.

    Forward sweep, backward sweep, one ``t_s`` step of the costate, then the
    control from the advanced costate. The costate rate is held over the
    sample, so the costate step is explicit Euler whatever ``cfg.stepper`` is.
    """
    ws = _check_ws(workspace, cfg, model)
    T, dT_dt = horizon(state.t, cfg.T_f, cfg.alpha)
    ws.set_horizon(T)
    lam_new = np.empty(model.n)
    status, idx, F_norm, J = solve_kernel(
        model.family, state.y, state.lam, state.x, state.theta_hat, model.cf, model.ci,
        cfg.Q, cfg.R, cfg.Rinv, cfg.L, cfg.A_s, T, dT_dt, cfg.t_s, int(cfg.stepper),
        cfg.divergence_threshold, ws.y_star, ws.lambda_star, ws.G, ws.K, ws.S, ws.c, lam_new)
    if status == 1:
        raise NonFiniteError(f"forward sweep produced a non-finite value at tau node {idx} "
                             f"(t={state.t:.6g})", t=state.t, index=idx)
    ws.F[:] = ws.lambda_star[-1]
    if status == 2:
        raise DivergenceError(f"continuation residual |F| = {F_norm:.6g} exceeds "
                              f"{cfg.divergence_threshold:.6g} at t={state.t:.6g}", t=state.t)
    if status == 3:
        raise NonFiniteError(f"backward sweep produced a non-finite value at tau node {idx} "
                             f"(t={state.t:.6g})", t=state.t, index=idx)
    if status == 4:
        raise NonFiniteError(f"costate became non-finite at t={state.t:.6g}", t=state.t)
    u = -0.5 * (cfg.Rinv @ lam_new)
    return StepResult(u, lam_new, float(F_norm), float(J), T, ws.c[0].copy())
