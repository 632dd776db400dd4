"""Cross-checks between the real-time solver and the oracles.

Each check returns a :class:`CheckResult`; ``verify_preset`` runs them all
for one scenario and is what ``adaptrhc verify`` prints.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import estimator
from .model import Constant, HivParams, hiv_rhs
from .nrhc import SimState, hamiltonian, hamiltonian_gradients, riccati_sweep
from .oracle import InfectedFreeRegime, fd_gradient, fd_jacobian, shoot_tpbvp, steady_state
from .sim import Scenario, SimulationDiverged, run_scenario

SNAPSHOT_TIMES = (2.0, 5.0, 10.0, 20.0, 50.0)


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _rel(a, b, floor=1e-12) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), floor))


def check_steady_state(params: HivParams, tol=1e-9) -> CheckResult:
    try:
        ss = steady_state(params)
    except InfectedFreeRegime as exc:
        return CheckResult("steady-state residual", False, str(exc))
    res = float(np.linalg.norm(hiv_rhs(ss, params)) / np.linalg.norm(ss))
    return CheckResult("steady-state residual", res <= tol, f"|f(x*)|/|x*| = {res:.3g} (tol {tol:g})")


@dataclass
class DerivativeErrors:
    H_y: float = 0.0
    f_y: float = 0.0
    H_yy: float = 0.0


def random_points(model, params: HivParams, n_points, seed=0):
    """Random (y, x, lam, theta) tuples spanning the scales of the HIV runs."""
    rng = np.random.default_rng(seed)
    scale = np.array([1e3, 1e2, 2e4])
    truth = np.array([params.as_array()[list(model.ci)]]).ravel()
    for _ in range(n_points):
        y = scale * 10.0 ** rng.uniform(-2.0, 0.5, 3)
        x = scale * 10.0 ** rng.uniform(-2.0, 0.5, 3)
        lam = rng.uniform(-1e3, 1e3, 3)
        theta = truth * 10.0 ** rng.uniform(-1.0, 1.0, truth.size)
        yield y, x, lam, theta


def derivative_errors(model, cfg, params: HivParams, n_points=100, seed=0) -> DerivativeErrors:
    """Worst relative mismatch of analytic H_y, f_y, H_yy against central differences."""
    err = DerivativeErrors()
    for y, x, lam, theta in random_points(model, params, n_points, seed):
        u = -0.5 * cfg.Rinv @ lam
        grads = hamiltonian_gradients(y, lam, theta, y - x, cfg, model)
        h = 1e-4 * (1.0 + np.abs(y).max())
        H_y_fd = fd_gradient(lambda z: hamiltonian(z, lam, theta, x, u, cfg, model), y, h)
        f_y_fd = fd_jacobian(lambda z: model.f(z, theta), y, 1e-4)
        H_yy_fd = fd_jacobian(
            lambda z: hamiltonian_gradients(z, lam, theta, z - x, cfg, model).H_y, y, 1e-4)
        err.H_y = max(err.H_y, _rel(grads.H_y, H_y_fd))
        err.f_y = max(err.f_y, _rel(grads.f_y, f_y_fd))
        err.H_yy = max(err.H_yy, _rel(grads.H_yy, H_yy_fd))
    return err


def check_derivatives(model, cfg, params, n_points=100, seed=0) -> CheckResult:
    err = derivative_errors(model, cfg, params, n_points, seed)
    ok = err.H_y <= 1e-6 and err.f_y <= 1e-6 and err.H_yy <= 1e-4
    return CheckResult("gradient certification", ok,
                       f"{n_points} points: H_y {err.H_y:.2g}, f_y {err.f_y:.2g}, H_yy {err.H_yy:.2g}")


def check_estimator_cancellation(model, n_points=100, seed=1, tol=1e-10) -> CheckResult:
    """The update law must cancel the ``e' D theta_err`` term of the error energy.

    With ``theta_err = theta_hat - theta``, the error obeys
    ``e' = ... + D theta_err`` and ``theta_err' = estimator_rhs``, so
    ``e'D theta_err + theta_err' * estimator_rhs`` must vanish identically.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        y = np.array([1e3, 1e2, 2e4]) * rng.uniform(0.01, 2.0, 3)
        D = model.D(y)
        e = rng.normal(size=3) * np.array([1e3, 1e2, 1e4])
        err = rng.normal(size=model.p) * 10.0
        cross = e @ D @ err
        drift = err @ estimator.estimator_rhs(D, e)
        worst = max(worst, abs(cross + drift) / max(abs(cross), 1e-300))
    return CheckResult("estimator cancellation", worst <= tol, f"worst relative residue {worst:.2g}")


def equilibrium_scenario(scenario: Scenario, duration=10.0) -> Scenario:
    params = scenario.true_params(0.0)
    ss = steady_state(params)
    return dataclasses.replace(scenario, x0=ss, y0=ss.copy(), theta0=scenario.theta_true(0.0),
                               duration=duration, measurements=None, name=f"{scenario.name}-equilibrium")


def check_equilibrium(scenario: Scenario, duration=10.0, tol=1e-6) -> CheckResult:
    name = "equilibrium fixed point"
    if any(not isinstance(s, Constant) for s in scenario.params.values()):
        return CheckResult(name, True, "skipped: time-varying parameters have no fixed point")
    try:
        eq = equilibrium_scenario(scenario, duration)
        traj = run_scenario(eq)
    except (SimulationDiverged, InfectedFreeRegime) as exc:
        return CheckResult(name, False, str(exc))
    e_max = float(traj.e_norm[: len(traj)].max())
    theta0 = eq.theta0
    drift = float(np.abs(traj.theta_hat[: len(traj)] - theta0).max() / np.abs(theta0).max())
    return CheckResult(name, e_max <= tol and drift <= tol,
                       f"{duration:g} days: max |e| {e_max:.2g}, estimate drift {drift:.2g}")


def check_riccati_synthetic(n=3, T=0.37, N=20, seed=2) -> CheckResult:
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    K = A + A.T
    G = np.zeros((N + 1, n, n))
    L = np.zeros((n, n))
    Ks = np.broadcast_to(K, (N + 1, n, n)).copy()
    S, _ = riccati_sweep(G, Ks, L, T / N, np.zeros(n))
    tau = np.linspace(0.0, T, N + 1)
    expect = K[None] * (T - tau)[:, None, None]
    err = float(np.abs(S - expect).max() / np.abs(K).max())
    return CheckResult("riccati synthetic", err <= 1e-13, f"max |S - K(T - tau)| / |K| = {err:.2g}")


@dataclass
class Snapshot:
    state: SimState
    T: float


@dataclass
class ProbedRun:
    """A preset run with the diagnostics that need access to every solve."""

    traj: object
    diverged: SimulationDiverged | None
    max_asymmetry: float = 0.0
    solves: int = 0
    snapshots: dict = field(default_factory=dict)


def probed_run(scenario: Scenario, snapshot_times=SNAPSHOT_TIMES) -> ProbedRun:
    probe = ProbedRun(None, None)
    half = 0.5 * scenario.cfg.t_s

    def on_solve(state, ws, res):
        probe.solves += 1
        probe.max_asymmetry = max(probe.max_asymmetry, ws.max_asymmetry())
        for ts in snapshot_times:
            if abs(state.t - ts) < half:
                probe.snapshots[ts] = Snapshot(SimState(state.t, state.x, state.y, state.lam,
                                                        state.theta_hat), res.T)

    try:
        probe.traj = run_scenario(scenario, on_solve=on_solve)
    except SimulationDiverged as exc:
        probe.traj = exc.log
        probe.diverged = exc
    return probe


def shooting_agreement(snap: Snapshot, scenario: Scenario):
    """Shoot the horizon problem at a logged state; returns (result, error, tolerance)."""
    model = scenario.model()
    st = snap.state
    res = shoot_tpbvp(st.y, st.theta_hat, st.x, scenario.cfg, model, snap.T)
    if not res.converged:
        # a second start from the live costate; agreement is judged at the root
        alt = shoot_tpbvp(st.y, st.theta_hat, st.x, scenario.cfg, model, snap.T, lam_guess=st.lam)
        if alt.converged or alt.residual_norm < res.residual_norm:
            res = alt
    err = float(np.linalg.norm(res.lambda0 - st.lam))
    tol = max(1e-3, 1e-2 * float(np.linalg.norm(st.lam)))
    return res, err, tol


def check_shooting(probe: ProbedRun, scenario: Scenario, times=SNAPSHOT_TIMES) -> list[CheckResult]:
    out = []
    for ts in times:
        name = f"shooting agreement t={ts:g}"
        snap = probe.snapshots.get(ts)
        if snap is None:
            out.append(CheckResult(name, False, "run did not reach this time"))
            continue
        res, err, tol = shooting_agreement(snap, scenario)
        ok = res.converged and err <= tol
        out.append(CheckResult(name, ok, f"converged={res.converged} |dlam| {err:.3g} (tol {tol:.3g})"))
    return out


def check_symmetry(probe: ProbedRun, tol=1e-9) -> CheckResult:
    span = probe.traj.t[len(probe.traj) - 1] if len(probe.traj) else 0.0
    return CheckResult("riccati symmetry scan", probe.max_asymmetry <= tol,
                       f"{probe.solves} solves to t={span:g}: max asymmetry {probe.max_asymmetry:.2g}")


def check_completed(probe: ProbedRun, scenario: Scenario) -> CheckResult:
    if probe.diverged is None:
        return CheckResult("preset run", True, f"{len(probe.traj)} rows")
    return CheckResult("preset run", False, str(probe.diverged))


def verify_preset(scenario: Scenario) -> list[CheckResult]:
    params = scenario.true_params(0.0)
    model = scenario.model()
    results = [
        check_steady_state(params),
        check_derivatives(model, scenario.cfg, params),
        check_estimator_cancellation(model),
        check_riccati_synthetic(),
        check_equilibrium(scenario),
    ]
    probe = probed_run(scenario)
    results.append(check_completed(probe, scenario))
    results.append(check_symmetry(probe))
    results.extend(check_shooting(probe, scenario))
    return results


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  detail", "-" * (width + 40)]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
