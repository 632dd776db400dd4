"""Closed-loop drive/response simulation with adaptive estimation."""
from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .estimator import PEWindow, estimator_rhs, pe_metric
from .integrate import NonFiniteError, model_step
from .model import PARAM_NAMES, Constant, HivParams, ParamSignal, canonical_unknowns, hiv_full, hiv_split
from .nrhc import DivergenceError, NrhcConfig, SimState, SweepWorkspace, nrhc_step

__all__ = [
    "Scenario", "SimState", "SimulationDiverged", "TrajectoryLog",
    "builtin_scenarios", "load_measurements", "run_scenario",
]

log = logging.getLogger(__name__)


class SimulationDiverged(RuntimeError):
    """A run stopped on a numerical failure; ``log`` holds the rows so far."""

    def __init__(self, message, t, log):
        super().__init__(message)
        self.t = t
        self.log = log


@dataclass
class Scenario:
    params: Mapping[str, ParamSignal]
    unknown: tuple[str, ...]
    x0: np.ndarray
    y0: np.ndarray
    theta0: np.ndarray
    cfg: NrhcConfig
    duration: float
    name: str = "scenario"
    pe_window: float = 5.0
    substeps: int = 1
    measurements: np.ndarray | None = None
    output_csv: str | None = None
    output_svg: str | None = None

    def __post_init__(self):
        self.unknown = canonical_unknowns(self.unknown)
        missing = [n for n in PARAM_NAMES if n not in self.params]
        if missing:
            raise ValueError(f"scenario is missing true values for {missing}")
        self.params = {n: self.params[n] for n in PARAM_NAMES}
        for n in PARAM_NAMES:
            if n not in self.unknown and not isinstance(self.params[n], Constant):
                raise ValueError(f"known parameter {n!r} must be constant")
        self.x0 = np.asarray(self.x0, dtype=float)
        self.y0 = np.asarray(self.y0, dtype=float)
        self.theta0 = np.asarray(self.theta0, dtype=float)
        if self.theta0.shape != (len(self.unknown),):
            raise ValueError(f"theta0 has {self.theta0.size} entries but {len(self.unknown)} "
                             "parameters are unknown")
        if self.x0.shape != (3,) or self.y0.shape != (3,):
            raise ValueError("x0 and y0 must have three entries")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError("duration must be finite and > 0")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be an integer >= 1")
        self.substeps = int(self.substeps)

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.duration / self.cfg.t_s + 1e-9))

    def true_params(self, t: float) -> HivParams:
        return HivParams(*(self.params[n](t) for n in PARAM_NAMES))

    def theta_true(self, t: float) -> np.ndarray:
        return np.array([self.params[n](t) for n in self.unknown])

    def model(self):
        return hiv_split(self.unknown, self.true_params(0.0))


class TrajectoryLog:
    """Per-sample record of a run, preallocated to the full length."""

    def __init__(self, n: int, p: int, capacity: int):
        self.n, self.p = n, p
        self.rows = 0
        self.t = np.zeros(capacity)
        self.x = np.zeros((capacity, n))
        self.y = np.zeros((capacity, n))
        self.e_norm = np.zeros(capacity)
        self.u = np.zeros((capacity, n))
        self.theta_hat = np.zeros((capacity, p))
        self.theta_true = np.zeros((capacity, p))
        self.F_norm = np.zeros(capacity)
        self.J = np.zeros(capacity)
        self.pe = np.zeros(capacity)
        self.cost_warnings = 0

    def append(self, t, x, y, u, theta_hat, theta_true, F_norm, J, pe):
        k = self.rows
        self.t[k] = t
        self.x[k] = x
        self.y[k] = y
        self.e_norm[k] = np.linalg.norm(y - x)
        self.u[k] = u
        self.theta_hat[k] = theta_hat
        self.theta_true[k] = theta_true
        self.F_norm[k] = F_norm
        self.J[k] = J
        self.pe[k] = pe
        self.rows += 1

    def __len__(self):
        return self.rows

    def columns(self) -> list[str]:
        n, p = self.n, self.p
        return (["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
                + ["e_norm"] + [f"u{i + 1}" for i in range(n)]
                + [f"theta_hat_{j + 1}" for j in range(p)]
                + [f"theta_true_{j + 1}" for j in range(p)] + ["F_norm", "J", "pe"])

    def as_array(self) -> np.ndarray:
        k = self.rows
        return np.column_stack([
            self.t[:k], self.x[:k], self.y[:k], self.e_norm[:k], self.u[:k],
            self.theta_hat[:k], self.theta_true[:k], self.F_norm[:k], self.J[:k], self.pe[:k],
        ])

    def at(self, t: float) -> int:
        """Row index of the sample closest to ``t``."""
        return int(np.argmin(np.abs(self.t[: self.rows] - t)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(self.columns()) + "\n")
            for row in self.as_array():
                fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def load_measurements(path, t_s: float, n: int = 3) -> np.ndarray:
    """Read a drive-state table with header ``t,x1..xn`` sampled every ``t_s``.

    Returns an array of shape (rows, n + 1) whose first column is time.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        expected = ["t"] + [f"x{i + 1}" for i in range(n)]
        if header != expected:
            raise ValueError(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != n + 1:
                raise ValueError(f"{path}:{lineno}: expected {n + 1} fields, got {len(rec)}")
            try:
                rows.append([float(f) for f in rec])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    data = np.array(rows, dtype=float).reshape(-1, n + 1)
    if len(data) == 0:
        raise ValueError(f"{path}: no measurement rows")
    if not np.isfinite(data).all():
        raise ValueError(f"{path}: non-finite measurement")
    gaps = np.diff(data[:, 0])
    bad = np.flatnonzero(np.abs(gaps - t_s) > 1e-9)
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"{path}: rows {i + 2} and {i + 3} are {gaps[i]!r} apart, expected t_s={t_s!r}")
    return data


class _CostMonitor:
    """Warns when the moving average of the horizon cost increases."""

    def __init__(self, width=10, after=1.0, max_reports=5):
        self.buf = deque(maxlen=width)
        self.after = after
        self.prev = None
        self.count = 0
        self.max_reports = max_reports

    def update(self, t, J):
        self.buf.append(J)
        if t <= self.after or len(self.buf) < self.buf.maxlen:
            return
        avg = sum(self.buf) / len(self.buf)
        if self.prev is not None and avg > self.prev:
            self.count += 1
            if self.count <= self.max_reports:
                log.warning("horizon cost moving average increased at t=%.4g (%.6g -> %.6g)",
                            t, self.prev, avg)
        self.prev = avg


def run_scenario(scenario: Scenario, on_solve: Callable | None = None) -> TrajectoryLog:
    """Run the closed loop for ``scenario.duration`` days.

    Rows are logged at ``k t_s`` for ``k = 0 .. floor(duration / t_s)``; the
    last sample is solved and logged but not advanced. Per sample: solve the horizon problem and advance the costate, log the
    row, then advance the response under the new control, the drive under the
    true rates and the estimate under the update law, in that order. The
    estimator rate uses the error and regressor at the start of the sample.

    ``on_solve(state, workspace, result)`` is called after every solve.
    Raises :class:`SimulationDiverged` carrying the partial log.
    """
    cfg = scenario.cfg
    model = scenario.model()
    drive = hiv_full(scenario.true_params(0.0))
    n, p = model.n, model.p
    n_steps = scenario.n_steps
    meas = scenario.measurements
    if meas is not None and len(meas) < n_steps + 1:
        raise ValueError(f"measurement table has {len(meas)} rows, run needs {n_steps + 1}")

    traj = TrajectoryLog(n, p, n_steps + 1)
    ws = SweepWorkspace(n, cfg.N_tau)
    window = PEWindow(scenario.pe_window, p)
    monitor = _CostMonitor()
    zero_u = np.zeros(n)
    kind = int(cfg.stepper)

    x0 = scenario.x0 if meas is None else meas[0, 1:]
    state = SimState(0.0, x0, scenario.y0, np.zeros(n), scenario.theta0)
    t = 0.0
    try:
        for k in range(n_steps + 1):
            t = k * cfg.t_s
            res = nrhc_step(state, cfg, model, ws)
            if on_solve is not None:
                on_solve(state, ws, res)
            D_y = model.D(state.y)
            window.push(t, D_y)
            monitor.update(t, res.J)
            traj.append(t, state.x, state.y, res.u, state.theta_hat, scenario.theta_true(t),
                        res.F_norm, res.J, pe_metric(window))
            if k == n_steps:
                break

            y = model_step(model.family, state.y, state.theta_hat, model.cf, model.ci,
                           res.u, cfg.t_s, kind, scenario.substeps)
            if meas is None:
                x = model_step(drive.family, state.x, scenario.true_params(t).as_array(),
                               drive.cf, drive.ci, zero_u, cfg.t_s, kind, scenario.substeps)
            else:
                x = meas[k + 1, 1:].copy()
            # rate frozen over the sample: every explicit scheme reduces to Euler
            theta = state.theta_hat + cfg.t_s * estimator_rhs(D_y, state.e, cfg.estimator_gain)
            if not (np.isfinite(y).all() and np.isfinite(x).all() and np.isfinite(theta).all()):
                raise NonFiniteError(f"closed loop became non-finite after t={t:.6g}", t=t)
            state = SimState((k + 1) * cfg.t_s, x, y, res.lam, theta)
    except (DivergenceError, NonFiniteError) as exc:
        traj.cost_warnings = monitor.count
        raise SimulationDiverged(f"{scenario.name}: {exc}", t, traj) from exc
    traj.cost_warnings = monitor.count
    if monitor.count:
        log.warning("%s: horizon cost moving average increased %d times", scenario.name, monitor.count)
    return traj


def builtin_scenarios() -> dict[str, Scenario]:
    from .config import PRESETS, build_scenario

    return {name: build_scenario(cfg, name=name) for name, cfg in PRESETS.items()}
