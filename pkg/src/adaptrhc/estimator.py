"""Adaptive parameter update law and persistent-excitation monitor."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


def estimator_rhs(D_y, e, gain=1.0):
    """Rate of the parameter estimate, ``-gain * D(y)^T e``."""
    D_y = np.asarray(D_y, dtype=float)
    e = np.asarray(e, dtype=float)
    if D_y.ndim != 2 or e.shape != (D_y.shape[0],):
        raise ValueError(f"regressor of shape {D_y.shape} does not match error of shape {e.shape}")
    return -gain * (D_y.T @ e)


class PEWindow:
    """Trailing window of regressor Gramian samples ``D(y)^T D(y)``.

    Keeps the samples whose time lies within ``delta`` of the newest one, plus
    a running trapezoid integral over them.
    """

    def __init__(self, delta: float, p: int):
        if not delta > 0:
            raise ValueError("PE window length must be positive")
        self.delta = float(delta)
        self.p = p
        self._samples: deque[tuple[float, np.ndarray]] = deque()
        self._integral = np.zeros((p, p))

    def __len__(self):
        return len(self._samples)

    @property
    def span(self) -> float:
        if len(self._samples) < 2:
            return 0.0
        return self._samples[-1][0] - self._samples[0][0]

    def push(self, t: float, D_y) -> None:
        D_y = np.asarray(D_y, dtype=float)
        self.push_gramian(t, D_y.T @ D_y)

    def push_gramian(self, t: float, M) -> None:
        M = np.asarray(M, dtype=float)
        if self._samples:
            t_prev, M_prev = self._samples[-1]
            if t < t_prev:
                raise ValueError("PE samples must arrive in time order")
            self._integral += 0.5 * (t - t_prev) * (M + M_prev)
        self._samples.append((float(t), M))
        # 1e-9 slack keeps a window of exactly delta days intact
        while t - self._samples[0][0] > self.delta + 1e-9:
            t0, M0 = self._samples.popleft()
            t1, M1 = self._samples[0]
            self._integral -= 0.5 * (t1 - t0) * (M0 + M1)

    def integral(self) -> np.ndarray:
        return self._integral.copy()


def pe_metric(window: PEWindow) -> float:
    """Smallest eigenvalue of the windowed regressor Gramian integral."""
    if len(window) == 0:
        log.warning("PE metric requested on an empty window")
        return 0.0
    M = window.integral()
    M = 0.5 * (M + M.T)
    if M.size == 0:
        return 0.0
    return max(float(np.linalg.eigvalsh(M)[0]), 0.0)


@dataclass
class EstimatorState:
    theta_hat: np.ndarray
    window: PEWindow = field(repr=False)
