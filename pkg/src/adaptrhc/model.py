"""Drive/response system models.

A model is written as ``f(y, theta) = g(y) + D(y) @ theta`` where ``theta``
collects the unknown parameters. Models belong to a family (HIV or linear)
whose kernels share the calling convention

    rhs(y, theta, cf, ci)          -> (n,)     g(y) + D(y) theta
    jac(y, theta, cf, ci)          -> (n, n)   d f / d y
    hess(y, theta, lam, cf, ci)    -> (n, n)   sum_i lam_i d^2 f_i / dy^2
    regressor(y, cf, ci)           -> (n, p)   D(y)

where ``cf`` (float64) and ``ci`` (int64) carry the model's constants. The
sweeps dispatch on the integer family tag rather than receiving functions,
which keeps every compiled kernel cacheable across processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._accel import jit, mv

PARAM_NAMES = ("s", "d", "beta", "mu1", "k", "mu2")
_PARAM_ALIASES = {"β": "beta", "μ1": "mu1", "μ2": "mu2", "b": "beta"}


@dataclass(frozen=True)
class HivParams:
    """Rates of the three-compartment HIV model.

    s: proliferation of uninfected CD4+ cells (cells/mm^3/day), d: their
    death rate (1/day), beta: infection rate (mm^3/day), mu1: infected-cell
    death rate (1/day), k: virion production (virions/cell/day), mu2: virion
    clearance (1/day).
    """

    s: float = 36.0
    d: float = 0.108
    beta: float = 9e-5
    mu1: float = 0.5
    k: float = 500.0
    mu2: float = 3.0

    def __post_init__(self):
        for name in PARAM_NAMES:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"HIV rate {name!r} must be finite and > 0, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "HivParams":
        return cls(*(float(v) for v in values))

    def replace(self, **changes) -> "HivParams":
        data = {name: getattr(self, name) for name in PARAM_NAMES}
        data.update(changes)
        return HivParams(**data)


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class Sinusoid:
    """``base * (1 - depth * cos(omega * t))``."""

    base: float
    depth: float
    omega: float

    def __call__(self, t: float) -> float:
        return self.base * (1.0 - self.depth * math.cos(self.omega * t))


ParamSignal = Constant | Sinusoid


def canonical_unknowns(unknown: Iterable[str]) -> tuple[str, ...]:
    """Normalise a collection of parameter names to canonical order."""
    names = []
    for raw in unknown:
        name = _PARAM_ALIASES.get(raw, raw)
        if name not in PARAM_NAMES:
            raise ValueError(f"unknown HIV parameter {raw!r}; expected one of {PARAM_NAMES}")
        names.append(name)
    if not names:
        raise ValueError("the set of unknown parameters must not be empty")
    return tuple(n for n in PARAM_NAMES if n in set(names))


# -- HIV kernels ------------------------------------------------------------
# cf holds all six rates in PARAM_NAMES order (entries listed in ci are
# ignored); ci lists the indices that theta overrides.


@jit
def _merge(theta, cf, ci):
    p = cf.copy()
    for j in range(ci.shape[0]):
        p[ci[j]] = theta[j]
    return p


@jit
def hiv_basis(y):
    """3x6 matrix B(y) with f(y) = B(y) @ (s, d, beta, mu1, k, mu2)."""
    B = np.zeros((3, 6))
    B[0, 0] = 1.0
    B[0, 1] = -y[0]
    B[0, 2] = -y[0] * y[2]
    B[1, 2] = y[0] * y[2]
    B[1, 3] = -y[1]
    B[2, 4] = y[1]
    B[2, 5] = -y[2]
    return B


@jit
def hiv_f(y, theta, cf, ci):
    p = _merge(theta, cf, ci)
    out = np.empty(3)
    infection = p[2] * y[0] * y[2]
    out[0] = p[0] - p[1] * y[0] - infection
    out[1] = infection - p[3] * y[1]
    out[2] = p[4] * y[1] - p[5] * y[2]
    return out


@jit
def hiv_fy(y, theta, cf, ci):
    p = _merge(theta, cf, ci)
    J = np.zeros((3, 3))
    J[0, 0] = -p[1] - p[2] * y[2]
    J[0, 2] = -p[2] * y[0]
    J[1, 0] = p[2] * y[2]
    J[1, 1] = -p[3]
    J[1, 2] = p[2] * y[0]
    J[2, 1] = p[4]
    J[2, 2] = -p[5]
    return J


@jit
def hiv_hess(y, theta, lam, cf, ci):
    # only the bilinear infection term has curvature
    p = _merge(theta, cf, ci)
    H = np.zeros((3, 3))
    v = (lam[1] - lam[0]) * p[2]
    H[0, 2] = v
    H[2, 0] = v
    return H


@jit
def hiv_regressor(y, cf, ci):
    B = hiv_basis(y)
    D = np.zeros((3, ci.shape[0]))
    for j in range(ci.shape[0]):
        for i in range(3):
            D[i, j] = B[i, ci[j]]
    return D


# -- linear test model: y' = A y ---------------------------------------------
# cf holds A row-major, ci = [n]; no unknown parameters.


@jit
def linear_f(y, theta, cf, ci):
    n = ci[0]
    return mv(cf.reshape((n, n)), y)


@jit
def linear_fy(y, theta, cf, ci):
    n = ci[0]
    return cf.reshape((n, n)).copy()


@jit
def linear_hess(y, theta, lam, cf, ci):
    n = ci[0]
    return np.zeros((n, n))


@jit
def linear_regressor(y, cf, ci):
    return np.zeros((ci[0], 0))


HIV = 0
LINEAR = 1


@jit
def f_eval(family, y, theta, cf, ci):
    if family == HIV:
        return hiv_f(y, theta, cf, ci)
    return linear_f(y, theta, cf, ci)


@jit
def fy_eval(family, y, theta, cf, ci):
    if family == HIV:
        return hiv_fy(y, theta, cf, ci)
    return linear_fy(y, theta, cf, ci)


@jit
def hess_eval(family, y, theta, lam, cf, ci):
    if family == HIV:
        return hiv_hess(y, theta, lam, cf, ci)
    return linear_hess(y, theta, lam, cf, ci)


@jit
def regressor_eval(family, y, cf, ci):
    if family == HIV:
        return hiv_regressor(y, cf, ci)
    return linear_regressor(y, cf, ci)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A system ``g(y) + D(y) theta`` together with its derivatives."""

    n: int
    p: int
    family: int
    cf: np.ndarray
    ci: np.ndarray
    param_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.family not in (HIV, LINEAR):
            raise ValueError(f"unknown model family {self.family!r}")
        object.__setattr__(self, "cf", np.ascontiguousarray(self.cf, dtype=np.float64))
        object.__setattr__(self, "ci", np.ascontiguousarray(self.ci, dtype=np.int64))

    def _theta(self, theta=None):
        if theta is None:
            return np.zeros(self.p)
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        if theta.shape != (self.p,):
            raise ValueError(f"expected a parameter vector of length {self.p}, got shape {theta.shape}")
        return theta

    @staticmethod
    def _vec(y):
        return np.ascontiguousarray(y, dtype=np.float64)

    def f(self, y, theta):
        return f_eval(self.family, self._vec(y), self._theta(theta), self.cf, self.ci)

    def g(self, y):
        return f_eval(self.family, self._vec(y), self._theta(), self.cf, self.ci)

    def D(self, y):
        return regressor_eval(self.family, self._vec(y), self.cf, self.ci)

    def jac_f(self, y, theta):
        return fy_eval(self.family, self._vec(y), self._theta(theta), self.cf, self.ci)

    def jac_g(self, y):
        return fy_eval(self.family, self._vec(y), self._theta(), self.cf, self.ci)

    def jac_DTheta(self, y, theta):
        # f is affine in theta, so the difference isolates d(D theta)/dy
        return self.jac_f(y, theta) - self.jac_g(y)

    def hess_contract(self, y, theta, lam):
        return hess_eval(self.family, self._vec(y), self._theta(theta), self._vec(lam), self.cf, self.ci)


def hiv_rhs(state, params: HivParams) -> np.ndarray:
    """Right-hand side of the HIV model at ``state`` with all rates given."""
    y = np.ascontiguousarray(state, dtype=np.float64)
    return hiv_f(y, np.zeros(0), params.as_array(), np.zeros(0, dtype=np.int64))


def hiv_split(unknown: Iterable[str], known: HivParams) -> ModelSpec:
    """Split the HIV model into known dynamics and an unknown-parameter regressor.

    The columns of ``D`` follow the canonical order ``s, d, beta, mu1, k, mu2``
    restricted to ``unknown``; values in ``known`` for unknown slots are unused.
    """
    names = canonical_unknowns(unknown)
    idx = np.array([PARAM_NAMES.index(n) for n in names], dtype=np.int64)
    cf = known.as_array()
    cf[idx] = 0.0
    return ModelSpec(
        n=3, p=len(names), family=HIV, cf=cf, ci=idx, param_names=names,
    )


def hiv_full(params: HivParams | None = None) -> ModelSpec:
    """All six rates unknown; used to drive the true system with ``theta = rates``."""
    return hiv_split(PARAM_NAMES, params or HivParams())


def hiv_jacobian(state, estimate, unknown: Iterable[str], known: HivParams) -> np.ndarray:
    return hiv_split(unknown, known).jac_f(state, estimate)


def linear_model(A) -> ModelSpec:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    return ModelSpec(
        n=n, p=0, family=LINEAR, cf=A.ravel(), ci=np.array([n]),
    )
