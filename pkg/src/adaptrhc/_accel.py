"""Optional numba acceleration for the hot sweep kernels.

Kernels are written once against a small numpy-compatible subset. With numba
available they are compiled with ``njit``; setting ``ADAPTRHC_NUMBA=0`` (or
``off``/``false``/``no``) makes every kernel run as plain numpy instead.
The flag is read once, at import time.
"""
import os

import numpy as np



def numba_requested() -> bool:
    flag = os.environ.get("ADAPTRHC_NUMBA", "1").strip().lower()
    return flag not in ("0", "off", "false", "no")


NUMBA_ENABLED = False
if numba_requested():
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def jit(func):
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(func)
    return func


# Small dense linear algebra. Under numba explicit loops beat BLAS dispatch
# for 3x3 operands; the fallback defers to numpy.
if NUMBA_ENABLED:

    @jit
    def mv(A, v):
        n, m = A.shape
        out = np.zeros(n)
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc += A[i, j] * v[j]
            out[i] = acc
        return out

    @jit
    def mtv(A, v):
        n, m = A.shape
        out = np.zeros(m)
        for j in range(m):
            acc = 0.0
            for i in range(n):
                acc += A[i, j] * v[i]
            out[j] = acc
        return out

    @jit
    def mm(A, B):
        n, k = A.shape
        m = B.shape[1]
        out = np.zeros((n, m))
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for r in range(k):
                    acc += A[i, r] * B[r, j]
                out[i, j] = acc
        return out

    @jit
    def mtm(A, B):
        k, n = A.shape
        m = B.shape[1]
        out = np.zeros((n, m))
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for r in range(k):
                    acc += A[r, i] * B[r, j]
                out[i, j] = acc
        return out

    @jit
    def all_finite(a):
        for v in a.ravel():
            if not np.isfinite(v):
                return False
        return True

else:

    def mv(A, v):
        return A @ v

    def mtv(A, v):
        return A.T @ v

    def mm(A, B):
        return A @ B

    def mtm(A, B):
        return A.T @ B

    def all_finite(a):
        return bool(np.isfinite(a).all())
