"""Small dense LU factorization with partial pivoting.

The kinematics factorizes every limb's task-space Jacobian once per
configuration and then reuses the factors for all right-hand sides
(velocity, acceleration, jerk and snap level, plus the Jacobian derivative
terms). Factorizations are counted so callers can assert that reuse.
"""

from __future__ import annotations

import threading
from collections import Counter

import numpy as np
from numba import njit

# Relative pivot threshold: |u_kk| < PIVOT_TOL * max|A_ij| means singular.
PIVOT_TOL = 1e-12


class FactorizationCounter:
    """Thread-safe tally of LU factorizations, keyed by purpose."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: Counter[str] = Counter()

    def bump(self, key: str, n: int = 1) -> None:
        with self._lock:
            self._counts[key] += n

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()

    def __getitem__(self, key: str) -> int:
        with self._lock:
            return self._counts[key]

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)


factorizations = FactorizationCounter()


@njit(cache=True)
def _lu_factor(A):
    """Doolittle LU with row pivoting; returns (LU, perm, min_pivot_ratio)."""
    n = A.shape[0]
    LU = A.copy()
    perm = np.arange(n)
    scale = np.max(np.abs(A))
    if scale == 0.0:
        return LU, perm, 0.0
    ratio = np.inf
    for k in range(n):
        p = k
        big = abs(LU[k, k])
        for i in range(k + 1, n):
            if abs(LU[i, k]) > big:
                big = abs(LU[i, k])
                p = i
        if p != k:
            for j in range(n):
                tmp = LU[k, j]
                LU[k, j] = LU[p, j]
                LU[p, j] = tmp
            t = perm[k]
            perm[k] = perm[p]
            perm[p] = t
        piv = LU[k, k]
        r = abs(piv) / scale
        if r < ratio:
            ratio = r
        if piv == 0.0:
            return LU, perm, 0.0
        for i in range(k + 1, n):
            LU[i, k] /= piv
            f = LU[i, k]
            if f != 0.0:
                for j in range(k + 1, n):
                    LU[i, j] -= f * LU[k, j]
    return LU, perm, ratio


@njit(cache=True)
def _lu_solve_vec(LU, perm, b):
    n = LU.shape[0]
    x = np.empty(n)
    for i in range(n):
        x[i] = b[perm[i]]
    for i in range(n):
        s = x[i]
        for j in range(i):
            s -= LU[i, j] * x[j]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            s -= LU[i, j] * x[j]
        x[i] = s / LU[i, i]
    return x


@njit(cache=True)
def _lu_solve_mat(LU, perm, B):
    out = np.empty(B.shape)
    for k in range(B.shape[1]):
        out[:, k] = _lu_solve_vec(LU, perm, B[:, k].copy())
    return out


@njit(cache=True)
def _lu_solve_T_vec(LU, perm, b):
    """Solve A^T x = b given the factors of A (PA = LU)."""
    n = LU.shape[0]
    y = np.empty(n)
    # U^T y = b
    for i in range(n):
        s = b[i]
        for j in range(i):
            s -= LU[j, i] * y[j]
        y[i] = s / LU[i, i]
    # L^T z = y
    for i in range(n - 1, -1, -1):
        s = y[i]
        for j in range(i + 1, n):
            s -= LU[j, i] * y[j]
        y[i] = s
    x = np.empty(n)
    for i in range(n):
        x[perm[i]] = y[i]
    return x


@njit(cache=True)
def _mv(A, x):
    m, n = A.shape
    out = np.zeros(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        out[i] = s
    return out


@njit(cache=True)
def _mtv(A, x):
    """A^T x."""
    m, n = A.shape
    out = np.zeros(n)
    for i in range(m):
        xi = x[i]
        for j in range(n):
            out[j] += A[i, j] * xi
    return out


@njit(cache=True)
def _mm(A, B):
    m, k = A.shape
    n = B.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for p in range(k):
            a = A[i, p]
            if a != 0.0:
                for j in range(n):
                    out[i, j] += a * B[p, j]
    return out


@njit(cache=True)
def _mtm(A, B):
    """A^T B."""
    k, m = A.shape
    n = B.shape[1]
    out = np.zeros((m, n))
    for p in range(k):
        for i in range(m):
            a = A[p, i]
            if a != 0.0:
                for j in range(n):
                    out[i, j] += a * B[p, j]
    return out


class SingularMatrixError(np.linalg.LinAlgError):
    """A pivot fell below the relative threshold."""


class LUFactors:
    """LU factors of a square matrix, reusable for any number of solves."""

    __slots__ = ("lu", "perm", "pivot_ratio")

    def __init__(self, A, purpose: str = "generic", tol: float = PIVOT_TOL):
        A = np.ascontiguousarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"LU needs a square matrix, got shape {A.shape}")
        self.lu, self.perm, self.pivot_ratio = _lu_factor(A)
        factorizations.bump(purpose)
        if not self.pivot_ratio >= tol:
            raise SingularMatrixError(
                f"pivot ratio {self.pivot_ratio:.3e} below {tol:.0e}"
            )

    @classmethod
    def from_factors(cls, lu, perm, pivot_ratio) -> "LUFactors":
        """Wrap factors computed elsewhere (not counted again)."""
        obj = cls.__new__(cls)
        obj.lu, obj.perm, obj.pivot_ratio = lu, perm, float(pivot_ratio)
        return obj

    def solve(self, b) -> np.ndarray:
        b = np.ascontiguousarray(b, dtype=float)
        if b.ndim == 1:
            return _lu_solve_vec(self.lu, self.perm, b)
        return _lu_solve_mat(self.lu, self.perm, b)

    def solve_T(self, b) -> np.ndarray:
        return _lu_solve_T_vec(self.lu, self.perm, np.ascontiguousarray(b, dtype=float))
