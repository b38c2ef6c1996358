"""SE(3) and se(3) kernel.

Twists are 6-vectors ``(angular, linear)`` in ray coordinates, wrenches are
``(moment, force)`` in axis coordinates. With this ordering the ground
acceleration that injects gravity reads ``(0, -g)`` and every 6x6 operator
uses the block layout

    Ad_C = [[R, 0], [p^ R, R]]        ad_X = [[w^, 0], [v^, w^]]

Poses are stored as 4x4 homogeneous matrices inside the numerical kernels
(the ``_``-prefixed, numba-compiled functions). The public helpers wrap them
around the immutable :class:`Pose` value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

# Below this rotation angle the Rodrigues coefficients use their Taylor series.
SMALL_ANGLE = 1e-3

SCREW_TOL = 1e-12
ORTHO_TOL = 1e-12


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _hat(w):
    m = np.zeros((3, 3))
    m[0, 1] = -w[2]
    m[0, 2] = w[1]
    m[1, 0] = w[2]
    m[1, 2] = -w[0]
    m[2, 0] = -w[1]
    m[2, 1] = w[0]
    return m


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _rodrigues_coeffs(phi2):
    """sin(x)/x, (1-cos x)/x^2, (x-sin x)/x^3 as functions of x^2."""
    if phi2 < SMALL_ANGLE * SMALL_ANGLE:
        a = 1.0 - phi2 / 6.0 + phi2 * phi2 / 120.0
        b = 0.5 - phi2 / 24.0 + phi2 * phi2 / 720.0
        c = 1.0 / 6.0 - phi2 / 120.0 + phi2 * phi2 / 5040.0
    else:
        phi = math.sqrt(phi2)
        s = math.sin(phi)
        h = math.sin(0.5 * phi)
        a = s / phi
        b = 2.0 * h * h / phi2
        c = (phi - s) / (phi2 * phi)
    return a, b, c


@njit(cache=True)
def _exp(X, theta):
    w0, w1, w2 = X[0] * theta, X[1] * theta, X[2] * theta
    v = X[3:] * theta
    phi2 = w0 * w0 + w1 * w1 + w2 * w2
    a, b, c = _rodrigues_coeffs(phi2)
    w = np.array([w0, w1, w2])
    C = np.eye(4)
    # R = I + a W + b W^2 with W^2 = w w^T - |w|^2 I
    for i in range(3):
        for j in range(3):
            C[i, j] += b * w[i] * w[j]
        C[i, i] -= b * phi2
    C[0, 1] -= a * w2
    C[0, 2] += a * w1
    C[1, 0] += a * w2
    C[1, 2] -= a * w0
    C[2, 0] -= a * w1
    C[2, 1] += a * w0
    wv = _cross(w, v)
    wwv = _cross(w, wv)
    for i in range(3):
        C[i, 3] = v[i] + b * wv[i] + c * wwv[i]
    return C


@njit(cache=True)
def _mul4(A, B):
    """Product of two homogeneous transforms (last rows are 0 0 0 1)."""
    out = np.eye(4)
    for i in range(3):
        for j in range(4):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
        out[i, 3] += A[i, 3]
    return out


@njit(cache=True)
def _inv(C):
    out = np.eye(4)
    for i in range(3):
        s = 0.0
        for j in range(3):
            out[i, j] = C[j, i]
            s -= C[j, i] * C[j, 3]
        out[i, 3] = s
    return out


@njit(cache=True)
def _adjoint(C):
    R = C[:3, :3]
    A = np.zeros((6, 6))
    A[:3, :3] = R
    A[3:, 3:] = R
    A[3:, :3] = _hat(C[:3, 3].copy()) @ np.ascontiguousarray(R)
    return A


@njit(cache=True)
def _Ad_apply(C, V):
    out = np.empty(6)
    for i in range(3):
        out[i] = C[i, 0] * V[0] + C[i, 1] * V[1] + C[i, 2] * V[2]
        out[i + 3] = C[i, 0] * V[3] + C[i, 1] * V[4] + C[i, 2] * V[5]
    px, py, pz = C[0, 3], C[1, 3], C[2, 3]
    out[3] += py * out[2] - pz * out[1]
    out[4] += pz * out[0] - px * out[2]
    out[5] += px * out[1] - py * out[0]
    return out


@njit(cache=True)
def _Ad_inv_apply(C, V):
    """Ad_{C^-1} V without forming the inverse."""
    px, py, pz = C[0, 3], C[1, 3], C[2, 3]
    u0 = V[3] - (py * V[2] - pz * V[1])
    u1 = V[4] - (pz * V[0] - px * V[2])
    u2 = V[5] - (px * V[1] - py * V[0])
    out = np.empty(6)
    for i in range(3):
        out[i] = C[0, i] * V[0] + C[1, i] * V[1] + C[2, i] * V[2]
        out[i + 3] = C[0, i] * u0 + C[1, i] * u1 + C[2, i] * u2
    return out


@njit(cache=True)
def _Ad_T_apply(C, W):
    """Ad_C^T W (transports a wrench from frame i back to frame j)."""
    px, py, pz = C[0, 3], C[1, 3], C[2, 3]
    m0 = W[0] + W[4] * pz - W[5] * py
    m1 = W[1] + W[5] * px - W[3] * pz
    m2 = W[2] + W[3] * py - W[4] * px
    out = np.empty(6)
    for i in range(3):
        out[i] = C[0, i] * m0 + C[1, i] * m1 + C[2, i] * m2
        out[i + 3] = C[0, i] * W[3] + C[1, i] * W[4] + C[2, i] * W[5]
    return out


@njit(cache=True)
def _ad(X):
    A = np.zeros((6, 6))
    w = _hat(X[:3].copy())
    A[:3, :3] = w
    A[3:, 3:] = w
    A[3:, :3] = _hat(X[3:].copy())
    return A


@njit(cache=True)
def _ad_apply(X, Y):
    """Lie bracket [X, Y] = ad_X Y."""
    out = np.empty(6)
    out[0] = X[1] * Y[2] - X[2] * Y[1]
    out[1] = X[2] * Y[0] - X[0] * Y[2]
    out[2] = X[0] * Y[1] - X[1] * Y[0]
    out[3] = X[4] * Y[2] - X[5] * Y[1] + X[1] * Y[5] - X[2] * Y[4]
    out[4] = X[5] * Y[0] - X[3] * Y[2] + X[2] * Y[3] - X[0] * Y[5]
    out[5] = X[3] * Y[1] - X[4] * Y[0] + X[0] * Y[4] - X[1] * Y[3]
    return out


@njit(cache=True)
def _ad_T_apply(X, W):
    """ad_X^T W = (m x w + f x v, f x w)."""
    out = np.empty(6)
    out[0] = W[1] * X[2] - W[2] * X[1] + W[4] * X[5] - W[5] * X[4]
    out[1] = W[2] * X[0] - W[0] * X[2] + W[5] * X[3] - W[3] * X[5]
    out[2] = W[0] * X[1] - W[1] * X[0] + W[3] * X[4] - W[4] * X[3]
    out[3] = W[4] * X[2] - W[5] * X[1]
    out[4] = W[5] * X[0] - W[3] * X[2]
    out[5] = W[3] * X[1] - W[4] * X[0]
    return out


@njit(cache=True)
def _ad_into(X, Y, out):
    """out = [X, Y]."""
    out[0] = X[1] * Y[2] - X[2] * Y[1]
    out[1] = X[2] * Y[0] - X[0] * Y[2]
    out[2] = X[0] * Y[1] - X[1] * Y[0]
    out[3] = X[4] * Y[2] - X[5] * Y[1] + X[1] * Y[5] - X[2] * Y[4]
    out[4] = X[5] * Y[0] - X[3] * Y[2] + X[2] * Y[3] - X[0] * Y[5]
    out[5] = X[3] * Y[1] - X[4] * Y[0] + X[0] * Y[4] - X[1] * Y[3]


@njit(cache=True)
def _ad_acc(X, Y, out, s):
    """out += s [X, Y]."""
    out[0] += s * (X[1] * Y[2] - X[2] * Y[1])
    out[1] += s * (X[2] * Y[0] - X[0] * Y[2])
    out[2] += s * (X[0] * Y[1] - X[1] * Y[0])
    out[3] += s * (X[4] * Y[2] - X[5] * Y[1] + X[1] * Y[5] - X[2] * Y[4])
    out[4] += s * (X[5] * Y[0] - X[3] * Y[2] + X[2] * Y[3] - X[0] * Y[5])
    out[5] += s * (X[3] * Y[1] - X[4] * Y[0] + X[0] * Y[4] - X[1] * Y[3])


@njit(cache=True)
def _ad_T_into(X, W, out):
    """out = ad_X^T W."""
    out[0] = W[1] * X[2] - W[2] * X[1] + W[4] * X[5] - W[5] * X[4]
    out[1] = W[2] * X[0] - W[0] * X[2] + W[5] * X[3] - W[3] * X[5]
    out[2] = W[0] * X[1] - W[1] * X[0] + W[3] * X[4] - W[4] * X[3]
    out[3] = W[4] * X[2] - W[5] * X[1]
    out[4] = W[5] * X[0] - W[3] * X[2]
    out[5] = W[3] * X[1] - W[4] * X[0]


@njit(cache=True)
def _ad_T_acc(X, W, out, s):
    """out += s ad_X^T W."""
    out[0] += s * (W[1] * X[2] - W[2] * X[1] + W[4] * X[5] - W[5] * X[4])
    out[1] += s * (W[2] * X[0] - W[0] * X[2] + W[5] * X[3] - W[3] * X[5])
    out[2] += s * (W[0] * X[1] - W[1] * X[0] + W[3] * X[4] - W[4] * X[3])
    out[3] += s * (W[4] * X[2] - W[5] * X[1])
    out[4] += s * (W[5] * X[0] - W[3] * X[2])
    out[5] += s * (W[3] * X[1] - W[4] * X[0])


@njit(cache=True)
def _Ad_acc(C, V, out, s):
    """out += s Ad_C V."""
    w0 = C[0, 0] * V[0] + C[0, 1] * V[1] + C[0, 2] * V[2]
    w1 = C[1, 0] * V[0] + C[1, 1] * V[1] + C[1, 2] * V[2]
    w2 = C[2, 0] * V[0] + C[2, 1] * V[1] + C[2, 2] * V[2]
    px, py, pz = C[0, 3], C[1, 3], C[2, 3]
    out[0] += s * w0
    out[1] += s * w1
    out[2] += s * w2
    out[3] += s * (C[0, 0] * V[3] + C[0, 1] * V[4] + C[0, 2] * V[5] + py * w2 - pz * w1)
    out[4] += s * (C[1, 0] * V[3] + C[1, 1] * V[4] + C[1, 2] * V[5] + pz * w0 - px * w2)
    out[5] += s * (C[2, 0] * V[3] + C[2, 1] * V[4] + C[2, 2] * V[5] + px * w1 - py * w0)


@njit(cache=True)
def _Ad_T_acc(C, W, out, s):
    """out += s Ad_C^T W."""
    px, py, pz = C[0, 3], C[1, 3], C[2, 3]
    m0 = W[0] + W[4] * pz - W[5] * py
    m1 = W[1] + W[5] * px - W[3] * pz
    m2 = W[2] + W[3] * py - W[4] * px
    for i in range(3):
        out[i] += s * (C[0, i] * m0 + C[1, i] * m1 + C[2, i] * m2)
        out[i + 3] += s * (C[0, i] * W[3] + C[1, i] * W[4] + C[2, i] * W[5])


# ---------------------------------------------------------------------------
# public value type and wrappers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pose:
    """Element of SE(3): ``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, C) -> Pose:
        C = np.asarray(C, dtype=float)
        return cls(C[:3, :3], C[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        C = np.eye(4)
        C[:3, :3] = self.rotation
        C[:3, 3] = self.translation
        return C

    def is_valid(self, tol: float = ORTHO_TOL) -> bool:
        R = self.rotation
        return (
            np.linalg.norm(R.T @ R - np.eye(3)) <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol
        )

    def __matmul__(self, other: Pose) -> Pose:
        return compose(self, other)


def hat3(w) -> np.ndarray:
    return _hat(np.asarray(w, dtype=float))


def twist_hat(X) -> np.ndarray:
    """4x4 matrix form of a twist."""
    X = np.asarray(X, dtype=float)
    m = np.zeros((4, 4))
    m[:3, :3] = _hat(X[:3])
    m[:3, 3] = X[3:]
    return m


def check_screw(X, tol: float = SCREW_TOL) -> None:
    """Raise ``ValueError`` unless X is a unit rotational or unit prismatic screw."""
    X = np.asarray(X, dtype=float)
    if X.shape != (6,):
        raise ValueError(f"screw must be a 6-vector, got shape {X.shape}")
    nw = np.linalg.norm(X[:3])
    if abs(nw - 1.0) <= tol:
        return
    if nw <= tol and abs(np.linalg.norm(X[3:]) - 1.0) <= tol:
        return
    raise ValueError(
        f"screw {X.tolist()} is neither unit rotational nor unit prismatic"
    )


def exp_screw(X, theta: float) -> Pose:
    return Pose.from_matrix(_exp(np.asarray(X, dtype=float), float(theta)))


def compose(A: Pose, B: Pose) -> Pose:
    return Pose(A.rotation @ B.rotation, A.rotation @ B.translation + A.translation)


def inverse(A: Pose) -> Pose:
    Rt = A.rotation.T
    return Pose(Rt, -Rt @ A.translation)


def adjoint(C: Pose) -> np.ndarray:
    return _adjoint(C.matrix)


def ad(X) -> np.ndarray:
    return _ad(np.asarray(X, dtype=float))


def adjoint_T_apply(C: Pose, W) -> np.ndarray:
    return _Ad_T_apply(C.matrix, np.asarray(W, dtype=float))


def ad_T_apply(X, W) -> np.ndarray:
    return _ad_T_apply(np.asarray(X, dtype=float), np.asarray(W, dtype=float))


def log_pose(C: Pose) -> np.ndarray:
    """Exponential coordinates ``X`` with ``exp_screw(X, 1) == C``."""
    R = C.rotation
    skew = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    cos_phi = 0.5 * (np.trace(R) - 1.0)
    phi = math.atan2(float(np.linalg.norm(skew)), cos_phi)
    if phi < SMALL_ANGLE:
        w = skew * (1.0 + phi * phi / 6.0)
    elif math.pi - phi < 1e-3:
        # near pi the skew part vanishes; the axis comes from the symmetric part
        aa = (0.5 * (R + R.T) - cos_phi * np.eye(3)) / (1.0 - cos_phi)
        k = int(np.argmax(np.diag(aa)))
        axis = aa[:, k] / math.sqrt(aa[k, k])
        if axis @ skew < 0.0:
            axis = -axis
        w = phi * axis
    else:
        w = skew * (phi / math.sin(phi))
    _, b, c = _rodrigues_coeffs(phi * phi)
    W = _hat(w)
    # inverse of (I + b W + c W^2) for the translation part
    if phi < SMALL_ANGLE:
        d = 1.0 / 12.0 + phi * phi / 720.0
    else:
        d = (1.0 - (math.sin(phi) / phi) / (2.0 * b)) / (phi * phi)
    Vinv = np.eye(3) - 0.5 * W + d * (W @ W)
    out = np.empty(6)
    out[:3] = w
    out[3:] = Vinv @ C.translation
    return out


def inner(W, V) -> float:
    """Power pairing of a wrench with a twist."""
    return float(np.dot(W, V))
