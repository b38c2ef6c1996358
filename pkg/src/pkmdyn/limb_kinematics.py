"""Serial-chain kinematics of a single limb.

Everything here works on one limb as an open chain whose terminal body is the
platform: product-of-exponentials poses, body-twist recursions up to the
third twist derivative, the platform-frame Jacobian ``J_p`` and its first
three time derivatives, and a Newton-Raphson geometric inverse kinematics.

Body twists are expressed in their own body frame. The recursions here are
purely kinematic (the ground does not accelerate); gravity is carried
separately by :func:`gravity_accelerations`, which gives the twist-shaped
contribution of a base acceleration ``(0, -g)`` and its derivatives. Adding
the two reproduces a recursion started from ``dV_0 = (0, -g)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .errors import IKConvergenceError, IKSingularError
from .liegroup import (
    Pose,
    _Ad_acc,
    _Ad_apply,
    _ad_acc,
    _ad_apply,
    _ad_into,
    _exp,
    _inv,
    _mul4,
    log_pose,
)
from .model import LimbModel

LEMMA_VARIANTS = ("corrected", "printed")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _fk(screws, refs, theta):
    n = screws.shape[0]
    C = np.empty((n, 4, 4))
    Crel = np.empty((n, 4, 4))
    prev = np.eye(4)
    for i in range(n):
        Bx = _mul4(refs[i], _exp(screws[i], theta[i]))
        prev = _mul4(prev, Bx)
        C[i] = prev
        Crel[i] = _inv(Bx)
    return C, Crel


@njit(cache=True)
def _jacobian(screws, C):
    n = screws.shape[0]
    Cp_inv = _inv(C[n - 1])
    Cpi = np.empty((n, 4, 4))
    J = np.empty((6, n))
    for i in range(n - 1):
        Cpi[i] = _mul4(Cp_inv, C[i])
        J[:, i] = _Ad_apply(Cpi[i], screws[i])
    Cpi[n - 1] = np.eye(4)
    J[:, n - 1] = screws[n - 1]
    return J, Cpi


@njit(cache=True)
def _axpy(out, x, s):
    for k in range(6):
        out[k] += s * x[k]


@njit(cache=True)
def _twist_1(Crel, X, d1):
    n = X.shape[0]
    V = np.zeros((n, 6))
    for i in range(n):
        if i > 0:
            _Ad_acc(Crel[i], V[i - 1], V[i], 1.0)
        _axpy(V[i], X[i], d1[i])
    return V


@njit(cache=True)
def _twist_2(Crel, X, d1, d2, V, base):
    n = X.shape[0]
    out = np.zeros((n, 6))
    for i in range(n):
        o = out[i]
        _Ad_acc(Crel[i], base if i == 0 else out[i - 1], o, 1.0)
        _ad_acc(X[i], V[i], o, -d1[i])
        _axpy(o, X[i], d2[i])
    return out


@njit(cache=True)
def _twist_3(Crel, X, d1, d2, d3, V, Vd):
    n = X.shape[0]
    out = np.zeros((n, 6))
    aV = np.empty(6)
    for i in range(n):
        o = out[i]
        x = X[i]
        if i > 0:
            _Ad_acc(Crel[i], out[i - 1], o, 1.0)
        _axpy(o, x, d3[i])
        _ad_acc(x, V[i], o, -d2[i])
        _ad_acc(x, Vd[i], o, -2.0 * d1[i])
        _ad_into(x, V[i], aV)
        _ad_acc(x, aV, o, -d1[i] * d1[i])
    return out


@njit(cache=True)
def _twist_4(Crel, X, d1, d2, d3, d4, V, Vd, Vdd):
    n = X.shape[0]
    out = np.zeros((n, 6))
    aV = np.empty(6)
    aVd = np.empty(6)
    t = np.empty(6)
    aaV = np.empty(6)
    for i in range(n):
        o = out[i]
        x = X[i]
        if i > 0:
            _Ad_acc(Crel[i], out[i - 1], o, 1.0)
        _axpy(o, x, d4[i])
        _ad_into(x, V[i], aV)
        _ad_into(x, Vd[i], aVd)
        _axpy(o, aV, -d3[i])
        _axpy(o, aVd, -3.0 * d2[i])
        _ad_acc(x, Vdd[i], o, -3.0 * d1[i])
        # ad_X (d2 V + d1 dV) = d2 ad_X V + d1 ad_X dV
        for k in range(6):
            t[k] = d2[i] * aV[k] + d1[i] * aVd[k]
        _ad_acc(x, t, o, -3.0 * d1[i])
        _ad_into(x, aV, aaV)
        _ad_acc(x, aaV, o, -d1[i] ** 3)
    return out


@njit(cache=True)
def _delta_1(Cpi, V, Vp):
    n = V.shape[0]
    out = np.empty((n, 6))
    for i in range(n):
        o = out[i]
        o[:] = Vp
        _Ad_acc(Cpi[i], V[i], o, -1.0)
    return out


@njit(cache=True)
def _delta_2(Cpi, Vd, Vp, Vpd, dV):
    n = Vd.shape[0]
    out = np.empty((n, 6))
    for i in range(n):
        o = out[i]
        o[:] = Vpd
        _Ad_acc(Cpi[i], Vd[i], o, -1.0)
        _ad_acc(dV[i], Vp, o, 1.0)
    return out


@njit(cache=True)
def _delta_3(Cpi, Vdd, Vp, Vpd, Vpdd, dV, dVd, printed):
    n = Vdd.shape[0]
    out = np.empty((n, 6))
    t = np.empty(6)
    a = np.empty(6)
    for i in range(n):
        o = out[i]
        o[:] = Vpdd
        _Ad_acc(Cpi[i], Vdd[i], o, -1.0)
        _ad_into(dV[i], Vp, a)
        if printed:
            # + ad_dVd (V_p - dV) - ad_dV^2 V_p
            for k in range(6):
                t[k] = Vp[k] - dV[i, k]
            _ad_acc(dVd[i], t, o, 1.0)
            _ad_acc(dV[i], a, o, -1.0)
        else:
            # + ad_dVd V_p + ad_dV (2 dV_p - dVd + ad_dV V_p)
            _ad_acc(dVd[i], Vp, o, 1.0)
            for k in range(6):
                t[k] = 2.0 * Vpd[k] - dVd[i, k] + a[k]
            _ad_acc(dV[i], t, o, 1.0)
    return out


@njit(cache=True)
def _jac_rate_1(J, dV):
    n = J.shape[1]
    out = np.empty((6, n))
    j = np.empty(6)
    o = np.empty(6)
    for i in range(n):
        for k in range(6):
            j[k] = J[k, i]
        _ad_into(dV[i], j, o)
        for k in range(6):
            out[k, i] = -o[k]
    return out


@njit(cache=True)
def _jac_rate_2(J, dV, dVd):
    n = J.shape[1]
    out = np.empty((6, n))
    j = np.empty(6)
    a = np.empty(6)
    o = np.empty(6)
    for i in range(n):
        for k in range(6):
            j[k] = J[k, i]
        _ad_into(dV[i], j, a)
        _ad_into(dV[i], a, o)
        _ad_acc(dVd[i], j, o, -1.0)
        for k in range(6):
            out[k, i] = o[k]
    return out


@njit(cache=True)
def _jac_rate_3(J, dV, dVd, dVdd, printed):
    # corrected form: -ad^3 + 3 ad_dVd ad_dV + ad_[dV, dVd] - ad_dVdd
    w = 2.0 if printed else 3.0
    n = J.shape[1]
    out = np.empty((6, n))
    j = np.empty(6)
    a1 = np.empty(6)
    a2 = np.empty(6)
    br = np.empty(6)
    o = np.empty(6)
    for i in range(n):
        for k in range(6):
            j[k] = J[k, i]
        _ad_into(dV[i], j, a1)
        _ad_into(dV[i], a1, a2)
        _ad_into(dV[i], a2, o)
        for k in range(6):
            o[k] = -o[k]
        _ad_acc(dVd[i], a1, o, w)
        _ad_into(dV[i], dVd[i], br)
        _ad_acc(br, j, o, 1.0)
        _ad_acc(dVdd[i], j, o, -1.0)
        for k in range(6):
            out[k, i] = o[k]
    return out


@njit(cache=True)
def _gravity_terms(C, V, Vd, a0):
    """Ad_{C_i^-1}(0, a0) and its first two time derivatives."""
    n = C.shape[0]
    G = np.zeros((n, 6))
    Gd = np.zeros((n, 6))
    Gdd = np.zeros((n, 6))
    for i in range(n):
        for r in range(3):
            G[i, 3 + r] = C[i, 0, r] * a0[0] + C[i, 1, r] * a0[1] + C[i, 2, r] * a0[2]
        _ad_acc(V[i], G[i], Gd[i], -1.0)
        _ad_acc(Vd[i], G[i], Gdd[i], -1.0)
        _ad_acc(V[i], Gd[i], Gdd[i], -1.0)
    return G, Gd, Gdd


# ---------------------------------------------------------------------------
# cache and public operations
# ---------------------------------------------------------------------------


@dataclass
class LimbKinCache:
    """Per-limb kinematic quantities; owned by the caller, filled in passes."""

    theta: np.ndarray
    poses: np.ndarray  # C_i, (N, 4, 4)
    rel_poses: np.ndarray  # C_{i,i-1}, (N, 4, 4)
    platform_rel: np.ndarray | None = None  # C_{p,i}
    jacobian: np.ndarray | None = None  # J_p, (6, N)
    twists: list[np.ndarray] = field(default_factory=list)  # V, dV, ddV, dddV
    deltas: list[np.ndarray] = field(default_factory=list)  # dV_p,i and two rates
    jacobian_rates: list[np.ndarray] = field(default_factory=list)  # dJ_p, ddJ_p, dddJ_p

    def platform_pose(self) -> Pose:
        return Pose.from_matrix(self.poses[-1])

    def check_jacobian(self, screws: np.ndarray, tol: float = 1e-12) -> bool:
        cols = [_Ad_apply(self.platform_rel[i], screws[i]) for i in range(len(screws))]
        return bool(np.max(np.abs(np.column_stack(cols) - self.jacobian)) <= tol)


def fk_poses(limb: LimbModel, theta) -> LimbKinCache:
    """Poses C_i = C_{i-1} B_i exp(X_i theta_i) and C_{i,i-1} for all bodies."""
    theta = np.ascontiguousarray(theta, dtype=float)
    if theta.shape != (limb.n_joints,):
        raise ValueError(f"expected {limb.n_joints} joint coordinates, got {theta.shape}")
    C, Crel = _fk(limb.screws, limb.refs, theta)
    return LimbKinCache(theta=theta, poses=C, rel_poses=Crel)


def jacobian_platform(limb: LimbModel, cache: LimbKinCache) -> np.ndarray:
    """J_p with column i = Ad_{C_{p,i}} X_i; the last column is X_N exactly."""
    cache.jacobian, cache.platform_rel = _jacobian(limb.screws, cache.poses)
    return cache.jacobian


def twist_recursions(
    limb: LimbModel,
    cache: LimbKinCache,
    rates: Sequence[np.ndarray],
    order: int,
    base_accel=None,
) -> list[np.ndarray]:
    """Body twists and their derivatives up to ``order`` (1: V_i ... 4: dddV_i).

    ``rates`` holds the joint derivatives theta', theta'', ... (at least
    ``order`` of them). Orders already in the cache are kept; the rest are
    appended. ``base_accel`` is the ground acceleration twist (default zero).
    """
    if not 1 <= order <= 4:
        raise ValueError(f"twist order must be in 1..4, got {order}")
    if len(rates) < order:
        raise ValueError(f"order {order} needs {order} joint-rate vectors, got {len(rates)}")
    d = [np.ascontiguousarray(r, dtype=float) for r in rates]
    X, Crel, tw = limb.screws, cache.rel_poses, cache.twists
    base = np.zeros(6) if base_accel is None else np.ascontiguousarray(base_accel, dtype=float)
    while len(tw) < order:
        k = len(tw) + 1
        if k == 1:
            tw.append(_twist_1(Crel, X, d[0]))
        elif k == 2:
            tw.append(_twist_2(Crel, X, d[0], d[1], tw[0], base))
        elif k == 3:
            tw.append(_twist_3(Crel, X, d[0], d[1], d[2], tw[0], tw[1]))
        else:
            tw.append(_twist_4(Crel, X, d[0], d[1], d[2], d[3], tw[0], tw[1], tw[2]))
    return tw[:order]


def delta_twists(
    cache: LimbKinCache,
    platform_twists: Sequence[np.ndarray],
    order: int,
    lemma: str = "corrected",
) -> list[np.ndarray]:
    """Twist of each body relative to the platform, in platform frame, and its rates.

    ``platform_twists`` is ``[V_p, dV_p, ddV_p]`` (as many as ``order``).
    The ``"printed"`` variant reproduces the published second-rate formula,
    which does not match the time derivative; it exists for comparison only.
    """
    if lemma not in LEMMA_VARIANTS:
        raise ValueError(f"unknown lemma variant {lemma!r}")
    if not 1 <= order <= 3:
        raise ValueError(f"delta order must be in 1..3, got {order}")
    Vp = [np.ascontiguousarray(v, dtype=float) for v in platform_twists]
    tw, dl, Cpi = cache.twists, cache.deltas, cache.platform_rel
    while len(dl) < order:
        k = len(dl) + 1
        if k == 1:
            dl.append(_delta_1(Cpi, tw[0], Vp[0]))
        elif k == 2:
            dl.append(_delta_2(Cpi, tw[1], Vp[0], Vp[1], dl[0]))
        else:
            dl.append(_delta_3(Cpi, tw[2], Vp[0], Vp[1], Vp[2], dl[0], dl[1], lemma == "printed"))
    return dl[:order]


def delta_twist_rate_proof_form(cache: LimbKinCache, Vp, Vpd) -> np.ndarray:
    """First delta-twist rate written as dV_p - Ad dV_i - ad_{V_p} dV_p,i."""
    dV = cache.deltas[0]
    out = np.empty_like(dV)
    for i in range(dV.shape[0]):
        out[i] = Vpd - _Ad_apply(cache.platform_rel[i], cache.twists[1][i]) - _ad_apply(Vp, dV[i])
    return out


def jacobian_derivatives(cache: LimbKinCache, order: int, lemma: str = "corrected") -> list[np.ndarray]:
    """dJ_p, ddJ_p, dddJ_p by applying ad-operators to the cached columns."""
    if lemma not in LEMMA_VARIANTS:
        raise ValueError(f"unknown lemma variant {lemma!r}")
    J, dl, out = cache.jacobian, cache.deltas, cache.jacobian_rates
    while len(out) < order:
        k = len(out) + 1
        if k == 1:
            out.append(_jac_rate_1(J, dl[0]))
        elif k == 2:
            out.append(_jac_rate_2(J, dl[0], dl[1]))
        else:
            out.append(_jac_rate_3(J, dl[0], dl[1], dl[2], lemma == "printed"))
    return out[:order]


def gravity_accelerations(cache: LimbKinCache, gravity) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Body-frame transport of the ground acceleration (0, -g) and two rates.

    Needs the velocity and (kinematic) acceleration twists in the cache.
    """
    a0 = -np.ascontiguousarray(gravity, dtype=float)
    return _gravity_terms(cache.poses, cache.twists[0], cache.twists[1], a0)


def pose_error(limb: LimbModel, theta, target: Pose) -> np.ndarray:
    """Body-frame twist taking the current terminal pose to ``target``."""
    C, _ = _fk(limb.screws, limb.refs, np.ascontiguousarray(theta, dtype=float))
    return log_pose(Pose.from_matrix(_inv(C[-1]) @ target.matrix))


def geometric_ik_newton(
    limb: LimbModel,
    target: Pose,
    theta0,
    tol: float = 1e-12,
    max_iter: int = 50,
    max_cond: float = 1e12,
) -> np.ndarray:
    """Joint coordinates placing the limb's terminal body at ``target``.

    Newton-Raphson on the task rows of the body-frame pose error. Iterates
    are clamped to joint limits, so a target outside the workspace stalls
    and raises :class:`IKConvergenceError`.
    """
    rows = limb.task_rows
    T = target.matrix
    theta = np.clip(np.array(theta0, dtype=float), limb.lower, limb.upper)
    for _ in range(max_iter + 1):
        C, _ = _fk(limb.screws, limb.refs, theta)
        err = log_pose(Pose.from_matrix(_inv(C[-1]) @ T))
        size = np.linalg.norm(err)
        if size <= tol:
            # one polishing step brings the residual to round-off level
            J, _ = _jacobian(limb.screws, C)
            trial = np.clip(theta + np.linalg.solve(J[rows], err[rows]), limb.lower, limb.upper)
            if np.linalg.norm(pose_error(limb, trial, target)) <= size:
                theta = trial
            return theta
        J, _ = _jacobian(limb.screws, C)
        Jt = J[rows]
        if np.linalg.cond(Jt) > max_cond:
            raise IKSingularError("singular limb Jacobian during Newton-Raphson")
        theta = np.clip(theta + np.linalg.solve(Jt, err[rows]), limb.lower, limb.upper)
    raise IKConvergenceError(
        f"Newton-Raphson did not converge in {max_iter} iterations (|error| = {size:.3e})"
    )
