"""Inverse dynamics of the mechanism and its first two time derivatives.

Each limb's spanning-tree part is run through a backward Newton-Euler
recursion that also propagates the first and second time derivatives of
the interbody wrenches. Projected on the joint screws this gives the limb's
generalized forces Q and their rates, which the actuator map turns into the
actuation forces u, u' and u''.

Gravity enters as the ground acceleration (0, -g), transported into every
body frame and added to the kinematic accelerations of the cache. Forces
are those the actuators must supply, so Q holds the inertial plus gravity
load of the tree.

With more actuators than degrees of freedom the least-norm solution
``u = J_IK lam`` is returned together with its exact derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ActuationSingularityError, KinematicSingularityError, LoopClosureError
from .liegroup import _Ad_T_acc, _ad_T_acc, _ad_T_into
from .limb_kinematics import LEMMA_VARIANTS, LimbKinCache, gravity_accelerations
from .linalg import PIVOT_TOL, LUFactors, SingularMatrixError, factorizations
from .model import LimbModel, PkmModel, split_theta
from .pkm_kinematics import (
    C4_VARIANTS,
    LOOP_CLOSURE_TOL,
    LimbState,
    PkmKinCache,
    fourth_order_kinematics,
)


@njit(cache=True)
def _mv6_acc(M, v, out, s):
    for r in range(6):
        acc = 0.0
        for c in range(6):
            acc += M[r, c] * v[c]
        out[r] += s * acc


@njit(cache=True)
def _newton_euler_2nd(Crel, X, M, V, Vd, Vdd, A, Ad, Add, d1, d2, n, Wext, Wext_d, Wext_dd):
    """Backward recursion over the first n bodies; returns wrenches and Q."""
    W = np.zeros((n, 6))
    Wd = np.zeros((n, 6))
    Wdd = np.zeros((n, 6))
    MV = np.empty(6)
    MVd = np.empty(6)
    MVdd = np.empty(6)
    a1 = np.empty(6)
    a1d = np.empty(6)
    t = np.empty(6)
    for i in range(n - 1, -1, -1):
        Mi = M[i]
        MV[:] = 0.0
        MVd[:] = 0.0
        MVdd[:] = 0.0
        _mv6_acc(Mi, V[i], MV, 1.0)
        _mv6_acc(Mi, Vd[i], MVd, 1.0)
        _mv6_acc(Mi, Vdd[i], MVdd, 1.0)
        w = W[i]
        wd = Wd[i]
        wdd = Wdd[i]
        _mv6_acc(Mi, A[i], w, 1.0)
        _ad_T_acc(V[i], MV, w, -1.0)
        _mv6_acc(Mi, Ad[i], wd, 1.0)
        _ad_T_acc(Vd[i], MV, wd, -1.0)
        _ad_T_acc(V[i], MVd, wd, -1.0)
        _mv6_acc(Mi, Add[i], wdd, 1.0)
        _ad_T_acc(Vdd[i], MV, wdd, -1.0)
        _ad_T_acc(Vd[i], MVd, wdd, -2.0)
        _ad_T_acc(V[i], MVdd, wdd, -1.0)
        if i == n - 1:
            for k in range(6):
                w[k] -= Wext[k]
                wd[k] -= Wext_d[k]
                wdd[k] -= Wext_dd[k]
        else:
            C = Crel[i + 1]
            x = X[i + 1]
            q1 = d1[i + 1]
            q2 = d2[i + 1]
            up, up_d, up_dd = W[i + 1], Wd[i + 1], Wdd[i + 1]
            _ad_T_into(x, up, a1)
            _ad_T_into(x, up_d, a1d)
            _Ad_T_acc(C, up, w, 1.0)
            for k in range(6):
                t[k] = up_d[k] - q1 * a1[k]
            _Ad_T_acc(C, t, wd, 1.0)
            _ad_T_into(x, a1, t)
            for k in range(6):
                t[k] = up_dd[k] - 2.0 * q1 * a1d[k] + q1 * q1 * t[k] - q2 * a1[k]
            _Ad_T_acc(C, t, wdd, 1.0)
    Q = np.empty(n)
    Qd = np.empty(n)
    Qdd = np.empty(n)
    for i in range(n):
        Q[i] = np.dot(X[i], W[i])
        Qd[i] = np.dot(X[i], Wd[i])
        Qdd[i] = np.dot(X[i], Wdd[i])
    return W, Wd, Wdd, Q, Qd, Qdd


@dataclass
class LimbForceCache:
    wrenches: np.ndarray  # W_i, (n_tree, 6), body frames
    wrench_rates: tuple[np.ndarray, np.ndarray]
    Q: np.ndarray
    Q_dot: np.ndarray
    Q_ddot: np.ndarray

    def check(self, screws: np.ndarray, tol: float = 1e-12) -> bool:
        X = screws[: len(self.Q)]
        return all(
            np.max(np.abs(np.einsum("ij,ij->i", X, W) - q), initial=0.0) <= tol * (1 + np.max(np.abs(q), initial=0.0))
            for W, q in ((self.wrenches, self.Q), (self.wrench_rates[0], self.Q_dot), (self.wrench_rates[1], self.Q_ddot))
        )


class InvDynResult:
    """u, u', u'' plus the per-limb wrenches and the kinematic cache.

    ``forces`` and ``kin`` may be built on first access from raw kernel
    output, so timing-critical callers only pay for what they read.
    """

    def __init__(self, u, u_dot, u_ddot, forces=None, kin=None, expand=None):
        self.u = u
        self.u_dot = u_dot
        self.u_ddot = u_ddot
        self._forces = forces
        self._kin = kin
        self._expand = expand

    def _materialize(self):
        if self._kin is None:
            self._kin, self._forces = self._expand()
            self._expand = None

    @property
    def forces(self) -> list[LimbForceCache]:
        self._materialize()
        return self._forces

    @property
    def kin(self) -> PkmKinCache:
        self._materialize()
        return self._kin


_ZERO6 = np.zeros(6)


def limb_invdyn_2nd(
    limb: LimbModel,
    kin: LimbKinCache,
    rates,
    gravity,
    external=None,
) -> LimbForceCache:
    """Wrenches W_i, W_i', W_i'' of the tree bodies and Q = X^T W with rates.

    ``kin`` must hold the body twists up to the third derivative and
    ``rates`` the joint rates theta', theta''. ``external`` is an optional
    triple (W, W', W'') of the wrench applied by the environment to the
    terminal tree body, in its frame.
    """
    n = limb.n_tree
    if len(kin.twists) < 4:
        raise ValueError("limb cache needs body twists up to the third derivative")
    V, Vd, Vdd, Vddd = kin.twists
    G, Gd, Gdd = gravity_accelerations(kin, gravity)
    if external is None:
        ext = (_ZERO6, _ZERO6, _ZERO6)
    else:
        ext = tuple(np.ascontiguousarray(w, dtype=float) for w in external)
    W, Wd, Wdd, Q, Qd, Qdd = _newton_euler_2nd(
        kin.rel_poses,
        limb.screws,
        limb.masses,
        V,
        Vd,
        Vdd,
        Vd + G,
        Vdd + Gd,
        Vddd + Gdd,
        rates[0],
        rates[1],
        n,
        *ext,
    )
    return LimbForceCache(W, (Wd, Wdd), Q, Qd, Qdd)


# ---------------------------------------------------------------------------
# actuator map
# ---------------------------------------------------------------------------


class ActuationSolver:
    """Solves J_IK^T u = b (least-norm when actuation is redundant).

    One LU factorization per configuration: of J_IK^T when square, of
    J_IK^T J_IK otherwise.
    """

    def __init__(self, J, Jd, Jdd):
        self.J, self.Jd, self.Jdd = J, Jd, Jdd
        self.square = J.shape[0] == J.shape[1]
        A = J.T if self.square else J.T @ J
        try:
            self.lu = LUFactors(A, purpose="ik_jacobian")
        except SingularMatrixError as exc:
            raise ActuationSingularityError(f"inverse kinematics Jacobian is singular ({exc})") from None
        self._lam = None

    def level0(self, b):
        if self.square:
            return self.lu.solve(b)
        self._lam = [self.lu.solve(b)]
        return self.J @ self._lam[0]

    def level1(self, bd, u):
        J, Jd = self.J, self.Jd
        if self.square:
            return self.lu.solve(bd - Jd.T @ u)
        # u = J lam with (J^T J) lam = b, differentiated
        lam = self._lam[0]
        Nd = Jd.T @ J + J.T @ Jd
        lam_d = self.lu.solve(bd - Nd @ lam)
        self._lam[1:] = [lam_d]
        return Jd @ lam + J @ lam_d

    def level2(self, bdd, u, ud):
        J, Jd, Jdd = self.J, self.Jd, self.Jdd
        if self.square:
            return self.lu.solve(bdd - Jdd.T @ u - 2.0 * (Jd.T @ ud))
        lam, lam_d = self._lam[0], self._lam[1]
        Nd = Jd.T @ J + J.T @ Jd
        Ndd = Jdd.T @ J + 2.0 * (Jd.T @ Jd) + J.T @ Jdd
        lam_dd = self.lu.solve(bdd - Ndd @ lam - 2.0 * (Nd @ lam_d))
        return Jdd @ lam + 2.0 * (Jd @ lam_d) + J @ lam_dd

    def solve(self, b, bd, bdd):
        u = self.level0(b)
        ud = self.level1(bd, u)
        return u, ud, self.level2(bdd, u, ud)


def actuation_solver(cache: PkmKinCache) -> ActuationSolver:
    if cache.actuation is None:
        cache.actuation = ActuationSolver(cache.J_IK, *cache.J_IK_rates)
    return cache.actuation


def task_forces(model: PkmModel, cache: PkmKinCache, forces: list[LimbForceCache]):
    """b = sum F_bar^T Q with its first two time derivatives."""
    b = np.zeros(model.dof)
    bd = np.zeros(model.dof)
    bdd = np.zeros(model.dof)
    for k, f in enumerate(forces):
        F = cache.F_bar(k)
        Fd = cache.F_bar(k, 1)
        Fdd = cache.F_bar(k, 2)
        b += F.T @ f.Q
        bd += F.T @ f.Q_dot + Fd.T @ f.Q
        bdd += F.T @ f.Q_ddot + 2.0 * (Fd.T @ f.Q_dot) + Fdd.T @ f.Q
    return b, bd, bdd


def assemble_u(model: PkmModel, cache: PkmKinCache, forces) -> np.ndarray:
    """u with J_IK^T u = sum F_bar^T Q."""
    b, _, _ = task_forces(model, cache, forces)
    return actuation_solver(cache).level0(b)


def assemble_udot(model: PkmModel, cache: PkmKinCache, forces, u) -> np.ndarray:
    """u' from J_IK^T u' = sum (F_bar^T Q' + F_bar'^T Q) - J_IK'^T u."""
    _, bd, _ = task_forces(model, cache, forces)
    return actuation_solver(cache).level1(bd, u)


def assemble_uddot(model: PkmModel, cache: PkmKinCache, forces, u, u_dot) -> np.ndarray:
    """u'' from the twice differentiated force balance."""
    _, _, bdd = task_forces(model, cache, forces)
    return actuation_solver(cache).level2(bdd, u, u_dot)


def _external(external_wrench):
    if external_wrench is None:
        return None
    ext = np.asarray(external_wrench, dtype=float)
    if ext.shape == (6,):
        return np.array([ext, np.zeros(6), np.zeros(6)])
    if ext.shape != (3, 6):
        raise ValueError("external wrench must be a 6-vector or a (3, 6) array of it and two rates")
    return ext


def reference_invdyn(
    model: PkmModel,
    theta,
    V_t,
    dV_t,
    ddV_t,
    dddV_t,
    *,
    external_wrench=None,
    lemma: str = "corrected",
    c4_variant: str = "binomial",
) -> InvDynResult:
    """Second-order inverse dynamics composed from the individual passes."""
    kin = fourth_order_kinematics(model, theta, V_t, dV_t, ddV_t, dddV_t, lemma=lemma, c4_variant=c4_variant)
    ext = _external(external_wrench)
    forces = []
    last = model.n_limbs - 1
    for k, (limb, st) in enumerate(zip(model.limbs, kin.limbs)):
        forces.append(
            limb_invdyn_2nd(limb, st.kin, st.rates, model.gravity, ext if k == last else None)
        )
    u = assemble_u(model, kin, forces)
    ud = assemble_udot(model, kin, forces, u)
    udd = assemble_uddot(model, kin, forces, u, ud)
    return InvDynResult(u=u, u_dot=ud, u_ddot=udd, forces=forces, kin=kin)


def second_order_invdyn(
    model: PkmModel,
    theta,
    V_t,
    dV_t,
    ddV_t,
    dddV_t,
    *,
    external_wrench=None,
    lemma: str = "corrected",
    c4_variant: str = "binomial",
) -> InvDynResult:
    """u, u', u'' for the joint coordinates and task motion given.

    ``theta`` is a per-limb list (or flat vector) of joint coordinates that
    close all loops. ``external_wrench`` is the wrench the environment
    applies to the platform, in platform coordinates (optionally stacked
    with its two time derivatives). Runs the fused kernel; see
    :func:`reference_invdyn` for the same computation pass by pass.
    """
    from .fastpath import run_kernel

    if lemma not in LEMMA_VARIANTS:
        raise ValueError(f"unknown lemma variant {lemma!r}")
    if c4_variant not in C4_VARIANTS:
        raise ValueError(f"unknown c4 variant {c4_variant!r}")
    parts = split_theta(model, theta)
    task = np.array([V_t, dV_t, ddV_t, dddV_t], dtype=float)
    out = run_kernel(
        model,
        parts,
        task,
        _external(external_wrench),
        printed=lemma == "printed",
        c4w=2.0 if c4_variant == "printed" else 3.0,
    )
    gaps, ratios, u, ratio_ik = out[15], out[12], out[18], out[19]
    for k in range(model.n_limbs):
        if gaps[k] > LOOP_CLOSURE_TOL:
            raise LoopClosureError(f"limb {k}: platform pose differs by {gaps[k]:.3e} from the last limb")
    for k in range(model.n_limbs):
        factorizations.bump("task_jacobian")
        if not ratios[k] >= PIVOT_TOL:
            raise KinematicSingularityError(k, f"(pivot ratio {ratios[k]:.3e} below {PIVOT_TOL:.0e})")
    factorizations.bump("ik_jacobian")
    if not ratio_ik >= PIVOT_TOL:
        raise ActuationSingularityError(f"inverse kinematics Jacobian is singular (pivot ratio {ratio_ik:.3e})")

    def expand():
        return _expand_kernel_output(model, parts, task, out, lemma, c4_variant)

    return InvDynResult(u=u[0], u_dot=u[1], u_ddot=u[2], expand=expand)


def _expand_kernel_output(model, parts, task, out, lemma, c4_variant):
    (poses, rel, cpi, J, Jr, tw, dl, rates, corr, F, LUs, perms, ratios, W, Q, _, JIK, _, _, _) = out
    states = []
    forces = []
    for k, limb in enumerate(model.limbs):
        n, m = limb.n_joints, limb.n_tree
        kin = LimbKinCache(
            theta=np.asarray(parts[k], dtype=float),
            poses=poses[k, :n],
            rel_poses=rel[k, :n],
            platform_rel=cpi[k, :n],
            jacobian=J[k, :, :n],
            twists=[tw[k, i, :n] for i in range(4)],
            deltas=[dl[k, i, :n] for i in range(3)],
            jacobian_rates=[Jr[k, i, :, :n] for i in range(3)],
        )
        lu = LUFactors.from_factors(LUs[k, :n, :n].copy(), perms[k, :n].copy(), ratios[k])
        states.append(
            LimbState(
                kin=kin,
                lu=lu,
                F=F[k, 0, :n],
                rates=[rates[k, i, :n] for i in range(4)],
                corrections=[corr[k, i] for i in range(3)],
                F_rates=[F[k, 1, :n], F[k, 2, :n]],
            )
        )
        forces.append(LimbForceCache(W[k, 0, :m], (W[k, 1, :m], W[k, 2, :m]), Q[k, 0, :m], Q[k, 1, :m], Q[k, 2, :m]))
    cache = PkmKinCache(
        model=model,
        limbs=states,
        task=list(task),
        lemma=lemma,
        c4_variant=c4_variant,
        J_IK=JIK[0],
        J_IK_rates=[JIK[1], JIK[2]],
    )
    return cache, forces
