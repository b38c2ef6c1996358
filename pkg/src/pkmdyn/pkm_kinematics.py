"""Fourth-order inverse kinematics of the whole mechanism.

Given closed-loop joint coordinates and the task motion ``V_t`` with three
derivatives, five passes produce, per limb, the joint rates up to fourth
order, the body twists up to the third derivative, the platform Jacobian and
its three rates, the limb inverse-kinematics matrix ``F`` with two rates,
and finally the actuator map ``J_IK`` with its two rates.

Each pass solves ``J_t theta^(nu) = D_t V_t^(nu-1) - P_t c^nu`` with the
single LU factorization of ``J_t`` made in the first pass. Here ``c^nu`` is
the Jacobian-rate correction

    c^nu = sum_{k=1}^{nu-1} binom(nu-1, k) J_p^(k) theta^(nu-k).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import IKConvergenceError, KinematicSingularityError, LoopClosureError
from .liegroup import Pose
from .limb_kinematics import (
    LimbKinCache,
    delta_twists,
    fk_poses,
    geometric_ik_newton,
    jacobian_derivatives,
    jacobian_platform,
    twist_recursions,
)
from .linalg import LUFactors, SingularMatrixError
from .model import LimbModel, PkmModel, split_theta

LOOP_CLOSURE_TOL = 1e-9
C4_VARIANTS = ("binomial", "printed")


@dataclass
class LimbState:
    """Everything the passes compute for one limb."""

    kin: LimbKinCache
    lu: LUFactors
    F: np.ndarray  # N_l x dof
    rates: list[np.ndarray] = field(default_factory=list)  # theta', ..., theta''''
    corrections: list[np.ndarray] = field(default_factory=list)  # c2, c3, c4 (6-vectors)
    F_rates: list[np.ndarray] = field(default_factory=list)  # F', F''

    @property
    def theta(self) -> np.ndarray:
        return self.kin.theta


@dataclass
class PkmKinCache:
    model: PkmModel
    limbs: list[LimbState]
    task: list[np.ndarray]  # V_t and derivatives supplied so far
    lemma: str = "corrected"
    c4_variant: str = "binomial"
    J_IK: np.ndarray | None = None
    J_IK_rates: list[np.ndarray] = field(default_factory=list)
    actuation: object | None = None  # factorized actuator map, built by invdyn

    def platform_twists(self, order: int) -> list[np.ndarray]:
        """V_p, dV_p, ... (platform body frame) for the first ``order`` task entries."""
        P_p = self.model.P_p
        return [P_p @ v for v in self.task[:order]]

    @property
    def platform_pose(self) -> Pose:
        return self.limbs[-1].kin.platform_pose()

    def F_bar(self, k: int, rate: int = 0) -> np.ndarray:
        """Tree rows of F (rate 0), F' (1) or F'' (2) for limb ``k``."""
        s = self.limbs[k]
        M = s.F if rate == 0 else s.F_rates[rate - 1]
        return M[: self.model.limbs[k].n_tree]


def _task_rows(limb: LimbModel, v: np.ndarray) -> np.ndarray:
    return v[limb.task_rows]


def loop_closure_residual(model: PkmModel, theta) -> float:
    """Largest entry of C_p(limb) - C_p(last limb) over all limbs."""
    parts = split_theta(model, theta)
    poses = [fk_poses(limb, t).poses[-1] for limb, t in zip(model.limbs, parts)]
    return max(float(np.max(np.abs(P - poses[-1]))) for P in poses)


def pass1(model: PkmModel, theta, V_t, *, lemma: str = "corrected", c4_variant: str = "binomial") -> PkmKinCache:
    """Poses, Jacobians, LU of each J_t, F = J_t^-1 D_t and theta' = F V_t."""
    if c4_variant not in C4_VARIANTS:
        raise ValueError(f"unknown c4 variant {c4_variant!r}")
    parts = split_theta(model, theta)
    V_t = np.asarray(V_t, dtype=float)
    if V_t.shape != (model.dof,):
        raise ValueError(f"V_t must have {model.dof} components, got {V_t.shape}")
    states = []
    for k, (limb, th) in enumerate(zip(model.limbs, parts)):
        kin = fk_poses(limb, th)
        jacobian_platform(limb, kin)
        states.append(kin)
    Cp = states[-1].poses[-1]
    for k, kin in enumerate(states):
        gap = float(np.max(np.abs(kin.poses[-1] - Cp)))
        if gap > LOOP_CLOSURE_TOL:
            raise LoopClosureError(f"limb {k}: platform pose differs by {gap:.3e} from the last limb")
    limbs = []
    for k, (limb, kin) in enumerate(zip(model.limbs, states)):
        J_t = kin.jacobian[limb.task_rows]
        try:
            lu = LUFactors(J_t, purpose="task_jacobian")
        except SingularMatrixError as exc:
            raise KinematicSingularityError(k, f"({exc})") from None
        F = lu.solve(limb.D_t)
        st = LimbState(kin=kin, lu=lu, F=F)
        st.rates.append(F @ V_t)
        limbs.append(st)
    return PkmKinCache(model=model, limbs=limbs, task=[V_t], lemma=lemma, c4_variant=c4_variant)


def _correction(cache: PkmKinCache, st: LimbState, nu: int) -> np.ndarray:
    Jr, th = st.kin.jacobian_rates, st.rates
    if nu == 2:
        return Jr[0] @ th[0]
    if nu == 3:
        return Jr[1] @ th[0] + 2.0 * (Jr[0] @ th[1])
    w = 2.0 if cache.c4_variant == "printed" else 3.0
    return Jr[2] @ th[0] + w * (Jr[1] @ th[1]) + 3.0 * (Jr[0] @ th[2])


def _higher_pass(model: PkmModel, cache: PkmKinCache, dV_t, nu: int) -> PkmKinCache:
    if len(cache.task) != nu - 1:
        raise RuntimeError(f"pass {nu} requires pass {nu - 1} to have run")
    dV_t = np.asarray(dV_t, dtype=float)
    if dV_t.shape != (model.dof,):
        raise ValueError(f"task derivative must have {model.dof} components, got {dV_t.shape}")
    Vp = cache.platform_twists(nu - 1)
    for limb, st in zip(model.limbs, cache.limbs):
        twist_recursions(limb, st.kin, st.rates, nu - 1)
        delta_twists(st.kin, Vp, nu - 1, cache.lemma)
        jacobian_derivatives(st.kin, nu - 1, cache.lemma)
        c = _correction(cache, st, nu)
        st.corrections.append(c)
        st.rates.append(st.lu.solve(limb.D_t @ dV_t - _task_rows(limb, c)))
    cache.task.append(dV_t)
    return cache


def pass2(model: PkmModel, cache: PkmKinCache, dV_t) -> PkmKinCache:
    """Body twists, dJ_p, c2 and theta''."""
    return _higher_pass(model, cache, dV_t, 2)


def pass3(model: PkmModel, cache: PkmKinCache, ddV_t) -> PkmKinCache:
    """Body accelerations (kinematic part), ddJ_p, c3 and theta'''."""
    return _higher_pass(model, cache, ddV_t, 3)


def pass4(model: PkmModel, cache: PkmKinCache, dddV_t) -> PkmKinCache:
    """Body jerks, dddJ_p, c4 and theta''''."""
    return _higher_pass(model, cache, dddV_t, 4)


def pass5(model: PkmModel, cache: PkmKinCache) -> PkmKinCache:
    """Third body-twist derivatives (the pure fourth-order forward pass)."""
    for limb, st in zip(model.limbs, cache.limbs):
        twist_recursions(limb, st.kin, st.rates, 4)
    return cache


def limb_F_derivatives(cache: PkmKinCache, k: int) -> tuple[np.ndarray, np.ndarray]:
    """F' = -G dJ_t F and F'' = -G (ddJ_t F + 2 dJ_t F') with G = J_t^-1."""
    limb = cache.model.limbs[k]
    st = cache.limbs[k]
    if not st.F_rates:
        Jr = st.kin.jacobian_rates
        dJt = Jr[0][limb.task_rows]
        ddJt = Jr[1][limb.task_rows]
        Fd = -st.lu.solve(dJt @ st.F)
        Fdd = -st.lu.solve(ddJt @ st.F + 2.0 * (dJt @ Fd))
        st.F_rates[:] = [Fd, Fdd]
    return st.F_rates[0], st.F_rates[1]


def assemble_ik_jacobian(model: PkmModel, cache: PkmKinCache):
    """J_IK and two rates: one row per actuated limb, taken from F, F', F''."""
    for k in range(model.n_limbs):
        limb_F_derivatives(cache, k)
    rows = [[], [], []]
    for k in model.actuated_limbs:
        j = model.limbs[k].actuated_joint
        st = cache.limbs[k]
        Fd, Fdd = st.F_rates
        rows[0].append(st.F[j])
        rows[1].append(Fd[j])
        rows[2].append(Fdd[j])
    cache.J_IK = np.array(rows[0])
    cache.J_IK_rates = [np.array(rows[1]), np.array(rows[2])]
    return cache.J_IK, cache.J_IK_rates[0], cache.J_IK_rates[1]


def fourth_order_kinematics(
    model: PkmModel,
    theta,
    V_t,
    dV_t,
    ddV_t,
    dddV_t,
    *,
    lemma: str = "corrected",
    c4_variant: str = "binomial",
) -> PkmKinCache:
    """Passes 1-5 followed by the F rates and the actuator Jacobian."""
    cache = pass1(model, theta, V_t, lemma=lemma, c4_variant=c4_variant)
    pass2(model, cache, dV_t)
    pass3(model, cache, ddV_t)
    pass4(model, cache, dddV_t)
    pass5(model, cache)
    assemble_ik_jacobian(model, cache)
    return cache


def ik_residuals(model: PkmModel, cache: PkmKinCache) -> list[list[float]]:
    """max|D_t V_t^(nu-1) - J_t theta^(nu) - P_t c^nu| per limb and order."""
    out = []
    for limb, st in zip(model.limbs, cache.limbs):
        J_t = st.kin.jacobian[limb.task_rows]
        res = []
        for nu in range(1, len(st.rates) + 1):
            r = limb.D_t @ cache.task[nu - 1] - J_t @ st.rates[nu - 1]
            if nu > 1:
                r = r - _task_rows(limb, st.corrections[nu - 2])
            res.append(float(np.max(np.abs(r))))
        out.append(res)
    return out


def solve_configuration(model: PkmModel, platform: Pose, seed: Sequence[np.ndarray] | None = None) -> list[np.ndarray]:
    """Joint coordinates of every limb placing the platform at ``platform``.

    Every limb's terminal body frame is the platform frame, so each limb is
    solved independently by Newton-Raphson from ``seed`` (zero by default).
    """
    if seed is None:
        seed = [np.zeros(l.n_joints) for l in model.limbs]
    out = []
    for k, (limb, th0) in enumerate(zip(model.limbs, seed)):
        try:
            out.append(geometric_ik_newton(limb, platform, th0))
        except IKConvergenceError as exc:
            raise type(exc)(f"limb {k}: {exc}") from None
    return out


def home_configuration(model: PkmModel) -> tuple[list[np.ndarray], Pose]:
    """Zero joint coordinates and the platform pose they produce.

    Models are described in an assembled reference configuration, so the
    zero configuration must close every loop.
    """
    theta = [np.zeros(l.n_joints) for l in model.limbs]
    gap = loop_closure_residual(model, theta)
    if gap > LOOP_CLOSURE_TOL:
        raise LoopClosureError(f"zero configuration does not close the loops (gap {gap:.3e})")
    C = fk_poses(model.limbs[-1], theta[-1]).poses[-1]
    return theta, Pose.from_matrix(C)
