"""Closed-form task-space equations of motion.

    M_t dV_t + C_t V_t + W_t = J_IK^T u

with M_t = sum F_bar^T M_bar F_bar, C_t V_t = sum F_bar^T (C_bar theta_bar'
+ M_bar F_bar' V_t) and W_t = sum F_bar^T Q_grav. The limb terms M_bar,
C_bar theta_bar' and Q_grav are obtained by running the limb's Newton-Euler
recursion with selected inputs switched off, which keeps this module an
independent assembly path for checking the recursive inverse dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .invdyn import limb_invdyn_2nd
from .limb_kinematics import fk_poses, twist_recursions
from .model import LimbModel, PkmModel
from .pkm_kinematics import PkmKinCache

ASYMMETRY_TOL = 1e-11
_NO_GRAVITY = np.zeros(3)


@dataclass
class LimbEomTerms:
    M_bar: np.ndarray  # n_tree x n_tree
    coriolis_times_rates: np.ndarray  # C_bar theta_bar'
    Q_grav: np.ndarray


@dataclass
class TaskSpaceEom:
    M_t: np.ndarray
    C_t_times_Vt: np.ndarray
    W_t_grav: np.ndarray

    def residual(self, dV_t, J_IK, u) -> np.ndarray:
        """M_t dV_t + C_t V_t + W_t - J_IK^T u."""
        return self.M_t @ dV_t + self.C_t_times_Vt + self.W_t_grav - J_IK.T @ u


def _tree_load(limb: LimbModel, theta, d1, d2, gravity) -> np.ndarray:
    kin = fk_poses(limb, theta)
    zero = np.zeros(limb.n_joints)
    rates = [d1, d2, zero, zero]
    twist_recursions(limb, kin, rates, 4)
    return limb_invdyn_2nd(limb, kin, rates, gravity).Q


def _pad(limb: LimbModel, v) -> np.ndarray:
    out = np.zeros(limb.n_joints)
    out[: limb.n_tree] = v
    return out


def limb_mass_matrix(limb: LimbModel, theta) -> np.ndarray:
    """Tree mass matrix M_bar, one unit-acceleration column at a time."""
    n = limb.n_tree
    zero = np.zeros(limb.n_joints)
    M = np.empty((n, n))
    for j in range(n):
        e = zero.copy()
        e[j] = 1.0
        M[:, j] = _tree_load(limb, theta, zero, e, _NO_GRAVITY)
    asym = float(np.max(np.abs(M - M.T), initial=0.0))
    scale = 1.0 + float(np.max(np.abs(M), initial=0.0))
    if asym > ASYMMETRY_TOL * scale:
        raise ArithmeticError(f"limb mass matrix asymmetric by {asym:.3e}")
    return 0.5 * (M + M.T)


def limb_coriolis_times_rates(limb: LimbModel, theta, theta_bar_dot) -> np.ndarray:
    """C_bar theta_bar': the tree load at zero acceleration and zero gravity."""
    zero = np.zeros(limb.n_joints)
    return _tree_load(limb, theta, _pad(limb, theta_bar_dot), zero, _NO_GRAVITY)


def limb_gravity_load(limb: LimbModel, theta, gravity) -> np.ndarray:
    """Q_grav: generalized forces holding the tree still against gravity."""
    zero = np.zeros(limb.n_joints)
    return _tree_load(limb, theta, zero, zero, gravity)


def limb_eom_terms(limb: LimbModel, theta, theta_bar_dot, gravity) -> LimbEomTerms:
    return LimbEomTerms(
        M_bar=limb_mass_matrix(limb, theta),
        coriolis_times_rates=limb_coriolis_times_rates(limb, theta, theta_bar_dot),
        Q_grav=limb_gravity_load(limb, theta, gravity),
    )


def task_eom(model: PkmModel, cache: PkmKinCache) -> TaskSpaceEom:
    """Assemble M_t, C_t V_t and W_t from the limb terms and F_bar, F_bar'."""
    dof = model.dof
    V_t = cache.task[0]
    M_t = np.zeros((dof, dof))
    CV = np.zeros(dof)
    W = np.zeros(dof)
    for k, limb in enumerate(model.limbs):
        F = cache.F_bar(k)
        Fd = cache.F_bar(k, 1)
        theta = cache.limbs[k].theta
        terms = limb_eom_terms(limb, theta, F @ V_t, model.gravity)
        M_t += F.T @ terms.M_bar @ F
        CV += F.T @ (terms.coriolis_times_rates + terms.M_bar @ (Fd @ V_t))
        W += F.T @ terms.Q_grav
    return TaskSpaceEom(M_t=0.5 * (M_t + M_t.T), C_t_times_Vt=CV, W_t_grav=W)
