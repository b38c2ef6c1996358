"""Feedforward for series elastic actuators.

Each actuated joint is driven through a spring, u = K (q_m - theta_a), by a
motor with reflected inertia M_m obeying M_m q_m'' = tau - u. With u and u''
from the second-order inverse dynamics the motor trajectory and the motor
torque follow algebraically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .invdyn import InvDynResult
from .model import PkmModel


@dataclass
class FeedforwardResult:
    q_m: np.ndarray
    q_m_dot: np.ndarray
    q_m_ddot: np.ndarray
    tau: np.ndarray


def actuated_rates(model: PkmModel, inv: InvDynResult, order: int) -> np.ndarray:
    """theta_a (order 0) or its ``order``-th derivative, one entry per actuator."""
    out = []
    for k in model.actuated_limbs:
        st = inv.kin.limbs[k]
        v = st.theta if order == 0 else st.rates[order - 1]
        out.append(v[model.limbs[k].actuated_joint])
    return np.array(out)


def sea_feedforward(model: PkmModel, theta_a, theta_a_dot, theta_a_ddot, inv: InvDynResult, stiffness=None, motor_inertia=None) -> FeedforwardResult:
    """q_m = theta_a + u/K (with two rates) and tau = M_m q_m'' + u.

    ``stiffness`` and ``motor_inertia`` default to the model's SEA data.
    """
    K = np.asarray(model.sea_stiffness if stiffness is None else stiffness, dtype=float)
    Mm = np.asarray(model.sea_motor_inertia if motor_inertia is None else motor_inertia, dtype=float)
    if np.any(K <= 0.0):
        raise ValueError("spring stiffness must be strictly positive")
    q = np.asarray(theta_a, dtype=float) + inv.u / K
    qd = np.asarray(theta_a_dot, dtype=float) + inv.u_dot / K
    qdd = np.asarray(theta_a_ddot, dtype=float) + inv.u_ddot / K
    return FeedforwardResult(q_m=q, q_m_dot=qd, q_m_ddot=qdd, tau=Mm * qdd + inv.u)
