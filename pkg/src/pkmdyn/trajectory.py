"""Analytic platform trajectories with exact derivatives up to the snap.

A trajectory is a chain of screw motions applied to a base pose,

    C_p(t) = C_base exp(S_1 phi_1(t)) ... exp(S_m phi_m(t)),

where each coordinate ``phi_k`` comes with four analytic derivatives. The
platform body twist and its derivatives then follow from the same serial
twist recursion used for the limbs (a "virtual chain" with identity
reference poses), and the task motion is ``V_t = P_p^T V_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .limb_kinematics import _fk, _twist_1, _twist_2, _twist_3, _twist_4
from .liegroup import Pose

# profile(t) -> array (5, m): phi and four derivatives for each coordinate
Profile = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class TaskSample:
    t: float
    pose: Pose
    platform: np.ndarray  # (4, 6): V_p, dV_p, ddV_p, dddV_p
    task: np.ndarray  # (4, dof): V_t and three derivatives


class ChainTrajectory:
    """Platform motion generated by a product of screw motions."""

    def __init__(self, base: Pose, screws, profile: Profile, P_p, duration: float = 1.0, breakpoints=()):
        self.base = base
        self.screws = np.ascontiguousarray(np.atleast_2d(screws), dtype=float)
        self.profile = profile
        self.P_p = np.asarray(P_p, dtype=float)
        self.duration = float(duration)
        # times where the profile is only finitely differentiable
        self.breakpoints = tuple(float(b) for b in breakpoints)
        m = self.screws.shape[0]
        refs = np.repeat(np.eye(4)[None], m, axis=0)
        refs[0] = base.matrix
        self._refs = refs

    def sample(self, t: float) -> TaskSample:
        q = np.asarray(self.profile(t), dtype=float)
        X, refs = self.screws, self._refs
        C, Crel = _fk(X, refs, np.ascontiguousarray(q[0]))
        d = [np.ascontiguousarray(q[k]) for k in range(1, 5)]
        V = _twist_1(Crel, X, d[0])
        Vd = _twist_2(Crel, X, d[0], d[1], V, np.zeros(6))
        Vdd = _twist_3(Crel, X, d[0], d[1], d[2], V, Vd)
        Vddd = _twist_4(Crel, X, d[0], d[1], d[2], d[3], V, Vd, Vdd)
        platform = np.array([V[-1], Vd[-1], Vdd[-1], Vddd[-1]])
        return TaskSample(
            t=float(t),
            pose=Pose.from_matrix(C[-1]),
            platform=platform,
            task=platform @ self.P_p,
        )

    def pose(self, t: float) -> Pose:
        return self.sample(t).pose

    def task(self, t: float) -> np.ndarray:
        return self.sample(t).task


# ---------------------------------------------------------------------------
# scalar profiles
# ---------------------------------------------------------------------------


def roll_profile(theta_min: float, theta_max: float, period: float) -> Profile:
    """theta(t) = -A cos(w t) + A + theta_min with A = (theta_max - theta_min)/2."""
    if not theta_min < theta_max:
        raise ValueError("theta_min must be below theta_max")
    if not period > 0:
        raise ValueError("period must be positive")
    A = 0.5 * (theta_max - theta_min)
    w = 2.0 * math.pi / period

    def profile(t):
        c, s = math.cos(w * t), math.sin(w * t)
        return np.array(
            [[-A * c + A + theta_min], [A * w * s], [A * w**2 * c], [-A * w**3 * s], [-A * w**4 * c]]
        )

    return profile


_P2P_SIGNS = (1.0, -1.0, -1.0, 1.0)


def sin2_jerk_profile(duration: float) -> Profile:
    """Rest-to-rest s: 0 -> 1 over ``duration`` with sin^2-shaped jerk.

    Four segments of length h = T/4 carry jerk +J, -J, -J, +J times
    sin^2(pi tau / h); J = 1/h^3 makes the travel exactly one and the peak
    velocity 2/T.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    T = float(duration)
    h = T / 4.0
    J = 1.0 / h**3
    k = h / (2.0 * math.pi)

    def segment(tau, sigma, s0, v0, a0):
        sn = math.sin(tau / k)
        cs = math.cos(tau / k)
        gain = 0.5 * sigma * J
        a = a0 + gain * (tau - k * sn)
        v = v0 + a0 * tau + gain * (0.5 * tau**2 + k**2 * (cs - 1.0))
        s = s0 + v0 * tau + 0.5 * a0 * tau**2 + gain * (tau**3 / 6.0 + k**2 * (k * sn - tau))
        jerk = sigma * J * math.sin(math.pi * tau / h) ** 2
        snap = sigma * J * (math.pi / h) * math.sin(2.0 * math.pi * tau / h)
        return s, v, a, jerk, snap

    # segment start states, integrated once
    starts = []
    s0 = v0 = a0 = 0.0
    for sigma in _P2P_SIGNS:
        starts.append((s0, v0, a0))
        s0, v0, a0, _, _ = segment(h, sigma, s0, v0, a0)

    def profile(t):
        if t <= 0.0:
            out = (0.0, 0.0, 0.0, 0.0, 0.0)
        elif t >= T:
            out = (1.0, 0.0, 0.0, 0.0, 0.0)
        else:
            i = min(int(t // h), 3)
            out = segment(t - i * h, _P2P_SIGNS[i], *starts[i])
        return np.array(out).reshape(5, 1)

    return profile


def sinusoid_profile(amplitude, frequency, phase, offset=None) -> Profile:
    """phi_k(t) = offset_k + a_k sin(w_k t + p_k), componentwise."""
    a = np.asarray(amplitude, dtype=float)
    w = np.asarray(frequency, dtype=float)
    p = np.asarray(phase, dtype=float)
    o = np.zeros_like(a) if offset is None else np.asarray(offset, dtype=float)

    def profile(t):
        x = w * t + p
        s, c = np.sin(x), np.cos(x)
        return np.array([o + a * s, a * w * c, -a * w**2 * s, -a * w**3 * c, a * w**4 * s])

    return profile


# ---------------------------------------------------------------------------
# ready-made trajectories
# ---------------------------------------------------------------------------

AXES = {"rx": 0, "ry": 1, "rz": 2, "x": 3, "y": 4, "z": 5}


def roll_trajectory(
    home: Pose,
    P_p,
    theta_min: float = -0.5,
    theta_max: float = 0.5,
    period: float = 1.0,
    axis: str | Sequence[float] = "rx",
) -> ChainTrajectory:
    """Periodic rotation (or translation) of the platform about a body axis."""
    if isinstance(axis, str):
        if axis not in AXES:
            raise ValueError(f"unknown axis {axis!r}; choose from {sorted(AXES)}")
        S = np.zeros(6)
        S[AXES[axis]] = 1.0
    else:
        S = np.asarray(axis, dtype=float)
    return ChainTrajectory(home, S, roll_profile(theta_min, theta_max, period), P_p, period)


def p2p_trajectory(home: Pose, P_p, start, end, duration: float = 1.0) -> ChainTrajectory:
    """Straight rest-to-rest translation from ``start`` to ``end`` (base frame)."""
    start = np.asarray(start, dtype=float)
    delta = np.asarray(end, dtype=float) - start
    base = Pose(home.rotation, start)
    S = np.concatenate([np.zeros(3), home.rotation.T @ delta])
    knots = [duration * i / 4.0 for i in range(5)]
    return ChainTrajectory(base, S, sin2_jerk_profile(duration), P_p, duration, knots)


def random_trajectory(home: Pose, P_p, rng: np.random.Generator, amplitude: float = 0.05) -> ChainTrajectory:
    """Smooth small excursion about ``home`` along random screws.

    The screws are drawn in the span of ``P_p`` so the motion is feasible
    for reduced-mobility platforms as well.
    """
    P_p = np.asarray(P_p, dtype=float)
    dof = P_p.shape[1]
    m = max(dof, 2)
    coeff = rng.normal(size=(m, dof))
    screws = coeff @ P_p.T
    screws /= np.linalg.norm(screws, axis=1, keepdims=True)
    prof = sinusoid_profile(
        amplitude * rng.uniform(0.3, 1.0, m),
        rng.uniform(1.0, 6.0, m),
        rng.uniform(0.0, 2 * math.pi, m),
    )
    return ChainTrajectory(home, screws, prof, P_p)
