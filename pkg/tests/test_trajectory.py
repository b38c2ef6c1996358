import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pkmdyn.liegroup import Pose, exp_screw
from pkmdyn.oracle import fd_derivative
from pkmdyn.pkm_kinematics import home_configuration
from pkmdyn.trajectory import (
    ChainTrajectory,
    p2p_trajectory,
    random_trajectory,
    roll_profile,
    roll_trajectory,
    sin2_jerk_profile,
    sinusoid_profile,
)

from conftest import rel


def test_roll_profile_bounds():
    prof = roll_profile(-0.5, 0.5, 1.0)
    q0, qh = prof(0.0)[:, 0], prof(0.5)[:, 0]
    assert q0[0] == pytest.approx(-0.5, abs=1e-15) and q0[1] == pytest.approx(0.0, abs=1e-15)
    assert qh[0] == pytest.approx(0.5, abs=1e-15)
    ts = np.linspace(0, 1, 101)
    vals = np.array([prof(t)[0, 0] for t in ts])
    assert vals.min() >= -0.5 - 1e-15 and vals.max() <= 0.5 + 1e-15
    with pytest.raises(ValueError):
        roll_profile(0.5, -0.5, 1.0)
    with pytest.raises(ValueError):
        roll_profile(-0.5, 0.5, 0.0)


def test_roll_third_derivative():
    A, w = 0.5, 2 * math.pi
    prof = roll_profile(-0.5, 0.5, 1.0)
    for t in (0.1, 0.37, 0.8):
        assert prof(t)[3, 0] == pytest.approx(-A * w**3 * math.sin(w * t), rel=1e-14)
        assert abs(prof(t)[3, 0] - fd_derivative(lambda s: prof(s)[2, 0], t, 1)) <= 1e-9 * A * w**3


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_profile_derivatives_consistent(k):
    for prof in (roll_profile(-0.3, 0.6, 0.8), sin2_jerk_profile(1.3), sinusoid_profile([0.2, 0.1], [2.0, 5.0], [0.1, 0.4])):
        for t in (0.11, 0.5, 0.93):
            a = prof(t)[k]
            fd = fd_derivative(lambda s: prof(s)[k - 1], t, 1)
            assert np.max(np.abs(a - fd)) <= 1e-8 * (1 + np.max(np.abs(a)))


def test_sin2_jerk_rest_to_rest():
    T = 2.0
    prof = sin2_jerk_profile(T)
    for t in (0.0, T):
        s, v, a, j, _ = prof(t)[:, 0]
        assert v == 0.0 and a == 0.0 and j == 0.0
    end = prof(T * (1 - 1e-12))[:, 0]
    assert end[0] == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(end[1:4])) <= 1e-9
    h = T / 4
    for i in range(5):
        assert abs(prof(i * h)[3, 0]) <= 1e-12  # jerk vanishes at segment boundaries
    # the jerk integrates to zero over the accelerating half
    assert abs(prof(T / 2)[2, 0]) <= 1e-12
    assert prof(T / 2)[1, 0] == pytest.approx(2.0 / T, rel=1e-13)
    assert prof(T / 2)[0, 0] == pytest.approx(0.5, rel=1e-13)


def test_sin2_jerk_is_continuous():
    prof = sin2_jerk_profile(1.0)
    for b in (0.25, 0.5, 0.75):
        lo, hi = prof(b - 1e-12)[:, 0], prof(b + 1e-12)[:, 0]
        assert np.max(np.abs(lo[:4] - hi[:4])) <= 1e-8


def test_chain_trajectory_pose_and_twists(gsp):
    _, home = home_configuration(gsp)
    rng = np.random.default_rng(0)
    traj = random_trajectory(home, gsp.P_p, rng)
    t = 0.4
    s = traj.sample(t)
    # pose is the explicit product of exponentials
    q = traj.profile(t)[0]
    P = home.matrix
    for X, qi in zip(traj.screws, q):
        P = P @ exp_screw(X, qi).matrix
    assert np.max(np.abs(s.pose.matrix - P)) <= 1e-14
    # body twist from the pose difference
    h = 1e-6
    D = np.linalg.inv(P) @ (traj.pose(t + h).matrix - traj.pose(t - h).matrix) / (2 * h)
    fd = np.array([D[2, 1], D[0, 2], D[1, 0], D[0, 3], D[1, 3], D[2, 3]])
    assert np.max(np.abs(s.platform[0] - fd)) <= 1e-8
    for k in range(1, 4):
        assert rel(s.platform[k], fd_derivative(lambda u: traj.sample(u).platform[k - 1], t, 1), 1e-9) <= 1e-8
    assert np.array_equal(s.task, s.platform @ gsp.P_p)


def test_random_trajectory_stays_in_task_span(planar):
    _, home = home_configuration(planar)
    traj = random_trajectory(home, planar.P_p, np.random.default_rng(1))
    s = traj.sample(0.3)
    assert np.max(np.abs(s.platform[0] - planar.P_p @ s.task[0])) <= 1e-15


def test_roll_and_p2p_builders(gsp):
    _, home = home_configuration(gsp)
    roll = roll_trajectory(home, gsp.P_p)
    assert roll.sample(0.0).task[0] == pytest.approx(np.zeros(6), abs=1e-15)
    w = roll.sample(0.25).task[0]
    assert w[0] > 0 and np.max(np.abs(w[1:])) <= 1e-15
    with pytest.raises(ValueError):
        roll_trajectory(home, gsp.P_p, axis="q")
    end = home.translation + np.array([0.02, 0.0, 0.01])
    p2p = p2p_trajectory(home, gsp.P_p, home.translation, end, 1.0)
    assert np.max(np.abs(p2p.pose(1.0).translation - end)) <= 1e-15
    assert np.max(np.abs(p2p.pose(1.0).rotation - home.rotation)) <= 1e-15


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(0, 1000))
def test_task_motion_linear_in_jerk_input(t, seed):
    """Snapping a single screw: dddV is affine in the fourth coordinate rate."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2, 6))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    base = sinusoid_profile([0.1, 0.2], [1.0, 2.0], [0.0, 0.5])

    def prof(scale):
        return lambda s: base(s) * np.array([1, 1, 1, 1, scale])[:, None]

    tr = [ChainTrajectory(Pose.identity(), X, prof(c), np.eye(6)).sample(t).platform[3] for c in (0.0, 1.0, 2.0)]
    assert np.max(np.abs((tr[2] - tr[0]) - 2 * (tr[1] - tr[0]))) <= 1e-12
