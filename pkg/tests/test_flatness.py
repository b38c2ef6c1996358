import numpy as np
import pytest

from pkmdyn.flatness import actuated_rates, sea_feedforward
from pkmdyn.invdyn import second_order_invdyn
from pkmdyn.pkm_kinematics import home_configuration, solve_configuration
from pkmdyn.trajectory import p2p_trajectory

from conftest import random_state


def feedforward_at(model, theta, task, **kw):
    inv = second_order_invdyn(model, theta, *task)
    th = [actuated_rates(model, inv, k) for k in range(3)]
    return inv, th, sea_feedforward(model, *th, inv, **kw)


def test_defining_relations(any_model):
    rng = np.random.default_rng(0)
    theta, task, _, _ = random_state(any_model, rng)
    inv, th, ff = feedforward_at(any_model, theta, task)
    K, Mm = any_model.sea_stiffness, any_model.sea_motor_inertia
    assert np.max(np.abs(ff.tau - inv.u - Mm * ff.q_m_ddot)) <= 1e-12 * (1 + np.max(np.abs(ff.tau)))
    assert np.max(np.abs(K * (ff.q_m - th[0]) - inv.u)) <= 1e-12 * (1 + np.max(np.abs(inv.u)))
    assert np.max(np.abs(K * (ff.q_m_dot - th[1]) - inv.u_dot)) <= 1e-12 * (1 + np.max(np.abs(inv.u_dot)))


def test_actuated_rates_match_ik_jacobian(any_model):
    rng = np.random.default_rng(1)
    theta, task, _, _ = random_state(any_model, rng)
    inv = second_order_invdyn(any_model, theta, *task)
    assert np.max(np.abs(actuated_rates(any_model, inv, 1) - inv.kin.J_IK @ task[0])) <= 1e-13


def test_rigid_limit(gsp):
    rng = np.random.default_rng(2)
    theta, task, _, _ = random_state(gsp, rng)
    inv, th, ff = feedforward_at(gsp, theta, task, stiffness=np.full(6, 1e12))
    assert np.max(np.abs(ff.q_m - th[0])) <= 1e-9
    expected = inv.u + gsp.sea_motor_inertia * th[2]
    assert np.max(np.abs(ff.tau - expected)) <= 1e-8 * (1 + np.max(np.abs(expected)))


def test_statics(any_model):
    theta, _ = home_configuration(any_model)
    z = np.zeros((4, any_model.dof))
    inv, th, ff = feedforward_at(any_model, theta, z)
    assert np.array_equal(ff.tau, inv.u)
    assert np.allclose(ff.q_m, th[0] + inv.u / any_model.sea_stiffness, atol=0, rtol=0)


def test_nonpositive_stiffness_rejected(gsp):
    theta, _ = home_configuration(gsp)
    z = np.zeros((4, 6))
    with pytest.raises(ValueError):
        feedforward_at(gsp, theta, z, stiffness=np.zeros(6))


def test_planar_p2p_torque_continuous_and_round_trip(planar):
    seed, home = home_configuration(planar)
    traj = p2p_trajectory(home, planar.P_p, home.translation, home.translation + [0.04, 0.03, 0.0], 1.0)
    taus, steps = [], []
    for t in np.linspace(0.0, 1.0, 401):
        s = traj.sample(t)
        seed = solve_configuration(planar, s.pose, seed)
        inv, th, ff = feedforward_at(planar, seed, s.task)
        assert np.max(np.abs(planar.sea_stiffness * (ff.q_m - th[0]) - inv.u)) <= 1e-12 * (1 + np.max(np.abs(inv.u)))
        taus.append(ff.tau)
    taus = np.array(taus)
    jumps = np.max(np.abs(np.diff(taus, axis=0)), axis=1)
    # a continuous signal sampled finely has no isolated jumps
    assert jumps.max() <= 10 * np.median(jumps) + 1e-9
