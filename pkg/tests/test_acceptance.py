"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed again in the terminal
summary, and then asserts the criterion.
"""

import time

import numpy as np
import pytest

from pkmdyn.cli import TrajectorySpec, bench, run_trajectory, _column_names
from pkmdyn.invdyn import second_order_invdyn
from pkmdyn.model import load_model, model_to_dict
from pkmdyn.oracle import eom_residual, fd_derivative, verify_model
from pkmdyn.pkm_kinematics import fourth_order_kinematics, home_configuration, ik_residuals, solve_configuration
from pkmdyn.trajectory import random_trajectory, roll_trajectory

from conftest import random_state

N_STATES = 100


def modified(model, gravity=None, bodies=None):
    d = model_to_dict(model)
    if gravity is not None:
        d["gravity"] = list(gravity)
    if bodies is not None:
        for l, limb in enumerate(d["limbs"]):
            for b, body in enumerate(limb["bodies"]):
                if not bodies(l, b):
                    body["mass_matrix"] = np.zeros((6, 6)).tolist()
    return load_model(d)


def kin_along(model, traj, seed, **kw):
    def at(t):
        s = traj.sample(t)
        th = solve_configuration(model, s.pose, seed)
        return fourth_order_kinematics(model, th, *s.task, **kw)

    return at


def scaled_error(a, b):
    return float(np.max(np.abs(a - b))) / max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-9)


def test_criterion_1_jacobian_rates(gsp, acceptance):
    tol = {1: 1e-7, 2: 1e-6, 3: 1e-4}
    worst = {1: 0.0, 2: 0.0, 3: 0.0}
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(N_STATES):
        theta, _, traj, t = random_state(gsp, rng)
        at = kin_along(gsp, traj, theta)
        c = at(t)
        J = lambda s: np.stack([st.kin.jacobian for st in at(s).limbs])
        for k in (1, 2, 3):
            analytic = np.stack([st.kin.jacobian_rates[k - 1] for st in c.limbs])
            worst[k] = max(worst[k], scaled_error(analytic, fd_derivative(J, t, k)))
    elapsed = time.perf_counter() - start
    passed = all(worst[k] <= tol[k] for k in tol) and elapsed < 30.0
    detail = ", ".join(f"order {k} {worst[k]:.1e} <= {tol[k]:.0e}" for k in tol) + f", {elapsed:.1f} s < 30 s"
    assert acceptance(1, "J_p rates vs FD of J_p", passed, detail)


def test_criterion_2_ik_identity_and_c4(gsp, planar, acceptance):
    worst = 0.0
    for model in (gsp, planar):
        rng = np.random.default_rng(102)
        for _ in range(N_STATES):
            theta, task, _, _ = random_state(model, rng)
            c = fourth_order_kinematics(model, theta, *task)
            mag = 1.0 + max(float(np.max(np.abs(v))) for v in task)
            mag = max(mag, 1.0 + max(float(np.max(np.abs(r))) for st in c.limbs for r in st.rates))
            for res in ik_residuals(model, c):
                worst = max(worst, max(res) / mag)
    # coefficient pinning: order-4 joint rates against FD of the order-3 rates
    fd_err = {"binomial": 0.0, "printed": 0.0}
    rng = np.random.default_rng(103)
    for _ in range(10):
        theta, _, traj, t = random_state(gsp, rng)
        at = kin_along(gsp, traj, theta)
        fd = fd_derivative(lambda s: np.concatenate([st.rates[2] for st in at(s).limbs]), t, 1)
        s = traj.sample(t)
        for variant in fd_err:
            c = fourth_order_kinematics(gsp, theta, *s.task, c4_variant=variant)
            fd_err[variant] = max(fd_err[variant], scaled_error(np.concatenate([st.rates[3] for st in c.limbs]), fd))
    pinned = fd_err["binomial"] <= 1e-5 < fd_err["printed"]
    passed = worst <= 1e-11 and pinned
    detail = (
        f"identity residual {worst:.1e} <= 1e-11 (x(1+mag)); "
        f"order-4 FD binomial {fd_err['binomial']:.1e}, printed {fd_err['printed']:.1e}; binomial pinned"
    )
    assert acceptance(2, "fourth-order IK identity", passed, detail)


def test_criterion_3_second_derivative_invdyn(gsp, acceptance):
    _, home = home_configuration(gsp)
    traj = roll_trajectory(home, gsp.P_p, -0.5, 0.5, 1.0)
    report = verify_model(gsp, traj, n_samples=50)
    e1, e2 = report["u_d1"].max_rel_error, report["u_d2"].max_rel_error
    passed = len(report.times) == 50 and e1 <= 1e-7 and e2 <= 1e-5
    assert acceptance(3, "u', u'' along roll vs FD", passed, f"u' {e1:.1e} <= 1e-7, u'' {e2:.1e} <= 1e-5, 50 samples")


def test_criterion_4_closed_form_eom(gsp, planar, acceptance):
    worst = 0.0
    for model in (gsp, planar):
        rng = np.random.default_rng(104)
        for _ in range(N_STATES):
            theta, task, _, _ = random_state(model, rng)
            worst = max(worst, eom_residual(model, second_order_invdyn(model, theta, *task)))
    assert acceptance(4, "task-space EOM residual", worst <= 1e-10, f"{worst:.1e} <= 1e-10 on 2x{N_STATES} states")


def test_criterion_5_energy(gsp, planar, acceptance):
    worst = 0.0
    for base in (gsp, planar):
        model = modified(base, gravity=[0.0, 0.0, 0.0])
        rng = np.random.default_rng(105)
        theta0, home = home_configuration(model)
        for _ in range(5):
            traj = random_trajectory(home, model.P_p, rng)
            seed = solve_configuration(model, traj.sample(0.0).pose, theta0)

            def at(s, seed=seed, traj=traj):
                sample = traj.sample(s)
                th = solve_configuration(model, sample.pose, seed)
                return second_order_invdyn(model, th, *sample.task), sample

            def energy(s):
                r, _ = at(s)
                return sum(
                    0.5 * sum(V @ M @ V for V, M in zip(st.kin.twists[0][: limb.n_tree], limb.masses))
                    for limb, st in zip(model.limbs, r.kin.limbs)
                )

            err = scale = 0.0
            for t in np.linspace(0.05, 0.95, 5):
                r, sample = at(t)
                power = float(r.u @ (r.kin.J_IK @ sample.task[0]))
                rate = float(fd_derivative(energy, t, 1))
                err, scale = max(err, abs(power - rate)), max(scale, abs(power), abs(rate))
            worst = max(worst, err / scale)
    assert acceptance(5, "power u.J_IK V_t = dE/dt, gravity off", worst <= 1e-7, f"{worst:.1e} <= 1e-7")


def test_criterion_6_statics(gsp, acceptance):
    """With massless legs the vertical leg-force components carry the platform weight."""
    platform_limb = gsp.n_limbs - 1
    platform_body = gsp.limbs[-1].n_joints - 1
    model = modified(gsp, bodies=lambda l, b: (l, b) == (platform_limb, platform_body))
    weight = model.limbs[-1].masses[-1][5, 5] * -model.gravity[2]
    theta0, home = home_configuration(model)
    rng = np.random.default_rng(106)
    z = np.zeros(6)
    worst = 0.0
    poses = [home] + [random_trajectory(home, model.P_p, rng).sample(float(rng.uniform())).pose for _ in range(10)]
    for pose in poses:
        theta = solve_configuration(model, pose, theta0)
        r = second_order_invdyn(model, theta, z, z, z, z)
        vertical = 0.0
        for limb, st, u in zip(model.limbs, r.kin.limbs, r.u):
            j = limb.actuated_joint
            n = st.kin.poses[j][:3, :3] @ limb.screws[j][3:]
            vertical += u * n[2]
        worst = max(worst, abs(vertical - weight) / weight)
    assert acceptance(6, "massless-leg statics", worst <= 1e-9, f"vertical sum error {worst:.1e} <= 1e-9 of {weight:.2f} N")


def test_criterion_7_performance(gsp, acceptance):
    result = bench(gsp, TrajectorySpec(), 10000)
    mean = result["mean_us"]
    lu = result["task_jacobian_lu_per_call"]
    passed = mean <= 750.0 and lu == gsp.n_limbs
    stretch = "met" if mean <= 75.0 else "not met"
    detail = (
        f"mean {mean:.0f} us <= 750 us (median {result['median_us']:.0f}, p99 {result['p99_us']:.0f}), "
        f"LU/call {lu:g} = L; stretch 75 us {stretch}"
    )
    assert acceptance(7, "second_order_invdyn timing", passed, detail)


@pytest.mark.xfail(reason="stretch target; measured mean is 2.5-4x above 75 us on one CPU", strict=False)
def test_criterion_7_stretch_target(gsp, acceptance):
    mean = bench(gsp, TrajectorySpec(), 10000)["mean_us"]
    assert acceptance("7 (stretch)", "timing stretch target", mean <= 75.0, f"mean {mean:.0f} us vs 75 us")


def rows(model, spec, rate):
    length = spec.length
    n = int(round(length * rate))
    return np.array(list(run_trajectory(model, spec, np.linspace(0.0, length, n + 1))))


def max_step(tau):
    return float(np.max(np.abs(np.diff(tau, axis=0))))


def test_criterion_8_shape_checks(gsp, planar, acceptance):
    names = _column_names(gsp.n_actuators)
    roll = rows(gsp, TrajectorySpec(), 1000)
    u_cols = [i for i, h in enumerate(names) if h.startswith("u")]
    period_err = float(np.max(np.abs(roll[0, u_cols] - roll[-1, u_cols])))
    # continuity of tau: halving the sample interval halves the largest step
    ratios = []
    for model, spec in ((gsp, TrajectorySpec()), (planar, TrajectorySpec(kind="p2p", delta=(0.04, 0.03, 0.0)))):
        cols = [i for i, h in enumerate(_column_names(model.n_actuators)) if h.startswith("tau")]
        coarse, fine = rows(model, spec, 500)[:, cols], rows(model, spec, 1000)[:, cols]
        ratios.append(max_step(coarse) / max_step(fine))
    passed = roll.shape[0] == 1001 and period_err <= 1e-9 and all(1.8 <= q <= 2.2 for q in ratios)
    detail = f"u(0) - u(T) {period_err:.1e} <= 1e-9; tau step ratio at 2x rate " + ", ".join(f"{q:.3f}" for q in ratios)
    assert acceptance(8, "periodicity of u, continuity of tau", passed, detail)
