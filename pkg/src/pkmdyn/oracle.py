"""Finite-difference verification of every analytic time derivative.

Derivatives are estimated by central differences refined with Richardson
extrapolation. Along a trajectory the joint coordinates at each perturbed
time are regenerated by Newton-Raphson from the unperturbed solution, so
every evaluation is an exactly closed configuration.

Errors are relative: ``max|a - b| / max(max|a|, max|b|, floor)``. In a
whole-trajectory check the maxima run over all sample times, so a quantity
that passes through zero at one sample is judged against its own scale.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .invdyn import InvDynResult, second_order_invdyn
from .model import PkmModel
from .pkm_kinematics import solve_configuration
from .taskspace import task_eom
from .trajectory import ChainTrajectory

DEFAULT_TOLERANCES = {0: 1e-10, 1: 1e-7, 2: 1e-5, 3: 1e-5, 4: 1e-5}

# central-difference stencils: (offsets in units of h, weights, power of h)
_STENCILS = {
    1: ((-1.0, 1.0), (-0.5, 0.5), 1),
    2: ((-1.0, 0.0, 1.0), (1.0, -2.0, 1.0), 2),
    3: ((-2.0, -1.0, 1.0, 2.0), (-0.5, 1.0, -1.0, 0.5), 3),
}


@dataclass(frozen=True)
class FdConfig:
    base_step: float = 1e-4
    richardson_levels: int = 3
    tolerance_per_order: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    floor: float = 1e-9

    def __post_init__(self):
        if not 1e-8 <= self.base_step <= 1e-2:
            raise ValueError("base_step must lie in [1e-8, 1e-2]")
        if not 1 <= self.richardson_levels <= 4:
            raise ValueError("richardson_levels must be between 1 and 4")

    def step(self, order: int) -> float:
        """Higher derivative orders use a larger step to keep round-off small."""
        return self.base_step * 10.0 ** (order - 1)

    def tolerance(self, order: int) -> float:
        return self.tolerance_per_order[order]

    def scaled(self, factor: float) -> FdConfig:
        tol = {k: v * factor for k, v in self.tolerance_per_order.items()}
        return FdConfig(self.base_step, self.richardson_levels, tol, self.floor)


def richardson(estimates: list) -> np.ndarray:
    """Extrapolate estimates made with steps h, h/2, h/4, ... (error in even powers)."""
    row = [np.asarray(e, dtype=float) for e in estimates]
    for j in range(1, len(row)):
        f = 4.0**j
        row = [row[i] + (row[i] - row[i - 1]) / (f - 1.0) for i in range(1, len(row))]
    return row[0]


def fd_derivative(f: Callable[[float], np.ndarray], t: float, order: int = 1, cfg: FdConfig | None = None) -> np.ndarray:
    """Central difference of ``order`` 1, 2 or 3 with Richardson refinement."""
    cfg = cfg or FdConfig()
    if order not in _STENCILS:
        raise ValueError("order must be 1, 2 or 3")
    offsets, weights, power = _STENCILS[order]
    h0 = cfg.step(order)
    estimates = []
    for level in range(cfg.richardson_levels):
        h = h0 / 2.0**level
        acc = sum(w * np.asarray(f(t + o * h), dtype=float) for o, w in zip(offsets, weights) if w != 0.0)
        estimates.append(acc / h**power)
    return richardson(estimates)


def clear_of_breakpoints(times, breakpoints, margin: float, duration: float) -> list[float]:
    """Move sample times off non-smooth points so no FD stencil straddles one."""
    out = []
    for t in times:
        for b in breakpoints:
            if abs(t - b) < margin:
                t = b + margin if b + margin <= duration - margin else b - margin
        out.append(float(t))
    return out


def rel_error(a, b, floor: float = 1e-9) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)), floor)
    return float(np.max(np.abs(a - b), initial=0.0)) / scale


# ---------------------------------------------------------------------------
# whole-model verification
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    order: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


@dataclass
class VerificationReport:
    entries: list[CheckResult]
    times: list[float]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[str]:
        return [e.name for e in self.entries if not e.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "order", "max_rel_error", "tolerance", "pass"])
        for e in self.entries:
            w.writerow([e.name, e.order, format(e.max_rel_error, ".17g"), format(e.tolerance, ".17g"), int(e.passed)])
        return buf.getvalue()


# analytic quantity, quantity it is the time derivative of, derivative order
CHECKS = (
    ("theta_d2", "theta_d1", 2),
    ("theta_d3", "theta_d2", 3),
    ("theta_d4", "theta_d3", 4),
    ("J_p_d1", "J_p", 1),
    ("J_p_d2", "J_p_d1", 2),
    ("J_p_d3", "J_p_d2", 3),
    ("F_d1", "F", 1),
    ("F_d2", "F_d1", 2),
    ("J_IK_d1", "J_IK", 1),
    ("J_IK_d2", "J_IK_d1", 2),
    ("Q_d1", "Q", 1),
    ("Q_d2", "Q_d1", 2),
    ("u_d1", "u", 1),
    ("u_d2", "u_d1", 2),
)


def snapshot(result: InvDynResult) -> dict[str, np.ndarray]:
    """Flatten every quantity the checks compare into named arrays."""
    kin = result.kin
    limbs = kin.limbs
    out = {}
    for k in range(4):
        out[f"theta_d{k + 1}"] = np.concatenate([s.rates[k] for s in limbs])
    out["J_p"] = np.concatenate([s.kin.jacobian for s in limbs], axis=1)
    for k in range(3):
        out[f"J_p_d{k + 1}"] = np.concatenate([s.kin.jacobian_rates[k] for s in limbs], axis=1)
    out["F"] = np.concatenate([s.F for s in limbs])
    out["F_d1"] = np.concatenate([s.F_rates[0] for s in limbs])
    out["F_d2"] = np.concatenate([s.F_rates[1] for s in limbs])
    out["J_IK"] = kin.J_IK
    out["J_IK_d1"] = kin.J_IK_rates[0]
    out["J_IK_d2"] = kin.J_IK_rates[1]
    out["Q"] = np.concatenate([f.Q for f in result.forces])
    out["Q_d1"] = np.concatenate([f.Q_dot for f in result.forces])
    out["Q_d2"] = np.concatenate([f.Q_ddot for f in result.forces])
    out["u"] = result.u
    out["u_d1"] = result.u_dot
    out["u_d2"] = result.u_ddot
    return out


class TrajectoryEvaluator:
    """Inverse dynamics along a trajectory, with IK seeded from a nearby solution."""

    def __init__(self, model: PkmModel, trajectory: ChainTrajectory, seed=None, **options):
        self.model = model
        self.trajectory = trajectory
        self.options = options
        self.seed = seed

    def solve(self, t: float, seed=None):
        s = self.trajectory.sample(t)
        theta = solve_configuration(self.model, s.pose, seed if seed is not None else self.seed)
        return theta, s

    def __call__(self, t: float, seed=None) -> InvDynResult:
        theta, s = self.solve(t, seed)
        return second_order_invdyn(self.model, theta, *s.task, **self.options)


def eom_residual(model: PkmModel, result: InvDynResult) -> float:
    """Relative residual of M_t dV_t + C_t V_t + W_t - J_IK^T u."""
    kin = result.kin
    eom = task_eom(model, kin)
    lhs = kin.J_IK.T @ result.u
    r = eom.residual(kin.task[1], kin.J_IK, result.u)
    return float(np.max(np.abs(r))) / (1.0 + float(np.max(np.abs(lhs))))


def verify_model(
    model: PkmModel,
    trajectory: ChainTrajectory,
    cfg: FdConfig | None = None,
    times: Iterable[float] | None = None,
    n_samples: int = 10,
    tamper: Callable[[str, float, np.ndarray], np.ndarray] | None = None,
    seed=None,
    **options,
) -> VerificationReport:
    """Compare every analytic derivative with finite differences along ``trajectory``.

    ``tamper(name, t, value)`` may alter analytic values before comparison
    (fault injection for testing the verifier itself). Extra keyword
    options are passed to the inverse dynamics.
    """
    cfg = cfg or FdConfig()
    if times is None:
        T = trajectory.duration
        times = [T * (i + 0.5) / n_samples for i in range(n_samples)]
        margin = 4.0 * cfg.step(1)
        times = clear_of_breakpoints(times, getattr(trajectory, "breakpoints", ()), margin, T)
    times = [float(t) for t in times]
    ev = TrajectoryEvaluator(model, trajectory, seed=seed, **options)
    err = {name: 0.0 for name, _, _ in CHECKS}
    scale = {name: 0.0 for name, _, _ in CHECKS}
    worst_eom = 0.0
    for t in times:
        theta0, _ = ev.solve(t)
        result = ev(t, theta0)
        analytic = snapshot(result)
        if tamper is not None:
            analytic = {k: tamper(k, t, v) for k, v in analytic.items()}
        memo: dict[float, dict[str, np.ndarray]] = {}

        def at(tt, name, theta0=theta0, memo=memo):
            if tt not in memo:
                memo[tt] = snapshot(ev(tt, theta0))
            return memo[tt][name]

        for name, base, order in CHECKS:
            num = fd_derivative(lambda tt: at(tt, base), t, 1, cfg)
            a = analytic[name]
            err[name] = max(err[name], float(np.max(np.abs(a - num), initial=0.0)))
            scale[name] = max(scale[name], float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(num), initial=0.0)))
        worst_eom = max(worst_eom, eom_residual(model, result))
    entries = [
        CheckResult(name, order, err[name] / max(scale[name], cfg.floor), cfg.tolerance(order)) for name, _, order in CHECKS
    ]
    entries.append(CheckResult("eom_residual", 0, worst_eom, cfg.tolerance(0)))
    return VerificationReport(entries=entries, times=times)
