"""Command-line front end.

    pkmdyn run    --model M --traj roll --rate 1000 --out traj.csv
    pkmdyn bench  --model M --calls 10000
    pkmdyn verify --model M --traj p2p --tolerance-scale 1

``--model`` takes a JSON model file or the name of a bundled model
(gsp, gsp_flat, planar_3rrr). Trajectory parameters can also come from a
JSON file given with ``--spec``; explicit flags override it.

Exit codes: 0 success, 1 verification failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PkmError
from .flatness import actuated_rates, sea_feedforward
from .invdyn import second_order_invdyn
from .limb_kinematics import LEMMA_VARIANTS
from .linalg import factorizations
from .model import PkmModel, bundled_model_path, load_model_file
from .oracle import FdConfig, verify_model
from .pkm_kinematics import C4_VARIANTS, home_configuration, solve_configuration
from .trajectory import AXES, ChainTrajectory, p2p_trajectory, roll_trajectory

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
FLOAT_FORMAT = ".17g"
SPAN_TOL = 1e-12


class InputError(Exception):
    pass


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "roll"
    theta_min: float = -0.5
    theta_max: float = 0.5
    period: float = 1.0
    axis: str = "rx"
    delta: tuple[float, ...] = (0.05, 0.05, 0.0)  # p2p displacement from home
    start: tuple[float, ...] | None = None  # p2p absolute start (defaults to home)
    end: tuple[float, ...] | None = None
    duration: float = 1.0

    def __post_init__(self):
        if self.kind not in ("roll", "p2p"):
            raise InputError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "roll":
            if not self.theta_min < self.theta_max:
                raise InputError("theta_min must be smaller than theta_max")
            if not self.period > 0.0:
                raise InputError("period must be positive")
            if self.axis not in AXES:
                raise InputError(f"unknown axis {self.axis!r}; choose from {sorted(AXES)}")
        elif not self.duration > 0.0:
            raise InputError("duration must be positive")

    @property
    def length(self) -> float:
        return self.period if self.kind == "roll" else self.duration


_SPEC_KEYS = {"kind", "theta_min", "theta_max", "period", "axis", "delta", "start", "end", "duration"}


def load_spec(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read trajectory spec {path}: {exc}") from None
    if not isinstance(doc, dict) or not set(doc) <= _SPEC_KEYS:
        raise InputError(f"trajectory spec keys must be among {sorted(_SPEC_KEYS)}")
    return doc


def build_spec(args) -> TrajectorySpec:
    doc = load_spec(args.spec)
    overrides = {
        "kind": args.traj,
        "theta_min": args.theta_min,
        "theta_max": args.theta_max,
        "period": args.period,
        "axis": args.axis,
        "duration": args.duration,
        "delta": tuple(args.delta) if args.delta else None,
        "start": tuple(args.start) if args.start else None,
        "end": tuple(args.end) if args.end else None,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("delta", "start", "end"):
        if doc.get(key) is not None:
            doc[key] = tuple(float(x) for x in doc[key])
            if len(doc[key]) != 3:
                raise InputError(f"{key} needs three components")
    return TrajectorySpec(**doc)


def load_any_model(name: str) -> PkmModel:
    path = Path(name)
    if not path.exists():
        path = bundled_model_path(name)
        if not path.exists():
            raise InputError(f"no model file or bundled model named {name!r}")
    return load_model_file(path)


def make_trajectory(model: PkmModel, spec: TrajectorySpec) -> tuple[ChainTrajectory, list[np.ndarray]]:
    """The trajectory and the joint coordinates of the home configuration."""
    theta0, home = home_configuration(model)
    P_p = model.P_p
    if spec.kind == "roll":
        traj = roll_trajectory(home, P_p, spec.theta_min, spec.theta_max, spec.period, spec.axis)
    else:
        start = np.array(spec.start) if spec.start is not None else home.translation
        end = np.array(spec.end) if spec.end is not None else start + np.array(spec.delta)
        traj = p2p_trajectory(home, P_p, start, end, spec.duration)
    # the motion must lie in the span of P_p, otherwise V_t misses part of it
    S = traj.screws
    resid = S - (S @ P_p) @ P_p.T
    if float(np.max(np.abs(resid))) > SPAN_TOL:
        raise InputError("trajectory moves the platform along a direction it cannot move")
    return traj, theta0


def sample_times(tmin: float, tmax: float, rate: float) -> np.ndarray:
    if not rate > 0.0:
        raise InputError("rate must be positive")
    if not tmax >= tmin:
        raise InputError("tmax must not be smaller than tmin")
    n = int(round((tmax - tmin) * rate))
    return tmin + np.arange(n + 1) / rate


def _column_names(n_a: int) -> list[str]:
    cols = ["t"]
    cols += [f"theta_a{i}" for i in range(n_a)]
    for k in range(1, 5):
        cols += [f"theta_a{i}_d{k}" for i in range(n_a)]
    cols += [f"u{i}" for i in range(n_a)]
    cols += [f"u{i}_d1" for i in range(n_a)]
    cols += [f"u{i}_d2" for i in range(n_a)]
    cols += [f"tau{i}" for i in range(n_a)]
    return cols


def run_trajectory(model: PkmModel, spec: TrajectorySpec, times, lemma="corrected", c4_variant="binomial"):
    """Yield one output row per sample; IK is seeded with the previous sample."""
    traj, seed = make_trajectory(model, spec)
    for t in times:
        s = traj.sample(float(t))
        try:
            theta = solve_configuration(model, s.pose, seed)
        except PkmError as exc:
            raise PkmError(f"t={t:.17g}: {exc}") from None
        seed = theta
        inv = second_order_invdyn(model, theta, *s.task, lemma=lemma, c4_variant=c4_variant)
        th = [actuated_rates(model, inv, k) for k in range(5)]
        ff = sea_feedforward(model, th[0], th[1], th[2], inv)
        yield np.concatenate([[t], *th, inv.u, inv.u_dot, inv.u_ddot, ff.tau])


def _fmt(x: float) -> str:
    return format(float(x), FLOAT_FORMAT)


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_run(args) -> int:
    model = load_any_model(args.model)
    spec = build_spec(args)
    tmin = 0.0 if args.tmin is None else args.tmin
    tmax = spec.length if args.tmax is None else args.tmax
    times = sample_times(tmin, tmax, args.rate)
    out, close = _open_out(args.out)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(_column_names(model.n_actuators))
        for row in run_trajectory(model, spec, times, args.lemma, args.c4):
            if not np.all(np.isfinite(row)):
                raise PkmError(f"non-finite output at t={row[0]:.17g}")
            w.writerow([_fmt(x) for x in row])
    finally:
        if close:
            out.close()
    return EXIT_OK


def bench(model: PkmModel, spec: TrajectorySpec, calls: int, t: float | None = None, **options) -> dict:
    """Time second_order_invdyn on one fixed state; microseconds per call."""
    if calls < 1:
        raise InputError("calls must be at least 1")
    traj, seed = make_trajectory(model, spec)
    s = traj.sample(spec.length / 3.0 if t is None else t)
    theta = solve_configuration(model, s.pose, seed)
    task = s.task
    second_order_invdyn(model, theta, *task, **options)  # compile and warm up
    factorizations.reset()
    samples = np.empty(calls)
    clock = time.perf_counter
    for i in range(calls):
        t0 = clock()
        second_order_invdyn(model, theta, *task, **options)
        samples[i] = clock() - t0
    samples *= 1e6
    counts = factorizations.snapshot()
    return {
        "calls": calls,
        "mean_us": float(samples.mean()),
        "median_us": float(np.median(samples)),
        "p99_us": float(np.percentile(samples, 99)),
        "min_us": float(samples.min()),
        "task_jacobian_lu_per_call": counts.get("task_jacobian", 0) / calls,
        "ik_jacobian_lu_per_call": counts.get("ik_jacobian", 0) / calls,
    }


def cmd_bench(args) -> int:
    model = load_any_model(args.model)
    spec = build_spec(args)
    result = bench(model, spec, args.calls, lemma=args.lemma, c4_variant=args.c4)
    out, close = _open_out(args.out)
    try:
        for k, v in result.items():
            out.write(f"{k},{v if isinstance(v, int) else _fmt(v)}\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_verify(args) -> int:
    model = load_any_model(args.model)
    spec = build_spec(args)
    if not args.tolerance_scale > 0.0:
        raise InputError("tolerance scale must be positive")
    if args.samples < 1:
        raise InputError("samples must be at least 1")
    traj, seed = make_trajectory(model, spec)
    cfg = FdConfig().scaled(args.tolerance_scale)
    report = verify_model(model, traj, cfg, n_samples=args.samples, seed=seed, lemma=args.lemma, c4_variant=args.c4)
    out, close = _open_out(args.out)
    try:
        out.write(report.to_csv())
    finally:
        if close:
            out.close()
    if not report.passed:
        print("verification failed: " + ", ".join(report.failures()), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model JSON file or bundled model name")
    p.add_argument("--spec", help="trajectory spec JSON file")
    p.add_argument("--traj", choices=("roll", "p2p"), help="trajectory kind (default roll)")
    p.add_argument("--theta-min", type=float, help="roll: lower angle in rad (default -0.5)")
    p.add_argument("--theta-max", type=float, help="roll: upper angle in rad (default 0.5)")
    p.add_argument("--period", type=float, help="roll: period in s (default 1)")
    p.add_argument("--axis", help="roll: platform body axis rx|ry|rz|x|y|z (default rx)")
    p.add_argument("--duration", type=float, help="p2p: duration in s (default 1)")
    p.add_argument("--delta", type=float, nargs=3, help="p2p: displacement from the start")
    p.add_argument("--start", type=float, nargs=3, help="p2p: start position (default home)")
    p.add_argument("--end", type=float, nargs=3, help="p2p: end position")
    p.add_argument("--lemma", choices=LEMMA_VARIANTS, default="corrected")
    p.add_argument("--c4", choices=C4_VARIANTS, default="binomial")
    p.add_argument("--out", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pkmdyn", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evaluate a trajectory to CSV")
    _add_common(run)
    run.add_argument("--tmin", type=float, help="first sample time in s (default 0)")
    run.add_argument("--tmax", type=float, help="last sample time in s (default one period or duration)")
    run.add_argument("--rate", type=float, default=1000.0, help="sample rate in Hz")
    run.set_defaults(func=cmd_run)
    b = sub.add_parser("bench", help="time the inverse dynamics")
    _add_common(b)
    b.add_argument("--calls", type=int, default=10000)
    b.set_defaults(func=cmd_bench)
    v = sub.add_parser("verify", help="finite-difference verification along a trajectory")
    _add_common(v)
    v.add_argument("--tolerance-scale", type=float, default=1.0)
    v.add_argument("--samples", type=int, default=10)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, PkmError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
