"""PKM description: limbs, joints, inertia, selection matrices, SEA data.

Models are read from a single JSON document::

    {"dof": 6, "gravity": [0, 0, -9.81], "P_p": [[...6 x dof...]],
     "sea": {"stiffness": [...], "motor_inertia": [...]},
     "limbs": [{"joints": [{"screw": [6], "ref_config": {"rotation": [[3x3]],
                                                          "translation": [3]},
                            "limits": [lo, hi]}],          # limits optional
                "bodies": [{"mass_matrix": [[6x6]]}],
                "P_t": [[...]], "D_t": [[...]],
                "cut_joint_rows": [...], "actuated_joint": k}]}

``gravity`` is the physical gravitational acceleration in the inertial frame.
Cut joints must be the trailing joints of a limb (the joints that attach the
limb to the platform); only the remaining tree bodies carry inertia.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import InvariantError, SchemaError
from .liegroup import Pose, check_screw

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10
ROTATION_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class JointSpec:
    screw: np.ndarray
    ref_config: Pose
    limits: tuple[float, float] | None = None


@dataclass(frozen=True)
class BodySpec:
    mass_matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class LimbModel:
    joints: tuple[JointSpec, ...]
    bodies: tuple[BodySpec, ...]
    P_t: np.ndarray
    D_t: np.ndarray
    cut_joint_rows: tuple[int, ...]
    actuated_joint: int | None
    # derived, contiguous arrays for the compiled kernels
    screws: np.ndarray = field(init=False, repr=False)
    refs: np.ndarray = field(init=False, repr=False)
    masses: np.ndarray = field(init=False, repr=False)
    task_rows: np.ndarray = field(init=False, repr=False)
    lower: np.ndarray = field(init=False, repr=False)
    upper: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "screws", _frozen([j.screw for j in self.joints]))
        set_(self, "refs", _frozen([j.ref_config.matrix for j in self.joints]))
        if self.bodies:
            set_(self, "masses", _frozen([b.mass_matrix for b in self.bodies]))
        else:
            set_(self, "masses", _frozen(np.zeros((0, 6, 6))))
        set_(self, "task_rows", _frozen(np.argmax(self.P_t, axis=1), dtype=np.int64))
        lo = [-np.inf if j.limits is None else j.limits[0] for j in self.joints]
        hi = [np.inf if j.limits is None else j.limits[1] for j in self.joints]
        set_(self, "lower", _frozen(lo))
        set_(self, "upper", _frozen(hi))

    @property
    def n_joints(self) -> int:
        """N_l: joint variables when attached to the platform."""
        return len(self.joints)

    @property
    def n_tree(self) -> int:
        """n_l: joint variables of the limb in the spanning tree."""
        return len(self.joints) - len(self.cut_joint_rows)

    @property
    def dof(self) -> int:
        """delta_p(l): rows of the task-space Jacobian."""
        return self.P_t.shape[0]


@dataclass(frozen=True, eq=False)
class PkmModel:
    limbs: tuple[LimbModel, ...]
    P_p: np.ndarray
    gravity: np.ndarray
    dof: int
    sea_stiffness: np.ndarray
    sea_motor_inertia: np.ndarray

    @property
    def n_limbs(self) -> int:
        return len(self.limbs)

    @property
    def actuated_limbs(self) -> tuple[int, ...]:
        return tuple(k for k, l in enumerate(self.limbs) if l.actuated_joint is not None)

    @property
    def n_actuators(self) -> int:
        return len(self.actuated_limbs)

    @property
    def platform_screws(self) -> np.ndarray:
        """Columns of P_p as platform twists (one per task coordinate)."""
        return self.P_p.T


@dataclass
class PkmState:
    """Joint coordinates of all limbs plus the task motion they realize."""

    theta: list[np.ndarray]
    task: list[np.ndarray]  # V_t, dV_t, ddV_t, dddV_t
    platform_pose: Pose

    def __post_init__(self):
        if len(self.task) != 4:
            raise ValueError("task must hold V_t and its first three derivatives")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _matrix(raw, shape, where: str) -> np.ndarray:
    try:
        a = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: not numeric ({exc})") from None
    if shape is not None and a.shape != tuple(shape):
        raise SchemaError(f"{where}: expected shape {tuple(shape)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SchemaError(f"{where}: non-finite entries")
    return a


def _require(doc: dict, key: str, where: str):
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in doc:
        raise SchemaError(f"{where}: missing field '{key}'")
    return doc[key]


def _check_selection(S: np.ndarray, where: str) -> None:
    """Rows are distinct unit rows with 0/1 entries."""
    if not np.all((S == 0.0) | (S == 1.0)):
        raise InvariantError(f"{where}: entries must be 0 or 1")
    if not np.all(S.sum(axis=1) == 1.0):
        raise InvariantError(f"{where}: each row must contain exactly one 1")
    cols = np.argmax(S, axis=1)
    if len(set(cols.tolist())) != len(cols):
        raise InvariantError(f"{where}: rows must be distinct")


def _parse_pose(raw, where: str) -> Pose:
    R = _matrix(_require(raw, "rotation", where), (3, 3), f"{where}.rotation")
    p = _matrix(_require(raw, "translation", where), (3,), f"{where}.translation")
    if np.linalg.norm(R.T @ R - np.eye(3)) > ROTATION_TOL or abs(np.linalg.det(R) - 1) > ROTATION_TOL:
        raise InvariantError(f"{where}.rotation is not a proper rotation")
    return Pose(R, p)


def _parse_limb(raw, k: int, dof: int, last: bool) -> LimbModel:
    where = f"limbs[{k}]"
    joints_raw = _require(raw, "joints", where)
    if not isinstance(joints_raw, list) or not joints_raw:
        raise SchemaError(f"{where}.joints: expected a non-empty list")
    joints = []
    for j, jr in enumerate(joints_raw):
        jw = f"{where}.joints[{j}]"
        X = _matrix(_require(jr, "screw", jw), (6,), f"{jw}.screw")
        try:
            check_screw(X)
        except ValueError as exc:
            raise InvariantError(f"{jw}: {exc}") from None
        B = _parse_pose(_require(jr, "ref_config", jw), f"{jw}.ref_config")
        limits = jr.get("limits")
        if limits is not None:
            lim = _matrix(limits, (2,), f"{jw}.limits")
            if not lim[0] < lim[1]:
                raise InvariantError(f"{jw}.limits: lower bound must be below upper")
            limits = (float(lim[0]), float(lim[1]))
        joints.append(JointSpec(_frozen(X), B, limits))
    n = len(joints)

    P_t = _matrix(_require(raw, "P_t", where), None, f"{where}.P_t")
    if P_t.ndim != 2 or P_t.shape[1] != 6:
        raise SchemaError(f"{where}.P_t: expected shape (delta_p(l), 6), got {P_t.shape}")
    _check_selection(P_t, f"{where}.P_t")
    if P_t.shape[0] != n:
        raise InvariantError(
            f"{where}: kinematically redundant limb, delta_p(l) = {P_t.shape[0]} != N_l = {n}"
        )
    D_t = _matrix(_require(raw, "D_t", where), (n, dof), f"{where}.D_t")
    if np.linalg.matrix_rank(D_t) != dof:
        raise InvariantError(f"{where}.D_t: must have full column rank {dof}")

    cut = _require(raw, "cut_joint_rows", where)
    if not isinstance(cut, list) or not all(isinstance(c, int) for c in cut):
        raise SchemaError(f"{where}.cut_joint_rows: expected a list of integers")
    cut = tuple(sorted(cut))
    if cut and cut != tuple(range(n - len(cut), n)):
        raise InvariantError(f"{where}.cut_joint_rows: cut joints must be the trailing joints")
    if last and cut:
        raise InvariantError(f"{where}: the platform-carrying last limb cannot have cut joints")
    if not last and not cut:
        raise InvariantError(f"{where}: only the last limb may stay attached to the platform")
    n_tree = n - len(cut)

    bodies_raw = _require(raw, "bodies", where)
    if not isinstance(bodies_raw, list) or len(bodies_raw) != n_tree:
        raise InvariantError(f"{where}.bodies: expected {n_tree} tree bodies")
    bodies = []
    for b, br in enumerate(bodies_raw):
        bw = f"{where}.bodies[{b}].mass_matrix"
        M = _matrix(_require(br, "mass_matrix", f"{where}.bodies[{b}]"), (6, 6), bw)
        if np.max(np.abs(M - M.T)) > SYMMETRY_TOL:
            raise InvariantError(f"{bw}: not symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) < -PSD_TOL:
            raise InvariantError(f"{bw}: not positive semidefinite")
        bodies.append(BodySpec(_frozen(M)))

    act = _require(raw, "actuated_joint", where)
    if act is not None:
        if not isinstance(act, int) or not 0 <= act < n_tree:
            raise InvariantError(f"{where}.actuated_joint: must index a tree joint (0..{n_tree - 1})")

    return LimbModel(
        joints=tuple(joints),
        bodies=tuple(bodies),
        P_t=_frozen(P_t),
        D_t=_frozen(D_t),
        cut_joint_rows=cut,
        actuated_joint=act,
    )


def parse_model(doc: dict[str, Any]) -> PkmModel:
    """Build and validate a model from an already-decoded JSON object."""
    dof = _require(doc, "dof", "model")
    if not isinstance(dof, int) or not 1 <= dof <= 6:
        raise SchemaError("model.dof: expected an integer in 1..6")
    gravity = _matrix(_require(doc, "gravity", "model"), (3,), "model.gravity")
    P_p = _matrix(_require(doc, "P_p", "model"), (6, dof), "model.P_p")
    _check_selection(P_p.T, "model.P_p (columns)")

    limbs_raw = _require(doc, "limbs", "model")
    if not isinstance(limbs_raw, list) or not limbs_raw:
        raise SchemaError("model.limbs: expected a non-empty list")
    limbs = tuple(
        _parse_limb(lr, k, dof, last=(k == len(limbs_raw) - 1)) for k, lr in enumerate(limbs_raw)
    )

    n_a = sum(l.actuated_joint is not None for l in limbs)
    if n_a < dof:
        raise InvariantError(f"model: {n_a} actuators cannot drive {dof} degrees of freedom")
    sea = _require(doc, "sea", "model")
    K = _matrix(_require(sea, "stiffness", "model.sea"), (n_a,), "model.sea.stiffness")
    Mm = _matrix(_require(sea, "motor_inertia", "model.sea"), (n_a,), "model.sea.motor_inertia")
    if np.any(K <= 0.0):
        raise InvariantError("model.sea.stiffness: entries must be strictly positive")
    if np.any(Mm < 0.0):
        raise InvariantError("model.sea.motor_inertia: entries must be non-negative")

    return PkmModel(
        limbs=limbs,
        P_p=_frozen(P_p),
        gravity=_frozen(gravity),
        dof=dof,
        sea_stiffness=_frozen(K),
        sea_motor_inertia=_frozen(Mm),
    )


def load_model(document: str | bytes | dict) -> PkmModel:
    """Parse model-file text (or a decoded dict) into a validated model."""
    if isinstance(document, dict):
        return parse_model(document)
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}") from None
    return parse_model(doc)


def load_model_file(path: str | Path) -> PkmModel:
    return load_model(Path(path).read_bytes())


def bundled_model_path(name: str) -> Path:
    """Path of a bundled fixture (``"gsp"`` or ``"planar_3rrr"``)."""
    return Path(str(resources.files("pkmdyn") / "data" / f"{name}.json"))


def load_bundled(name: str) -> PkmModel:
    return load_model_file(bundled_model_path(name))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def model_to_dict(model: PkmModel) -> dict[str, Any]:
    limbs = []
    for limb in model.limbs:
        joints = []
        for j in limb.joints:
            jd: dict[str, Any] = {
                "screw": j.screw.tolist(),
                "ref_config": {
                    "rotation": j.ref_config.rotation.tolist(),
                    "translation": j.ref_config.translation.tolist(),
                },
            }
            if j.limits is not None:
                jd["limits"] = list(j.limits)
            joints.append(jd)
        limbs.append(
            {
                "joints": joints,
                "bodies": [{"mass_matrix": b.mass_matrix.tolist()} for b in limb.bodies],
                "P_t": limb.P_t.tolist(),
                "D_t": limb.D_t.tolist(),
                "cut_joint_rows": list(limb.cut_joint_rows),
                "actuated_joint": limb.actuated_joint,
            }
        )
    return {
        "dof": model.dof,
        "gravity": model.gravity.tolist(),
        "P_p": model.P_p.tolist(),
        "sea": {
            "stiffness": model.sea_stiffness.tolist(),
            "motor_inertia": model.sea_motor_inertia.tolist(),
        },
        "limbs": limbs,
    }


def dumps_model(model: PkmModel, indent: int | None = 1) -> str:
    return json.dumps(model_to_dict(model), indent=indent)


def models_equal(a: PkmModel, b: PkmModel) -> bool:
    """Bitwise equality of every numeric field."""
    return model_to_dict(a) == model_to_dict(b)


# ---------------------------------------------------------------------------
# structural reports
# ---------------------------------------------------------------------------


def validate_equimobility(model: PkmModel) -> list[dict[str, Any]]:
    """Per-limb mobility report: ``delta_p(l)`` and whether it equals ``delta_p``."""
    report = []
    for k, limb in enumerate(model.limbs):
        square = limb.D_t.shape[0] == limb.D_t.shape[1]
        report.append(
            {"limb": k, "dof_limb": limb.dof, "equimobile": limb.dof == model.dof and square}
        )
    return report


def split_theta(model: PkmModel, theta: Sequence[float] | Sequence[np.ndarray]) -> list[np.ndarray]:
    """Partition a flat joint vector (or validate a per-limb list)."""
    sizes = [l.n_joints for l in model.limbs]
    if len(theta) == len(sizes) and all(np.ndim(t) == 1 for t in theta):
        parts = [np.asarray(t, dtype=float) for t in theta]
        for k, (p, n) in enumerate(zip(parts, sizes)):
            if p.shape != (n,):
                raise ValueError(f"limb {k}: expected {n} joint coordinates, got {p.shape}")
        return parts
    flat = np.asarray(theta, dtype=float).ravel()
    if flat.size != sum(sizes):
        raise ValueError(f"expected {sum(sizes)} joint coordinates, got {flat.size}")
    return list(np.split(flat, np.cumsum(sizes)[:-1]))
