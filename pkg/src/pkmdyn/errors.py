"""Exception hierarchy shared by the engine and the CLI."""


class PkmError(Exception):
    """Base class for all engine errors."""


class ModelError(PkmError, ValueError):
    """Model document is malformed or violates an invariant."""


class SchemaError(ModelError):
    pass


class InvariantError(ModelError):
    pass


class KinematicSingularityError(PkmError):
    """A limb's task-space Jacobian is (numerically) singular."""

    def __init__(self, limb: int, detail: str = ""):
        self.limb = limb
        super().__init__(f"limb {limb}: singular task-space Jacobian {detail}".strip())


class ActuationSingularityError(PkmError):
    """The inverse kinematics Jacobian J_IK is (numerically) singular."""


class LoopClosureError(PkmError):
    """Joint coordinates do not close all kinematic loops."""


class IKConvergenceError(PkmError):
    """Newton-Raphson geometric inverse kinematics failed."""


class IKSingularError(IKConvergenceError):
    pass
