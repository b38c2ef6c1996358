"""Recursive inverse dynamics of parallel kinematic manipulators with two time derivatives."""

from .errors import (
    ActuationSingularityError,
    IKConvergenceError,
    IKSingularError,
    InvariantError,
    KinematicSingularityError,
    LoopClosureError,
    ModelError,
    PkmError,
    SchemaError,
)
from .flatness import FeedforwardResult, sea_feedforward
from .invdyn import InvDynResult, reference_invdyn, second_order_invdyn
from .liegroup import Pose, ad, adjoint, exp_screw, log_pose
from .linalg import LUFactors, factorizations
from .model import LimbModel, PkmModel, load_bundled, load_model, load_model_file
from .oracle import FdConfig, VerificationReport, fd_derivative, verify_model
from .pkm_kinematics import fourth_order_kinematics, home_configuration, solve_configuration
from .taskspace import task_eom
from .trajectory import p2p_trajectory, random_trajectory, roll_trajectory

__version__ = "0.1.0"
