"""Deterministic simulator for the iFIND robotic ultrasound systems."""

from .chain import (JointSpec, KinematicChain, forward_kinematics, home,
                    jacobian, link_frames, load_chain)
from .errors import (ClearanceInfeasible, DegenerateMesh, EmptyPath,
                     IfindError, InvalidAnswer, InvalidConfig, LimitViolation,
                     NotConverged, OffSurface, ParseError, PlanFailed,
                     RejectedInFault, TickRegression, UnknownPreset)
from .ik import IKOptions, solve_ik
from .transforms import Pose, RigidTransform

__all__ = [
    "ClearanceInfeasible", "DegenerateMesh", "EmptyPath", "IKOptions",
    "IfindError", "InvalidAnswer", "InvalidConfig", "JointSpec",
    "KinematicChain", "LimitViolation", "NotConverged", "OffSurface",
    "ParseError", "PlanFailed", "Pose", "RejectedInFault", "RigidTransform",
    "TickRegression", "UnknownPreset", "forward_kinematics", "home",
    "jacobian", "link_frames", "load_chain", "solve_ik",
]
