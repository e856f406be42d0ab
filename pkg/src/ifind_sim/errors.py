"""Exception types shared across the simulator."""

from __future__ import annotations


class IfindError(Exception):
    """Base class for all simulator errors."""


class UnknownPreset(IfindError):
    """Requested a chain/rig preset that is not bundled."""


class InvalidConfig(IfindError):
    """A config file or inline config failed validation."""


class LimitViolation(IfindError):
    """A joint vector lies outside the chain's joint limits."""


class NotConverged(IfindError):
    """IK failed to reach the target within tolerance.

    Carries the best iterate and its residual so callers can inspect
    how close the solver got.
    """

    def __init__(self, message, best_q=None, position_residual=None,
                 orientation_residual=None):
        super().__init__(message)
        self.best_q = best_q
        self.position_residual = position_residual
        self.orientation_residual = orientation_residual


class ClearanceInfeasible(IfindError):
    """Dual-arm targets were reached but the clearance margin cannot be."""

    def __init__(self, message, best_q=None, best_clearance=None,
                 position_residual=None, orientation_residual=None):
        super().__init__(message)
        self.best_q = best_q
        self.best_clearance = best_clearance
        self.position_residual = position_residual
        self.orientation_residual = orientation_residual


class PlanFailed(IfindError):
    """Dual sweep planning failed at a waypoint; partial trajectory kept."""

    def __init__(self, message, waypoint_index, partial_trajectory):
        super().__init__(message)
        self.waypoint_index = waypoint_index
        self.partial_trajectory = partial_trajectory


class ParseError(IfindError):
    """A file (mesh, scenario, log) could not be parsed."""


class DegenerateMesh(IfindError):
    """Mesh has an out-of-range index or a zero-area triangle."""


class OffSurface(IfindError):
    """A contact point or sweep endpoint is too far from the mesh."""


class EmptyPath(IfindError):
    """A sweep degenerated to fewer than two waypoints."""


class TickRegression(IfindError):
    """A session event was appended with a tick earlier than the log tail."""


class InvalidAnswer(IfindError):
    """A questionnaire answer is outside the 0..4 scale."""


class RejectedInFault(IfindError):
    """A motion command was submitted while the simulator is in FAULT."""
