"""
Module defining the exceptions raised by markerplan.

Each family carries the exit code the command line interface returns
when an exception of this family aborts a subcommand
(see [cli.main]()).
"""

from typing import Optional


class MarkerPlanError(Exception):
    """
    Superclass of all markerplan errors.
    """

    exit_code = 2


class InvalidInputError(MarkerPlanError):
    """
    To be raised when an argument violates a precondition
    (non finite values, empty lists, non positive-semidefinite
    covariances, ...).
    """


class FormatError(MarkerPlanError):
    """
    To be raised when a file (camera, structure, plan, predictor,
    dataset) does not have the expected content.
    """


class DomainError(MarkerPlanError):
    """
    To be raised when a query falls outside the domain of a model.
    """


class PredictorDomainError(DomainError):
    """
    Query of an [noise_model.EigenvaluePredictor]() outside of its
    range or incidence bounds.

    Args:
      bound: name of the violated bound, e.g. "rho_max"
      value: the queried value
      limit: the value of the bound
    """

    def __init__(self, bound: str, value: float, limit: float) -> None:
        self.bound = bound
        self.value = value
        self.limit = limit
        super().__init__(str(self))

    def __str__(self) -> str:
        return (
            f"predictor query outside of domain: {self.bound} violated "
            f"({self.value} vs {self.limit})"
        )


class NearSingularError(MarkerPlanError):
    """
    Covariance fusion hit a (near) singular sum of covariances.

    Args:
      index: index, in the list of fused covariances, of the offending matrix
      rcond: reciprocal condition number of the sum
    """

    def __init__(self, index: int, rcond: float) -> None:
        self.index = index
        self.rcond = rcond
        super().__init__(str(self))

    def __str__(self) -> str:
        return (
            f"near singular covariance sum when fusing matrix {self.index} "
            f"(reciprocal condition {self.rcond:.3e})"
        )


class InfeasibleError(MarkerPlanError):
    """
    No plan, radius or clustering satisfies the requirements.
    """

    exit_code = 3


class ClusteringError(InfeasibleError):
    """
    No value of k yields clusters satisfying the width and minimum size
    constraints.
    """

    def __init__(self, layer: Optional[int], message: str) -> None:
        self.layer = layer
        super().__init__(f"layer {layer}: {message}" if layer is not None else message)


class StrandedMarkerError(InfeasibleError):
    """
    A marker can not hop any closer to its destination.
    """

    def __init__(self, marker_id: int, message: str) -> None:
        self.marker_id = marker_id
        super().__init__(f"marker {marker_id} stranded: {message}")


class OcclusionError(InfeasibleError):
    """
    No order of the actions keeps enough markers in sight of the camera.

    Args:
      step: number of actions planned so far
      message: where the planner got stuck
    """

    def __init__(self, step: int, message: str) -> None:
        self.step = step
        super().__init__(f"after {step} action(s): {message}")


class ProjectionError(MarkerPlanError):
    """
    A point can not be projected by the camera model
    (behind the camera, or beyond the maximal incidence angle).
    """


class VisibilityError(ProjectionError):
    """
    A marker corner is not visible in the image.
    """


class UndistortionError(MarkerPlanError):
    """
    The Newton inversion of the distortion polynomial did not converge.
    """


class EstimationError(MarkerPlanError):
    """
    The Perspective-n-Point solver did not converge.
    """


class SampleSizeError(MarkerPlanError):
    """
    Not enough samples to estimate a covariance.
    """


class CoverageError(MarkerPlanError):
    """
    A calibration dataset does not cover the requested predictor domain.
    """

    def __init__(self, missing) -> None:
        self.missing = list(missing)
        cells = ", ".join(str(c) for c in self.missing)
        super().__init__(f"no calibration record in boundary cell(s): {cells}")


class PlanValidationError(MarkerPlanError):
    """
    A plan does not match the structure it is checked against.

    Args:
      index: index of the offending action
      message: what is wrong with it
    """

    def __init__(self, index: int, message: str) -> None:
        self.index = index
        super().__init__(f"action {index}: {message}")


class CalibrationFloorError(MarkerPlanError):
    """
    The fitted predictor is conservative on a smaller fraction
    of the held-out positions than required.
    """

    exit_code = 5


class CheckFailureError(MarkerPlanError):
    """
    A valid plan has steps with too few markers in sight or a
    certainty below the threshold.

    Args:
      index: index of the first failing step
      failures: number of failing steps
      message: description of the first failing step
    """

    exit_code = 4

    def __init__(self, index: int, failures: int, message: str) -> None:
        self.index = index
        self.failures = failures
        super().__init__(f"{failures} step(s) fail the check, first: step {index}, {message}")


class ReferenceMismatchError(MarkerPlanError):
    """
    A worked example does not reproduce its reference values.
    """

    exit_code = 4
