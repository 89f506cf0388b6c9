"""
Line of sight between the camera of the robot, hovering above the
target of an action and looking down, and the markers; and the
certainty C* of the position estimate fused from the markers in sight.

Used by the planner, which keeps every action of its plans within a
[VisibilityRequirement](), and by the plan checker, which reports it.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .errors import InvalidInputError
from .noise_model import (
    CAMERA_DOWN,
    CertaintyParams,
    EigenvaluePredictor,
    certainty_lower_bound,
    fuse_covariances,
    predict_covariance,
    range_and_incidence,
    rotate_covariance,
)
from .numeric import eig_sym3, segment_hits_boxes
from .structure import Slot

Position = Tuple[float, ...]


class _Marker(Protocol):
    id: int
    position: Position


class WorldState:
    """
    Placed blocks (unit boxes centered on their slots) and marker
    positions, in structure units.
    """

    def __init__(self, markers: Iterable[_Marker], placed: Iterable[Slot] = ()) -> None:
        self.markers: Dict[int, Position] = {
            m.id: tuple(float(v) for v in m.position) for m in markers
        }
        self.placed = set(placed)
        self._centers = np.array([s.position for s in sorted(self.placed)], dtype=float).reshape(
            -1, 3
        )

    @property
    def box_centers(self) -> npt.NDArray[np.float64]:
        return self._centers

    def place(self, slot: Slot) -> None:
        self.placed.add(slot)
        self._centers = np.vstack((self._centers, np.array(slot.position)))

    def move(self, marker_id: int, to: Sequence[float]) -> None:
        self.markers[marker_id] = tuple(float(v) for v in to)

    def copy(self) -> "WorldState":
        # the box array is replaced (never modified) by place
        other = WorldState([])
        other.markers = dict(self.markers)
        other.placed = set(self.placed)
        other._centers = self._centers
        return other

    def with_markers(self, markers: Dict[int, Position]) -> "WorldState":
        other = self.copy()
        other.markers = dict(markers)
        return other


def camera_above(target: Sequence[float], hover_units: float) -> Tuple[float, float, float]:
    return (float(target[0]), float(target[1]), float(target[2]) + hover_units)


def camera_frame_position(
    marker: Sequence[float], camera: Sequence[float], unit_m: float
) -> npt.NDArray[np.float64]:
    """
    Position (meters) of the marker in the frame of the downward
    looking camera.
    """
    offset = np.asarray(marker, dtype=float) - np.asarray(camera, dtype=float)
    return CAMERA_DOWN @ offset * unit_m


def visible_markers(
    state: WorldState,
    camera: Sequence[float],
    unit_m: float,
    pred: Optional[EigenvaluePredictor] = None,
    view_cone_deg: float = 95.0,
    carried: Optional[int] = None,
) -> List[int]:
    """
    Ids of the markers the camera sees: markers not carried, within the
    view cone (and within the predictor domain, if a predictor is given),
    and such that no placed block intersects the segment from the camera
    to the marker.
    """
    cone = math.radians(view_cone_deg)
    if pred is not None:
        cone = min(cone, pred.theta_bounds[1])
    mins = state.box_centers - 0.5
    maxs = state.box_centers + 0.5
    visible = []
    for marker_id in sorted(state.markers):
        if marker_id == carried:
            continue
        position = state.markers[marker_id]
        direction = np.asarray(position, dtype=float) - np.asarray(camera, dtype=float)
        if not np.any(direction != 0.0):
            continue
        rho, theta = range_and_incidence(camera_frame_position(position, camera, unit_m))
        if theta > cone:
            continue
        if pred is not None and not pred.in_domain(rho, theta):
            continue
        if np.any(segment_hits_boxes(camera, direction, mins, maxs)):
            continue
        visible.append(marker_id)
    return visible


@dataclass(frozen=True)
class Assessment:
    """
    Markers in sight of an action, and (if a predictor was given) the
    largest eigenvalue and the certainty of their fused covariance.
    """

    visible: List[int]
    lambda_star: Optional[float]
    c_star: Optional[float]
    ok: bool


@dataclass(frozen=True)
class VisibilityRequirement:
    """
    What an action requires from the markers in sight of the camera.

    Args:
      unit_m: edge of a structure unit, in meters
      min_visible: markers the camera must see
      hover_units: height of the camera above the action target
        (structure units)
      view_cone_deg: half angle of the field of view of the camera
      pred: if given, markers outside of its domain are not in sight,
        and the certainty of the fused estimate is computed
      params: if given (with pred), the certainty must reach params.c_min
    """

    unit_m: float
    min_visible: int = 2
    hover_units: float = 1.5
    view_cone_deg: float = 95.0
    pred: Optional[EigenvaluePredictor] = None
    params: Optional[CertaintyParams] = None

    def __post_init__(self) -> None:
        if not self.unit_m > 0.0:
            raise InvalidInputError(f"unit_m must be positive, got {self.unit_m}")
        if self.min_visible < 1:
            raise InvalidInputError(f"min_visible must be at least 1, got {self.min_visible}")

    def assess(
        self, state: WorldState, target: Sequence[float], carried: Optional[int] = None
    ) -> Assessment:
        camera = camera_above(target, self.hover_units)
        visible = visible_markers(
            state, camera, self.unit_m, self.pred, self.view_cone_deg, carried
        )
        lambda_star: Optional[float] = None
        c_star: Optional[float] = None
        if self.pred is not None and self.params is not None:
            c_star = 0.0
            if visible:
                sigmas = [
                    rotate_covariance(
                        predict_covariance(
                            camera_frame_position(state.markers[i], camera, self.unit_m),
                            self.pred,
                        ),
                        CAMERA_DOWN.T,
                    )
                    for i in visible
                ]
                fused = fuse_covariances(sigmas)
                lambda_star = eig_sym3(fused).largest
                c_star = certainty_lower_bound(fused, self.params)
        ok = len(visible) >= self.min_visible
        if c_star is not None and self.params is not None:
            ok = ok and c_star >= self.params.c_min
        return Assessment(visible, lambda_star, c_star, ok)
