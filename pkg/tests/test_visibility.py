"""
Tests the visibility module: line of sight, view cone, predictor
domain and requirements on the markers in sight.
"""

import pytest

from markerplan.errors import InvalidInputError
from markerplan.noise_model import CertaintyParams
from markerplan.planner import MarkerState
from markerplan.structure import Slot
from markerplan.tests import constant_predictor
from markerplan.visibility import (
    VisibilityRequirement,
    WorldState,
    camera_above,
    camera_frame_position,
    visible_markers,
)


def test_visible_markers() -> None:
    """
    Line of sight, view cone, predictor domain and carried marker
    """
    state = WorldState([MarkerState(1, (0.0, 0.0, 0.0)), MarkerState(2, (3.0, 0.0, 3.0))])
    camera = (0.0, 0.0, 3.0)
    assert visible_markers(state, camera, 0.2) == [1, 2]
    assert visible_markers(state, camera, 0.2, carried=1) == [2]
    # level with the camera: outside of a narrower cone
    assert visible_markers(state, camera, 0.2, view_cone_deg=80.0) == [1]
    assert visible_markers(state, camera, 0.2, pred=constant_predictor(1e-6)) == [1]
    assert visible_markers(
        state, camera, 0.2, pred=constant_predictor(1e-6, rho_bounds=(0.01, 0.5))
    ) == []
    # above the camera
    state.move(2, (0.0, 0.0, 5.0))
    assert visible_markers(state, camera, 0.2) == [1]
    # at the camera
    assert visible_markers(state, (0.0, 0.0, 5.0), 0.2) == [1]
    # a block between the camera and the marker
    state.place(Slot(0, 0, 1))
    assert visible_markers(state, camera, 0.2) == []
    assert len(state.box_centers) == 1


def test_camera_above() -> None:
    """
    The camera hovers above the target, the marker below it is on
    its optical axis
    """
    camera = camera_above((1.0, 2.0, 3.0), 1.5)
    assert camera == (1.0, 2.0, 4.5)
    assert camera_frame_position((1.0, 2.0, 3.0), camera, 0.2).tolist() == pytest.approx(
        [0.0, 0.0, 0.3]
    )


def test_world_copies() -> None:
    """
    Copies do not share markers or placed blocks with the original
    """
    state = WorldState([MarkerState(1, (0.0, 0.0, 0.0))], placed=[Slot(2, 0, 0)])
    assert state.box_centers.tolist() == [[2.0, 0.0, 0.0]]
    copy = state.copy()
    copy.place(Slot(3, 0, 0))
    copy.move(1, (1.0, 0.0, 0.0))
    assert state.placed == {Slot(2, 0, 0)}
    assert len(state.box_centers) == 1
    assert state.markers[1] == (0.0, 0.0, 0.0)
    other = state.with_markers({1: (4.0, 0.0, 0.0), 2: (5.0, 0.0, 0.0)})
    assert sorted(other.markers) == [1, 2]
    assert other.placed == state.placed
    assert sorted(state.markers) == [1]


def test_requirement() -> None:
    """
    Markers in sight and certainty against the requirement
    """
    state = WorldState([MarkerState(1, (1.0, 0.0, 0.0)), MarkerState(2, (-1.0, 0.0, 0.0))])
    two = VisibilityRequirement(0.2)
    assessment = two.assess(state, (0.0, 0.0, 0.0))
    assert assessment.visible == [1, 2]
    assert assessment.ok
    assert assessment.c_star is None
    assert not two.assess(state, (0.0, 0.0, 0.0), carried=1).ok
    assert VisibilityRequirement(0.2, min_visible=1).assess(state, (0.0, 0.0, 0.0), 1).ok

    # a block between the camera and marker 2
    state.place(Slot(-1, 0, 1))
    assert two.assess(state, (0.0, 0.0, 0.0)).visible == [1]

    certain = VisibilityRequirement(
        0.2,
        min_visible=1,
        pred=constant_predictor(1e-6),
        params=CertaintyParams(alpha_m=0.02, c_min=0.95),
    )
    assessment = certain.assess(state, (0.0, 0.0, 0.0))
    assert assessment.ok
    assert assessment.lambda_star == pytest.approx(1e-6)
    assert 0.95 < assessment.c_star < 1.0
    blind = certain.assess(state, (0.0, 0.0, 0.0), carried=1)
    assert blind.visible == []
    assert blind.c_star == 0.0
    assert blind.lambda_star is None
    assert not blind.ok

    uncertain = VisibilityRequirement(
        0.2,
        min_visible=1,
        pred=constant_predictor(1e-2),
        params=CertaintyParams(alpha_m=0.02, c_min=0.95),
    )
    assessment = uncertain.assess(state, (0.0, 0.0, 0.0))
    assert assessment.visible == [1]
    assert assessment.c_star < 0.95
    assert not assessment.ok


def test_requirement_errors() -> None:
    """
    Invalid requirements
    """
    with pytest.raises(InvalidInputError):
        VisibilityRequirement(0.0)
    with pytest.raises(InvalidInputError):
        VisibilityRequirement(0.2, min_visible=0)
