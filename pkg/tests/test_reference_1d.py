"""
Tests the one dimensional reference problem
"""

import pytest

from markerplan.errors import InvalidInputError, ReferenceMismatchError
from markerplan.planner import MoveMarker, PlaceBlock
from markerplan.reference_1d import (
    World1D,
    check_reference,
    format_solution,
    gait_is_safe,
    solve_1d,
    solve_1d_example,
)


def test_coverage_radius() -> None:
    """
    Variance r^2 and certainty 1 - variance: r_cov = sqrt(0.05)
    """
    world = World1D()
    assert world.coverage_radius() == pytest.approx(0.2236, abs=1e-4)
    assert world.hop_radius() == 0.224
    assert World1D(decimals=None).hop_radius() == pytest.approx(0.05**0.5)


def test_initial_fusion() -> None:
    """
    From the initial beacon positions the task is not covered
    """
    world = World1D()
    assert world.fused_variance([-0.1, 0.1], 0.7) == pytest.approx(0.2304, abs=1e-6)
    assert not world.covered([-0.1, 0.1], 0.7)


def test_plan() -> None:
    """
    Beacon 1 hops to 0.324, beacon 2 to 0.548, then the task is done
    """
    plan = solve_1d_example()
    moves = plan.moves
    assert [m.marker_id for m in moves] == [1, 2]
    assert moves[0].from_[0] == pytest.approx(-0.1)
    assert moves[0].to[0] == pytest.approx(0.324, abs=1e-9)
    assert moves[1].from_[0] == pytest.approx(0.1)
    assert moves[1].to[0] == pytest.approx(0.548, abs=1e-9)
    assert plan.actions[-1] == PlaceBlock((0.7,))
    assert len(plan.actions) == 3
    assert plan.r == 0.224


def test_certainty_trace() -> None:
    """
    Fused variance after each move, the last one meets the threshold
    """
    solution = solve_1d()
    variances = [v for _, v in solution.trace]
    assert variances[0] == pytest.approx(0.1015, abs=1e-4)
    assert variances[1] == pytest.approx(0.019859, abs=1e-6)
    assert solution.final_variance == variances[1]
    assert 1.0 - variances[0] < 0.95 <= 1.0 - variances[1]
    assert solution.trace[1][0][2] == pytest.approx(0.548)


def test_gait_safety_and_minimality() -> None:
    """
    The gait is safe, and neither move can be dropped: without the
    first one the second lands out of reach, without the second one
    the task is not covered
    """
    world = World1D()
    markers = world.markers()
    first, second = solve_1d_example().moves
    assert gait_is_safe(world, markers, [first, second])
    assert not gait_is_safe(world, markers, [second])
    assert gait_is_safe(world, markers, [first])
    assert not world.covered([first.to[0], 0.1], 0.7)
    assert not gait_is_safe(
        world, markers, [MoveMarker(1, (-0.1,), (0.5,)), MoveMarker(2, (0.1,), (0.548,))]
    )


def test_full_precision_radius() -> None:
    """
    Without rounding of the hop radius the task is still covered
    """
    world = World1D(decimals=None)
    solution = solve_1d(world)
    assert world.certainty(solution.final_variance) >= world.threshold
    assert gait_is_safe(world, world.markers(), solution.plan.moves)


def test_format_solution() -> None:
    """
    Human readable plan
    """
    lines = format_solution(solve_1d())
    assert lines[:4] == [
        "coverage radius: 0.2236",
        "MoveBeacon(b1, 0.324)",
        "MoveBeacon(b2, 0.548)",
        "Complete(0.7)",
    ]
    assert lines[-1].startswith("b1=0.324, b2=0.548: fused variance 0.019859")


def test_invalid_world() -> None:
    """
    A single beacon, or a threshold outside of (0, 1)
    """
    with pytest.raises(InvalidInputError):
        World1D(beacons=((1, 0.0),))
    with pytest.raises(InvalidInputError):
        World1D(threshold=1.0)


def test_check_reference() -> None:
    """
    The rounded hop radius reproduces the worked example, the full
    precision one lands the beacons elsewhere
    """
    check_reference(solve_1d())
    with pytest.raises(ReferenceMismatchError) as error:
        check_reference(solve_1d(World1D(decimals=None)))
    assert "beacon landings" in str(error.value)
