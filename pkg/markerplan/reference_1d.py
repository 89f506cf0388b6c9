"""
One dimensional reference problem: two beacons on a line provide
position estimates of variance r^2 (r: distance to the beacon), a task
requires a certainty 1 - variance of at least 0.95. The beacons hop
toward the task, each landing at the edge of the coverage interval of
the other, until the fused variance at the task satisfies the
requirement.

The plan is computed with the generic planner functions
([walk_to_coverage](), [coverage_radius_1d]()) using continuous
(gridless) landings.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import InvalidInputError, ReferenceMismatchError
from .noise_model import coverage_radius_1d, fuse_covariances
from .numeric import SymMat3
from .planner import MarkerState, MoveMarker, Plan, PlaceBlock, apply_moves, walk_to_coverage

_logger = logging.getLogger(__name__)

# coverage radius, beacon landings and final fused variance of the
# worked example
REFERENCE_RADIUS = 0.2236
REFERENCE_MOVES = (0.324, 0.548)
REFERENCE_VARIANCE = 0.019859


@dataclass(frozen=True)
class World1D:
    """
    Beacons (id -> position), tasks, and the certainty threshold.
    The noise law is r^2 and the certainty law 1 - variance.
    """

    beacons: Tuple[Tuple[int, float], ...] = ((1, -0.1), (2, 0.1))
    tasks: Tuple[float, ...] = (0.7,)
    threshold: float = 0.95
    # coverage radius used for the hops, at the precision of the
    # worked example (None: full precision)
    decimals: Optional[int] = 3

    def __post_init__(self) -> None:
        if len(self.beacons) < 2:
            raise InvalidInputError("the 1D world requires at least two beacons")
        if not 0.0 < self.threshold < 1.0:
            raise InvalidInputError(f"threshold must be in (0, 1), got {self.threshold}")

    @staticmethod
    def noise(r: float) -> float:
        return r * r

    @staticmethod
    def certainty(variance: float) -> float:
        return 1.0 - variance

    def markers(self) -> List[MarkerState]:
        return [MarkerState(i, (float(x),)) for i, x in self.beacons]

    def coverage_radius(self) -> float:
        return coverage_radius_1d(self.noise, self.threshold, self.certainty)

    def hop_radius(self) -> float:
        r = self.coverage_radius()
        return round(r, self.decimals) if self.decimals is not None else r

    def fused_variance(self, positions: Sequence[float], task: float) -> float:
        """
        Variance at the task of the fusion of the estimates of all beacons.
        """
        sigmas = [SymMat3.diag(self.noise(abs(task - p)), 1.0, 1.0) for p in positions]
        return fuse_covariances(sigmas).xx

    def covered(self, positions: Sequence[float], task: float) -> bool:
        return self.certainty(self.fused_variance(positions, task)) >= self.threshold


@dataclass(frozen=True)
class Solution1D:
    plan: Plan
    coverage_radius: float
    # (beacon positions, fused variance at the task) after each move
    trace: List[Tuple[Dict[int, float], float]]

    @property
    def final_variance(self) -> float:
        return self.trace[-1][1]


def _positions(markers: Sequence[MarkerState]) -> Dict[int, float]:
    return {m.id: m.position[0] for m in markers}


def solve_1d(world: World1D = World1D()) -> Solution1D:
    """
    Plans the tasks of the world one after the other: the beacons
    walk toward the task until it is covered, then the task is
    completed.
    """
    r_cov = world.coverage_radius()
    hop_radius = world.hop_radius()
    _logger.info(f"\tcoverage radius: {r_cov:.4f} (hops of {hop_radius})")
    markers = world.markers()
    actions: List = []
    trace: List[Tuple[Dict[int, float], float]] = []
    current = markers
    for task in world.tasks:

        def covered(state: List[MarkerState], task: float = task) -> bool:
            return world.covered([m.position[0] for m in state], task)

        moves = walk_to_coverage(
            current,
            [(task,)] * len(current),
            hop_radius,
            surface=None,
            support=1,
            covered=covered,
        )
        for move in moves:
            current = apply_moves(current, [move])
            positions = _positions(current)
            trace.append((positions, world.fused_variance(list(positions.values()), task)))
        actions.extend(moves)
        actions.append(PlaceBlock((task,)))
    plan = Plan(actions=actions, markers=markers, r=hop_radius)
    return Solution1D(plan, r_cov, trace)


def solve_1d_example() -> Plan:
    """
    The plan of the worked example: beacons at -0.1 and 0.1,
    task at 0.7.
    """
    return solve_1d(World1D()).plan


def gait_is_safe(
    world: World1D, markers: Sequence[MarkerState], moves: Sequence[MoveMarker]
) -> bool:
    """
    True if every move starts where its beacon is and lands within the
    coverage radius (at the hop precision) of another beacon.
    """
    positions = _positions(markers)
    reach = world.hop_radius() + 1e-9
    for move in moves:
        if abs(positions[move.marker_id] - move.from_[0]) > 1e-9:
            return False
        others = [p for i, p in positions.items() if i != move.marker_id]
        if not any(abs(move.to[0] - p) <= reach for p in others):
            return False
        positions[move.marker_id] = move.to[0]
    return True


def format_solution(solution: Solution1D) -> List[str]:
    """
    Human readable lines: coverage radius, plan and certainty trace.
    """
    lines = [f"coverage radius: {solution.coverage_radius:.4f}"]
    for action in solution.plan.actions:
        if isinstance(action, MoveMarker):
            lines.append(f"MoveBeacon(b{action.marker_id}, {action.to[0]:.3f})")
        else:
            lines.append(f"Complete({action.slot[0]:g})")
    for positions, variance in solution.trace:
        where = ", ".join(f"b{i}={p:.3f}" for i, p in sorted(positions.items()))
        lines.append(
            f"{where}: fused variance {variance:.6f}, certainty {1.0 - variance:.4f}"
        )
    return lines


def check_reference(solution: Solution1D) -> None:
    """
    Raises:
      ReferenceMismatchError: the solution does not reproduce the
        coverage radius, landings and final variance of the worked example
    """
    moves = [a.to[0] for a in solution.plan.moves]
    if abs(solution.coverage_radius - REFERENCE_RADIUS) >= 1e-4:
        raise ReferenceMismatchError(
            f"coverage radius {solution.coverage_radius:.4f}, expected {REFERENCE_RADIUS}"
        )
    if len(moves) != len(REFERENCE_MOVES) or any(
        abs(a - b) >= 1e-6 for a, b in zip(moves, REFERENCE_MOVES)
    ):
        raise ReferenceMismatchError(f"beacon landings {moves}, expected {list(REFERENCE_MOVES)}")
    if not solution.trace or abs(solution.final_variance - REFERENCE_VARIANCE) >= 1e-6:
        raise ReferenceMismatchError(
            f"final fused variance differs from the expected {REFERENCE_VARIANCE}"
        )
