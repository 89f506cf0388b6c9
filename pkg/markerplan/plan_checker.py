"""
Replay of plans against the geometry of the structure: for each action,
the markers in sight of the robot camera (hovering above the action
target, looking down) are determined, their predicted covariances are
fused and the certainty C* of the action is computed. The probability
of success of a plan is the product of the certainties of its actions.

Also hosts [sweep_radius](), which plans and checks a structure for
several planning radii.
"""

import csv
import json
import logging
import math
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from .config import Config
from .config_error import ConfigError
from .errors import InfeasibleError, InvalidInputError, PlanValidationError
from .noise_model import CertaintyParams, EigenvaluePredictor
from .planner import MarkerState, MoveMarker, Plan, PlaceBlock, PlannerSettings, plan_assembly
from .settings import read_float, read_int, section
from .structure import Slot, Structure
from .version import __version__
from .visibility import VisibilityRequirement, WorldState

REPORT_FORMAT_VERSION = 1
SWEEP_FORMAT_VERSION = 1

# tolerance (structure units) on the 'from' position of marker moves
_POSITION_SLACK = 1e-9

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckerSettings:
    """
    Configuration of the plan checker ('checker' table).

    Args:
      hover_units: height of the camera above the action target
        (structure units)
      min_visible: markers an action requires in sight
      view_cone_deg: half angle of the field of view of the camera
    """

    hover_units: float = 1.5
    min_visible: int = 2
    view_cone_deg: float = 95.0

    def __post_init__(self) -> None:
        if not self.hover_units > 0.0:
            raise InvalidInputError(f"hover_units must be positive, got {self.hover_units}")
        if self.min_visible < 1:
            raise InvalidInputError(f"min_visible must be at least 1, got {self.min_visible}")
        if not 0.0 < self.view_cone_deg < 180.0:
            raise InvalidInputError(f"view_cone_deg must be in (0, 180), got {self.view_cone_deg}")

    @classmethod
    def from_config(cls, config: Config) -> "CheckerSettings":
        table = section(config, "checker")
        try:
            return cls(
                hover_units=read_float(table, "hover_units", "checker"),
                min_visible=read_int(table, "min_visible", "checker"),
                view_cone_deg=read_float(table, "view_cone_deg", "checker"),
            )
        except InvalidInputError as e:
            raise ConfigError(f"checker: {e}")

    def requirement(
        self,
        unit_m: float,
        pred: Optional[EigenvaluePredictor] = None,
        params: Optional[CertaintyParams] = None,
    ) -> VisibilityRequirement:
        return VisibilityRequirement(
            unit_m, self.min_visible, self.hover_units, self.view_cone_deg, pred, params
        )


@dataclass(frozen=True)
class StepRecord:
    idx: int
    op: str
    visible: List[int]
    lambda_star: Optional[float]
    c_star: float
    ok: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "idx": self.idx,
            "op": self.op,
            "visible": list(self.visible),
            "lambda_star": self.lambda_star,
            "c_star": self.c_star,
            "ok": self.ok,
        }


@dataclass(frozen=True)
class CheckReport:
    steps: List[StepRecord]
    invocation: Optional[List[str]] = field(default=None, compare=False)

    @property
    def p_success(self) -> float:
        return float(math.prod(s.c_star for s in self.steps))

    @property
    def min_visible(self) -> Optional[int]:
        return min((len(s.visible) for s in self.steps), default=None)

    @property
    def all_ok(self) -> bool:
        return all(s.ok for s in self.steps)

    @property
    def failures(self) -> List[StepRecord]:
        return [s for s in self.steps if not s.ok]

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"version": REPORT_FORMAT_VERSION, "markerplan": __version__}
        if self.invocation is not None:
            d["invocation"] = self.invocation
        d.update(
            {
                "steps": [s.to_dict() for s in self.steps],
                "p_success": self.p_success,
                "min_visible": self.min_visible,
            }
        )
        return d

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)
            f.write("\n")


def _slot_of(action: PlaceBlock, index: int, structure: Structure) -> Slot:
    values = action.slot
    if len(values) != 3 or not all(float(v).is_integer() for v in values):
        raise PlanValidationError(index, f"{list(values)} is not a slot of the grid")
    slot = Slot(*(int(v) for v in values))
    if slot not in structure:
        raise PlanValidationError(index, f"{slot.to_list()} is not a slot of the structure")
    return slot


def _validate(state: WorldState, structure: Structure, action: Any, index: int) -> Optional[Slot]:
    if isinstance(action, MoveMarker):
        current = state.markers.get(action.marker_id)
        if current is None:
            raise PlanValidationError(index, f"unknown marker {action.marker_id}")
        if len(action.from_) != len(current) or any(
            abs(a - b) > _POSITION_SLACK for a, b in zip(action.from_, current)
        ):
            raise PlanValidationError(
                index,
                f"marker {action.marker_id} moved from {list(action.from_)}, "
                f"but it is at {list(current)}",
            )
        return None
    if isinstance(action, PlaceBlock):
        slot = _slot_of(action, index, structure)
        if slot in state.placed:
            raise PlanValidationError(index, f"slot {slot.to_list()} placed twice")
        for marker_id, position in state.markers.items():
            if all(abs(a - b) <= _POSITION_SLACK for a, b in zip(position, slot.position)):
                raise PlanValidationError(
                    index, f"slot {slot.to_list()} is occupied by marker {marker_id}"
                )
        return slot
    raise PlanValidationError(index, f"unknown action {action!r}")


def check_plan(
    structure: Structure,
    plan: Plan,
    pred: EigenvaluePredictor,
    params: CertaintyParams,
    settings: CheckerSettings = CheckerSettings(),
    invocation: Optional[Sequence[str]] = None,
) -> CheckReport:
    """
    Replays the plan and computes, for each action (before it is
    executed), the markers in sight of the camera hovering above its
    target, and the certainty C* of their fused predicted covariances
    (0 if no marker is in sight). An action fails if fewer than
    min_visible markers are in sight or if its certainty is below c_min.

    Raises:
      PlanValidationError: an action does not match the structure or the
        current state (unknown slot or marker, slot placed twice or
        occupied by a marker, marker not where the action moves it from)
    """
    requirement = settings.requirement(structure.unit_m, pred, params)
    state = WorldState(plan.markers)
    steps: List[StepRecord] = []
    for index, action in enumerate(plan.actions):
        slot = _validate(state, structure, action, index)
        if isinstance(action, MoveMarker):
            target: Sequence[float] = action.to
            carried: Optional[int] = action.marker_id
            op = "move_marker"
        else:
            target = slot.position  # type: ignore
            carried = None
            op = "place_block"
        assessment = requirement.assess(state, target, carried)
        c_star = assessment.c_star or 0.0
        steps.append(
            StepRecord(
                index, op, assessment.visible, assessment.lambda_star, c_star, assessment.ok
            )
        )
        if not assessment.ok:
            _logger.debug(
                f"\tstep {index} ({op}) fails: {len(assessment.visible)} marker(s) in sight, "
                f"C*={c_star:.4f}"
            )
        if isinstance(action, MoveMarker):
            state.move(action.marker_id, action.to)
        else:
            state.place(slot)  # type: ignore

    report = CheckReport(steps, list(invocation) if invocation is not None else None)
    _logger.info(
        f"\tplan checked: {len(steps)} step(s), {len(report.failures)} failure(s), "
        f"P(success)={report.p_success:.4f}"
    )
    return report


@dataclass(frozen=True)
class SweepRow:
    r: float
    p_success: float
    steps: int


@dataclass(frozen=True)
class SweepTable:
    rows: List[SweepRow]

    def write_csv(
        self, path: Union[str, Path], invocation: Optional[Sequence[str]] = None
    ) -> None:
        """
        Writes a comment line (markerplan and format versions, and the
        invocation if given), then the header and one row per radius.
        """
        with open(path, "w", newline="") as f:
            comment = f"# markerplan {__version__}, sweep format {SWEEP_FORMAT_VERSION}"
            if invocation is not None:
                comment += f", invocation: {' '.join(invocation)}"
            f.write(comment + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["r", "p_success", "steps"])
            for row in self.rows:
                writer.writerow([repr(row.r), repr(row.p_success), row.steps])

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "SweepTable":
        with open(path, "r", newline="") as f:
            reader = csv.DictReader(line for line in f if not line.startswith("#"))
            return cls(
                [
                    SweepRow(float(row["r"]), float(row["p_success"]), int(row["steps"]))
                    for row in reader
                ]
            )

    def write_svg(self, path: Union[str, Path]) -> None:
        """
        Plot of P(success) and of the number of steps against the radius.
        """
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        radii = [row.r for row in self.rows]
        with matplotlib.rc_context({"svg.hashsalt": "markerplan"}):
            figure, probability_axis = plt.subplots(figsize=(6, 4))
            probability_axis.plot(radii, [row.p_success for row in self.rows], "o-", color="C0")
            probability_axis.set_xlabel("cluster radius (structure units)")
            probability_axis.set_ylabel("P(success)", color="C0")
            probability_axis.set_ylim(-0.05, 1.05)
            steps_axis = probability_axis.twinx()
            steps_axis.plot(radii, [row.steps for row in self.rows], "s--", color="C1")
            steps_axis.set_ylabel("steps", color="C1")
            figure.tight_layout()
            figure.savefig(path, format="svg", metadata={"Date": None})
            plt.close(figure)


@dataclass(frozen=True)
class _SweepJob:
    structure: Structure
    markers: List[MarkerState]
    r: float
    pred: EigenvaluePredictor
    params: CertaintyParams
    planner: PlannerSettings
    checker: CheckerSettings
    seed: int


def _sweep_one(job: _SweepJob) -> SweepRow:
    requirement = job.checker.requirement(job.structure.unit_m, job.pred, job.params)
    try:
        plan = plan_assembly(
            job.structure, job.markers, job.r, job.planner, job.seed, requirement
        )
    except InfeasibleError as e:
        _logger.warning(f"\tr={job.r}: no plan in sight of the markers ({e})")
        try:
            # the step count of the plan ignoring the markers in sight
            plan = plan_assembly(job.structure, job.markers, job.r, job.planner, job.seed)
        except InfeasibleError as e:
            _logger.warning(f"\tr={job.r}: planning failed ({e})")
            return SweepRow(job.r, 0.0, 0)
    report = check_plan(job.structure, plan, job.pred, job.params, job.checker)
    p_success = report.p_success if report.all_ok else 0.0
    if not report.all_ok:
        _logger.warning(f"\tr={job.r}: {len(report.failures)} step(s) fail the check")
    return SweepRow(job.r, p_success, len(plan))


def sweep_radius(
    structure: Structure,
    radii: Sequence[float],
    markers: Sequence[MarkerState],
    pred: EigenvaluePredictor,
    params: CertaintyParams,
    planner: PlannerSettings = PlannerSettings(),
    checker: CheckerSettings = CheckerSettings(),
    seed: int = 0,
    workers: int = 1,
) -> SweepTable:
    """
    Plans and checks the structure for each radius. Plans keep every
    action in sight of the markers required by the checker settings (and
    within the domain of the predictor, with a certainty of at least
    c_min). A radius for which no such plan is found, or for which a step
    of the plan fails the check, gets a probability of success of 0; its
    step count is the one of the plan ignoring the markers in sight.

    Raises:
      InvalidInputError: radii not positive and ascending
    """
    if not radii or any(r <= 0.0 for r in radii) or any(
        b <= a for a, b in zip(radii, radii[1:])
    ):
        raise InvalidInputError(f"radii must be positive and ascending, got {list(radii)}")
    jobs = [
        _SweepJob(structure, list(markers), float(r), pred, params, planner, checker, seed)
        for r in radii
    ]
    if workers <= 1:
        rows = [_sweep_one(job) for job in jobs]
    else:
        with multiprocessing.Pool(min(workers, len(jobs))) as pool:
            rows = pool.map(_sweep_one, jobs)
    for row in rows:
        _logger.info(f"\tr={row.r}: {row.steps} step(s), P(success)={row.p_success:.4f}")
    return SweepTable(rows)
