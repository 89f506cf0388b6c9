"""
Tests the plan_checker module: visibility, replay of plans and
radius sweeps.
"""

import json
import tempfile
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Generator

import pytest

from markerplan.errors import InvalidInputError, PlanValidationError
from markerplan.noise_model import CertaintyParams
from markerplan.plan_checker import (
    CheckerSettings,
    SweepTable,
    check_plan,
    sweep_radius,
)
from markerplan.planner import (
    MoveMarker,
    Plan,
    PlaceBlock,
    initial_markers,
    plan_assembly,
)
from markerplan.structure import Structure, flat_layer
from markerplan.version import __version__
from markerplan.tests import (
    constant_predictor,
    range_predictor,
    sweep_planner_settings,
    two_level_fixture,
    walled_marker_scenario,
)


@pytest.fixture
def get_tmp(request, scope="function") -> Generator[Path, None, None]:
    """
    Returns a temporary directory path
    """
    tmp_dir_ = tempfile.TemporaryDirectory()
    tmp_dir = Path(tmp_dir_.name)
    yield tmp_dir
    tmp_dir_.cleanup()


@pytest.fixture
def params() -> CertaintyParams:
    return CertaintyParams(alpha_m=0.02, c_min=0.95)


@pytest.fixture
def square() -> Structure:
    return flat_layer(2, 2)


@pytest.fixture
def square_plan(square) -> Plan:
    return plan_assembly(square, initial_markers(square, 2), 5.0)


def test_checker_settings() -> None:
    """
    Invalid checker settings
    """
    with pytest.raises(InvalidInputError):
        CheckerSettings(hover_units=0.0)
    with pytest.raises(InvalidInputError):
        CheckerSettings(min_visible=0)
    with pytest.raises(InvalidInputError):
        CheckerSettings(view_cone_deg=180.0)


def test_empty_plan(params, square) -> None:
    """
    Nothing to do: certain success
    """
    plan = Plan(actions=[], markers=initial_markers(square, 2))
    report = check_plan(square, plan, constant_predictor(1e-6), params)
    assert report.steps == []
    assert report.p_success == 1.0
    assert report.min_visible is None
    assert report.all_ok


def test_square_plan(params, square, square_plan) -> None:
    """
    Placements see both markers, moves see the marker not carried
    """
    report = check_plan(
        square, square_plan, constant_predictor(1e-6), params, CheckerSettings(min_visible=1)
    )
    assert [s.op for s in report.steps] == [
        "move_marker",
        "move_marker",
        "place_block",
        "place_block",
        "move_marker",
        "place_block",
        "move_marker",
        "place_block",
    ]
    assert [s.visible for s in report.steps] == [
        [1],
        [2],
        [1, 2],
        [1, 2],
        [2],
        [1, 2],
        [1],
        [1, 2],
    ]
    assert report.all_ok
    assert report.min_visible == 1
    assert report.p_success == pytest.approx(1.0)
    assert all(s.lambda_star is not None for s in report.steps)

    strict = check_plan(square, square_plan, constant_predictor(1e-6), params)
    assert [s.idx for s in strict.failures] == [0, 1, 4, 6]


def test_walled_marker(params) -> None:
    """
    The block tower hides both markers from the last placement
    """
    structure, plan = walled_marker_scenario()
    report = check_plan(structure, plan, constant_predictor(1e-6), params)
    assert [len(s.visible) for s in report.steps] == [2, 2, 2, 0]
    assert [s.idx for s in report.failures] == [3]
    last = report.steps[3]
    assert last.c_star == 0.0
    assert last.lambda_star is None
    assert report.p_success == 0.0
    assert report.min_visible == 0


def test_degraded_predictor(params, square, square_plan) -> None:
    """
    Quadrupling λ* never increases the certainty of a step
    """
    pred = range_predictor(1e-3, lambda_i=1e-6)
    settings = CheckerSettings(min_visible=1)
    report = check_plan(square, square_plan, pred, params, settings)
    degraded = check_plan(square, square_plan, pred.scaled(4.0), params, settings)
    for a, b in zip(report.steps, degraded.steps):
        assert a.visible == b.visible
        assert b.c_star <= a.c_star + 1e-12
    assert degraded.p_success <= report.p_success


@pytest.mark.parametrize(
    "actions, index",
    [
        ([PlaceBlock((5, 5, 0))], 0),
        ([PlaceBlock((0.5, 0.0, 0.0))], 0),
        ([PlaceBlock((0, 0, 0)), PlaceBlock((0, 0, 0))], 1),
        ([MoveMarker(9, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))], 0),
        ([PlaceBlock((1, 1, 0)), MoveMarker(1, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))], 1),
        ([MoveMarker(1, (-1.0, 0.0, 0.0), (0.0, 1.0, 0.0)), PlaceBlock((0, 1, 0))], 1),
    ],
)
def test_invalid_plans(params, square, actions, index) -> None:
    """
    Unknown or repeated slots, unknown markers, markers not where they
    are moved from, slots occupied by a marker
    """
    plan = Plan(actions=actions, markers=initial_markers(square, 2))
    with pytest.raises(PlanValidationError) as error:
        check_plan(square, plan, constant_predictor(1e-6), params)
    assert error.value.index == index


def test_report_file(get_tmp, params, square, square_plan) -> None:
    """
    Report document
    """
    report = check_plan(
        square, square_plan, constant_predictor(1e-6), params, invocation=["markerplan", "check"]
    )
    path = get_tmp / "report.json"
    report.save(path)
    with open(path) as f:
        d = json.load(f)
    assert d["invocation"] == ["markerplan", "check"]
    assert len(d["steps"]) == 8
    assert d["steps"][2] == report.steps[2].to_dict()
    assert d["p_success"] == report.p_success
    assert d["min_visible"] == 1


def test_sweep(get_tmp, params, square) -> None:
    """
    One row per radius, P = 0 when planning fails, CSV round trip
    and SVG plot
    """
    markers = initial_markers(square, 2)
    table = sweep_radius(
        square,
        [0.5, 5.0],
        markers,
        constant_predictor(1e-6),
        params,
        checker=CheckerSettings(min_visible=1),
    )
    assert [row.r for row in table.rows] == [0.5, 5.0]
    assert table.rows[0].p_success == 0.0
    assert table.rows[0].steps == 0
    assert table.rows[1].p_success == pytest.approx(1.0)
    assert table.rows[1].steps == 8

    csv_path = get_tmp / "sweep.csv"
    table.write_csv(csv_path, ["markerplan", "sweep", "--seed", "0"])
    lines = csv_path.read_text().splitlines()
    assert lines[0] == (
        f"# markerplan {__version__}, sweep format 1, invocation: markerplan sweep --seed 0"
    )
    assert lines[1] == "r,p_success,steps"
    assert SweepTable.read_csv(csv_path) == table
    table.write_csv(csv_path)
    assert csv_path.read_text().splitlines()[0] == f"# markerplan {__version__}, sweep format 1"
    assert SweepTable.read_csv(csv_path) == table

    svg_path = get_tmp / "sweep.svg"
    table.write_svg(svg_path)
    assert ET.parse(svg_path).getroot().tag.endswith("svg")


def test_sweep_failing_check(params, square) -> None:
    """
    A plan with a failing step has a probability of success of 0
    """
    table = sweep_radius(
        square, [5.0], initial_markers(square, 2), constant_predictor(1e-6), params
    )
    assert table.rows[0].p_success == 0.0
    assert table.rows[0].steps == 8


@pytest.mark.slow
def test_sweep_fixture(params) -> None:
    """
    Markers seen up to 0.8 m: the probability of success of the two
    level fixture does not increase with the radius, and is 0 once
    the markers of a cluster are out of sight of each other
    """
    structure = two_level_fixture()
    table = sweep_radius(
        structure,
        [1.0, 2.0, 8.0],
        initial_markers(structure, 3),
        constant_predictor(1e-6, rho_bounds=(0.01, 0.8)),
        params,
        sweep_planner_settings(),
    )
    p = [row.p_success for row in table.rows]
    assert p[0] >= 0.999
    assert all(b <= a + 1e-9 for a, b in zip(p, p[1:]))
    assert p[-1] == 0.0


def test_sweep_workers(params, square) -> None:
    """
    Rows do not depend on the number of worker processes
    """
    markers = initial_markers(square, 2)
    pred = constant_predictor(1e-6)
    checker = CheckerSettings(min_visible=1)
    single = sweep_radius(square, [2.0, 5.0], markers, pred, params, checker=checker)
    multi = sweep_radius(square, [2.0, 5.0], markers, pred, params, checker=checker, workers=2)
    assert single == multi


def test_sweep_invalid_radii(params, square) -> None:
    """
    Radii must be positive and ascending
    """
    markers = initial_markers(square, 2)
    for radii in ([], [2.0, 1.0], [0.0, 1.0]):
        with pytest.raises(InvalidInputError):
            sweep_radius(square, radii, markers, constant_predictor(1e-6), params)
