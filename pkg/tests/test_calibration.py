"""
Tests the calibration module
"""

import json
import math
import tempfile
from pathlib import Path
from typing import Callable, Generator, List

import numpy as np
import pytest

from markerplan.calibration import (
    CalibrationSettings,
    calibrate,
    check_floor,
    evaluate_conservativeness,
    fit_predictor,
    held_out_positions,
    training_positions,
)
from markerplan.camera import CameraModel
from markerplan.errors import CalibrationFloorError, CoverageError, InvalidInputError
from markerplan.fiducial_sim import DatasetRecord, SimulationSettings
from markerplan.noise_model import CertaintyParams, orthogonal_basis, range_and_incidence
from markerplan.numeric import SymMat3


@pytest.fixture
def get_tmp(request, scope="function") -> Generator[Path, None, None]:
    """
    Returns a temporary directory path
    """
    tmp_dir_ = tempfile.TemporaryDirectory()
    tmp_dir = Path(tmp_dir_.name)
    yield tmp_dir
    tmp_dir_.cleanup()


def _records(positions: np.ndarray, law: Callable[[float, float], float]) -> List[DatasetRecord]:
    # synthetic dataset: λ* given by the law, along p, tiny minor eigenvalues
    records = []
    for p in positions:
        lambda_star = law(*range_and_incidence(p))
        basis = orthogonal_basis(p)
        cov = SymMat3.from_matrix(basis @ np.diag([lambda_star, 1e-9, 1e-9]) @ basis.T)
        records.append(
            DatasetRecord(
                p=tuple(float(v) for v in p),  # type: ignore
                n_trials=100,
                cov=cov,
                lambda_star=lambda_star,
                align_deg=0.0,
            )
        )
    return records


def _fit(settings: CalibrationSettings, records: List[DatasetRecord], safety: float = 1.0):
    return fit_predictor(
        records,
        settings.rho_bounds,
        settings.theta_bounds,
        settings.n_rho,
        settings.n_theta,
        1e-9,
        safety,
    )


def test_grid_sizes() -> None:
    """
    Default training and held-out grids: 6250 and 5184 positions
    """
    settings = CalibrationSettings()
    assert training_positions(settings).shape == (6250, 3)
    assert held_out_positions(settings).shape == (5184, 3)
    small = CalibrationSettings(n_rho=3, n_theta=4, n_phi=1)
    assert training_positions(small).shape == (12, 3)
    assert held_out_positions(small).shape == (6, 3)


def test_constant_field() -> None:
    """
    A constant λ* gives a constant predictor scaled by the safety factor
    """
    settings = CalibrationSettings(n_rho=5, n_theta=4, n_phi=3)
    records = _records(training_positions(settings), lambda rho, theta: 2e-5)
    pred = _fit(settings, records, safety=1.1)
    assert np.allclose(pred.grid, 2.2e-5)
    assert pred.grid.shape == (5, 4)


def test_range_field() -> None:
    """
    λ* proportional to ρ² is reproduced mid-grid, from above
    """
    settings = CalibrationSettings(n_rho=201, n_theta=5, n_phi=1)
    records = _records(training_positions(settings), lambda rho, theta: 1e-4 * rho**2)
    pred = _fit(settings, records)
    for rho in (0.8, 1.15, 1.5):
        beta = pred.beta(rho, math.radians(30.0))
        assert beta >= 1e-4 * rho**2
        assert beta == pytest.approx(1e-4 * rho**2, rel=0.05)
    for record in records:
        assert pred.beta_at(record.p) >= record.lambda_star * (1.0 - 1e-12)


def test_fit_errors() -> None:
    """
    Empty datasets and uncovered boundary cells
    """
    settings = CalibrationSettings(n_rho=4, n_theta=4, n_phi=1)
    with pytest.raises(InvalidInputError):
        _fit(settings, [])
    with pytest.raises(InvalidInputError):
        _fit(settings, [DatasetRecord(p=(0.0, 0.0, 1.0), skipped="VisibilityError")])
    # only records at the smallest range: the far cells are empty
    positions = training_positions(settings)
    near = [p for p in positions if np.linalg.norm(p) < 0.5]
    with pytest.raises(CoverageError) as error:
        _fit(settings, _records(np.array(near), lambda rho, theta: 1e-5))
    assert (2, 0) in error.value.missing


def test_interior_cells_filled() -> None:
    """
    Empty interior cells take the value of their nearest neighbour
    """
    settings = CalibrationSettings(n_rho=5, n_theta=5, n_phi=1)
    rhos = np.linspace(*settings.rho_bounds, 9)
    thetas = np.linspace(*settings.theta_bounds, 9)
    # records in the outer ring of cells only
    positions = []
    for rho in rhos:
        for theta in thetas:
            i = (rho - rhos[0]) / (rhos[-1] - rhos[0])
            j = (theta - thetas[0]) / (thetas[-1] - thetas[0])
            if min(i, j, 1.0 - i, 1.0 - j) < 0.2:
                positions.append(
                    (rho * math.sin(theta), 0.0, rho * math.cos(theta))
                )
    pred = _fit(settings, _records(np.array(positions), lambda rho, theta: 3e-5))
    assert np.allclose(pred.grid, 3e-5)


def test_conservativeness_on_training_data() -> None:
    """
    Evaluated on its own training data, a predictor fitted with a
    safety factor of at least 1 is always conservative
    """
    settings = CalibrationSettings(n_rho=6, n_theta=5, n_phi=2)
    records = _records(
        training_positions(settings), lambda rho, theta: 1e-4 * rho**2 * (1.0 + theta)
    )
    pred = _fit(settings, records, safety=1.0)
    report = evaluate_conservativeness(pred, records, CertaintyParams())
    assert report.n == len(records)
    assert report.frac_conservative == 1.0
    assert report.worst_gap <= 1e-12
    assert report.fused_pair is not None
    assert report.fused_pair.conservative


def test_safety_factor_monotone() -> None:
    """
    Raising the safety factor never decreases the conservative fraction
    """
    settings = CalibrationSettings(n_rho=6, n_theta=5, n_phi=2)
    law = lambda rho, theta: 1e-4 * rho**2 * (1.0 + theta)  # noqa: E731
    training = _records(training_positions(settings), law)
    held_out = _records(held_out_positions(settings), lambda rho, theta: 1.05 * law(rho, theta))
    params = CertaintyParams()
    fractions = [
        evaluate_conservativeness(
            _fit(settings, training, safety), held_out, params
        ).frac_conservative
        for safety in (0.5, 0.9, 1.0, 1.2, 2.0)
    ]
    assert all(b >= a for a, b in zip(fractions, fractions[1:]))
    assert fractions[-1] == 1.0


def test_report(get_tmp) -> None:
    """
    Report document, and floor check
    """
    settings = CalibrationSettings(n_rho=3, n_theta=3, n_phi=1)
    records = _records(training_positions(settings), lambda rho, theta: 1e-4)
    pred = _fit(settings, records, safety=0.5)
    report = evaluate_conservativeness(pred, records, CertaintyParams(), invocation=["test"])
    assert report.frac_conservative == 0.0
    path = get_tmp / "report.json"
    report.save(path)
    with open(path) as f:
        d = json.load(f)
    assert d["invocation"] == ["test"]
    assert d["n"] == 9
    assert len(d["rows"]) == 9
    assert d["worst_gap"] > 0.0
    with pytest.raises(CalibrationFloorError):
        check_floor(report, 0.95)
    check_floor(report, 0.0)


def test_calibrate_small_grid(get_tmp) -> None:
    """
    End to end calibration on a tiny grid: predictor of the
    requested shape, identical for a same seed
    """
    settings = CalibrationSettings(
        rho_bounds=(0.5, 1.5), theta_bounds_deg=(0.0, 40.0), n_rho=3, n_theta=3, n_phi=1
    )
    simulation = SimulationSettings(trials=30)
    cam = CameraModel()
    dataset = get_tmp / "dataset.jsonl"
    result = calibrate(cam, settings, simulation, CertaintyParams(), 4, dataset_path=dataset)
    assert result.predictor.grid.shape == (3, 3)
    assert np.all(result.predictor.grid > 0.0)
    assert len(result.training) == 9
    assert len(result.held_out) == 4
    assert dataset.exists()
    again = calibrate(cam, settings, simulation, CertaintyParams(), 4)
    assert again.predictor == result.predictor
    path_a, path_b = get_tmp / "a.json", get_tmp / "b.json"
    result.predictor.save(path_a, ["markerplan"])
    again.predictor.save(path_b, ["markerplan"])
    assert path_a.read_bytes() == path_b.read_bytes()


@pytest.mark.slow
def test_calibrate_floor() -> None:
    """
    The predictor fitted on a small grid is conservative on enough of
    the held-out positions
    """
    settings = CalibrationSettings(
        rho_bounds=(0.5, 1.5), theta_bounds_deg=(0.0, 40.0), n_rho=4, n_theta=4, n_phi=2
    )
    result = calibrate(
        CameraModel(), settings, SimulationSettings(trials=100), CertaintyParams(), 7
    )
    assert len(result.held_out) == 9
    assert result.report.frac_conservative >= settings.conservative_floor
    check_floor(result.report, settings.conservative_floor)
