"""
Fixtures shared by the unit tests: analytic predictors, small
structures with hand checked plans, and random covariances.
"""

import math
from typing import List, Tuple

import numpy as np

from .noise_model import EigenvaluePredictor
from .numeric import SymMat3
from .planner import MarkerState, Plan, PlaceBlock, PlannerSettings
from .structure import Slot, Structure, block


def constant_predictor(
    beta: float,
    lambda_i: float = 1e-6,
    rho_bounds: Tuple[float, float] = (0.01, 3.0),
    theta_max_deg: float = 89.0,
) -> EigenvaluePredictor:
    """
    Predictor with the same λ* everywhere.
    """
    return EigenvaluePredictor.from_function(
        lambda rho, theta: beta,
        rho_bounds,
        (0.0, math.radians(theta_max_deg)),
        lambda_i,
        grid=(5, 5),
    )


def range_predictor(
    gain: float,
    power: float = 2.0,
    lambda_i: float = 1e-6,
    rho_bounds: Tuple[float, float] = (0.01, 3.0),
    theta_max_deg: float = 89.0,
) -> EigenvaluePredictor:
    """
    Predictor with λ* = max(gain * ρ^power, lambda_i).
    """
    return EigenvaluePredictor.from_function(
        lambda rho, theta: max(gain * rho**power, lambda_i),
        rho_bounds,
        (0.0, math.radians(theta_max_deg)),
        lambda_i,
        grid=(60, 10),
    )


def two_level_fixture(unit_m: float = 0.2) -> Structure:
    """
    10 x 10 base, two levels: 200 slots.
    """
    return block(10, 10, 2, unit_m)


def sweep_planner_settings() -> PlannerSettings:
    """
    Cluster extent measured from the cluster centroid, so that
    three markers fit in clusters of radius 1.
    """
    return PlannerSettings(extent="radius")


def random_psd(
    rng: np.random.Generator, scale: float = 1e-4, minor_ratio: float = 1.0
) -> SymMat3:
    """
    Random positive definite matrix of largest eigenvalue up to 'scale'
    and minor eigenvalues at most minor_ratio times the largest one.
    """
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    largest = scale * rng.uniform(0.1, 1.0)
    minors = largest * minor_ratio * rng.uniform(0.01, 1.0, size=2)
    return SymMat3.from_matrix(q @ np.diag([largest, *minors]) @ q.T)


def walled_marker_scenario() -> Tuple[Structure, Plan]:
    """
    A tower of three blocks between the markers and the last slot:
    the camera placing the last block sees no marker.
    """
    structure = Structure(
        [Slot(1, 0, 0), Slot(1, 0, 1), Slot(1, 0, 2), Slot(2, 0, 0)], unit_m=0.2
    )
    markers = [MarkerState(1, (0.0, 0.0, 0.0)), MarkerState(2, (-1.0, 0.0, 0.0))]
    actions: List = [
        PlaceBlock((1, 0, 0)),
        PlaceBlock((1, 0, 1)),
        PlaceBlock((1, 0, 2)),
        PlaceBlock((2, 0, 0)),
    ]
    return structure, Plan(actions=actions, markers=markers)
