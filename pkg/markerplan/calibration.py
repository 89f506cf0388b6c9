"""
Calibration of the [noise_model.EigenvaluePredictor]() from a simulated
dataset, and evaluation of its conservativeness on held-out positions.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from .camera import CameraModel
from .config import Config
from .config_error import ConfigError
from .errors import CalibrationFloorError, CoverageError, InvalidInputError
from .fiducial_sim import DatasetRecord, SimulationSettings, generate_dataset
from .noise_model import (
    CertaintyParams,
    EigenvaluePredictor,
    certainty_lower_bound,
    fuse_covariances,
    predict_covariance,
    range_and_incidence,
)
from .settings import read_float, read_int, section
from .version import __version__

REPORT_FORMAT_VERSION = 1

# tolerance, in cell units, for a record to lie on a cell boundary
_CELL_SLACK = 1e-9
# C* comparisons below this are ties
_CERTAINTY_SLACK = 1e-12

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationSettings:
    """
    Configuration of the calibration ('calibration' table, and
    lambda_i of the 'noise' table).

    Args:
      rho_bounds: range of the predictor domain (meters)
      theta_bounds_deg: incidence of the predictor domain (degrees)
      n_rho: number of range nodes (of the predictor and of the training grid)
      n_theta: number of incidence nodes
      n_phi: number of azimuths of the training grid
      safety_factor: multiplies the largest λ* of each cell
      conservative_floor: smallest acceptable fraction of conservative
        predictions on the held-out grid
      lambda_i: bound of the two smaller eigenvalues (m²)
    """

    rho_bounds: Tuple[float, float] = (0.3, 2.0)
    theta_bounds_deg: Tuple[float, float] = (0.0, 75.0)
    n_rho: int = 25
    n_theta: int = 25
    n_phi: int = 10
    safety_factor: float = 1.1
    conservative_floor: float = 0.95
    lambda_i: float = 1e-4

    def __post_init__(self) -> None:
        if len(self.rho_bounds) != 2 or len(self.theta_bounds_deg) != 2:
            raise InvalidInputError("bounds must have two values")
        if self.n_rho < 2 or self.n_theta < 2 or self.n_phi < 1:
            raise InvalidInputError(
                f"grid too small: {self.n_rho}x{self.n_theta}x{self.n_phi}"
            )
        if not self.safety_factor > 0.0:
            raise InvalidInputError(f"safety_factor must be positive, got {self.safety_factor}")
        if not 0.0 <= self.conservative_floor <= 1.0:
            raise InvalidInputError(
                f"conservative_floor must be in [0,1], got {self.conservative_floor}"
            )

    @property
    def theta_bounds(self) -> Tuple[float, float]:
        return (
            math.radians(self.theta_bounds_deg[0]),
            math.radians(self.theta_bounds_deg[1]),
        )

    @classmethod
    def from_config(cls, config: Config) -> "CalibrationSettings":
        table = section(config, "calibration")
        noise = section(config, "noise")
        try:
            return cls(
                rho_bounds=tuple(float(v) for v in table["rho_bounds"]),  # type: ignore
                theta_bounds_deg=tuple(  # type: ignore
                    float(v) for v in table["theta_bounds_deg"]
                ),
                n_rho=read_int(table, "n_rho", "calibration"),
                n_theta=read_int(table, "n_theta", "calibration"),
                n_phi=read_int(table, "n_phi", "calibration"),
                safety_factor=read_float(table, "safety_factor", "calibration"),
                conservative_floor=read_float(table, "conservative_floor", "calibration"),
                lambda_i=read_float(noise, "lambda_i", "noise"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"calibration: invalid bounds ({e})")
        except InvalidInputError as e:
            raise ConfigError(f"calibration: {e}")


def _spherical(
    rhos: npt.NDArray[np.float64],
    thetas: npt.NDArray[np.float64],
    phis: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    r, t, f = np.meshgrid(rhos, thetas, phis, indexing="ij")
    points = np.stack(
        (r * np.sin(t) * np.cos(f), r * np.sin(t) * np.sin(f), r * np.cos(t)), axis=-1
    )
    return points.reshape(-1, 3)


def training_positions(settings: CalibrationSettings) -> npt.NDArray[np.float64]:
    """
    Relative positions at the predictor nodes, for n_phi evenly spaced
    azimuths (n_rho x n_theta x n_phi positions).
    """
    rhos = np.linspace(*settings.rho_bounds, settings.n_rho)
    thetas = np.linspace(*settings.theta_bounds, settings.n_theta)
    phis = 2.0 * math.pi * np.arange(settings.n_phi) / settings.n_phi
    return _spherical(rhos, thetas, phis)


def held_out_positions(settings: CalibrationSettings) -> npt.NDArray[np.float64]:
    """
    Relative positions offset by half a cell (in range, incidence and
    azimuth) from the training positions, hence disjoint from them
    ((n_rho-1) x (n_theta-1) x max(n_phi-1, 1) positions).
    """
    rhos = np.linspace(*settings.rho_bounds, settings.n_rho)
    thetas = np.linspace(*settings.theta_bounds, settings.n_theta)
    step = 2.0 * math.pi / settings.n_phi
    phis = step * (np.arange(max(settings.n_phi - 1, 1)) + 0.5)
    return _spherical(0.5 * (rhos[1:] + rhos[:-1]), 0.5 * (thetas[1:] + thetas[:-1]), phis)


def _cells(u: float, n_cells: int) -> List[int]:
    # indexes of the (closed) cells containing the coordinate u,
    # expressed in cell units
    nearest = round(u)
    if abs(u - nearest) <= _CELL_SLACK:
        candidates = [nearest - 1, nearest]
    else:
        candidates = [math.floor(u)]
    return [c for c in candidates if 0 <= c < n_cells]


def _boundary(i: int, j: int, shape: Tuple[int, int]) -> bool:
    return i == 0 or j == 0 or i == shape[0] - 1 or j == shape[1] - 1


def fit_predictor(
    dataset: Sequence[DatasetRecord],
    rho_bounds: Tuple[float, float],
    theta_bounds: Tuple[float, float],
    n_rho: int,
    n_theta: int,
    lambda_i: float,
    safety_factor: float,
) -> EigenvaluePredictor:
    """
    Fits a predictor over [rho_bounds] x [theta_bounds] (radians) with
    n_rho x n_theta nodes. Each record contributes its λ* to the cell(s)
    containing its (range, incidence); the value of a node is the safety
    factor times the largest λ* of the cells adjacent to it.
    Empty interior cells take the value of the nearest non empty cell.

    Raises:
      InvalidInputError: no (non skipped) record
      CoverageError: a boundary cell has no record
    """
    measured = [r for r in dataset if r.skipped is None]
    if not measured:
        raise InvalidInputError("can not fit a predictor on an empty dataset")

    shape = (n_rho - 1, n_theta - 1)
    rho_step = (rho_bounds[1] - rho_bounds[0]) / shape[0]
    theta_step = (theta_bounds[1] - theta_bounds[0]) / shape[1]
    cells = np.full(shape, -np.inf)
    outside = 0

    for record in measured:
        rho, theta = range_and_incidence(record.p)
        rows = _cells((rho - rho_bounds[0]) / rho_step, shape[0])
        columns = _cells((theta - theta_bounds[0]) / theta_step, shape[1])
        if not rows or not columns:
            outside += 1
            continue
        for i in rows:
            for j in columns:
                cells[i, j] = max(cells[i, j], record.lambda_star)

    if outside:
        _logger.debug(f"\t{outside} record(s) outside of the predictor domain ignored")

    empty = [(i, j) for i in range(shape[0]) for j in range(shape[1]) if cells[i, j] == -np.inf]
    missing = [c for c in empty if _boundary(*c, shape)]
    if missing:
        raise CoverageError(missing)
    if empty:
        filled = [
            (i, j) for i in range(shape[0]) for j in range(shape[1]) if cells[i, j] != -np.inf
        ]
        values = cells.copy()
        for i, j in empty:
            nearest = min(filled, key=lambda c: ((c[0] - i) ** 2 + (c[1] - j) ** 2, c))
            values[i, j] = cells[nearest]
        cells = values
        _logger.warning(
            f"\t{len(empty)} empty predictor cell(s) filled from their nearest neighbour"
        )

    # cells adjacent to node (a, b): (a-1..a) x (b-1..b)
    padded = np.pad(cells, 1, mode="constant", constant_values=-np.inf)
    nodes = np.maximum.reduce(
        [
            padded[:-1, :-1],
            padded[1:, :-1],
            padded[:-1, 1:],
            padded[1:, 1:],
        ]
    )
    return EigenvaluePredictor(rho_bounds, theta_bounds, safety_factor * nodes, lambda_i)


@dataclass(frozen=True)
class ConservativenessRow:
    p: Tuple[float, float, float]
    lambda_star: float
    predicted_lambda_star: float
    c_measured: float
    c_predicted: float

    @property
    def gap(self) -> float:
        """
        Over-prediction of the certainty (positive when the prediction
        is not conservative).
        """
        return self.c_predicted - self.c_measured

    @property
    def conservative(self) -> bool:
        return self.gap <= _CERTAINTY_SLACK

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": list(self.p),
            "lambda_star": self.lambda_star,
            "predicted_lambda_star": self.predicted_lambda_star,
            "c_measured": self.c_measured,
            "c_predicted": self.c_predicted,
            "conservative": self.conservative,
        }


@dataclass(frozen=True)
class FusedPairCheck:
    """
    Fusion of the two positions with the worst over-predictions.
    """

    indexes: Tuple[int, int]
    c_measured: float
    c_predicted: float

    @property
    def conservative(self) -> bool:
        return self.c_predicted <= self.c_measured + _CERTAINTY_SLACK

    def to_dict(self) -> Dict[str, Any]:
        return {
            "indexes": list(self.indexes),
            "c_measured": self.c_measured,
            "c_predicted": self.c_predicted,
            "conservative": self.conservative,
        }


@dataclass(frozen=True)
class ConservativenessReport:
    rows: List[ConservativenessRow]
    fused_pair: Optional[FusedPairCheck] = None
    invocation: Optional[List[str]] = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def frac_conservative(self) -> float:
        if not self.rows:
            return 1.0
        return sum(1 for r in self.rows if r.conservative) / len(self.rows)

    @property
    def worst_gap(self) -> float:
        return max([0.0] + [r.gap for r in self.rows])

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {
            "version": REPORT_FORMAT_VERSION,
            "markerplan": __version__,
        }
        if self.invocation is not None:
            d["invocation"] = self.invocation
        d.update(
            {
                "n": self.n,
                "frac_conservative": self.frac_conservative,
                "worst_gap": self.worst_gap,
                "fused_pair": self.fused_pair.to_dict() if self.fused_pair else None,
                "rows": [r.to_dict() for r in self.rows],
            }
        )
        return d

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)
            f.write("\n")


def evaluate_conservativeness(
    pred: EigenvaluePredictor,
    held_out: Sequence[DatasetRecord],
    params: CertaintyParams,
    invocation: Optional[Sequence[str]] = None,
) -> ConservativenessReport:
    """
    Compares, for each measured held-out position, the certainty C*
    of the predicted covariance with the one of the measured covariance
    (a prediction is conservative if its C* is not larger).
    The two worst over-predictions are also fused and compared.

    Raises:
      PredictorDomainError: a held-out position is outside of the
        predictor domain
    """
    rows: List[ConservativenessRow] = []
    predicted = []
    measured = []
    for record in held_out:
        if record.skipped is not None or record.cov is None:
            continue
        sigma = predict_covariance(record.p, pred)
        predicted.append(sigma)
        measured.append(record.cov)
        rows.append(
            ConservativenessRow(
                p=record.p,
                lambda_star=record.lambda_star,
                predicted_lambda_star=pred.beta_at(record.p),
                c_measured=certainty_lower_bound(record.cov, params),
                c_predicted=certainty_lower_bound(sigma, params),
            )
        )

    fused_pair = None
    if len(rows) >= 2:
        worst = sorted(range(len(rows)), key=lambda i: (-rows[i].gap, i))[:2]
        first, second = worst
        fused_pair = FusedPairCheck(
            indexes=(first, second),
            c_measured=certainty_lower_bound(
                fuse_covariances([measured[first], measured[second]]), params
            ),
            c_predicted=certainty_lower_bound(
                fuse_covariances([predicted[first], predicted[second]]), params
            ),
        )

    report = ConservativenessReport(
        rows=rows,
        fused_pair=fused_pair,
        invocation=list(invocation) if invocation is not None else None,
    )
    _logger.info(
        f"\tpredictor conservative on {100.0 * report.frac_conservative:.1f}% "
        f"of {report.n} held-out position(s), worst gap {report.worst_gap:.4f}"
    )
    return report


def check_floor(report: ConservativenessReport, floor: float) -> None:
    """
    Raises:
      CalibrationFloorError: the conservative fraction is below floor
    """
    if report.frac_conservative < floor:
        raise CalibrationFloorError(
            f"predictor conservative on {report.frac_conservative:.4f} of the "
            f"held-out positions, required: {floor}"
        )


@dataclass(frozen=True)
class CalibrationResult:
    predictor: EigenvaluePredictor
    report: ConservativenessReport
    training: List[DatasetRecord]
    held_out: List[DatasetRecord]


def calibrate(
    cam: CameraModel,
    settings: CalibrationSettings,
    simulation: SimulationSettings,
    params: CertaintyParams,
    seed: int,
    dataset_path: Optional[Union[str, Path]] = None,
    invocation: Optional[Sequence[str]] = None,
) -> CalibrationResult:
    """
    Generates the training and held-out datasets, fits the predictor
    on the former and evaluates it on the latter. The held-out dataset
    uses the seed 'seed + 1'.
    """
    _logger.info(
        f"\tcalibration grid {settings.n_rho}x{settings.n_theta}x{settings.n_phi}, "
        f"{simulation.trials} trials per position"
    )
    training = generate_dataset(
        cam,
        simulation.marker,
        training_positions(settings),
        simulation.sigma_px,
        simulation.trials,
        seed,
        path=dataset_path,
        workers=simulation.workers,
        invocation=invocation,
    )
    predictor = fit_predictor(
        training,
        settings.rho_bounds,
        settings.theta_bounds,
        settings.n_rho,
        settings.n_theta,
        settings.lambda_i,
        settings.safety_factor,
    )
    held_out = generate_dataset(
        cam,
        simulation.marker,
        held_out_positions(settings),
        simulation.sigma_px,
        simulation.trials,
        seed + 1,
        workers=simulation.workers,
    )
    report = evaluate_conservativeness(predictor, held_out, params, invocation)
    return CalibrationResult(predictor, report, training, held_out)
