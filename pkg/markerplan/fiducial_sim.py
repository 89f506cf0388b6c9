"""
Simulation of fiducial marker detections through a fisheye camera.

The corners of a marker are projected with the [camera.CameraModel](),
perturbed by gaussian pixel noise, undistorted back to rays, and the pose
of the marker is estimated by solving the Perspective-n-Point problem.
Repeating this many times at a relative position yields the empirical
covariance of the estimated marker position, which is what the
calibration of [noise_model.EigenvaluePredictor]() is based on.
"""

import json
import logging
import math
import multiprocessing
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy.spatial.transform import Rotation

from .camera import CameraModel
from .config import Config
from .config_error import ConfigError
from .errors import (
    EstimationError,
    FormatError,
    InvalidInputError,
    SampleSizeError,
    UndistortionError,
    VisibilityError,
)
from .numeric import SymMat3, Vec3, eig_sym3, make_child_rng, make_rng
from .settings import read_float, read_int, section
from .version import __version__

MIN_SAMPLES = 30

_PNP_ITERATIONS = 100
# relative to the norm of the translation (plus one)
_PNP_STEP_TOLERANCE = 1e-9
# relative decrease of the cost below which an accepted step ends the iterations
_PNP_COST_TOLERANCE = 1e-10
_PNP_INITIAL_DAMPING = 1e-6

# largest fraction of the trials of a position for which PnP may fail
MAX_FAILED_FRACTION = 0.1

DATASET_FORMAT_VERSION = 1

_logger = logging.getLogger(__name__)

FACING_CAMERA = np.diag([1.0, -1.0, -1.0])
"""
Orientation (in the camera frame) of a marker parallel to the image
plane and facing the camera.
"""


@dataclass(frozen=True)
class MarkerGeometry:
    """
    Square marker of side 'side_m' meters, corners at (±s/2, ±s/2, 0)
    in the marker frame.
    """

    side_m: float = 0.15

    def __post_init__(self) -> None:
        if not self.side_m > 0.0:
            raise InvalidInputError(f"marker side must be positive, got {self.side_m}")

    @property
    def corners(self) -> npt.NDArray[np.float64]:
        h = 0.5 * self.side_m
        return np.array(
            [[-h, h, 0.0], [h, h, 0.0], [h, -h, 0.0], [-h, -h, 0.0]], dtype=float
        )


@dataclass(frozen=True)
class Pose:
    """
    Pose of a marker in the camera frame: a point x of the marker
    frame is at rotation @ x + translation.
    """

    rotation: npt.NDArray[np.float64]
    translation: npt.NDArray[np.float64]

    def transform(self, points: npt.ArrayLike) -> npt.NDArray[np.float64]:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def facing_pose(p: Vec3) -> Pose:
    """
    Pose of a marker centered at p, facing the camera.
    """
    return Pose(rotation=FACING_CAMERA.copy(), translation=np.asarray(p, dtype=float).copy())


@dataclass(frozen=True)
class DetectionSample:
    """
    One simulated detection.

    Args:
      true_pose: the pose the corners were generated from
      estimated_position: translation of the pose estimated by PnP
      residuals_px: per corner, reprojection of the estimated pose
        minus the noisy pixel (shape (4, 2))
    """

    true_pose: Pose
    estimated_position: npt.NDArray[np.float64]
    residuals_px: npt.NDArray[np.float64]


@dataclass(frozen=True)
class PnpResult:
    pose: Pose
    rms: float
    iterations: int
    converged: bool = True


def _skew(v: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    # cross product matrices of the vectors v (shape (..., 3))
    zero = np.zeros(v.shape[:-1])
    return np.stack(
        (
            np.stack((zero, -v[..., 2], v[..., 1]), axis=-1),
            np.stack((v[..., 2], zero, -v[..., 0]), axis=-1),
            np.stack((-v[..., 1], v[..., 0], zero), axis=-1),
        ),
        axis=-2,
    )


def _residuals(
    rotations: npt.NDArray[np.float64],
    translations: npt.NDArray[np.float64],
    corners: npt.NDArray[np.float64],
    rays: npt.NDArray[np.float64],
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    # Returns the rotated corners (T,4,3), the predicted directions (T,4,3)
    # and the residuals (T,12).
    rotated = np.einsum("tij,cj->tci", rotations, corners)
    points = rotated + translations[:, None, :]
    norms = np.linalg.norm(points, axis=-1, keepdims=True)
    directions = points / norms
    residuals = (directions - rays).reshape(len(rotations), -1)
    return rotated, directions, residuals


def solve_pnp_rays(
    rays: npt.ArrayLike,
    marker: MarkerGeometry,
    init: Union[Pose, Sequence[Pose]],
    require_convergence: bool = True,
) -> List[PnpResult]:
    """
    Estimates marker poses from the undistorted rays of its corners,
    by Levenberg damped Gauss-Newton minimization of the distance between
    the observed rays and the directions of the corners on the unit sphere.
    Solves several problems at once: rays has shape (T, n_corners, 3),
    and init is one pose per problem (or a single pose shared by all).
    Each problem stops on its own, when its step becomes small relative
    to its translation or when an accepted step barely decreases its cost.

    Arguments:
      require_convergence: if False, problems which did not converge
        are returned with their 'converged' flag unset instead of raising

    Raises:
      EstimationError: (require_convergence only) a problem did not
        converge after 100 iterations
    """
    b = np.asarray(rays, dtype=float)
    if b.ndim == 2:
        b = b[None]
    n_problems, n_corners = b.shape[0], b.shape[1]
    corners = marker.corners
    if n_corners != len(corners):
        raise InvalidInputError(f"expected {len(corners)} corner rays, got {n_corners}")
    inits = [init] * n_problems if isinstance(init, Pose) else list(init)
    if len(inits) != n_problems:
        raise InvalidInputError(f"expected {n_problems} initial poses, got {len(inits)}")

    rotations = np.stack([p.rotation for p in inits]).astype(float)
    translations = np.stack([p.translation for p in inits]).astype(float)
    damping = np.full(n_problems, _PNP_INITIAL_DAMPING)
    converged = np.zeros(n_problems, dtype=bool)
    iterations = np.zeros(n_problems, dtype=int)
    identity = np.eye(3)

    rotated, directions, residuals = _residuals(rotations, translations, corners, b)
    cost = np.einsum("ti,ti->t", residuals, residuals)

    for iteration in range(1, _PNP_ITERATIONS + 1):
        active = ~converged
        if not np.any(active):
            break
        iterations[active] = iteration
        points = rotated + translations[:, None, :]
        norms = np.linalg.norm(points, axis=-1)
        projector = (
            identity - np.einsum("tci,tcj->tcij", directions, directions)
        ) / norms[..., None, None]
        # d X / d (ω, t) = [ -[Rc]x | I ]
        dx = np.concatenate(
            (-_skew(rotated), np.broadcast_to(identity, rotated.shape[:2] + (3, 3))),
            axis=-1,
        )
        jacobian = np.einsum("tcij,tcjk->tcik", projector, dx).reshape(n_problems, -1, 6)
        normal = np.einsum("tri,trj->tij", jacobian, jacobian)
        gradient = np.einsum("tri,tr->ti", jacobian, residuals)
        steps = -np.linalg.solve(
            normal + damping[:, None, None] * np.eye(6), gradient[..., None]
        )[..., 0]

        scale = 1.0 + np.linalg.norm(translations, axis=-1)
        small = np.linalg.norm(steps, axis=-1) < _PNP_STEP_TOLERANCE * scale
        converged |= active & small
        update = active & ~small
        if not np.any(update):
            continue

        new_rotations = rotations.copy()
        new_translations = translations.copy()
        new_rotations[update] = (
            Rotation.from_rotvec(steps[update, :3]).as_matrix() @ rotations[update]
        )
        new_translations[update] = translations[update] + steps[update, 3:]
        new_rotated, new_directions, new_residuals = _residuals(
            new_rotations, new_translations, corners, b
        )
        new_cost = np.einsum("ti,ti->t", new_residuals, new_residuals)
        accept = update & (new_cost <= cost)
        reject = update & ~accept
        stalled = accept & (cost - new_cost <= _PNP_COST_TOLERANCE * cost)

        rotations[accept] = new_rotations[accept]
        translations[accept] = new_translations[accept]
        rotated[accept] = new_rotated[accept]
        directions[accept] = new_directions[accept]
        residuals[accept] = new_residuals[accept]
        cost[accept] = new_cost[accept]
        damping[accept] = np.maximum(damping[accept] * 0.1, 1e-12)
        damping[reject] = damping[reject] * 10.0
        converged |= stalled

    if require_convergence and not np.all(converged):
        failed = int(np.count_nonzero(~converged))
        raise EstimationError(
            f"PnP did not converge after {_PNP_ITERATIONS} iterations ({failed} problem(s))"
        )

    rms = np.sqrt(cost / n_corners)
    return [
        PnpResult(
            pose=Pose(rotation=rotations[i], translation=translations[i]),
            rms=float(rms[i]),
            iterations=int(iterations[i]),
            converged=bool(converged[i]),
        )
        for i in range(n_problems)
    ]


def solve_pnp(
    corners_px: npt.ArrayLike,
    marker: MarkerGeometry,
    cam: CameraModel,
    init: Pose,
) -> PnpResult:
    """
    Estimates the pose of a marker from the pixel coordinates of its
    (ordered) corners. The reported rms is the angular residual (radians)
    of the corner rays.

    Raises:
      UndistortionError: a corner could not be undistorted
      EstimationError: no convergence
    """
    px = np.asarray(corners_px, dtype=float)
    if px.shape[0] < 4:
        raise InvalidInputError(f"PnP requires at least 4 corners, got {px.shape[0]}")
    return solve_pnp_rays(cam.unproject_points(px), marker, init)[0]


def _corner_pixels(
    cam: CameraModel, marker: MarkerGeometry, pose: Pose
) -> npt.NDArray[np.float64]:
    pixels, valid = cam.project_points(pose.transform(marker.corners))
    if not np.all(valid) or not np.all(cam.in_image(pixels)):
        raise VisibilityError(
            f"marker at {pose.translation.tolist()} is not fully visible in the image"
        )
    return pixels


def simulate_detection(
    cam: CameraModel,
    marker: MarkerGeometry,
    pose: Pose,
    sigma_px: float,
    seed: int,
) -> DetectionSample:
    """
    Simulates a single detection of the marker at the given pose, with
    pixel noise of standard deviation sigma_px on each corner coordinate.
    PnP is initialized at the true pose.

    Raises:
      VisibilityError: a corner is not in the image
    """
    pixels = _corner_pixels(cam, marker, pose)
    noisy = pixels + sigma_px * make_rng(seed).standard_normal(pixels.shape)
    result = solve_pnp(noisy, marker, cam, pose)
    reprojected, _ = cam.project_points(result.pose.transform(marker.corners))
    return DetectionSample(
        true_pose=pose,
        estimated_position=result.pose.translation,
        residuals_px=reprojected - noisy,
    )


def simulate_positions(
    cam: CameraModel,
    marker: MarkerGeometry,
    pose: Pose,
    sigma_px: float,
    trials: int,
    rng: np.random.Generator,
) -> npt.NDArray[np.float64]:
    """
    Estimated marker positions over 'trials' independent simulated
    detections. Trials for which PnP does not converge are dropped,
    so that fewer than 'trials' rows (shape (n, 3)) may be returned.

    Raises:
      VisibilityError: a corner is not in the image
      EstimationError: PnP failed on more than 10% of the trials, or on
        so many that fewer than 30 remain
    """
    pixels = _corner_pixels(cam, marker, pose)
    noisy = pixels[None] + sigma_px * rng.standard_normal((trials,) + pixels.shape)
    rays = cam.unproject_points(noisy)
    results = solve_pnp_rays(rays, marker, pose, require_convergence=False)
    kept = [r.pose.translation for r in results if r.converged]
    failed = trials - len(kept)
    if failed > MAX_FAILED_FRACTION * trials or len(kept) < MIN_SAMPLES:
        raise EstimationError(
            f"PnP did not converge for {failed} of {trials} trial(s) "
            f"at {pose.translation.tolist()}"
        )
    if failed:
        _logger.debug(f"\t{failed} of {trials} trial(s) dropped at {pose.translation.tolist()}")
    return np.stack(kept)


def empirical_covariance(
    samples: Union[Sequence[DetectionSample], npt.ArrayLike]
) -> Tuple[SymMat3, npt.NDArray[np.float64]]:
    """
    Unbiased sample covariance of the estimated positions, and their mean.

    Arguments:
      samples: detection samples, or an array of positions of shape (n, 3)

    Raises:
      SampleSizeError: less than 30 samples
    """
    if len(samples) and isinstance(samples[0], DetectionSample):  # type: ignore
        positions = np.stack([s.estimated_position for s in samples])  # type: ignore
    else:
        positions = np.asarray(samples, dtype=float).reshape(-1, 3)
    if len(positions) < MIN_SAMPLES:
        raise SampleSizeError(
            f"at least {MIN_SAMPLES} samples are required, got {len(positions)}"
        )
    cov = np.cov(positions, rowvar=False, ddof=1)
    return SymMat3.from_matrix(cov), positions.mean(axis=0)


def alignment_deg(vector: Vec3, p: Vec3) -> float:
    """
    Angle (degrees, in [0, 90]) between the lines spanned by vector and p.
    """
    v = np.asarray(vector, dtype=float)
    q = np.asarray(p, dtype=float)
    cos = abs(float(v @ q)) / (float(np.linalg.norm(v)) * float(np.linalg.norm(q)))
    return math.degrees(math.acos(min(1.0, cos)))


@dataclass(frozen=True)
class SimulationSettings:
    """
    Configuration of the detection simulator ('simulation' table).
    """

    marker_side_m: float = 0.15
    sigma_px: float = 0.5
    trials: int = 200
    workers: int = 1

    def __post_init__(self) -> None:
        if self.sigma_px < 0.0:
            raise InvalidInputError(f"sigma_px must be non negative, got {self.sigma_px}")
        if self.trials < MIN_SAMPLES:
            raise InvalidInputError(
                f"at least {MIN_SAMPLES} trials are required, got {self.trials}"
            )
        if self.workers < 1:
            raise InvalidInputError(f"workers must be at least 1, got {self.workers}")

    @property
    def marker(self) -> MarkerGeometry:
        return MarkerGeometry(self.marker_side_m)

    @classmethod
    def from_config(cls, config: Config) -> "SimulationSettings":
        table = section(config, "simulation")
        try:
            return cls(
                marker_side_m=read_float(table, "marker_side_m", "simulation"),
                sigma_px=read_float(table, "sigma_px", "simulation"),
                trials=read_int(table, "trials", "simulation"),
                workers=read_int(table, "workers", "simulation"),
            )
        except InvalidInputError as e:
            raise ConfigError(f"simulation: {e}")


@dataclass(frozen=True)
class DatasetRecord:
    """
    Noise measured at the relative position p: covariance (m²) of the
    estimated positions over n_trials detections, its largest eigenvalue
    and the angle between the corresponding eigenvector and p.
    A record of an invisible position has 'skipped' set to the reason
    and no measurement.
    """

    p: Tuple[float, float, float]
    n_trials: int = 0
    cov: Optional[SymMat3] = None
    lambda_star: float = 0.0
    align_deg: float = 0.0
    skipped: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        if self.skipped is not None:
            return {"p": list(self.p), "skipped": self.skipped}
        assert self.cov is not None
        return {
            "p": list(self.p),
            "n_trials": self.n_trials,
            "cov": list(self.cov.upper()),
            "lambda_star": self.lambda_star,
            "align_deg": self.align_deg,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "DatasetRecord":
        try:
            p = tuple(float(v) for v in d["p"])
            if len(p) != 3:
                raise ValueError(f"position {d['p']} is not 3D")
            if "skipped" in d:
                return cls(p=p, skipped=str(d["skipped"]))  # type: ignore
            return cls(
                p=p,  # type: ignore
                n_trials=int(d["n_trials"]),
                cov=SymMat3.from_upper(d["cov"]),
                lambda_star=float(d["lambda_star"]),
                align_deg=float(d["align_deg"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid dataset record ({type(e).__name__}: {e})")


def measure_position(
    cam: CameraModel,
    marker: MarkerGeometry,
    p: Vec3,
    sigma_px: float,
    trials: int,
    rng: np.random.Generator,
) -> DatasetRecord:
    """
    Simulates 'trials' detections of a marker facing the camera at p.
    Invisible positions (and positions for which the simulation fails)
    yield a skipped record.
    """
    position = tuple(float(v) for v in p)
    try:
        estimates = simulate_positions(cam, marker, facing_pose(p), sigma_px, trials, rng)
    except (VisibilityError, UndistortionError, EstimationError) as e:
        return DatasetRecord(p=position, skipped=f"{type(e).__name__}: {e}")  # type: ignore
    cov, _ = empirical_covariance(estimates)
    decomposition = eig_sym3(cov)
    return DatasetRecord(
        p=position,  # type: ignore
        n_trials=len(estimates),
        cov=cov,
        lambda_star=decomposition.largest,
        align_deg=alignment_deg(decomposition.principal, p),
    )


def _measure_indexed(
    args: Tuple[int, Tuple[float, float, float], CameraModel, MarkerGeometry, float, int, int]
) -> DatasetRecord:
    index, p, cam, marker, sigma_px, trials, seed = args
    return measure_position(cam, marker, p, sigma_px, trials, make_child_rng(seed, index))


def iter_dataset(
    cam: CameraModel,
    marker: MarkerGeometry,
    positions: npt.ArrayLike,
    sigma_px: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> Iterator[DatasetRecord]:
    """
    Yields the records of the positions (shape (n, 3)), in order.
    The random stream of a position depends only on the seed and on
    its index, so the records do not depend on the number of workers.
    """
    jobs = (
        (index, tuple(float(v) for v in p), cam, marker, sigma_px, trials, seed)
        for index, p in enumerate(np.asarray(positions, dtype=float).reshape(-1, 3))
    )
    if workers <= 1:
        for job in jobs:
            yield _measure_indexed(job)  # type: ignore
        return
    with multiprocessing.Pool(workers) as pool:
        for record in pool.imap(_measure_indexed, jobs, chunksize=16):
            yield record


def write_dataset(
    records: Iterable[DatasetRecord],
    stream: IO[str],
    invocation: Optional[Sequence[str]] = None,
) -> List[DatasetRecord]:
    """
    Writes the records as json lines (preceded by a header line if an
    invocation is given) and returns them.
    """
    if invocation is not None:
        header = {
            "header": {
                "version": DATASET_FORMAT_VERSION,
                "markerplan": __version__,
                "invocation": list(invocation),
            }
        }
        stream.write(json.dumps(header) + "\n")
    written = []
    for record in records:
        stream.write(json.dumps(record.to_dict()) + "\n")
        written.append(record)
    return written


def generate_dataset(
    cam: CameraModel,
    marker: MarkerGeometry,
    positions: npt.ArrayLike,
    sigma_px: float,
    trials: int,
    seed: int,
    path: Optional[Union[str, Path]] = None,
    workers: int = 1,
    invocation: Optional[Sequence[str]] = None,
) -> List[DatasetRecord]:
    """
    Measures the noise at each of the positions, and (optionally)
    streams the records to the json lines file 'path'.
    """
    records = iter_dataset(cam, marker, positions, sigma_px, trials, seed, workers)
    if path is None:
        result = list(records)
    else:
        with open(path, "w") as f:
            result = write_dataset(records, f, invocation)
    skipped = sum(1 for r in result if r.skipped is not None)
    if skipped:
        _logger.warning(f"\t{skipped} of {len(result)} dataset position(s) skipped")
    _logger.info(f"\tdataset of {len(result)} position(s) generated")
    return result


def read_dataset(path: Union[str, Path]) -> List[DatasetRecord]:
    """
    Reads a dataset file written by [generate_dataset]().
    """
    records = []
    with open(path, "r") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path} line {line_number}: {e}")
            if "header" in d:
                continue
            records.append(DatasetRecord.from_dict(d))
    return records
