"""
Uncertainty core of markerplan: prediction of the positional noise
covariance of a marker from its position relative to the camera,
fusion of the covariances of several markers, the closed form
certainty bound C* and the coverage radius of markers.

Relative positions are expressed in the camera frame, in meters,
the optical axis being +z.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy.interpolate import RegularGridInterpolator

from .config import Config
from .config_error import ConfigError
from .errors import (
    FormatError,
    InfeasibleError,
    InvalidInputError,
    NearSingularError,
    PredictorDomainError,
)
from .numeric import PSD_EPS, SymMat3, Vec3, eig_sym3, erf
from .settings import read_float, read_int, section

PREDICTOR_FORMAT_VERSION = 1

NEAR_SINGULAR_RCOND = 1e-12

# slack on the domain bounds absorbing rounding of computed ranges / angles
_DOMAIN_SLACK = 1e-9

_logger = logging.getLogger(__name__)

_BELOW_ONE = math.nextafter(1.0, 0.0)

CAMERA_DOWN = np.diag([1.0, -1.0, -1.0])
"""
Rotation from the world frame to the frame of a camera looking
straight down (optical axis along the world -z axis).
"""


def range_and_incidence(p: Vec3) -> Tuple[float, float]:
    """
    Range (norm) of p and its angle (radians) to the optical axis.
    """
    x, y, z = (float(v) for v in p)
    return math.sqrt(x * x + y * y + z * z), math.atan2(math.hypot(x, y), z)


@dataclass(frozen=True)
class CertaintyParams:
    """
    Args:
      alpha_m: acceptance radius of a slot (meters)
      c_min: probability of success required at each step
    """

    alpha_m: float = 0.02
    c_min: float = 0.95

    def __post_init__(self) -> None:
        if not self.alpha_m > 0.0:
            raise InvalidInputError(f"alpha_m must be positive, got {self.alpha_m}")
        if not 0.0 < self.c_min < 1.0:
            raise InvalidInputError(f"c_min must be in (0,1), got {self.c_min}")

    @classmethod
    def from_config(cls, config: Config) -> "CertaintyParams":
        table = section(config, "certainty")
        try:
            return cls(
                alpha_m=read_float(table, "alpha_m", "certainty"),
                c_min=read_float(table, "c_min", "certainty"),
            )
        except InvalidInputError as e:
            raise ConfigError(f"certainty: {e}")


class EigenvaluePredictor:
    """
    Calibrated predictor of the largest eigenvalue λ* (m²) of the noise
    covariance of a marker, as a function of its range ρ (meters) and
    incidence angle θ (radians). Values are bilinearly interpolated
    on a regular grid of nodes; queries outside of the grid are errors.

    Args:
      rho_bounds: (ρ_min, ρ_max)
      theta_bounds: (θ_min, θ_max), radians
      grid: λ* at the nodes, shape (n_rho, n_theta), nodes evenly spaced
      lambda_i: upper bound of the two smaller eigenvalues (m²)
    """

    def __init__(
        self,
        rho_bounds: Tuple[float, float],
        theta_bounds: Tuple[float, float],
        grid: npt.ArrayLike,
        lambda_i: float,
    ) -> None:
        values = np.array(grid, dtype=float)
        if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] < 2:
            raise InvalidInputError(
                f"predictor grid must have at least 2x2 nodes, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise InvalidInputError("predictor grid values must be finite and non negative")
        if not lambda_i > 0.0:
            raise InvalidInputError(f"lambda_i must be positive, got {lambda_i}")
        rho_min, rho_max = (float(b) for b in rho_bounds)
        theta_min, theta_max = (float(b) for b in theta_bounds)
        if not 0.0 < rho_min < rho_max:
            raise InvalidInputError(f"invalid range bounds: {rho_bounds}")
        if not 0.0 <= theta_min < theta_max < math.pi:
            raise InvalidInputError(f"invalid incidence bounds: {theta_bounds}")
        self._rho_bounds = (rho_min, rho_max)
        self._theta_bounds = (theta_min, theta_max)
        self._grid = values
        self._grid.setflags(write=False)
        self._lambda_i = float(lambda_i)
        self._interpolator = RegularGridInterpolator(
            (self.rho_nodes, self.theta_nodes),
            values,
            method="linear",
            bounds_error=True,
        )

    @property
    def rho_bounds(self) -> Tuple[float, float]:
        return self._rho_bounds

    @property
    def theta_bounds(self) -> Tuple[float, float]:
        return self._theta_bounds

    @property
    def grid(self) -> npt.NDArray[np.float64]:
        return self._grid

    @property
    def lambda_i(self) -> float:
        return self._lambda_i

    @property
    def rho_nodes(self) -> npt.NDArray[np.float64]:
        return np.linspace(*self._rho_bounds, self._grid.shape[0])

    @property
    def theta_nodes(self) -> npt.NDArray[np.float64]:
        return np.linspace(*self._theta_bounds, self._grid.shape[1])

    @classmethod
    def from_function(
        cls,
        fn: Callable[[float, float], float],
        rho_bounds: Tuple[float, float],
        theta_bounds: Tuple[float, float],
        lambda_i: float,
        grid: Tuple[int, int] = (50, 50),
    ) -> "EigenvaluePredictor":
        """
        Predictor tabulating fn(ρ, θ) at the grid nodes.
        """
        rhos = np.linspace(*rho_bounds, grid[0])
        thetas = np.linspace(*theta_bounds, grid[1])
        values = [[fn(float(r), float(t)) for t in thetas] for r in rhos]
        return cls(rho_bounds, theta_bounds, values, lambda_i)

    def scaled(self, factor: float) -> "EigenvaluePredictor":
        """
        Predictor with all λ* multiplied by factor.
        """
        return EigenvaluePredictor(
            self._rho_bounds, self._theta_bounds, self._grid * factor, self._lambda_i
        )

    def in_domain(self, rho: float, theta: float) -> bool:
        try:
            self._clamp(rho, theta)
        except PredictorDomainError:
            return False
        return True

    def _clamp(self, rho: float, theta: float) -> Tuple[float, float]:
        checks = (
            ("rho_min", rho, self._rho_bounds[0], -1.0),
            ("rho_max", rho, self._rho_bounds[1], 1.0),
            ("theta_min", theta, self._theta_bounds[0], -1.0),
            ("theta_max", theta, self._theta_bounds[1], 1.0),
        )
        for bound, value, limit, direction in checks:
            if not math.isfinite(value) or direction * (value - limit) > _DOMAIN_SLACK * max(
                1.0, abs(limit)
            ):
                raise PredictorDomainError(bound, value, limit)
        rho = min(max(rho, self._rho_bounds[0]), self._rho_bounds[1])
        theta = min(max(theta, self._theta_bounds[0]), self._theta_bounds[1])
        return rho, theta

    def beta(self, rho: float, theta: float) -> float:
        """
        λ* (m²) at range rho (meters) and incidence theta (radians).

        Raises:
          PredictorDomainError: query outside of the bounds
        """
        rho, theta = self._clamp(rho, theta)
        return float(self._interpolator([[rho, theta]])[0])

    def beta_at(self, p: Vec3) -> float:
        """
        λ* for a relative position p (camera frame).
        """
        return self.beta(*range_and_incidence(p))

    def to_dict(self, invocation: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        d: Dict[str, Any] = {
            "version": PREDICTOR_FORMAT_VERSION,
            "rho_bounds": list(self._rho_bounds),
            "theta_bounds": list(self._theta_bounds),
            "grid": self._grid.tolist(),
            "lambda_i": self._lambda_i,
        }
        if invocation is not None:
            d["invocation"] = list(invocation)
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "EigenvaluePredictor":
        try:
            version = d["version"]
            if version != PREDICTOR_FORMAT_VERSION:
                raise FormatError(f"unsupported predictor format version: {version}")
            return cls(
                tuple(d["rho_bounds"]),  # type: ignore
                tuple(d["theta_bounds"]),  # type: ignore
                d["grid"],
                d["lambda_i"],
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid predictor document ({type(e).__name__}: {e})")

    def save(self, path: Union[str, Path], invocation: Optional[Sequence[str]] = None) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(invocation), f, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EigenvaluePredictor":
        with open(path, "r") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"predictor file {path} is not valid json: {e}")
        return cls.from_dict(d)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EigenvaluePredictor):
            return NotImplemented
        return (
            self._rho_bounds == other._rho_bounds
            and self._theta_bounds == other._theta_bounds
            and self._lambda_i == other._lambda_i
            and np.array_equal(self._grid, other._grid)
        )

    def __repr__(self) -> str:
        return (
            f"EigenvaluePredictor(rho_bounds={self._rho_bounds}, "
            f"theta_bounds={self._theta_bounds}, grid={self._grid.shape}, "
            f"lambda_i={self._lambda_i})"
        )


def orthogonal_basis(p: Vec3) -> npt.NDArray[np.float64]:
    """
    Orthonormal basis (as columns) whose first vector is p / |p|.
    The second one is the normalized cross product of p with the
    coordinate axis least parallel to p.
    """
    v = np.asarray(p, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not math.isfinite(norm):
        raise InvalidInputError(f"can not build a basis from {p}")
    v1 = v / norm
    e = np.zeros(3)
    e[int(np.argmin(np.abs(v1)))] = 1.0
    v2 = np.cross(v1, e)
    v2 /= np.linalg.norm(v2)
    v3 = np.cross(v1, v2)
    return np.column_stack((v1, v2, v3))


def predict_covariance(p: Vec3, pred: EigenvaluePredictor) -> SymMat3:
    """
    Covariance (m²) of the position of a marker at relative position p,
    with largest eigenvalue β(p) along p and the two others equal to λ_i.

    Raises:
      PredictorDomainError: p outside of the predictor domain
    """
    basis = orthogonal_basis(p)
    s = np.diag([pred.beta_at(p), pred.lambda_i, pred.lambda_i])
    return SymMat3.from_matrix(basis @ s @ basis.T)


def rotate_covariance(sigma: SymMat3, rotation: npt.ArrayLike) -> SymMat3:
    """
    R Σ Rᵀ
    """
    r = np.asarray(rotation, dtype=float)
    return SymMat3.from_matrix(r @ sigma.matrix() @ r.T)


def fuse_covariances(sigmas: Sequence[SymMat3], eps: float = PSD_EPS) -> SymMat3:
    """
    Fuses the covariances of independent position estimates:
    starting from the first covariance Σ, for each following Σ_i,
    K = Σ(Σ+Σ_i)⁻¹ and Σ ← Σ - KΣ.

    Raises:
      InvalidInputError: empty list, or one of the matrices is not
        positive semidefinite
      NearSingularError: (near) singular Σ + Σ_i
    """
    if not sigmas:
        raise InvalidInputError("can not fuse an empty list of covariances")
    for index, sigma in enumerate(sigmas):
        if not sigma.is_psd(eps):
            raise InvalidInputError(f"covariance {index} is not positive semidefinite")
    fused = sigmas[0].matrix()
    for index, sigma in enumerate(sigmas[1:], start=1):
        total = fused + sigma.matrix()
        with np.errstate(divide="ignore", invalid="ignore"):
            condition = np.linalg.cond(total)
        rcond = 0.0 if not np.isfinite(condition) else 1.0 / condition
        if rcond < NEAR_SINGULAR_RCOND:
            raise NearSingularError(index, rcond)
        # K Σ = Σ (Σ+Σ_i)⁻¹ Σ
        fused = fused - fused @ np.linalg.solve(total, fused)
        fused = 0.5 * (fused + fused.T)
    return SymMat3.from_matrix(fused)


def certainty_from_eigenvalue(lambda_star: float, params: CertaintyParams) -> float:
    """
    erf(α / (√λ* √2))³, 1 if λ* is zero. For positive λ* the value is
    kept below 1 (erf rounds to 1 in double precision for small λ*).
    """
    if lambda_star <= 0.0:
        return 1.0
    value = erf(params.alpha_m / (math.sqrt(lambda_star) * math.sqrt(2.0))) ** 3
    return min(value, _BELOW_ONE)


def certainty_lower_bound(sigma: SymMat3, params: CertaintyParams) -> float:
    """
    Closed form estimate C* of the probability that a position drawn
    from N(0, sigma) lies within the acceptance radius: the probability
    of the cube of half side α, every axis having the variance λ*
    (largest eigenvalue of sigma).
    """
    return certainty_from_eigenvalue(eig_sym3(sigma).largest, params)


def coverage_radius_1d(
    noise_fn: Callable[[float], float],
    c_min: float,
    cert_fn: Callable[[float], float],
    upper: float = 10.0,
    tolerance: float = 1e-9,
) -> float:
    """
    Largest distance r (up to 'upper') from a beacon for which
    cert_fn(noise_fn(r)) >= c_min, by bisection.

    Raises:
      InfeasibleError: c_min not reached even at distance 0
    """

    def covered(r: float) -> bool:
        return cert_fn(noise_fn(r)) >= c_min

    if c_min <= 0.0:
        return upper
    if not covered(0.0):
        raise InfeasibleError(
            f"certainty requirement {c_min} not reached even at the beacon position"
        )
    if covered(upper):
        return upper
    low, high = 0.0, upper
    while high - low > tolerance:
        middle = 0.5 * (low + high)
        if covered(middle):
            low = middle
        else:
            high = middle
    return low


@dataclass(frozen=True)
class CoverageSettings:
    """
    Configuration of [coverage_radius_3d]().

    Args:
      hover_m: height of the camera above the markers
      array_radius_m: markers are evenly spaced on a circle of this radius
        (a single marker is at the center)
      n_rings: number of probe rings (in addition to the center)
      n_angles: number of probes per ring
      search_max_m: upper bound of the radius search
      tolerance_m: bisection tolerance
    """

    hover_m: float = 0.3
    array_radius_m: float = 0.2
    n_rings: int = 8
    n_angles: int = 16
    search_max_m: float = 3.0
    tolerance_m: float = 1e-4

    def __post_init__(self) -> None:
        if not self.hover_m > 0.0:
            raise InvalidInputError(f"hover_m must be positive, got {self.hover_m}")
        if self.array_radius_m < 0.0:
            raise InvalidInputError("array_radius_m must be non negative")
        if self.n_rings < 1 or self.n_angles < 1:
            raise InvalidInputError("at least one probe ring and one probe angle are required")
        if not self.search_max_m > 0.0 or not self.tolerance_m > 0.0:
            raise InvalidInputError("search_max_m and tolerance_m must be positive")

    @classmethod
    def from_config(cls, config: Config) -> "CoverageSettings":
        table = section(config, "coverage")
        try:
            return cls(
                hover_m=read_float(table, "hover_m", "coverage"),
                array_radius_m=read_float(table, "array_radius_m", "coverage"),
                n_rings=read_int(table, "n_rings", "coverage"),
                n_angles=read_int(table, "n_angles", "coverage"),
                search_max_m=read_float(table, "search_max_m", "coverage"),
                tolerance_m=read_float(table, "tolerance_m", "coverage"),
            )
        except InvalidInputError as e:
            raise ConfigError(f"coverage: {e}")


def marker_array(n_markers: int, radius: float) -> npt.NDArray[np.float64]:
    """
    Positions (z = 0) of n markers evenly spaced on a circle.
    """
    if n_markers < 1:
        raise InvalidInputError(f"at least one marker is required, got {n_markers}")
    if n_markers == 1:
        return np.zeros((1, 3))
    angles = 2.0 * math.pi * np.arange(n_markers) / n_markers
    return np.column_stack(
        (radius * np.cos(angles), radius * np.sin(angles), np.zeros(n_markers))
    )


def _probes(r: float, n_rings: int, n_angles: int) -> List[Tuple[float, float]]:
    probes = [(0.0, 0.0)]
    for ring in range(1, n_rings + 1):
        radius = r * ring / n_rings
        for a in range(n_angles):
            angle = 2.0 * math.pi * a / n_angles
            probes.append((radius * math.cos(angle), radius * math.sin(angle)))
    return probes


def fused_certainty(
    camera: Vec3,
    markers: npt.ArrayLike,
    pred: EigenvaluePredictor,
    params: CertaintyParams,
) -> float:
    """
    C* of the fused predicted covariances of the markers seen by a
    downward looking camera, 0 if no marker is within the predictor
    domain.
    """
    camera_position = np.asarray(camera, dtype=float)
    sigmas = []
    for marker in np.asarray(markers, dtype=float):
        relative = CAMERA_DOWN @ (marker - camera_position)
        if not pred.in_domain(*range_and_incidence(relative)):
            continue
        sigma = predict_covariance(relative, pred)
        sigmas.append(rotate_covariance(sigma, CAMERA_DOWN.T))
    if not sigmas:
        return 0.0
    return certainty_lower_bound(fuse_covariances(sigmas), params)


def min_certainty_within(
    r: float,
    pred: EigenvaluePredictor,
    params: CertaintyParams,
    n_markers: int,
    settings: CoverageSettings,
    resolution: int = 1,
) -> float:
    """
    Smallest fused C* over the probe points within distance r of the
    center of the marker array. 'resolution' multiplies the number of
    probe rings and angles.
    """
    markers = marker_array(n_markers, settings.array_radius_m)
    probes = _probes(r, settings.n_rings * resolution, settings.n_angles * resolution)
    return min(
        fused_certainty((x, y, settings.hover_m), markers, pred, params)
        for x, y in probes
    )


def _bisect_radius(
    feasible: Callable[[float], bool], high: float, tolerance: float
) -> float:
    low = 0.0
    while high - low > tolerance:
        middle = 0.5 * (low + high)
        if feasible(middle):
            low = middle
        else:
            high = middle
    return low


def coverage_radius_3d(
    pred: EigenvaluePredictor,
    params: CertaintyParams,
    n_markers: int,
    settings: CoverageSettings = CoverageSettings(),
) -> float:
    """
    Largest horizontal radius r (meters) such that a camera hovering
    anywhere within r of an array of n_markers markers gets a fused
    certainty C* of at least c_min. The radius found by bisection on
    the probe grid is checked again on a grid of twice the resolution,
    and reduced if this check fails.

    Raises:
      InfeasibleError: the requirement is not met even above the array
    """

    def feasible(resolution: int) -> Callable[[float], bool]:
        def f(r: float) -> bool:
            c = min_certainty_within(r, pred, params, n_markers, settings, resolution)
            _logger.debug(f"\tcoverage probe r={r:.6f}: min C*={c:.6f}")
            return c >= params.c_min

        return f

    if not feasible(1)(0.0):
        raise InfeasibleError(
            f"certainty requirement {params.c_min} not reached above an array "
            f"of {n_markers} marker(s)"
        )
    upper = settings.search_max_m
    if feasible(1)(upper):
        r = upper
    else:
        r = _bisect_radius(feasible(1), upper, settings.tolerance_m)
    if not feasible(2)(r):
        _logger.info(f"\tcoverage radius {r:.4f} m violated on the dense probe grid, refining")
        r = _bisect_radius(feasible(2), r, settings.tolerance_m)
    _logger.info(f"\tcoverage radius of {n_markers} marker(s): {r:.4f} m")
    return r
