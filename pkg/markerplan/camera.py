"""
Kannala-Brandt fisheye camera model.

A point at incidence angle θ (angle to the optical axis, +z) and azimuth φ
is projected at

  u = cx + fx r(θ) cos φ,  v = cy + fy r(θ) sin φ

with r(θ) = θ + k1 θ³ + k2 θ⁵ + k3 θ⁷ + k4 θ⁹.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import numpy.typing as npt

from .errors import FormatError, InvalidInputError, ProjectionError, UndistortionError
from .numeric import Vec3

_NEWTON_ITERATIONS = 50
_NEWTON_TOLERANCE = 1e-14
# slack (radians) on theta_max when inverting the distortion polynomial
_THETA_SLACK = 1e-9

_CAMERA_KEYS = ("fx", "fy", "cx", "cy", "k", "width", "height", "theta_max_deg")


@dataclass(frozen=True)
class CameraModel:
    """
    Fisheye intrinsics. Focal lengths and principal point in pixels,
    k: the four (dimensionless) distortion coefficients.
    """

    fx: float = 285.0
    fy: float = 285.0
    cx: float = 640.0
    cy: float = 480.0
    k: Tuple[float, float, float, float] = (-0.02, 0.002, 0.0, 0.0)
    width: int = 1280
    height: int = 960
    theta_max_deg: float = 95.0
    _coefficients: npt.NDArray[np.float64] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if len(self.k) != 4:
            raise InvalidInputError(f"expected 4 distortion coefficients, got {len(self.k)}")
        object.__setattr__(self, "k", tuple(float(k) for k in self.k))
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise InvalidInputError(f"focal lengths must be positive ({self.fx}, {self.fy})")
        if not (self.width > 0 and self.height > 0):
            raise InvalidInputError(f"invalid image size {self.width}x{self.height}")
        if not 0.0 < self.theta_max_deg < 180.0:
            raise InvalidInputError(f"theta_max_deg must be in (0, 180), got {self.theta_max_deg}")
        # r(θ) = θ (1 + k1 θ² + ...): polynomial in θ² multiplied by θ
        object.__setattr__(
            self, "_coefficients", np.array((1.0,) + self.k, dtype=float)
        )
        thetas = np.linspace(0.0, self.theta_max, 1000)
        if np.any(self.radius_derivative(thetas) <= 0.0):
            raise InvalidInputError(
                f"distortion polynomial is not increasing up to {self.theta_max_deg} degrees"
            )

    @property
    def theta_max(self) -> float:
        return math.radians(self.theta_max_deg)

    def radius(self, theta: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """
        r(θ), normalized image radius.
        """
        t = np.asarray(theta, dtype=float)
        t2 = t * t
        return t * np.polynomial.polynomial.polyval(t2, self._coefficients)

    def radius_derivative(self, theta: npt.ArrayLike) -> npt.NDArray[np.float64]:
        t2 = np.asarray(theta, dtype=float) ** 2
        odd = np.arange(1, 10, 2, dtype=float)
        return np.polynomial.polynomial.polyval(t2, self._coefficients * odd)

    def project_points(
        self, points: npt.ArrayLike
    ) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.bool_]]:
        """
        Projects points (array of shape (..., 3), camera frame).

        Returns:
          the pixels (shape (..., 2)) and a mask of the points which
          could be projected (incidence below theta_max, not at the
          camera center)
        """
        x = np.asarray(points, dtype=float)
        lateral = np.hypot(x[..., 0], x[..., 1])
        theta = np.arctan2(lateral, x[..., 2])
        valid = (theta <= self.theta_max) & (np.linalg.norm(x, axis=-1) > 0.0)
        r = self.radius(theta)
        safe = np.where(lateral > 0.0, lateral, 1.0)
        cos_phi = np.where(lateral > 0.0, x[..., 0] / safe, 1.0)
        sin_phi = np.where(lateral > 0.0, x[..., 1] / safe, 0.0)
        pixels = np.stack(
            (self.cx + self.fx * r * cos_phi, self.cy + self.fy * r * sin_phi), axis=-1
        )
        return pixels, valid

    def project_point(self, x: Vec3) -> Tuple[float, float]:
        """
        Pixel coordinates of the point x (camera frame).

        Raises:
          ProjectionError: x is the camera center, or beyond theta_max
        """
        pixels, valid = self.project_points(np.asarray(x, dtype=float).reshape(1, 3))
        if not valid[0]:
            raise ProjectionError(
                f"point {list(x)} can not be projected "
                f"(incidence above {self.theta_max_deg} degrees or zero)"
            )
        return float(pixels[0, 0]), float(pixels[0, 1])

    def in_image(self, pixels: npt.ArrayLike) -> npt.NDArray[np.bool_]:
        p = np.asarray(pixels, dtype=float)
        return (
            (p[..., 0] >= 0.0)
            & (p[..., 0] <= self.width)
            & (p[..., 1] >= 0.0)
            & (p[..., 1] <= self.height)
        )

    def unproject_points(self, pixels: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """
        Unit rays (shape (..., 3)) of the pixels (shape (..., 2)),
        inverting r(θ) by Newton iterations.

        Raises:
          UndistortionError: Newton iterations did not converge, or
            converged beyond theta_max
        """
        p = np.asarray(pixels, dtype=float)
        mx = (p[..., 0] - self.cx) / self.fx
        my = (p[..., 1] - self.cy) / self.fy
        rd = np.hypot(mx, my)
        theta = rd.copy()
        converged = False
        for _ in range(_NEWTON_ITERATIONS):
            step = (self.radius(theta) - rd) / self.radius_derivative(theta)
            theta = theta - step
            if np.all(np.abs(step) <= _NEWTON_TOLERANCE * np.maximum(1.0, theta)):
                converged = True
                break
        if not converged or not np.all(np.isfinite(theta)):
            raise UndistortionError(
                f"distortion inversion did not converge after {_NEWTON_ITERATIONS} iterations"
            )
        if np.any(theta > self.theta_max + _THETA_SLACK) or np.any(theta < 0.0):
            raise UndistortionError(
                f"undistorted incidence beyond {self.theta_max_deg} degrees"
            )
        safe = np.where(rd > 0.0, rd, 1.0)
        sin_theta = np.sin(theta)
        return np.stack(
            (
                np.where(rd > 0.0, sin_theta * mx / safe, 0.0),
                np.where(rd > 0.0, sin_theta * my / safe, 0.0),
                np.cos(theta),
            ),
            axis=-1,
        )

    def unproject_point(self, px: Tuple[float, float]) -> npt.NDArray[np.float64]:
        """
        Unit ray of the pixel px.

        Raises:
          UndistortionError
        """
        return self.unproject_points(np.asarray(px, dtype=float).reshape(1, 2))[0]

    def to_dict(self) -> Dict[str, Any]:
        d = {key: value for key, value in asdict(self).items() if key in _CAMERA_KEYS}
        d["k"] = list(self.k)
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "CameraModel":
        unknown = set(d.keys()) - set(_CAMERA_KEYS)
        if unknown:
            raise FormatError(f"unexpected camera key(s): {', '.join(sorted(unknown))}")
        try:
            return cls(
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                k=tuple(float(k) for k in d["k"]),  # type: ignore
                width=int(d["width"]),
                height=int(d["height"]),
                theta_max_deg=float(d["theta_max_deg"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid camera description ({type(e).__name__}: {e})")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CameraModel":
        with open(path, "r") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"camera file {path} is not valid json: {e}")
        return cls.from_dict(d)

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)
            f.write("\n")
