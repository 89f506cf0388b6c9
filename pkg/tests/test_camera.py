"""
Tests the camera module
"""

import json
import math
import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

from markerplan.camera import CameraModel
from markerplan.errors import FormatError, InvalidInputError, ProjectionError, UndistortionError
from markerplan.numeric import make_rng


@pytest.fixture
def get_tmp(request, scope="function") -> Generator[Path, None, None]:
    """
    Returns a temporary directory path
    """
    tmp_dir_ = tempfile.TemporaryDirectory()
    tmp_dir = Path(tmp_dir_.name)
    yield tmp_dir
    tmp_dir_.cleanup()


def test_project_on_axis() -> None:
    """
    A point on the optical axis projects on the principal point
    """
    cam = CameraModel()
    assert cam.project_point((0.0, 0.0, 2.0)) == pytest.approx((cam.cx, cam.cy))
    assert np.allclose(cam.unproject_point((cam.cx, cam.cy)), [0.0, 0.0, 1.0])


def test_equidistant_without_distortion() -> None:
    """
    Without distortion, the image radius is the incidence angle
    """
    cam = CameraModel(k=(0.0, 0.0, 0.0, 0.0))
    u, v = cam.project_point((1.0, 0.0, 1.0))
    assert u == pytest.approx(cam.cx + cam.fx * math.pi / 4.0)
    assert v == pytest.approx(cam.cy)
    u, v = cam.project_point((0.0, -1.0, 0.0))
    assert u == pytest.approx(cam.cx)
    assert v == pytest.approx(cam.cy - cam.fy * math.pi / 2.0)


def test_round_trip() -> None:
    """
    Unprojecting projected points recovers their direction
    """
    cam = CameraModel()
    rng = make_rng(0)
    theta = rng.uniform(0.0, math.radians(90.0), 1000)
    phi = rng.uniform(-math.pi, math.pi, 1000)
    distance = rng.uniform(0.1, 5.0, 1000)
    directions = np.column_stack(
        (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    )
    pixels, valid = cam.project_points(directions * distance[:, None])
    assert valid.all()
    rays = cam.unproject_points(pixels)
    assert np.allclose(rays, directions, atol=1e-9)
    reprojected, _ = cam.project_points(rays)
    assert np.allclose(reprojected, pixels, atol=1e-7)


def test_symmetry() -> None:
    """
    Pixels symmetric about the principal point map to mirrored rays
    """
    cam = CameraModel()
    a = cam.unproject_point((cam.cx + 100.0, cam.cy + 40.0))
    b = cam.unproject_point((cam.cx - 100.0, cam.cy - 40.0))
    assert np.allclose(a[:2], -b[:2])
    assert a[2] == pytest.approx(b[2])


def test_projection_errors() -> None:
    """
    Points behind the camera, beyond theta_max or at the camera
    center can not be projected
    """
    cam = CameraModel(theta_max_deg=80.0)
    with pytest.raises(ProjectionError):
        cam.project_point((0.0, 0.0, -1.0))
    with pytest.raises(ProjectionError):
        cam.project_point((1.0, 0.0, 0.0))
    with pytest.raises(ProjectionError):
        cam.project_point((0.0, 0.0, 0.0))
    with pytest.raises(UndistortionError):
        cam.unproject_point((cam.cx + 5.0 * cam.fx, cam.cy))


def test_invalid_camera() -> None:
    """
    Non increasing distortion polynomial and invalid intrinsics
    """
    with pytest.raises(InvalidInputError):
        CameraModel(k=(-1.0, 0.0, 0.0, 0.0))
    with pytest.raises(InvalidInputError):
        CameraModel(fx=0.0)
    with pytest.raises(InvalidInputError):
        CameraModel(k=(0.0, 0.0))  # type: ignore


def test_camera_file(get_tmp) -> None:
    """
    Camera file round trip, rejection of unknown keys
    """
    cam = CameraModel(fx=300.0, fy=290.0, k=(-0.01, 0.001, 0.0, 0.0))
    path = get_tmp / "camera.json"
    cam.save(path)
    assert CameraModel.load(path) == cam
    d = cam.to_dict()
    assert sorted(d.keys()) == sorted(
        ["fx", "fy", "cx", "cy", "k", "width", "height", "theta_max_deg"]
    )
    d["focal"] = 1.0
    with open(path, "w") as f:
        json.dump(d, f)
    with pytest.raises(FormatError):
        CameraModel.load(path)
    with pytest.raises(FormatError):
        CameraModel.from_dict({"fx": 1.0})
