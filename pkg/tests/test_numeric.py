"""
Tests the numeric module
"""

import math

import numpy as np
import pytest

from markerplan.errors import InvalidInputError
from markerplan.numeric import (
    SymMat3,
    eig_sym3,
    make_child_rng,
    make_rng,
    ray_aabb_intersect,
    sample_gaussian,
    segment_hits_boxes,
)
from markerplan.tests import random_psd


def test_symmat3_from_matrix() -> None:
    """
    Checks symmetrization and the upper triangle layout
    """
    a = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
    s = SymMat3.from_matrix(a)
    assert s.upper() == (1.0, 3.0, 5.0, 5.0, 7.0, 9.0)
    assert np.allclose(s.matrix(), s.matrix().T)
    with pytest.raises(InvalidInputError):
        SymMat3.from_matrix(np.eye(2))
    with pytest.raises(InvalidInputError):
        SymMat3.from_upper([1.0, 2.0])


def test_eig_sym3_diagonal() -> None:
    """
    Eigenvalues of a diagonal matrix, sorted in descending order
    """
    decomp = eig_sym3(SymMat3.diag(1.0, 3.0, 2.0))
    assert np.allclose(decomp.values, [3.0, 2.0, 1.0])
    assert np.allclose(np.abs(decomp.principal), [0.0, 1.0, 0.0])


def test_eig_sym3_random() -> None:
    """
    Eigendecomposition of random symmetric matrices, compared
    with numpy
    """
    rng = make_rng(3)
    for _ in range(200):
        a = rng.normal(size=(3, 3))
        s = SymMat3.from_matrix(a)
        decomp = eig_sym3(s)
        expected = np.sort(np.linalg.eigvalsh(s.matrix()))[::-1]
        assert np.allclose(decomp.values, expected, atol=1e-10)
        assert np.allclose(decomp.reconstruct(), s.matrix(), atol=1e-10)
        assert np.allclose(decomp.vectors.T @ decomp.vectors, np.eye(3), atol=1e-10)


def test_eig_sym3_rejects_non_finite() -> None:
    """
    Non finite entries are rejected
    """
    with pytest.raises(InvalidInputError):
        eig_sym3(SymMat3.diag(math.nan, 1.0, 1.0))


def test_is_psd() -> None:
    """
    Positive semi-definiteness check
    """
    rng = make_rng(1)
    assert random_psd(rng).is_psd()
    assert SymMat3.zeros().is_psd()
    assert not SymMat3.diag(1.0, -1.0, 1.0).is_psd()


def test_rng_determinism() -> None:
    """
    Same seed, same stream; child streams depend on the index only
    """
    assert np.array_equal(make_rng(7).normal(size=5), make_rng(7).normal(size=5))
    assert not np.array_equal(make_rng(7).normal(size=5), make_rng(8).normal(size=5))
    a = make_child_rng(7, 3).normal(size=5)
    make_child_rng(7, 2).normal(size=5)
    b = make_child_rng(7, 3).normal(size=5)
    assert np.array_equal(a, b)
    with pytest.raises(InvalidInputError):
        make_rng(-1)


def test_sample_gaussian() -> None:
    """
    Samples of a known covariance recover it
    """
    cov = SymMat3.from_matrix(np.array([[4.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.0]]))
    samples = sample_gaussian((1.0, 2.0, 3.0), cov, 10000, seed=5)
    assert samples.shape == (10000, 3)
    assert np.allclose(samples.mean(axis=0), [1.0, 2.0, 3.0], atol=0.1)
    estimated = np.cov(samples.T)
    assert np.allclose(estimated, cov.matrix(), rtol=0.05, atol=0.08)
    assert np.array_equal(samples, sample_gaussian((1.0, 2.0, 3.0), cov, 10000, seed=5))
    with pytest.raises(InvalidInputError):
        sample_gaussian((0.0, 0.0, 0.0), SymMat3.diag(1.0, -1.0, 1.0), 10, seed=0)


def test_ray_aabb_intersect() -> None:
    """
    Segment / box intersection: crossing, stopping before, grazing
    and parallel cases
    """
    box_min, box_max = (-0.5, -0.5, -0.5), (0.5, 0.5, 0.5)
    assert ray_aabb_intersect((-2.0, 0.0, 0.0), (4.0, 0.0, 0.0), box_min, box_max)
    # segment ends before the box
    assert not ray_aabb_intersect((-2.0, 0.0, 0.0), (1.0, 0.0, 0.0), box_min, box_max)
    # segment pointing away from the box
    assert not ray_aabb_intersect((-2.0, 0.0, 0.0), (-1.0, 0.0, 0.0), box_min, box_max)
    # grazing a face: closed boxes
    assert ray_aabb_intersect((-2.0, 0.5, 0.0), (4.0, 0.0, 0.0), box_min, box_max)
    # parallel, outside
    assert not ray_aabb_intersect((-2.0, 0.6, 0.0), (4.0, 0.0, 0.0), box_min, box_max)
    # diagonal
    assert ray_aabb_intersect((2.0, 2.0, 2.0), (-4.0, -4.0, -4.0), box_min, box_max)
    with pytest.raises(InvalidInputError):
        ray_aabb_intersect((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), box_min, box_max)


def test_segment_hits_boxes_matches_sampling() -> None:
    """
    Vectorized intersection agrees with a dense sampling of
    the segment
    """
    rng = make_rng(11)
    centers = rng.integers(-3, 4, size=(30, 3)).astype(float)
    mins, maxs = centers - 0.5, centers + 0.5
    for _ in range(50):
        origin = rng.uniform(-4.0, 4.0, size=3)
        direction = rng.uniform(-4.0, 4.0, size=3)
        hits = segment_hits_boxes(origin, direction, mins, maxs)
        t = np.linspace(0.0, 1.0, 4001)[1:]
        points = origin + t[:, None] * direction
        for index in range(len(centers)):
            inside = np.all((points >= mins[index] - 1e-9) & (points <= maxs[index] + 1e-9), axis=1)
            if inside.any():
                assert hits[index]
    empty = np.zeros((0, 3))
    assert segment_hits_boxes((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), empty, empty).shape == (0,)
