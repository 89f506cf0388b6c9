"""
Small numeric routines shared by the other markerplan modules:
symmetric 3x3 matrices and their eigendecomposition, the error function,
seeded random generators, gaussian sampling and segment / box intersection.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from .errors import InvalidInputError

PSD_EPS = 1e-10
"""
Absolute tolerance under which a negative eigenvalue still counts
as zero for positive-semidefinite checks.
"""

_JACOBI_TOLERANCE = 1e-14
_JACOBI_SWEEPS = 50
_OFF_DIAGONAL = ((0, 1), (0, 2), (1, 2))

Vec3 = Union[Sequence[float], npt.NDArray[np.float64]]


@dataclass(frozen=True)
class SymMat3:
    """
    Symmetric 3x3 real matrix, stored as its six independent entries.
    Covariances are stored in m².
    """

    xx: float
    xy: float
    xz: float
    yy: float
    yz: float
    zz: float

    @classmethod
    def from_matrix(cls, a: npt.ArrayLike) -> "SymMat3":
        """
        From a 3x3 array, symmetrized as (a + aᵀ) / 2.
        """
        m = np.asarray(a, dtype=float)
        if m.shape != (3, 3):
            raise InvalidInputError(f"expected a 3x3 matrix, got shape {m.shape}")
        m = 0.5 * (m + m.T)
        return cls(m[0, 0], m[0, 1], m[0, 2], m[1, 1], m[1, 2], m[2, 2])

    @classmethod
    def from_upper(cls, entries: Sequence[float]) -> "SymMat3":
        """
        From the row-major upper triangle (xx, xy, xz, yy, yz, zz).
        """
        if len(entries) != 6:
            raise InvalidInputError(
                f"expected the 6 entries of an upper triangle, got {len(entries)}"
            )
        return cls(*(float(e) for e in entries))

    @classmethod
    def diag(cls, a: float, b: float, c: float) -> "SymMat3":
        return cls(float(a), 0.0, 0.0, float(b), 0.0, float(c))

    @classmethod
    def zeros(cls) -> "SymMat3":
        return cls.diag(0.0, 0.0, 0.0)

    @classmethod
    def identity(cls) -> "SymMat3":
        return cls.diag(1.0, 1.0, 1.0)

    def matrix(self) -> npt.NDArray[np.float64]:
        return np.array(
            [
                [self.xx, self.xy, self.xz],
                [self.xy, self.yy, self.yz],
                [self.xz, self.yz, self.zz],
            ],
            dtype=float,
        )

    def upper(self) -> Tuple[float, float, float, float, float, float]:
        """
        The row-major upper triangle (xx, xy, xz, yy, yz, zz).
        """
        return (self.xx, self.xy, self.xz, self.yy, self.yz, self.zz)

    def is_finite(self) -> bool:
        return all(math.isfinite(e) for e in self.upper())

    def scaled(self, factor: float) -> "SymMat3":
        return SymMat3(*(factor * e for e in self.upper()))

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.matrix()))

    def is_psd(self, eps: float = PSD_EPS) -> bool:
        """
        True if all eigenvalues are larger than -eps.
        """
        return eig_sym3(self).values[2] >= -eps

    def __add__(self, other: "SymMat3") -> "SymMat3":
        return SymMat3(*(a + b for a, b in zip(self.upper(), other.upper())))

    def __sub__(self, other: "SymMat3") -> "SymMat3":
        return SymMat3(*(a - b for a, b in zip(self.upper(), other.upper())))


@dataclass(frozen=True)
class EigenDecomp3:
    """
    Eigendecomposition of a [SymMat3](), eigenvalues sorted in
    descending order. vectors[:, i] is the eigenvector of values[i].
    """

    values: npt.NDArray[np.float64]
    vectors: npt.NDArray[np.float64]

    @property
    def largest(self) -> float:
        return float(self.values[0])

    @property
    def principal(self) -> npt.NDArray[np.float64]:
        return self.vectors[:, 0]

    def reconstruct(self) -> npt.NDArray[np.float64]:
        return self.vectors @ np.diag(self.values) @ self.vectors.T


def _off_diagonal_norm(a: npt.NDArray[np.float64]) -> float:
    return math.sqrt(2.0 * (a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2))


def eig_sym3(a: SymMat3) -> EigenDecomp3:
    """
    Eigendecomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.

    Sweeps over the three off-diagonal pairs until the Frobenius norm of
    the off-diagonal part is below 1e-14 times the norm of the matrix
    (or after 50 sweeps).
    Eigenvalues are returned in descending order. Each eigenvector is
    oriented so that its largest (in absolute value) component is positive.

    Raises:
      InvalidInputError: if an entry of the matrix is not finite
    """
    if not a.is_finite():
        raise InvalidInputError(f"can not decompose a non finite matrix: {a}")

    m = a.matrix()
    v = np.eye(3)
    threshold = _JACOBI_TOLERANCE * float(np.linalg.norm(m))

    for _ in range(_JACOBI_SWEEPS):
        if _off_diagonal_norm(m) <= threshold:
            break
        for p, q in _OFF_DIAGONAL:
            apq = m[p, q]
            if apq == 0.0:
                continue
            theta = (m[q, q] - m[p, p]) / (2.0 * apq)
            sign = 1.0 if theta >= 0.0 else -1.0
            t = sign / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            j = np.eye(3)
            j[p, p] = c
            j[q, q] = c
            j[p, q] = s
            j[q, p] = -s
            m = j.T @ m @ j
            # annihilated by the rotation
            m[p, q] = 0.0
            m[q, p] = 0.0
            v = v @ j

    values = np.diag(m).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    for i in range(3):
        k = int(np.argmax(np.abs(vectors[:, i])))
        if vectors[k, i] < 0.0:
            vectors[:, i] = -vectors[:, i]
    return EigenDecomp3(values=values, vectors=vectors)


def largest_eigenvalue(a: SymMat3) -> float:
    return eig_sym3(a).largest


def erf(x: float) -> float:
    """
    The error function.
    """
    return math.erf(x)


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise InvalidInputError(f"seeds must be non negative integers, got {seed!r}")
    return int(seed)


def make_rng(seed: int) -> np.random.Generator:
    """
    A (counter based) Philox random generator.
    """
    return np.random.Generator(np.random.Philox(check_seed(seed)))


def make_child_rng(seed: int, index: int) -> np.random.Generator:
    """
    Random generator for the item 'index' of a task seeded with 'seed'.
    Its stream does not depend on the order the items are processed in.
    """
    sequence = np.random.SeedSequence([check_seed(seed), check_seed(index)])
    return np.random.Generator(np.random.Philox(sequence))


def gaussian_factor(cov: SymMat3, eps: float = PSD_EPS) -> npt.NDArray[np.float64]:
    """
    Returns L such that L Lᵀ = cov (eigenvector based factor, defined
    for semidefinite matrices).

    Raises:
      InvalidInputError: if cov is not positive-semidefinite (within eps)
    """
    decomp = eig_sym3(cov)
    if decomp.values[2] < -eps:
        raise InvalidInputError(
            f"covariance is not positive semidefinite (smallest eigenvalue {decomp.values[2]})"
        )
    return decomp.vectors * np.sqrt(np.clip(decomp.values, 0.0, None))


def sample_gaussian(
    mean: Vec3, cov: SymMat3, n: int, seed: int, eps: float = PSD_EPS
) -> npt.NDArray[np.float64]:
    """
    Draws n samples of the gaussian N(mean, cov).

    Returns:
      an array of shape (n, 3)

    Raises:
      InvalidInputError: if cov is not positive-semidefinite (within eps)
    """
    if n < 0:
        raise InvalidInputError(f"number of samples must be non negative, got {n}")
    factor = gaussian_factor(cov, eps)
    rng = make_rng(seed)
    normal = rng.standard_normal((n, 3))
    return np.asarray(mean, dtype=float) + normal @ factor.T


def _slab_interval(
    origin: npt.NDArray[np.float64],
    direction: npt.NDArray[np.float64],
    box_min: npt.NDArray[np.float64],
    box_max: npt.NDArray[np.float64],
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    # Interval of the parameter t for which origin + t*direction
    # is within the boxes (boxes stacked along the first axis).
    parallel = direction == 0.0
    safe = np.where(parallel, 1.0, direction)
    t1 = (box_min - origin) / safe
    t2 = (box_max - origin) / safe
    low = np.minimum(t1, t2)
    high = np.maximum(t1, t2)
    inside = (origin >= box_min) & (origin <= box_max)
    low = np.where(parallel, np.where(inside, -np.inf, np.inf), low)
    high = np.where(parallel, np.where(inside, np.inf, -np.inf), high)
    return low.max(axis=-1), high.min(axis=-1)


def _check_direction(direction: npt.NDArray[np.float64]) -> None:
    if not np.all(np.isfinite(direction)) or not np.any(direction != 0.0):
        raise InvalidInputError(f"segment direction must be finite and non zero, got {direction}")


def ray_aabb_intersect(
    origin: Vec3, direction: Vec3, box_min: Vec3, box_max: Vec3
) -> bool:
    """
    True if the segment origin + t * direction, t in (0, 1], intersects
    the closed axis aligned box [box_min, box_max].

    Raises:
      InvalidInputError: if direction is zero
    """
    d = np.asarray(direction, dtype=float)
    _check_direction(d)
    low, high = _slab_interval(
        np.asarray(origin, dtype=float),
        d,
        np.asarray(box_min, dtype=float),
        np.asarray(box_max, dtype=float),
    )
    return bool(low <= high and high > 0.0 and low <= 1.0)


def segment_hits_boxes(
    origin: Vec3,
    direction: Vec3,
    box_mins: npt.ArrayLike,
    box_maxs: npt.ArrayLike,
) -> npt.NDArray[np.bool_]:
    """
    Vectorized version of [ray_aabb_intersect](), for boxes
    given as arrays of shape (n, 3).
    """
    d = np.asarray(direction, dtype=float)
    _check_direction(d)
    mins = np.asarray(box_mins, dtype=float).reshape(-1, 3)
    maxs = np.asarray(box_maxs, dtype=float).reshape(-1, 3)
    if mins.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    low, high = _slab_interval(np.asarray(origin, dtype=float), d, mins, maxs)
    return (low <= high) & (high > 0.0) & (low <= 1.0)
