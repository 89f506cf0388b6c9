"""
Layer by layer planning of assembly missions with movable markers.

The structure is divided into layers, each layer into clusters of
bounded extent which are visited along a short tour. For each cluster,
the markers hop (one at a time, always within reach of the others) to
the most spread out slots of the cluster, the other slots of the cluster
get their blocks, and finally each marker climbs on a placed block of
the cluster so that the slot it was standing on can be filled.

All positions are in structure units (see [structure.Structure]()).
"""

import functools
import heapq
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    IO,
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import numpy as np
import numpy.typing as npt
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import pdist

from .config import Config
from .config_error import ConfigError
from .errors import (
    ClusteringError,
    FormatError,
    InfeasibleError,
    InvalidInputError,
    OcclusionError,
    StrandedMarkerError,
)
from .numeric import make_child_rng
from .settings import read_float, read_int, section
from .structure import Column, Slot, Structure
from .version import __version__
from .visibility import VisibilityRequirement, WorldState

PLAN_FORMAT_VERSION = 1

EXTENTS = ("diameter", "radius")

# slack on distance comparisons, in structure units
_SLACK = 1e-9
_MAX_HOPS = 100000

Position = Tuple[float, ...]

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarkerState:
    """
    A marker and its current position.
    """

    id: int
    position: Position

    def moved(self, position: Position) -> "MarkerState":
        return MarkerState(self.id, position)


def _number(value: float) -> Union[int, float]:
    v = float(value)
    if v.is_integer() and abs(v) < 2**53:
        return int(v)
    return v


def _numbers(values: Iterable[float]) -> List[Union[int, float]]:
    return [_number(v) for v in values]


@dataclass(frozen=True)
class MoveMarker:
    marker_id: int
    from_: Position
    to: Position

    def __post_init__(self) -> None:
        if tuple(self.from_) == tuple(self.to):
            raise InvalidInputError(f"marker {self.marker_id} moved to its own position")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "op": "move_marker",
            "id": self.marker_id,
            "from": _numbers(self.from_),
            "to": _numbers(self.to),
        }


@dataclass(frozen=True)
class PlaceBlock:
    """
    Places a block at 'slot': grid coordinates (i, j, k), or a
    position for planning problems without a grid.
    """

    slot: Tuple[Union[int, float], ...]

    @property
    def position(self) -> Position:
        return tuple(float(v) for v in self.slot)

    def to_dict(self) -> Dict[str, Any]:
        return {"op": "place_block", "slot": _numbers(self.slot)}


Action = Union[MoveMarker, PlaceBlock]


def action_from_dict(d: Dict[str, Any]) -> Action:
    try:
        op = d["op"]
        if op == "move_marker":
            return MoveMarker(
                int(d["id"]),
                tuple(float(v) for v in d["from"]),
                tuple(float(v) for v in d["to"]),
            )
        if op == "place_block":
            slot = d["slot"]
            if all(isinstance(v, int) and not isinstance(v, bool) for v in slot):
                return PlaceBlock(tuple(slot))
            return PlaceBlock(tuple(float(v) for v in slot))
    except (KeyError, TypeError, ValueError, InvalidInputError) as e:
        raise FormatError(f"invalid plan action {d} ({type(e).__name__}: {e})")
    raise FormatError(f"unknown plan action: {d}")


def apply_moves(markers: Sequence[MarkerState], actions: Iterable[Action]) -> List[MarkerState]:
    """
    Marker states after the marker moves of the actions.
    """
    positions = {m.id: m for m in markers}
    for action in actions:
        if isinstance(action, MoveMarker):
            positions[action.marker_id] = positions[action.marker_id].moved(action.to)
    return [positions[m.id] for m in markers]


@dataclass
class Plan:
    """
    Ordered actions of a mission, the initial markers and provenance
    (planning radius, seed, number of clusters of each layer).
    """

    actions: List[Action]
    markers: List[MarkerState]
    r: Optional[float] = None
    seed: Optional[int] = None
    clusters_per_layer: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def final_markers(self) -> List[MarkerState]:
        return apply_moves(self.markers, self.actions)

    @property
    def placements(self) -> List[PlaceBlock]:
        return [a for a in self.actions if isinstance(a, PlaceBlock)]

    @property
    def moves(self) -> List[MoveMarker]:
        return [a for a in self.actions if isinstance(a, MoveMarker)]

    def header(self, invocation: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        return {
            "op": "header",
            "version": PLAN_FORMAT_VERSION,
            "markerplan": __version__,
            "invocation": list(invocation) if invocation is not None else [],
            "markers": [
                {"id": m.id, "position": _numbers(m.position)} for m in self.markers
            ],
            "final_markers": [
                {"id": m.id, "position": _numbers(m.position)} for m in self.final_markers
            ],
            "r": self.r,
            "seed": self.seed,
            "clusters_per_layer": list(self.clusters_per_layer),
        }

    def write(self, stream: IO[str], invocation: Optional[Sequence[str]] = None) -> None:
        stream.write(json.dumps(self.header(invocation)) + "\n")
        for action in self.actions:
            stream.write(json.dumps(action.to_dict()) + "\n")

    def save(self, path: Union[str, Path], invocation: Optional[Sequence[str]] = None) -> None:
        with open(path, "w") as f:
            self.write(f, invocation)

    @classmethod
    def read(cls, lines: Iterable[str]) -> "Plan":
        header: Optional[Dict[str, Any]] = None
        actions: List[Action] = []
        for line_number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"plan line {line_number}: {e}")
            if d.get("op") == "header":
                header = d
                continue
            actions.append(action_from_dict(d))
        if header is None:
            raise FormatError("plan has no header record")
        if header.get("version") != PLAN_FORMAT_VERSION:
            raise FormatError(f"unsupported plan format version: {header.get('version')}")
        try:
            markers = [
                MarkerState(int(m["id"]), tuple(float(v) for v in m["position"]))
                for m in header["markers"]
            ]
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid plan header ({type(e).__name__}: {e})")
        return cls(
            actions=actions,
            markers=markers,
            r=header.get("r"),
            seed=header.get("seed"),
            clusters_per_layer=list(header.get("clusters_per_layer", [])),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Plan":
        with open(path, "r") as f:
            return cls.read(f)


@dataclass(frozen=True)
class PlannerSettings:
    """
    Configuration of the planner ('planner' table).

    Args:
      extent: "diameter" (largest distance between two slots of a cluster)
        or "radius" (largest distance between a slot and the cluster centroid),
        the quantity bounded by the planning radius r
      hop_radius: largest horizontal distance between a hopping marker
        and the markers supporting it. 0: largest pairwise distance within
        a cluster (r for "diameter", 2r for "radius")
      min_hop_support: number of stationary markers a hop must stay
        within reach of (at most the number of markers minus one)
      restarts: k-means restarts for each probed k
      max_iterations: k-means iterations cap
    """

    extent: str = "diameter"
    hop_radius: float = 0.0
    min_hop_support: int = 2
    restarts: int = 10
    max_iterations: int = 100

    def __post_init__(self) -> None:
        if self.extent not in EXTENTS:
            raise InvalidInputError(f"extent must be one of {EXTENTS}, got '{self.extent}'")
        if self.hop_radius < 0.0:
            raise InvalidInputError(f"hop_radius must be non negative, got {self.hop_radius}")
        if self.min_hop_support < 1:
            raise InvalidInputError("min_hop_support must be at least 1")
        if self.restarts < 1 or self.max_iterations < 1:
            raise InvalidInputError("restarts and max_iterations must be at least 1")

    def hop_radius_for(self, r: float) -> float:
        if self.hop_radius > 0.0:
            return self.hop_radius
        return r if self.extent == "diameter" else 2.0 * r

    def support_for(self, n_markers: int) -> int:
        return max(1, min(self.min_hop_support, n_markers - 1))

    @classmethod
    def from_config(cls, config: Config) -> "PlannerSettings":
        table = section(config, "planner")
        extent = table.get("extent")
        if not isinstance(extent, str):
            raise ConfigError(f"planner/extent: expected a string, got {extent!r}")
        try:
            return cls(
                extent=extent,
                hop_radius=read_float(table, "hop_radius", "planner"),
                min_hop_support=read_int(table, "min_hop_support", "planner"),
                restarts=read_int(table, "restarts", "planner"),
                max_iterations=read_int(table, "max_iterations", "planner"),
            )
        except InvalidInputError as e:
            raise ConfigError(f"planner: {e}")


def divide_layers(structure: Structure) -> List[List[Slot]]:
    """
    Slots grouped by height, bottom layer first.
    """
    layers: Dict[int, List[Slot]] = {}
    for slot in structure.slots:
        layers.setdefault(slot.k, []).append(slot)
    return [sorted(layers[k]) for k in sorted(layers)]


@dataclass(frozen=True)
class Cluster:
    """
    indexes: of the clustered points, in the input sequence
    center: centroid of the points
    width: extent of the cluster (as configured: diameter or radius)
    """

    indexes: Tuple[int, ...]
    center: Position
    width: float


@dataclass(frozen=True)
class ClusterSet:
    clusters: List[Cluster]

    @property
    def k(self) -> int:
        return len(self.clusters)

    def members(self, items: Sequence[Any]) -> List[List[Any]]:
        return [[items[i] for i in c.indexes] for c in self.clusters]


def _as_points(items: Sequence[Any]) -> npt.NDArray[np.float64]:
    if len(items) and isinstance(items[0], Slot):
        return np.array([s.position for s in items], dtype=float).reshape(-1, 3)
    return np.asarray(items, dtype=float).reshape(len(items), -1)


def cluster_extent(points: npt.NDArray[np.float64], extent: str) -> float:
    if len(points) < 2:
        return 0.0
    if extent == "diameter":
        return float(pdist(points).max())
    return float(np.linalg.norm(points - points.mean(axis=0), axis=1).max())


def _seed_centers(
    points: npt.NDArray[np.float64], k: int, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    # k-means++ seeding: each new center drawn with probability
    # proportional to the squared distance to the closest center
    n = len(points)
    centers = [points[int(rng.integers(n))]]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        index = int(rng.integers(n)) if total <= 0.0 else int(rng.choice(n, p=d2 / total))
        centers.append(points[index])
        d2 = np.minimum(d2, ((points - points[index]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(
    points: npt.NDArray[np.float64], centers: npt.NDArray[np.float64], max_iterations: int
) -> Tuple[npt.NDArray[np.int64], float]:
    k = len(centers)
    for _ in range(max_iterations):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        labels = d2.argmin(axis=1)
        counts = np.bincount(labels, minlength=k)
        sums = np.stack(
            [
                np.bincount(labels, weights=points[:, d], minlength=k)
                for d in range(points.shape[1])
            ],
            axis=1,
        )
        nonempty = counts > 0
        updated = centers.copy()
        updated[nonempty] = sums[nonempty] / counts[nonempty, None]
        if np.array_equal(updated, centers):
            break
        centers = updated
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    labels = d2.argmin(axis=1)
    return labels, float(d2.min(axis=1).sum())


def _partition(labels: npt.NDArray[np.int64]) -> List[Tuple[int, ...]]:
    # clusters as tuples of indexes, ordered by their first index,
    # empty clusters dropped
    groups: Dict[int, List[int]] = {}
    for index, label in enumerate(labels.tolist()):
        groups.setdefault(label, []).append(index)
    return sorted(tuple(g) for g in groups.values())


@dataclass(frozen=True)
class _ClusterRun:
    groups: List[Tuple[int, ...]]
    widths: List[float]
    inertia: float


def _inertia(points: npt.NDArray[np.float64], labels: npt.NDArray[np.int64]) -> float:
    k = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=k)
    total = 0.0
    for d in range(points.shape[1]):
        sums = np.bincount(labels, weights=points[:, d], minlength=k)
        squares = np.bincount(labels, weights=points[:, d] ** 2, minlength=k)
        nonempty = counts > 0
        total += float((squares[nonempty] - sums[nonempty] ** 2 / counts[nonempty]).sum())
    return max(total, 0.0)


def _run(
    points: npt.NDArray[np.float64], labels: npt.NDArray[np.int64], extent: str, inertia: float
) -> _ClusterRun:
    groups = _partition(labels)
    widths = [cluster_extent(points[list(g)], extent) for g in groups]
    return _ClusterRun(groups, widths, inertia)


def _kmeans_runs(
    points: npt.NDArray[np.float64],
    k: int,
    extent: str,
    seed: int,
    restarts: int,
    max_iterations: int,
) -> List[_ClusterRun]:
    rng = make_child_rng(seed, k)
    runs = []
    for _ in range(1 if k == 1 else restarts):
        labels, inertia = _lloyd(points, _seed_centers(points, k, rng), max_iterations)
        runs.append(_run(points, labels, extent, inertia))
    return runs


def _tile_sizes(r: float, extent: str, spans: Sequence[float]) -> List[Tuple[int, ...]]:
    # largest tiles (in cells of the unit grid) whose slots are all
    # within the extent r, one per tile length along the first axis
    scale = 1.0 if extent == "diameter" else 0.5
    longest = [int(math.floor(s + _SLACK)) + 1 for s in spans]
    if len(spans) == 1:
        length = min(int(math.floor(r / scale + _SLACK)) + 1, longest[0])
        return [(length,)]
    sizes = []
    for tx in range(1, longest[0] + 1):
        if scale * (tx - 1) > r + _SLACK:
            break
        ty = int(math.floor(math.sqrt(max((r / scale) ** 2 - (tx - 1) ** 2, 0.0)) + _SLACK)) + 1
        sizes.append((tx, min(ty, longest[1])))
    return sizes


def _tiling_runs(points: npt.NDArray[np.float64], r: float, extent: str) -> List[_ClusterRun]:
    """
    Partitions of the points by regular grids of rectangular tiles, for
    each tile size of [_tile_sizes]() and each offset of the grid.
    """
    plane = points[:, : min(points.shape[1], 2)]
    origin = plane.min(axis=0)
    spans = plane.max(axis=0) - origin
    runs = []
    known: Set[Tuple[Tuple[int, ...], ...]] = set()
    for size in _tile_sizes(r, extent, spans.tolist()):
        for offset in itertools.product(*(range(t) for t in size)):
            cells = np.floor(
                (plane - origin + np.array(offset, dtype=float)) / np.array(size, dtype=float)
            ).astype(np.int64)
            _, labels = np.unique(cells, axis=0, return_inverse=True)
            labels = labels.reshape(-1)
            groups = tuple(_partition(labels))
            if groups in known:
                continue
            known.add(groups)
            runs.append(_run(points, labels, extent, _inertia(points, labels)))
    return runs


# layers of at most this number of slots are partitioned exactly
EXACT_CLUSTERING_LIMIT = 10


def _exact_partition(
    points: npt.NDArray[np.float64], r: float, m: int, extent: str
) -> Optional[List[Tuple[int, ...]]]:
    # fewest groups (then smallest inertia) among all partitions into
    # groups of at least m points within the extent r; dynamic
    # programming over the subsets of the points
    n = len(points)
    full = (1 << n) - 1
    valid: Dict[int, float] = {}
    for mask in range(1, full + 1):
        members = [i for i in range(n) if mask >> i & 1]
        if len(members) < m:
            continue
        p = points[members]
        if cluster_extent(p, extent) <= r + _SLACK:
            valid[mask] = float(((p - p.mean(axis=0)) ** 2).sum())
    best: Dict[int, Tuple[int, float, int]] = {0: (0, 0.0, 0)}
    for mask in range(1, full + 1):
        lowest = mask & -mask
        sub = mask
        while sub:
            if sub & lowest and sub in valid and (mask ^ sub) in best:
                k, inertia, _ = best[mask ^ sub]
                candidate = (k + 1, inertia + valid[sub], sub)
                if mask not in best or candidate[:2] < best[mask][:2]:
                    best[mask] = candidate
            sub = (sub - 1) & mask
    if full not in best:
        return None
    groups = []
    mask = full
    while mask:
        sub = best[mask][2]
        groups.append(tuple(i for i in range(n) if sub >> i & 1))
        mask ^= sub
    return sorted(groups)


def _clusters(
    points: npt.NDArray[np.float64], groups: Sequence[Tuple[int, ...]], widths: Sequence[float]
) -> ClusterSet:
    return ClusterSet(
        [
            Cluster(
                indexes=g,
                center=tuple(float(v) for v in points[list(g)].mean(axis=0)),
                width=w,
            )
            for g, w in zip(groups, widths)
        ]
    )


def cluster_until_radius(
    layer: Sequence[Any],
    r: float,
    m: int,
    seed: int,
    extent: str = "diameter",
    restarts: int = 10,
    max_iterations: int = 100,
    layer_index: Optional[int] = None,
) -> ClusterSet:
    """
    Clusters the slots (or points) of a layer in as few clusters as
    possible, each of extent at most r and of at least m members.

    Layers of at most EXACT_CLUSTERING_LIMIT slots are partitioned
    exactly. For larger layers, k is found by binary search: the
    candidate clusterings for a k are k-means runs (k-means++ seeding)
    and partitions by regular grids of tiles which happen to have k
    tiles, the upper end of the search is the fewest tiles of a tiling
    satisfying both constraints. The clustering returned is, among the
    candidates at the k found, the one of smallest inertia.

    Raises:
      ClusteringError: no clustering satisfies both constraints
    """
    points = _as_points(layer)
    n = len(points)
    if r <= 0.0:
        raise InvalidInputError(f"clustering radius must be positive, got {r}")
    if m < 1 or n < m:
        raise ClusteringError(layer_index, f"{n} slot(s) can not host {m} marker(s)")

    if n <= EXACT_CLUSTERING_LIMIT:
        groups = _exact_partition(points, r, m, extent)
        if groups is None:
            raise ClusteringError(
                layer_index,
                f"no clustering with {extent} at most {r} and at least {m} slots per cluster",
            )
        widths = [cluster_extent(points[list(g)], extent) for g in groups]
        _logger.debug(f"\tlayer {layer_index}: k={len(groups)} (exact)")
        return _clusters(points, groups, widths)

    def feasible(run: _ClusterRun) -> bool:
        return all(w <= r + _SLACK for w in run.widths) and all(len(g) >= m for g in run.groups)

    tilings: Dict[int, List[_ClusterRun]] = {}
    for run in _tiling_runs(points, r, extent):
        tilings.setdefault(len(run.groups), []).append(run)
    cache: Dict[int, List[_ClusterRun]] = {}

    def candidates(k: int) -> List[_ClusterRun]:
        if k not in cache:
            runs = _kmeans_runs(points, k, extent, seed, restarts, max_iterations)
            cache[k] = [run for run in runs + tilings.get(k, []) if feasible(run)]
        return cache[k]

    k_max = n // m
    tiled = [k for k, runs in tilings.items() if k <= k_max and any(feasible(x) for x in runs)]
    low, high = 1, min(tiled, default=k_max)
    k_found: Optional[int] = None
    while low <= high:
        middle = (low + high) // 2
        if candidates(middle):
            k_found = middle
            high = middle - 1
        else:
            low = middle + 1
    if k_found is None:
        k_found = next((k for k in range(1, k_max + 1) if candidates(k)), None)
    if k_found is None:
        raise ClusteringError(
            layer_index,
            f"no clustering with {extent} at most {r} and at least {m} slots per cluster",
        )
    best = min(candidates(k_found), key=lambda run: run.inertia)
    n_tilings = sum(len(x) for x in tilings.values())
    _logger.debug(f"\tlayer {layer_index}: k={k_found} ({n_tilings} tiling(s) probed)")
    return _clusters(points, best.groups, best.widths)


def _lexicographic(points: npt.NDArray[np.float64]) -> npt.NDArray[np.int64]:
    return np.lexsort(points.T[::-1])


def select_marker_destinations(cluster: Sequence[Any], m: int) -> List[Position]:
    """
    The m points of the cluster farthest from each other, greedily:
    first the point farthest from the centroid, then repeatedly the point
    maximizing the distance to the closest point already chosen.
    Ties are broken lexicographically.

    Raises:
      InvalidInputError: fewer than m points
    """
    points = _as_points(cluster)
    if m < 1 or len(points) < m:
        raise InvalidInputError(f"can not select {m} destination(s) among {len(points)} point(s)")
    points = points[_lexicographic(points)]
    centroid = points.mean(axis=0)
    chosen = [int(np.argmax(((points - centroid) ** 2).sum(axis=1)))]
    closest = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, m):
        candidates = closest.copy()
        candidates[chosen] = -1.0
        index = int(np.argmax(candidates))
        chosen.append(index)
        closest = np.minimum(closest, ((points - points[index]) ** 2).sum(axis=1))
    return [tuple(float(v) for v in points[i]) for i in chosen]


def tour_length(
    centers: Sequence[Sequence[float]], start: Sequence[float], order: Sequence[int]
) -> float:
    """
    Length of the open path from start through the centers in the given order.
    """
    c = np.asarray(centers, dtype=float)
    points = [np.asarray(start, dtype=float)] + [c[i] for i in order]
    return float(sum(np.linalg.norm(b - a) for a, b in zip(points, points[1:])))


_START = -1
_END = -2


def find_tour(centers: Sequence[Sequence[float]], start: Sequence[float]) -> List[int]:
    """
    Order in which to visit the centers, starting from 'start' (the tour
    does not return). Built by nearest neighbour, then improved by 2-opt
    (segment reversal) and or-opt (relocation of segments of up to three
    centers) moves until no move shortens it.
    """
    c = np.asarray(centers, dtype=float)
    n = len(c)
    if n == 0:
        return []
    distances = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
    from_start = np.linalg.norm(c - np.asarray(start, dtype=float), axis=1)

    def d(a: int, b: int) -> float:
        # the path ends anywhere: edges to _END are free
        if a == _END or b == _END:
            return 0.0
        if a == _START:
            return 0.0 if b == _START else float(from_start[b])
        if b == _START:
            return float(from_start[a])
        return float(distances[a, b])

    order = [int(np.argmin(from_start))]
    remaining = set(range(n)) - set(order)
    while remaining:
        last = order[-1]
        nearest = min(remaining, key=lambda j: (distances[last, j], j))
        order.append(nearest)
        remaining.remove(nearest)

    def before(o: Sequence[int], i: int) -> int:
        return o[i - 1] if i > 0 else _START

    def after(o: Sequence[int], i: int) -> int:
        return o[i + 1] if i + 1 < len(o) else _END

    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                p, q = before(order, i), after(order, j)
                gain = d(p, order[i]) + d(order[j], q) - d(p, order[j]) - d(order[i], q)
                if gain > _SLACK:
                    order[i : j + 1] = order[i : j + 1][::-1]
                    improved = True
        for size in (1, 2, 3):
            i = 0
            while i + size <= n:
                segment = order[i : i + size]
                p, q = before(order, i), after(order, i + size - 1)
                removal = d(p, segment[0]) + d(segment[-1], q) - d(p, q)
                rest = order[:i] + order[i + size :]
                best: Optional[Tuple[float, int, List[int]]] = None
                for j in range(len(rest) + 1):
                    a = rest[j - 1] if j > 0 else _START
                    b = rest[j] if j < len(rest) else _END
                    for piece in (segment, segment[::-1]):
                        insertion = d(a, piece[0]) + d(piece[-1], b) - d(a, b)
                        gain = removal - insertion
                        if gain > _SLACK and (best is None or gain > best[0]):
                            best = (gain, j, piece)
                if best is not None:
                    _, j, piece = best
                    order = rest[:j] + piece + rest[j:]
                    improved = True
                i += 1
    return order


def _horizontal(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class GridSurface:
    """
    Columns a marker can land on, and the height it lands at:
    on top of the highest placed block of the column, or on the foundation.

    Args:
      columns: the candidate columns
      base: height index of the foundation
      tops: height index of the highest placed block, per column
    """

    def __init__(self, columns: Iterable[Column], base: int, tops: Dict[Column, int]) -> None:
        self._columns = sorted(set(columns))
        self._array = np.array(self._columns, dtype=float).reshape(-1, 2)
        self._base = base
        self._tops = tops

    @property
    def columns(self) -> List[Column]:
        return self._columns

    @property
    def array(self) -> npt.NDArray[np.float64]:
        return self._array

    def height(self, column: Column) -> int:
        top = self._tops.get(column)
        return self._base if top is None else top + 1

    def landing(self, column: Column) -> Position:
        return (float(column[0]), float(column[1]), float(self.height(column)))


def _column_of(position: Sequence[float]) -> Column:
    return (int(round(position[0])), int(round(position[1])))


def _match(
    markers: Sequence[MarkerState], targets: Sequence[Position]
) -> Dict[int, Position]:
    # greedy nearest matching: the closest (marker, target) pair first
    pairs = sorted(
        (math.dist(m.position, t), m.id, index)
        for m in markers
        for index, t in enumerate(targets)
    )
    assigned: Dict[int, Position] = {}
    used: Set[int] = set()
    for _, marker_id, index in pairs:
        if marker_id in assigned or index in used:
            continue
        assigned[marker_id] = tuple(float(v) for v in targets[index])
        used.add(index)
    return assigned


def _continuous_hop(
    position: Position,
    target: Position,
    stationary: Sequence[Position],
    hop_radius: float,
    support: int,
) -> Optional[Position]:
    p = np.asarray(position, dtype=float)
    t = np.asarray(target, dtype=float)
    remaining = float(np.linalg.norm(t - p))
    u = (t - p) / remaining
    intervals = []
    for q in stationary:
        offset = p - np.asarray(q, dtype=float)
        b = float(u @ offset)
        c = float(offset @ offset) - hop_radius**2
        discriminant = b * b - c
        if discriminant < 0.0:
            continue
        root = math.sqrt(discriminant)
        intervals.append((-b - root, -b + root))
    candidates = sorted({remaining} | {high for _, high in intervals}, reverse=True)
    for s in candidates:
        if s <= _SLACK or s > remaining:
            continue
        count = sum(1 for low, high in intervals if low - _SLACK <= s <= high + _SLACK)
        if count >= support:
            if s == remaining:
                return tuple(float(v) for v in t)
            return tuple(float(v) for v in p + s * u)
    return None


# landing filter of the walks: (marker id, landing, marker positions
# before the hop) -> whether the hop is allowed
HopFilter = Callable[[int, Position, Dict[int, Position]], bool]


def _grid_hop(
    position: Position,
    target: Position,
    stationary: Sequence[Position],
    hop_radius: float,
    support: int,
    surface: GridSurface,
    allowed: Optional[Callable[[Position], bool]] = None,
) -> Optional[Position]:
    columns = surface.array
    if not len(columns):
        return None
    current = _horizontal(position, target)
    to_target = np.hypot(columns[:, 0] - target[0], columns[:, 1] - target[1])
    ok = to_target < current - _SLACK
    count = np.zeros(len(columns), dtype=int)
    for q in stationary:
        d = np.hypot(columns[:, 0] - q[0], columns[:, 1] - q[1])
        ok &= d > _SLACK
        count += d <= hop_radius + _SLACK
    ok &= count >= support
    # closest to the target first, then the lexicographically first column
    for index in sorted(np.flatnonzero(ok).tolist(), key=lambda i: (to_target[i], i)):
        column = surface.columns[index]
        if column == _column_of(target):
            landing = tuple(float(v) for v in target)
        else:
            landing = surface.landing(column)
        if allowed is None or allowed(landing):
            return landing
    return None


# expansions of the search of [search_walk]()
WALK_SEARCH_BUDGET = 500


def search_walk(
    markers: Sequence[MarkerState],
    targets: Sequence[Position],
    hop_radius: float,
    surface: GridSurface,
    support: int = 1,
    accept: Optional[HopFilter] = None,
    budget: int = WALK_SEARCH_BUDGET,
) -> Optional[List[MoveMarker]]:
    """
    Best first search of a sequence of hops bringing one marker on each
    target (any marker on any target). A hop moves a single marker to a
    free column of the surface within hop_radius of at least 'support'
    of the other markers (and accepted by 'accept', if given). The
    columns of the markers must be columns of the surface.

    Returns:
      the hops, or None if none was found within 'budget' expansions
    """
    target_at = {_column_of(t): tuple(float(v) for v in t) for t in targets}
    goal = set(target_at)
    target_array = np.array([t[:2] for t in targets], dtype=float)
    columns = surface.array
    index_of = {c: i for i, c in enumerate(surface.columns)}
    hops_to = np.ceil(
        np.hypot(
            columns[:, None, 0] - target_array[None, :, 0],
            columns[:, None, 1] - target_array[None, :, 1],
        )
        / hop_radius
        - _SLACK
    )
    ids = [m.id for m in markers]
    start = tuple(tuple(float(v) for v in m.position) for m in markers)

    def estimate(positions: Sequence[Position]) -> float:
        # hops still required by the best assignment of markers to targets
        d = hops_to[[index_of[_column_of(p)] for p in positions]]
        rows, cols = linear_sum_assignment(d)
        return float(d[rows, cols].sum())

    def landing(index: int) -> Position:
        column = surface.columns[index]
        return target_at.get(column) or surface.landing(column)

    # nodes: (positions, parent node, hop leading to the node)
    nodes: List[Tuple[Tuple[Position, ...], int, Optional[MoveMarker]]] = [(start, -1, None)]
    counter = itertools.count()
    heap = [(2.0 * estimate(start), next(counter), 0, 0)]
    closed: Set[Tuple[Column, ...]] = set()
    expansions = 0
    while heap and expansions < budget:
        _, _, node, hops = heapq.heappop(heap)
        positions, parent, move = nodes[node]
        key = tuple(_column_of(p) for p in positions)
        if key in closed:
            continue
        if move is not None and accept is not None:
            before = dict(zip(ids, nodes[parent][0]))
            if not accept(move.marker_id, move.to, before):
                continue
        closed.add(key)
        if set(key) == goal:
            path: List[MoveMarker] = []
            while nodes[node][2] is not None:
                path.append(nodes[node][2])  # type: ignore
                node = nodes[node][1]
            return path[::-1]
        expansions += 1
        for index, marker_id in enumerate(ids):
            others = [p for i, p in enumerate(positions) if i != index]
            ok = np.ones(len(columns), dtype=bool)
            count = np.zeros(len(columns), dtype=int)
            for q in others:
                d = np.hypot(columns[:, 0] - q[0], columns[:, 1] - q[1])
                ok &= d > _SLACK
                count += d <= hop_radius + _SLACK
            ok &= count >= support
            own = _column_of(positions[index])
            for c in np.flatnonzero(ok).tolist():
                if surface.columns[c] == own:
                    continue
                to = landing(c)
                child = positions[:index] + (to,) + positions[index + 1 :]
                if tuple(_column_of(p) for p in child) in closed:
                    continue
                nodes.append((child, node, MoveMarker(marker_id, positions[index], to)))
                f = hops + 1 + 2.0 * estimate(child)
                heapq.heappush(heap, (f, next(counter), len(nodes) - 1, hops + 1))
    return None


def walk_to_coverage(
    markers: Sequence[MarkerState],
    targets: Sequence[Position],
    hop_radius: float,
    surface: Optional[GridSurface] = None,
    support: int = 1,
    covered: Optional[Callable[[List[MarkerState]], bool]] = None,
    accept: Optional[HopFilter] = None,
) -> List[MoveMarker]:
    """
    Moves the markers to the targets (matched greedily, closest pairs
    first), one hop at a time: the marker farthest from its target that
    can get closer hops as close to its target as possible while landing
    within hop_radius of at least 'support' of the other (stationary)
    markers. On a grid, when no marker can get closer, the remaining
    hops are found by [search_walk]().

    Arguments:
      markers: the markers to move (at least two)
      targets: one target per marker
      hop_radius: reach of the stationary markers
      surface: landing columns; if None, markers land anywhere on the
        segment to their target
      support: number of stationary markers a landing must be within reach of
      covered: optional predicate on the markers, the walk stops as
        soon as it holds
      accept: optional filter of the landings

    Raises:
      StrandedMarkerError: no marker can get closer to its target
    """
    if len(markers) < 2:
        raise InvalidInputError(f"walking requires at least 2 markers, got {len(markers)}")
    if len(targets) != len(markers):
        raise InvalidInputError(f"expected {len(markers)} targets, got {len(targets)}")
    assigned = _match(markers, targets)
    state = {m.id: m for m in markers}
    order = [m.id for m in markers]
    moves: List[MoveMarker] = []

    def remaining(marker_id: int) -> float:
        position, target = state[marker_id].position, assigned[marker_id]
        if surface is None:
            return math.dist(position, target)
        return _horizontal(position, target)

    for _ in range(_MAX_HOPS):
        if covered is not None and covered([state[i] for i in order]):
            return moves
        pending = sorted(
            (i for i in order if tuple(state[i].position) != tuple(assigned[i])),
            key=lambda i: (-remaining(i), i),
        )
        if not pending:
            return moves
        positions = {i: state[i].position for i in order}
        for marker_id in pending:
            stationary = [state[i].position for i in order if i != marker_id]
            position, target = state[marker_id].position, assigned[marker_id]
            if surface is None:
                landing = _continuous_hop(position, target, stationary, hop_radius, support)
                if landing is not None and accept is not None:
                    if not accept(marker_id, landing, positions):
                        landing = None
            else:
                allowed = None
                if accept is not None:
                    allowed = functools.partial(_allowed, accept, marker_id, positions)
                landing = _grid_hop(
                    position, target, stationary, hop_radius, support, surface, allowed
                )
            if landing is not None and tuple(landing) != tuple(position):
                moves.append(MoveMarker(marker_id, tuple(position), tuple(landing)))
                state[marker_id] = state[marker_id].moved(tuple(landing))
                _logger.debug(f"\tmarker {marker_id}: {position} -> {landing}")
                break
        else:
            stranded = pending[0]
            if surface is not None:
                current = [state[i] for i in order]
                tail = search_walk(current, targets, hop_radius, surface, support, accept)
                if tail is not None:
                    _logger.debug(f"\twalk completed by search: {len(tail)} hop(s)")
                    return moves + tail
            raise StrandedMarkerError(
                stranded,
                f"can not hop from {state[stranded].position} toward {assigned[stranded]}",
            )
    raise StrandedMarkerError(order[0], f"no convergence after {_MAX_HOPS} hops")


def _allowed(
    accept: HopFilter, marker_id: int, positions: Dict[int, Position], landing: Position
) -> bool:
    return accept(marker_id, landing, positions)


def _ring(columns: Iterable[Column], distance: int = 1) -> Set[Column]:
    result = set()
    for i, j in columns:
        for di in range(-distance, distance + 1):
            for dj in range(-distance, distance + 1):
                result.add((i + di, j + dj))
    return result


# actions tried by the search of the order of the actions of a cluster
CLUSTER_SEARCH_BUDGET = 2000

_ADJACENT = math.sqrt(2.0) + _SLACK


class _Assembly:
    # mutable state of plan_assembly: placed slots, height of the columns,
    # markers and emitted actions

    def __init__(
        self,
        structure: Structure,
        markers: Sequence[MarkerState],
        r: float,
        settings: PlannerSettings,
        seed: int,
        visibility: Optional[VisibilityRequirement] = None,
    ) -> None:
        self.structure = structure
        self.r = r
        self.settings = settings
        self.seed = seed
        self.visibility = visibility
        self.hop_radius = settings.hop_radius_for(r)
        self.support = settings.support_for(len(markers))
        self.markers = list(markers)
        self.placed: Set[Slot] = set()
        self.tops: Dict[Column, int] = {}
        self.actions: List[Action] = []
        self.base = structure.base
        self.world = WorldState(markers)
        footprint = structure.columns()
        self.landing_columns = _ring(footprint) | {_column_of(m.position) for m in markers}

    def surface(self, extra: Iterable[Column] = ()) -> GridSurface:
        columns = set(self.landing_columns) | set(extra)
        columns |= {_column_of(m.position) for m in self.markers}
        return GridSurface(columns, self.base, self.tops)

    def marker_columns(self, exclude: Optional[int] = None) -> Set[Column]:
        return {_column_of(m.position) for m in self.markers if m.id != exclude}

    def marker(self, marker_id: int) -> MarkerState:
        return next(m for m in self.markers if m.id == marker_id)

    def place(self, slot: Slot) -> None:
        self.actions.append(PlaceBlock((slot.i, slot.j, slot.k)))
        self.placed.add(slot)
        self.tops[slot.column] = max(self.tops.get(slot.column, slot.k), slot.k)
        self.world.place(slot)

    def move(self, marker: MarkerState, to: Position) -> None:
        self.actions.append(MoveMarker(marker.id, tuple(marker.position), tuple(to)))
        self.markers = [m.moved(to) if m.id == marker.id else m for m in self.markers]
        self.world.move(marker.id, to)

    def hop_filter(self) -> Optional[HopFilter]:
        requirement = self.visibility
        if requirement is None:
            return None
        world = self.world

        def accept(marker_id: int, landing: Position, positions: Dict[int, Position]) -> bool:
            return requirement.assess(world.with_markers(positions), landing, marker_id).ok

        return accept

    def walk(self, targets: Sequence[Position], layer_index: int, cluster_index: int) -> None:
        surface = self.surface(_column_of(t) for t in targets)
        try:
            moves = walk_to_coverage(
                self.markers,
                targets,
                self.hop_radius,
                surface,
                self.support,
                accept=self.hop_filter(),
            )
        except StrandedMarkerError as e:
            raise StrandedMarkerError(
                e.marker_id, f"layer {layer_index}, cluster {cluster_index}: {e}"
            )
        self.actions.extend(moves)
        self.markers = apply_moves(self.markers, moves)
        for move in moves:
            self.world.move(move.marker_id, move.to)

    def relocation_target(
        self, marker: MarkerState, cluster: Sequence[Slot], layer: Sequence[Slot]
    ) -> Position:
        vacated = _column_of(marker.position)
        stationary = [m.position for m in self.markers if m.id != marker.id]
        taken = self.marker_columns(exclude=marker.id) | {vacated}
        cluster_columns = {s.column for s in cluster}
        unplaced_layer = {s.column for s in layer if s not in self.placed}
        tiers = [
            sorted(s.column for s in cluster if s in self.placed),
            sorted(s.column for s in layer if s in self.placed),
            sorted(_ring(cluster_columns) - cluster_columns - unplaced_layer),
        ]
        surface = GridSurface(self.landing_columns | set(tiers[2]), self.base, self.tops)
        for tier in tiers:
            candidates = [
                c
                for c in tier
                if c not in taken
                and sum(
                    1 for q in stationary if _horizontal(c, q) <= self.hop_radius + _SLACK
                )
                >= self.support
            ]
            if candidates:
                best = min(candidates, key=lambda c: (_horizontal(c, vacated), c))
                return surface.landing(best)
        raise StrandedMarkerError(
            marker.id,
            f"no block to climb on near {marker.position} "
            "within reach of the other markers",
        )

    def build_cluster(
        self, cluster: Sequence[Slot], layer: Sequence[Slot], layer_index: int, cluster_index: int
    ) -> None:
        m = len(self.markers)
        destinations = select_marker_destinations(cluster, m)
        self.walk(destinations, layer_index, cluster_index)
        if self.visibility is not None:
            self.order_cluster(self.visibility, cluster, layer, layer_index, cluster_index)
            return
        occupied = self.marker_columns()
        for slot in cluster:
            if slot.column not in occupied:
                self.place(slot)
        by_column = {s.column: s for s in cluster}
        for marker in sorted(self.markers, key=lambda m: m.id):
            slot = by_column.get(_column_of(marker.position))
            if slot is None or slot in self.placed:
                continue
            self.move(marker, self.relocation_target(marker, cluster, layer))
            self.place(slot)

    def _relocations(
        self,
        world: WorldState,
        remaining: FrozenSet[Slot],
        cluster: Sequence[Slot],
        layer: Sequence[Slot],
    ) -> List[Tuple[int, float, int, Column, Position]]:
        # (tier, distance, marker id, column, landing) of the moves of the
        # markers standing on unplaced slots: onto a placed block of the
        # cluster (tier 0) or of the layer (tier 1), or around the cluster
        remaining_columns = {s.column for s in remaining}
        cluster_columns = {s.column for s in cluster}
        layer_columns = {s.column for s in layer}
        taken = {_column_of(p) for p in world.markers.values()}
        tiers = [
            sorted(s.column for s in cluster if s in world.placed),
            sorted(
                s.column for s in layer if s in world.placed and s.column not in cluster_columns
            ),
            sorted(_ring(cluster_columns) - layer_columns),
        ]
        level = cluster[0].k
        ring = GridSurface(tiers[2], self.base, self.tops)
        relocations = []
        for marker_id, position in sorted(world.markers.items()):
            if _column_of(position) not in remaining_columns:
                continue
            others = [p for i, p in world.markers.items() if i != marker_id]
            for tier, columns in enumerate(tiers):
                for c in columns:
                    if c in taken:
                        continue
                    reach = sum(
                        1 for q in others if _horizontal(c, q) <= self.hop_radius + _SLACK
                    )
                    if reach < self.support:
                        continue
                    if tier < 2:
                        landing: Position = (float(c[0]), float(c[1]), float(level + 1))
                    else:
                        landing = ring.landing(c)
                    relocations.append(
                        (tier, _horizontal(c, position), marker_id, c, landing)
                    )
        return sorted(relocations)

    def _cluster_children(
        self,
        requirement: VisibilityRequirement,
        world: WorldState,
        remaining: FrozenSet[Slot],
        cluster: Sequence[Slot],
        layer: Sequence[Slot],
    ) -> Iterator[Action]:
        # candidate next actions, in order of preference: climbing on an
        # adjacent placed block, placing next to a marker which has to
        # climb, any other climb, any other placement
        remaining_columns = {s.column for s in remaining}
        marker_columns = {_column_of(p) for p in world.markers.values()}
        blocking = [p for p in world.markers.values() if _column_of(p) in remaining_columns]
        free = [s for s in sorted(remaining) if s.column not in marker_columns]
        relocations = self._relocations(world, remaining, cluster, layer)

        def move(relocation: Tuple[int, float, int, Column, Position]) -> Optional[MoveMarker]:
            _, _, marker_id, _, landing = relocation
            if requirement.assess(world, landing, marker_id).ok:
                return MoveMarker(marker_id, world.markers[marker_id], landing)
            return None

        def near(slot: Slot) -> float:
            return min((_horizontal(slot.position, p) for p in blocking), default=math.inf)

        first = [x for x in relocations if x[0] == 0 and x[1] <= _ADJACENT]
        for relocation in sorted(first, key=lambda x: (x[1], x[2], x[3])):
            action = move(relocation)
            if action is not None:
                yield action
        adjacent = [s for s in free if near(s) <= _ADJACENT]
        in_sight = {s: requirement.assess(world, s.position) for s in adjacent}
        for slot in sorted(adjacent, key=lambda s: (near(s), -len(in_sight[s].visible), s)):
            if in_sight[slot].ok:
                yield PlaceBlock((slot.i, slot.j, slot.k))
        for relocation in relocations:
            if relocation in first:
                continue
            action = move(relocation)
            if action is not None:
                yield action
        others = [s for s in free if near(s) > _ADJACENT]
        in_sight = {s: requirement.assess(world, s.position) for s in others}
        for slot in sorted(others, key=lambda s: (-len(in_sight[s].visible), s)):
            if in_sight[slot].ok:
                yield PlaceBlock((slot.i, slot.j, slot.k))

    def order_cluster(
        self,
        requirement: VisibilityRequirement,
        cluster: Sequence[Slot],
        layer: Sequence[Slot],
        layer_index: int,
        cluster_index: int,
    ) -> None:
        """
        Depth first search of an order of the placements of the cluster
        and of the climbs of the markers standing on its slots, such that
        every action keeps the required markers in sight.
        """
        tried = itertools.count()
        seen: Set[Tuple[FrozenSet[Slot], Tuple[Tuple[int, Position], ...]]] = set()

        def search(world: WorldState, remaining: FrozenSet[Slot]) -> Optional[List[Action]]:
            if not remaining:
                return []
            key = (remaining, tuple(sorted(world.markers.items())))
            if key in seen:
                return None
            seen.add(key)
            for action in self._cluster_children(requirement, world, remaining, cluster, layer):
                if next(tried) >= CLUSTER_SEARCH_BUDGET:
                    return None
                child = world.copy()
                if isinstance(action, PlaceBlock):
                    slot = Slot(*(int(v) for v in action.slot))
                    child.place(slot)
                    tail = search(child, remaining - {slot})
                else:
                    child.move(action.marker_id, action.to)
                    tail = search(child, remaining)
                if tail is not None:
                    return [action] + tail
            return None

        unplaced = frozenset(s for s in cluster if s not in self.placed)
        actions = search(self.world.copy(), unplaced)
        if actions is None:
            raise OcclusionError(
                len(self.actions),
                f"layer {layer_index}, cluster {cluster_index}: no order of its "
                f"{len(unplaced)} placement(s) keeps "
                f"{requirement.min_visible} marker(s) in sight",
            )
        _logger.debug(
            f"\tlayer {layer_index}, cluster {cluster_index}: "
            f"{len(actions)} action(s) in sight of the markers"
        )
        for action in actions:
            if isinstance(action, PlaceBlock):
                self.place(Slot(*(int(v) for v in action.slot)))
            else:
                self.move(self.marker(action.marker_id), action.to)

    def build_small_layer(self, layer: Sequence[Slot], layer_index: int) -> None:
        # fewer slots than markers: markers stand around the layer
        m = len(self.markers)
        columns = {s.column for s in layer}
        centroid = np.array([s.position for s in layer], dtype=float).mean(axis=0)
        distance = 1
        while True:
            candidates = sorted(_ring(columns, distance) - columns)
            if len(candidates) >= m:
                break
            distance += 1
        candidates.sort(key=lambda c: (_horizontal(c, centroid), c))
        chosen: List[Column] = []
        for c in candidates:
            if all(_horizontal(c, o) <= self.hop_radius + _SLACK for o in chosen):
                chosen.append(c)
            if len(chosen) == m:
                break
        if len(chosen) < m:
            chosen = candidates[:m]
        surface = GridSurface(self.landing_columns | set(chosen), self.base, self.tops)
        targets = [surface.landing(c) for c in chosen]
        self.walk(targets, layer_index, 0)
        remaining = list(layer)
        while remaining:
            slot = remaining[0]
            if self.visibility is not None:
                requirement = self.visibility
                in_sight = [s for s in remaining if requirement.assess(self.world, s.position).ok]
                if not in_sight:
                    raise OcclusionError(
                        len(self.actions),
                        f"layer {layer_index}: {len(remaining)} slot(s) out of sight "
                        f"of {requirement.min_visible} marker(s)",
                    )
                slot = in_sight[0]
            self.place(slot)
            remaining.remove(slot)


def initial_markers(structure: Structure, m: int) -> List[MarkerState]:
    """
    m markers (ids 1 to m) on the foundation, on the free columns around
    the structure closest to the corner of its footprint.
    """
    if m < 1:
        raise InvalidInputError(f"the number of markers must be positive, got {m}")
    footprint = structure.columns() or [(0, 0)]
    corner = min(footprint)
    distance = 1
    while len(_ring(footprint, distance)) - len(footprint) < m:
        distance += 1
    candidates = sorted(
        _ring(footprint, distance) - set(footprint),
        key=lambda c: (_horizontal(c, corner), c),
    )
    return [
        MarkerState(index + 1, (float(c[0]), float(c[1]), float(structure.base)))
        for index, c in enumerate(candidates[:m])
    ]


def plan_assembly(
    structure: Structure,
    markers: Sequence[MarkerState],
    r: float,
    settings: PlannerSettings = PlannerSettings(),
    seed: int = 0,
    visibility: Optional[VisibilityRequirement] = None,
) -> Plan:
    """
    Plans the assembly of the structure, layer by layer, with
    clusters of extent at most r (structure units).

    If a visibility requirement is given, every action of the plan
    meets it: the hops of the walks are filtered by it, and the
    placements and climbs of each cluster are ordered by a bounded
    search so that the camera keeps the required markers in sight.

    Raises:
      InvalidInputError: fewer than two markers, or markers sharing a column
      ClusteringError, StrandedMarkerError: no plan could be found
      OcclusionError: no plan keeps the required markers in sight
    """
    if len(markers) < 2:
        raise InvalidInputError(f"at least 2 markers are required, got {len(markers)}")
    if len({m.id for m in markers}) != len(markers):
        raise InvalidInputError("marker ids must be unique")
    if len({_column_of(m.position) for m in markers}) != len(markers):
        raise InvalidInputError("markers must stand on distinct columns")
    if not r > 0.0:
        raise InvalidInputError(f"planning radius must be positive, got {r}")

    if visibility is not None and len(structure) and len(markers) - 1 < visibility.min_visible:
        raise OcclusionError(
            0,
            f"a move of one of {len(markers)} marker(s) leaves {len(markers) - 1} in sight, "
            f"{visibility.min_visible} required",
        )

    assembly = _Assembly(structure, markers, r, settings, seed, visibility)
    m = len(markers)
    clusters_per_layer: List[int] = []

    for layer_index, layer in enumerate(divide_layers(structure)):
        if len(layer) < m:
            assembly.build_small_layer(layer, layer_index)
            clusters_per_layer.append(1)
            _logger.info(f"\tlayer {layer_index}: {len(layer)} slot(s), markers staged around it")
            continue
        clusters = cluster_until_radius(
            layer,
            r,
            m,
            seed,
            extent=settings.extent,
            restarts=settings.restarts,
            max_iterations=settings.max_iterations,
            layer_index=layer_index,
        )
        clusters_per_layer.append(clusters.k)
        _logger.info(f"\tlayer {layer_index}: {len(layer)} slot(s), {clusters.k} cluster(s)")
        start = np.array([mk.position for mk in assembly.markers], dtype=float).mean(axis=0)
        members = clusters.members(layer)
        for cluster_index in find_tour([c.center for c in clusters.clusters], start):
            assembly.build_cluster(members[cluster_index], layer, layer_index, cluster_index)

    missing = set(structure.slots) - assembly.placed
    if missing:
        raise InfeasibleError(f"{len(missing)} slot(s) not placed, e.g. {min(missing)}")

    _logger.info(f"\tplan of {len(assembly.actions)} action(s) for {len(structure)} slot(s)")
    return Plan(
        actions=assembly.actions,
        markers=list(markers),
        r=r,
        seed=seed,
        clusters_per_layer=clusters_per_layer,
    )
