"""Points, distances and clustering costs.

Everything else in the package measures work in distance evaluations, so every
routine here takes a :class:`DistanceMeter` and charges it exactly one unit per
point-to-point distance it computes, whether computed one at a time or as part
of a vectorised block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DistanceMeter:
    """Counter of distance evaluations.

    Not locked: a worker keeps its own meter and the owner folds it in with
    :meth:`merge` at a synchronisation point, which keeps totals exact.
    """

    __slots__ = ("count",)

    def __init__(self, count: int = 0):
        self.count = int(count)

    def add(self, n: int) -> None:
        self.count += n

    def merge(self, other: "DistanceMeter") -> None:
        self.count += other.count

    def __repr__(self) -> str:
        return f"DistanceMeter(count={self.count})"


class Metric:
    """Distance interface. Subclasses implement the three shapes used here."""

    def one(self, a: np.ndarray, b: np.ndarray) -> float:
        raise NotImplementedError

    def to_many(self, x: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Distances from one vector to each row of ``Y``."""
        raise NotImplementedError

    def cross(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Full ``len(X) x len(Y)`` distance matrix."""
        raise NotImplementedError


class Euclidean(Metric):
    def one(self, a, b):
        return math.sqrt(float(np.dot(a - b, a - b)))

    def to_many(self, x, Y):
        diff = Y - x
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def cross(self, X, Y):
        xx = np.einsum("ij,ij->i", X, X)[:, None]
        yy = np.einsum("ij,ij->i", Y, Y)[None, :]
        sq = xx + yy - 2.0 * (X @ Y.T)
        np.maximum(sq, 0.0, out=sq)
        return np.sqrt(sq)


EUCLIDEAN = Euclidean()


@dataclass(frozen=True, eq=False)
class Point:
    """A stream element: coordinates plus its arrival position.

    Identity is (coords, index); two arrivals with equal coordinates are
    different points.
    """

    coords: np.ndarray
    index: int

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1:
            raise ValueError("Point coords must be a 1-d vector")
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.index, self.coords.tobytes()))

    def __repr__(self):
        return f"Point({self.coords.tolist()}, t={self.index})"


def as_matrix(points: Sequence[Point] | np.ndarray) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        return np.empty((0, 0))
    return np.vstack([p.coords for p in points])


@dataclass
class WeightedInstance:
    """Centers with nonnegative real weights.

    Stored column-wise (coordinate matrix, weights, arrival indices) because
    the solver only ever wants the matrix; ``centers`` rebuilds Points.
    """

    coords: np.ndarray
    weights: np.ndarray
    indices: np.ndarray = field(default=None)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim == 1:
            self.coords = self.coords.reshape(0 if self.coords.size == 0 else 1, -1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        n = self.coords.shape[0]
        if self.weights.shape[0] != n:
            raise ValueError("weights and centers differ in length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if self.indices is None:
            self.indices = np.full(n, -1, dtype=np.int64)
        else:
            self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)

    @classmethod
    def from_points(cls, centers: Sequence[Point], weights: Sequence[float]) -> "WeightedInstance":
        if len(centers) == 0:
            return cls.empty()
        return cls(as_matrix(centers), weights, [c.index for c in centers])

    @classmethod
    def empty(cls, dim: int = 0) -> "WeightedInstance":
        return cls(np.empty((0, dim)), np.empty(0), np.empty(0, dtype=np.int64))

    @property
    def centers(self) -> list[Point]:
        return [Point(self.coords[i], int(self.indices[i])) for i in range(len(self))]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def positive(self) -> "WeightedInstance":
        keep = self.weights > 0
        return WeightedInstance(self.coords[keep], self.weights[keep], self.indices[keep])

    def __len__(self) -> int:
        return self.coords.shape[0]


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return p


def distance(a: Point, b: Point, meter: DistanceMeter, metric: Metric = EUCLIDEAN) -> float:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    meter.add(1)
    return metric.one(a.coords, b.coords)


def nearest_center(x: Point, centers: Sequence[Point], meter: DistanceMeter,
                   metric: Metric = EUCLIDEAN) -> tuple[int, float]:
    """Index of the closest center (lowest index on ties) and the distance."""
    if len(centers) == 0:
        raise ValueError("nearest_center needs at least one center")
    C = as_matrix(centers)
    if C.shape[1] != x.dim:
        raise ValueError("dimension mismatch between point and centers")
    d = metric.to_many(x.coords, C)
    meter.add(len(d))
    i = int(np.argmin(d))  # argmin returns the first minimum
    return i, float(d[i])


def min_dists(X: np.ndarray, C: np.ndarray, meter: DistanceMeter,
              metric: Metric = EUCLIDEAN) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center index and distance for every row of ``X``."""
    if C.shape[0] == 0:
        raise ValueError("need at least one center")
    if X.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    if X.shape[1] != C.shape[1]:
        raise ValueError("dimension mismatch between points and centers")
    D = metric.cross(X, C)
    meter.add(D.size)
    idx = np.argmin(D, axis=1)
    return idx, D[np.arange(X.shape[0]), idx]


def clustering_cost(points, centers, p: float, meter: DistanceMeter,
                    metric: Metric = EUCLIDEAN) -> float:
    """Sum over points of (distance to nearest center) ** p."""
    p = _check_p(p)
    C = as_matrix(centers)
    if C.shape[0] == 0:
        raise ValueError("clustering_cost needs at least one center")
    X = as_matrix(points)
    if X.shape[0] == 0:
        return 0.0
    _, d = min_dists(X, C, meter, metric)
    return float(np.sum(d ** p))


def weighted_cost(instance: WeightedInstance, centers, p: float, meter: DistanceMeter,
                  metric: Metric = EUCLIDEAN) -> float:
    """Sum of weight * (distance to nearest center) ** p over the instance."""
    p = _check_p(p)
    C = as_matrix(centers)
    if C.shape[0] == 0:
        raise ValueError("weighted_cost needs at least one center")
    if len(instance) == 0:
        return 0.0
    _, d = min_dists(instance.coords, C, meter, metric)
    return float(np.dot(instance.weights, d ** p))
