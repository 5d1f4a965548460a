"""Bounds estimation, baselines, exact oracles and evaluation metrics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .metric import (EUCLIDEAN, DistanceMeter, Metric, Point, WeightedInstance,
                     as_matrix)
from .solver import Solution, solve_instance

BRUTE_FORCE_LIMIT = 20


def _unit(points) -> WeightedInstance:
    X = as_matrix(points)
    return WeightedInstance(X, np.ones(X.shape[0]))


def batch_baseline(window, k: int, p: float, rng: np.random.Generator, meter: DistanceMeter,
                   runs: int = 10, lloyd_iters: int = 10, metric: Metric = EUCLIDEAN) -> Solution:
    """Best of ``runs`` independent solver runs on the raw window."""
    X = as_matrix(window)
    if X.shape[0] == 0:
        raise ValueError("window is empty")
    sol = solve_instance(WeightedInstance(X, np.ones(X.shape[0])), k, p, rng, meter,
                         lloyd_iters=lloyd_iters, restarts=runs, metric=metric)
    sol.estimated_cost = sol.actual_instance_cost
    return sol


def estimate_bounds(prefix, w: int, k: int, p: float, rng: np.random.Generator,
                    meter: DistanceMeter, n_samples: int = 10, runs: int = 10,
                    metric: Metric = EUCLIDEAN) -> tuple[float, float, float]:
    """(m, M, Delta) from the solver costs of random window-sized slices of ``prefix``.

    m = max(m'/3, mu - 3 sigma) and M = max(3 M', mu + 3 sigma) where m', M',
    mu, sigma are the min, max, mean and (population) standard deviation of
    the sampled costs; Delta = M' floored at 1.
    """
    X = as_matrix(prefix)
    n = X.shape[0]
    if n < w:
        raise ValueError(f"prefix of {n} points is shorter than the window {w}")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    starts = rng.integers(0, n - w + 1, size=n_samples)
    costs = np.array([batch_baseline(X[s:s + w], k, p, rng, meter, runs=runs, metric=metric).actual_instance_cost
                      for s in starts])
    lo, hi = float(costs.min()), float(costs.max())
    mu, sigma = float(costs.mean()), float(costs.std())
    m = max(lo / 3, mu - 3 * sigma)
    M = max(3 * hi, mu + 3 * sigma)
    if not m > 0:
        positive = costs[costs > 0]
        m = float(positive.min()) / 3 if positive.size else 1e-9 * hi
        if not m > 0:
            m = 1e-9
    M = max(M, m)
    return m, M, max(hi, 1.0)


def brute_force_opt(points, k: int, p: float, meter: DistanceMeter,
                    metric: Metric = EUCLIDEAN) -> tuple[float, list[Point]]:
    """Exact optimum over all k-subsets of the input points (at most 20 points)."""
    pts = list(points)
    n = len(pts)
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} points, got {n}")
    if n == 0:
        return 0.0, []
    X = as_matrix(pts)
    D = metric.cross(X, X) ** p
    meter.add(n * n)
    r = min(k, n)
    best_cost, best = math.inf, None
    combos = itertools.combinations(range(n), r)
    while True:
        chunk = np.array(list(itertools.islice(combos, 4096)), dtype=np.int64)
        if chunk.size == 0:
            break
        costs = D[:, chunk].min(axis=2).sum(axis=0)
        j = int(np.argmin(costs))
        if costs[j] < best_cost:
            best_cost, best = float(costs[j]), chunk[j]
    return best_cost, [pts[i] for i in best]


class SlidingSampler:
    """Uniform sample without replacement of up to ``s`` points of the window.

    Every arrival gets one uniform key; the sample is the ``s`` smallest keys
    in the window. A point stays a candidate while fewer than ``s`` later
    arrivals have smaller keys, since until then it may re-enter the bottom
    ``s`` once older points expire. Expected candidates: about s (1 + ln(w/s)).
    """

    def __init__(self, w: int, s: int, rng: np.random.Generator, dim: Optional[int] = None):
        if s < 1:
            raise ValueError("sample size must be positive")
        self.w = w
        self.s = s
        self.rng = rng
        self.t: Optional[int] = None
        self._idx = np.empty(0, dtype=np.int64)
        self._key = np.empty(0)
        self._beat = np.empty(0, dtype=np.int64)
        self._X = None if dim is None else np.empty((0, dim))

    def update(self, x: Point) -> None:
        u = self.rng.random()
        self.t = x.index
        keep = self._idx > x.index - self.w
        self._beat = self._beat + (u < self._key)
        keep &= self._beat < self.s
        if self._X is None:
            self._X = np.empty((0, x.dim))
        self._idx = np.append(self._idx[keep], x.index)
        self._key = np.append(self._key[keep], u)
        self._beat = np.append(self._beat[keep], 0)
        self._X = np.vstack([self._X[keep], x.coords[None, :]])

    def stored(self) -> int:
        return int(self._idx.size)

    def sample_indices(self, s: Optional[int] = None) -> np.ndarray:
        """Arrival indices of the sample, ordered by key."""
        s = self.s if s is None else min(s, self.s)
        order = np.argsort(self._key, kind="stable")[:s]
        return self._idx[order]

    def sample(self, s: Optional[int] = None) -> np.ndarray:
        s = self.s if s is None else min(s, self.s)
        order = np.argsort(self._key, kind="stable")[:s]
        return self._X[order]

    def query(self, k: int, p: float, rng: np.random.Generator, meter: DistanceMeter,
              s: Optional[int] = None, runs: int = 10) -> Solution:
        return batch_baseline(self.sample(s), k, p, rng, meter, runs=runs)


def sampling_baseline(w: int, s: int, rng: np.random.Generator) -> SlidingSampler:
    return SlidingSampler(w, s, rng)


def _entropy(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    q = counts[counts > 0] / n
    return float(-(q * np.log(q)).sum())


def _conditional_entropy(table: np.ndarray) -> float:
    """H(row variable | column variable) for a contingency table."""
    n = table.sum()
    col = table.sum(axis=0)
    nz = table > 0
    ratio = np.where(nz, table / np.where(col > 0, col, 1)[None, :], 1.0)
    return float(-(table[nz] / n * np.log(ratio[nz])).sum())


def v_measure(pred_labels: Sequence[int], true_labels: Sequence[int]) -> float:
    """Harmonic mean of homogeneity and completeness (natural-log entropies)."""
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape:
        raise ValueError("label sequences differ in length")
    if pred.size == 0:
        raise ValueError("need at least one label")
    _, ti = np.unique(true, return_inverse=True)
    _, pi = np.unique(pred, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1))
    np.add.at(table, (ti, pi), 1)
    h_c = _entropy(table.sum(axis=1))
    h_k = _entropy(table.sum(axis=0))
    homogeneity = 1.0 if h_c == 0 else 1.0 - _conditional_entropy(table) / h_c
    completeness = 1.0 if h_k == 0 else 1.0 - _conditional_entropy(table.T) / h_k
    if homogeneity + completeness == 0:
        return 0.0
    return float(2 * homogeneity * completeness / (homogeneity + completeness))


def synth_sset(n: int, k_true: int, d: int, separation: float, rng: np.random.Generator,
               sigma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic Gaussian blobs with centers at pairwise distance >= separation * sigma.

    Labels are assigned round-robin and then shuffled, so cluster sizes differ
    by at most one and the stream order is random.
    """
    if n < 0 or k_true < 1 or d < 1 or separation <= 0:
        raise ValueError("invalid generator parameters")
    if n == 0:
        return np.empty((0, d)), np.empty(0, dtype=np.int64)
    gap = separation * sigma
    side = gap * max(2.0, 2.0 * k_true ** (1.0 / d))
    centers: list[np.ndarray] = []
    tries = 0
    while len(centers) < k_true:
        c = rng.uniform(0, side, size=d)
        if all(np.linalg.norm(c - o) >= gap for o in centers):
            centers.append(c)
        tries += 1
        if tries % 10000 == 0:
            side *= 1.25  # too crowded; enlarge the box
    C = np.array(centers)
    labels = np.arange(n) % k_true
    labels = labels[rng.permutation(n)]
    X = C[labels] + rng.normal(0.0, sigma, size=(n, d))
    return X, labels.astype(np.int64)


def assign_labels(X: np.ndarray, centers: np.ndarray, meter: DistanceMeter,
                  metric: Metric = EUCLIDEAN) -> np.ndarray:
    from .metric import min_dists
    idx, _ = min_dists(X, centers, meter, metric)
    return idx


@dataclass
class MetricRow:
    t: int
    algo: str
    cost: float
    estimated_cost: float
    points_stored: int
    distance_evals: int
    v_measure: Optional[float] = None


@dataclass
class RunMetrics:
    """Per-query rows for every algorithm in one run."""

    rows: list[MetricRow] = field(default_factory=list)

    def add(self, row: MetricRow) -> None:
        same = [r.t for r in self.rows if r.algo == row.algo]
        if same and row.t <= same[-1]:
            raise ValueError("query times must increase per algorithm")
        if row.points_stored < 0:
            raise ValueError("points_stored must be nonnegative")
        self.rows.append(row)

    def series(self, algo: str, column: str) -> np.ndarray:
        return np.array([getattr(r, column) for r in self.rows if r.algo == algo], dtype=float)

    def algos(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r.algo not in seen:
                seen.append(r.algo)
        return seen
