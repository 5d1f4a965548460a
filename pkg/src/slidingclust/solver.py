"""Offline clustering of weighted instances and the sketch-side cost estimate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metric import (EUCLIDEAN, DistanceMeter, Metric, Point, WeightedInstance,
                     _check_p, as_matrix, min_dists)


@dataclass
class Solution:
    """Centers chosen by the solver plus the two costs the window layer needs."""

    centers: list[Point]
    estimated_cost: float = 0.0
    actual_instance_cost: float = 0.0
    coords: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.coords is None:
            self.coords = as_matrix(self.centers)


def _positive(instance: WeightedInstance) -> WeightedInstance:
    if len(instance) == 0:
        raise ValueError("cannot cluster an empty instance")
    pos = instance.positive()
    if len(pos) == 0:
        raise ValueError("instance has no positive-weight center")
    return pos


def _seed(X: np.ndarray, w: np.ndarray, k: int, p: float, rng: np.random.Generator,
          meter: DistanceMeter, metric: Metric) -> list[int]:
    """D^p sampling over the rows of X weighted by w; returns row positions."""
    n = X.shape[0]
    cum = np.cumsum(w)
    first = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    first = min(first, n - 1)
    chosen = [first]
    dmin = metric.to_many(X[first], X)
    meter.add(n)
    while len(chosen) < k:
        score = w * dmin ** p
        cum = np.cumsum(score)
        tot = cum[-1]
        if not tot > 0:
            break  # every remaining point already sits on a center
        nxt = int(np.searchsorted(cum, rng.random() * tot, side="right"))
        nxt = min(nxt, n - 1)
        while score[nxt] <= 0:  # only reachable through float edge cases
            nxt -= 1
        chosen.append(nxt)
        d = metric.to_many(X[nxt], X)
        meter.add(n)
        np.minimum(dmin, d, out=dmin)
    return chosen


def weighted_seed(instance: WeightedInstance, k: int, p: float, rng: np.random.Generator,
                  meter: DistanceMeter, metric: Metric = EUCLIDEAN) -> list[Point]:
    """k-means++ style seeding generalised to D^p with instance weights."""
    p = _check_p(p)
    pos = _positive(instance)
    idx = _seed(pos.coords, pos.weights, k, p, rng, meter, metric)
    return [Point(pos.coords[i], int(pos.indices[i])) for i in idx]


def _lloyd(X, w, idx, iters, tol, meter, metric):
    """Medoid-snapped Lloyd steps for p = 2; returns (positions, cost)."""
    C = X[idx]
    labels, d = min_dists(X, C, meter, metric)
    cost = float(np.dot(w, d * d))
    for _ in range(iters):
        new_idx = list(idx)
        for j in range(len(idx)):
            mask = labels == j
            wm = w[mask]
            if not mask.any() or wm.sum() <= 0:
                continue
            centroid = (wm[:, None] * X[mask]).sum(axis=0) / wm.sum()
            dc = metric.to_many(centroid, X)
            meter.add(X.shape[0])
            new_idx[j] = int(np.argmin(dc))
        if new_idx == list(idx):
            break
        labels2, d2 = min_dists(X, X[new_idx], meter, metric)
        cost2 = float(np.dot(w, d2 * d2))
        if not cost2 < cost:
            break
        improvement = (cost - cost2) / cost if cost > 0 else 0.0
        idx, labels, cost = new_idx, labels2, cost2
        if improvement < tol:
            break
    return idx, cost


def solve_instance(instance: WeightedInstance, k: int, p: float, rng: np.random.Generator,
                   meter: DistanceMeter, lloyd_iters: int = 10, restarts: int = 1,
                   tol: float = 1e-4, metric: Metric = EUCLIDEAN) -> Solution:
    """Best of ``restarts`` seeded (and, for p = 2, refined) solutions.

    ``actual_instance_cost`` on the result is the weighted cost of the
    instance against the returned centers.
    """
    p = _check_p(p)
    pos = _positive(instance)
    X, w = pos.coords, pos.weights
    best_idx, best_cost = None, np.inf
    for _ in range(max(1, restarts)):
        idx = _seed(X, w, k, p, rng, meter, metric)
        if p == 2 and lloyd_iters > 0 and len(idx) < X.shape[0]:
            idx, cost = _lloyd(X, w, idx, lloyd_iters, tol, meter, metric)
        else:
            _, d = min_dists(X, X[idx], meter, metric)
            cost = float(np.dot(w, d ** p))
        if cost < best_cost:
            best_idx, best_cost = idx, cost
    centers = [Point(X[i], int(pos.indices[i])) for i in best_idx]
    return Solution(centers, actual_instance_cost=best_cost, coords=X[best_idx].copy())


def solve(instance: WeightedInstance, k: int, p: float, rng: np.random.Generator,
          meter: DistanceMeter, lloyd_iters: int = 10, restarts: int = 1,
          metric: Metric = EUCLIDEAN) -> list[Point]:
    return solve_instance(instance, k, p, rng, meter, lloyd_iters, restarts, metric=metric).centers


def estimated_cost(view: tuple[WeightedInstance, float], centers, p: float,
                   meter: DistanceMeter, metric: Metric = EUCLIDEAN,
                   instance_cost: float | None = None) -> float:
    """2^(p-1) (cost_mu + weighted cost of the instance against ``centers``).

    Pass ``instance_cost`` when the weighted cost is already known to skip
    recomputing it.
    """
    p = _check_p(p)
    instance, cost_mu = view
    if instance_cost is None:
        C = as_matrix(centers)
        if C.shape[0] == 0:
            raise ValueError("estimated_cost needs at least one center")
        if len(instance) == 0:
            instance_cost = 0.0
        else:
            _, d = min_dists(instance.coords, C, meter, metric)
            instance_cost = float(np.dot(instance.weights, d ** p))
    return 2.0 ** (p - 1) * (cost_mu + instance_cost)
