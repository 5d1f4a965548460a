"""Insertion-only Meyerson sketches.

A single run keeps a growing center set; each arriving point opens a new
center with probability min(k(1+log Delta) d(x,S)^p / L, 1) and is otherwise
charged to its nearest center. Several independent runs per guess L amplify
the success probability, and a doubling grid of guesses removes the need to
know the optimum.

Updates are split in two so callers can look before they leap:
:meth:`SingleSketch.propose` does the distance work and draws the coin,
:meth:`SingleSketch.commit` applies the outcome.
"""

from __future__ import annotations

import random
from typing import NamedTuple, Sequence

import numpy as np

from .config import ProblemConfig, derive_random
from .metric import EUCLIDEAN, DistanceMeter, Metric, Point, WeightedInstance

NEW = 0
ASSIGNED = 1
DROPPED = 2  # would exceed the cap: the copy closes and ignores the point
SKIPPED = 3  # copy already closed


class Assignment(NamedTuple):
    kind: int
    center: int  # position in the sketch's center list (-1 unless ASSIGNED)
    dp: float  # d(x, nearest)^p, 0 for NEW


class SingleSketch:
    """One Meyerson run at a fixed guess ``L`` of the optimum."""

    _INIT_CAP = 8

    def __init__(self, L: float, size_cap: int, sampling_factor: float, p: float,
                 rng: random.Random, metric: Metric = EUCLIDEAN):
        self.L = float(L)
        self.size_cap = int(size_cap)
        self.sampling_factor = float(sampling_factor)
        self.p = float(p)
        self.rng = rng
        self.metric = metric
        self.closed = False
        self.cost_mu = 0.0
        self.processed = 0
        self.n = 0
        self.ids: list[int] = []
        self._coords: np.ndarray | None = None
        self._weights = np.zeros(self._INIT_CAP)

    # -- views -----------------------------------------------------------
    @property
    def coords(self) -> np.ndarray:
        if self._coords is None:
            return np.empty((0, 0))
        return self._coords[: self.n]

    @property
    def weights(self) -> np.ndarray:
        return self._weights[: self.n]

    @property
    def centers(self) -> list[Point]:
        return [Point(self._coords[i], self.ids[i]) for i in range(self.n)]

    def __len__(self) -> int:
        return self.n

    def instance(self) -> WeightedInstance:
        return WeightedInstance(self.coords.copy(), self.weights.copy(), np.array(self.ids, dtype=np.int64))

    def open_probability(self, dp: float) -> float:
        return min(self.sampling_factor * dp / self.L, 1.0)

    # -- update ----------------------------------------------------------
    def propose(self, x: Point, meter: DistanceMeter) -> Assignment:
        if self.closed:
            return Assignment(SKIPPED, -1, 0.0)
        if self.n == 0:
            return Assignment(NEW, -1, 0.0)
        d = self.metric.to_many(x.coords, self._coords[: self.n])
        meter.add(self.n)
        j = int(np.argmin(d))
        dp = float(d[j]) ** self.p
        u = self.rng.random()
        if u < self.open_probability(dp):
            if self.n + 1 > self.size_cap:
                return Assignment(DROPPED, -1, 0.0)
            return Assignment(NEW, -1, 0.0)
        return Assignment(ASSIGNED, j, dp)

    def commit(self, x: Point, a: Assignment) -> None:
        kind = a.kind
        if kind == SKIPPED:
            return
        if kind == DROPPED:
            self.closed = True
            return
        self.processed += 1
        if kind == ASSIGNED:
            self._weights[a.center] += 1
            self.cost_mu += a.dp
            return
        self._append(x)

    def _append(self, x: Point) -> None:
        if self._coords is None:
            self._coords = np.empty((self._INIT_CAP, x.dim))
        elif self._coords.shape[1] != x.dim:
            raise ValueError("dimension mismatch in stream")
        if self.n == self._coords.shape[0]:
            self._coords = np.concatenate([self._coords, np.empty_like(self._coords)])
            self._weights = np.concatenate([self._weights, np.zeros_like(self._weights)])
        self._coords[self.n] = x.coords
        self._weights[self.n] = 1
        self.ids.append(x.index)
        self.n += 1

    def remove_centers(self, keep: np.ndarray) -> None:
        """Retain only the centers whose positions are listed in ``keep``."""
        keep = np.asarray(keep, dtype=np.int64)
        if self._coords is not None:
            self._coords = self._coords[keep].copy() if len(keep) else self._coords[:0].copy()
        self._weights = self._weights[keep].copy() if len(keep) else np.zeros(self._INIT_CAP)
        self.ids = [self.ids[i] for i in keep]
        self.n = len(keep)


def single_update(sk: SingleSketch, x: Point, meter: DistanceMeter) -> Assignment:
    """Feed one point to one run. Updating a closed run is a flagged no-op."""
    a = sk.propose(x, meter)
    sk.commit(x, a)
    return a


class MultiSketch:
    """Independent runs sharing one guess."""

    def __init__(self, copies: list[SingleSketch]):
        self.copies = copies

    @property
    def total_centers(self) -> int:
        return sum(c.n for c in self.copies)


def multi_update(ms: MultiSketch, x: Point, meter: DistanceMeter) -> list[Assignment]:
    return [single_update(c, x, meter) for c in ms.copies]


def _select_copy(stats: Sequence[tuple[bool, int, float]]) -> int | None:
    best = None
    for i, (closed, _size, cost) in enumerate(stats):
        if closed:
            continue
        if best is None or cost < stats[best][2]:
            best = i
    return best


def select_copy(ms: MultiSketch) -> SingleSketch | None:
    """Open copy of minimum mapping cost, or None when every copy closed."""
    i = _select_copy([(c.closed, c.n, c.cost_mu) for c in ms.copies])
    return None if i is None else ms.copies[i]


def pick_guess(guesses: Sequence[float], stats: Sequence[Sequence[tuple[bool, int, float]]],
               size_bound: float, cost_factor: float) -> tuple[int, int] | None:
    """(guess, copy) positions chosen by the smallest-qualifying-guess rule.

    ``stats[g][c]`` is (closed, size, cost_mu) for copy c of guess g.
    """
    for g, L in enumerate(guesses):
        row = stats[g]
        c = _select_copy(row)
        if c is None:
            continue
        total = sum(s[1] for s in row)
        if total < size_bound and row[c][2] < cost_factor * L:
            return g, c
    return None


class GuessGrid:
    """One :class:`MultiSketch` per guess L in {m, 2m, 4m, ...}."""

    def __init__(self, cfg: ProblemConfig, seed: int, key: tuple[int, ...] = (),
                 metric: Metric = EUCLIDEAN, factory=SingleSketch):
        self.cfg = cfg
        self.guesses = cfg.guesses
        self.multis = [
            MultiSketch([
                factory(L, cfg.copy_cap, cfg.sampling_factor, cfg.p,
                        derive_random(seed, *key, g, c), metric)
                for c in range(cfg.n_copies)
            ])
            for g, L in enumerate(self.guesses)
        ]

    def stats(self) -> list[list[tuple[bool, int, float]]]:
        return [[(c.closed, c.n, c.cost_mu) for c in ms.copies] for ms in self.multis]

    def update(self, x: Point, meter: DistanceMeter) -> None:
        for ms in self.multis:
            multi_update(ms, x, meter)


def select_guess(grid: GuessGrid) -> tuple[int, SingleSketch] | None:
    """Smallest guess whose best copy is small enough and cheap enough."""
    cfg = grid.cfg
    pick = pick_guess(grid.guesses, grid.stats(), cfg.guess_size_bound, cfg.guess_cost_factor)
    if pick is None:
        return None
    g, c = pick
    return g, grid.multis[g].copies[c]
