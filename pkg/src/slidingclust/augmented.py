"""Meyerson sketches with the bookkeeping needed for sliding windows.

Every center carries a weight histogram (how many points were mapped to it
from time tau on) and, optionally, a shell table (a still-active stand-in for
it once it expires). Every run carries one cost histogram. From these,
:meth:`AugSketch.suffix` produces an eps-consistent weighted instance of any
recent suffix of the stream.

Updates follow a plan/apply protocol. :meth:`AugSketch.plan` performs all
distance work and random draws for one point without touching the sketch
state, :meth:`AugSketch.preview` shows what the selected run would look like
afterwards, and :meth:`AugSketch.apply` commits. A caller that decides not to
commit simply drops the plan; this replaces cloning the whole sketch.
"""

from __future__ import annotations

from functools import partial
from typing import Optional

import numpy as np

from .config import ProblemConfig
from .histograms import CostHistogram, ShellTable, WeightHistogram
from .metric import EUCLIDEAN, DistanceMeter, Metric, Point, WeightedInstance
from .meyerson import (ASSIGNED, DROPPED, NEW, SKIPPED, Assignment, GuessGrid,
                       SingleSketch, _select_copy)

FORMAT_VERSION = 1


class SketchInvalid(RuntimeError):
    """No guess qualifies: the cost bounds [m, M] are too narrow for the data."""


class TrackedSketch(SingleSketch):
    """A Meyerson run whose centers carry weight histograms and shell tables."""

    def __init__(self, L, size_cap, sampling_factor, p, rng, metric=EUCLIDEAN, *,
                 eps: float, w: int, cost_cap: float, shell_top: float, replace: bool):
        super().__init__(L, size_cap, sampling_factor, p, rng, metric)
        self.eps = eps
        self.w = w
        self.shell_top = shell_top
        self.replace = replace
        self.hists: list[WeightHistogram] = []
        self.shells: list[Optional[ShellTable]] = []
        self.cost_hist = CostHistogram(eps, cost_cap)

    def commit(self, x: Point, a: Assignment) -> None:
        kind = a.kind
        if kind == SKIPPED:
            return
        if kind == DROPPED:
            self.closed = True
            return
        self.processed += 1
        t = x.index
        if kind == ASSIGNED:
            c = a.center
            self._weights[c] += 1
            self.cost_mu += a.dp
            self.hists[c].record(1, t)
            if self.replace:
                self.shells[c].record(x.coords, t, a.dp, t)
            self.cost_hist.record(a.dp, t)
            return
        self._append(x)
        h = WeightHistogram(self.eps, self.w)
        h.record(1, t)
        self.hists.append(h)
        if self.replace:
            s = ShellTable(self.eps, self.shell_top)
            s.record(x.coords, t, 0.0, t)
            self.shells.append(s)
        else:
            self.shells.append(None)

    def remove_centers(self, keep: np.ndarray) -> None:
        super().remove_centers(keep)
        self.hists = [self.hists[i] for i in keep]
        self.shells = [self.shells[i] for i in keep]

    def stored_ids(self) -> set[int]:
        ids = set(self.ids)
        if self.replace:
            for s in self.shells:
                ids.update(s.ids)
        return ids

    def suffix(self, tau: int) -> tuple[WeightedInstance, float]:
        rows, wts, idx = [], [], []
        for i in range(self.n):
            wv = self.hists[i].query(tau)
            if wv <= 0:
                continue
            rep = self.shells[i].query(tau) if self.replace else None
            if rep is None:
                rows.append(self._coords[i])
                idx.append(self.ids[i])
            else:
                rows.append(rep[0])
                idx.append(rep[1])
            wts.append(wv)
        if not rows:
            dim = 0 if self._coords is None else self._coords.shape[1]
            return WeightedInstance.empty(dim), 0.0
        return WeightedInstance(np.vstack(rows), np.asarray(wts, dtype=float), idx), float(self.cost_hist.query(tau))


class Plan:
    """Outcome of feeding one point to every live run, not yet applied."""

    __slots__ = ("x", "rows", "pick")

    def __init__(self, x: Point, rows: list[Optional[list[Assignment]]]):
        self.x = x
        self.rows = rows
        self.pick: Optional[tuple[int, int]] = None


class AugSketch:
    """Guess grid of tracked Meyerson runs over one contiguous substream.

    ``replace_centers`` turns the shell tables on; without them suffix
    instances keep expired centers as their own representatives.

    With ``stop_on_cost=False`` a guess is abandoned only for size, never for
    its mapping cost. If the sketch will also never see more than ``horizon``
    points and that many cannot hit the size limits, the smallest live guess
    stays selected forever and the larger ones are dropped right away.
    """

    def __init__(self, cfg: ProblemConfig, seed: int, key: tuple[int, ...] = (),
                 metric: Metric = EUCLIDEAN, replace_centers: bool = True,
                 stop_on_cost: bool = True, horizon: Optional[int] = None):
        self.cfg = cfg
        self.seed = seed
        self.key = tuple(key)
        self.metric = metric
        self.replace_centers = replace_centers
        self.stop_on_cost = stop_on_cost
        self.horizon = horizon
        factory = partial(TrackedSketch, eps=cfg.epsilon, w=cfg.w, cost_cap=cfg.cost_cap,
                          shell_top=cfg.shell_top, replace=replace_centers)
        self.grid = GuessGrid(cfg, seed, self.key, metric, factory)
        self.guesses = self.grid.guesses
        # None marks a retired guess; it can never qualify again
        self.multis: list[Optional[list[TrackedSketch]]] = [ms.copies for ms in self.grid.multis]
        self.first_index: Optional[int] = None
        self.last_index: Optional[int] = None
        self.n_points = 0
        self.frozen = False
        self._retire()

    def _size_safe(self) -> bool:
        """True when no run can ever close or outgrow the bound within ``horizon``."""
        cfg = self.cfg
        return (not self.stop_on_cost and self.horizon is not None
                and self.horizon <= cfg.copy_cap and cfg.n_copies * self.horizon < cfg.guess_size_bound)

    # -- selection -------------------------------------------------------
    def _row_stats(self, g: int, row: Optional[list[Assignment]] = None):
        copies = self.multis[g]
        if row is None:
            return [(c.closed, c.n, c.cost_mu) for c in copies]
        out = []
        for c, a in zip(copies, row):
            k = a.kind
            out.append((c.closed or k == DROPPED, c.n + (k == NEW), c.cost_mu + (a.dp if k == ASSIGNED else 0.0)))
        return out

    def _pick(self, rows=None) -> Optional[tuple[int, int]]:
        cfg = self.cfg
        bound = cfg.guess_size_bound
        factor = cfg.guess_cost_factor
        for g, L in enumerate(self.guesses):
            if self.multis[g] is None:
                continue
            stats = self._row_stats(g, None if rows is None else rows[g])
            c = _select_copy(stats)
            if c is None:
                continue
            if self.frozen or (sum(s[1] for s in stats) < bound
                               and (not self.stop_on_cost or stats[c][2] < factor * L)):
                return g, c
        return None

    def selected(self) -> Optional[TrackedSketch]:
        pick = self._pick()
        return None if pick is None else self.multis[pick[0]][pick[1]]

    def selected_guess(self) -> Optional[int]:
        pick = self._pick()
        return None if pick is None else pick[0]

    # -- update ----------------------------------------------------------
    def plan(self, x: Point, meter: DistanceMeter) -> Plan:
        if self.frozen:
            raise RuntimeError("frozen sketches take no more points")
        if self.last_index is not None and x.index <= self.last_index:
            raise ValueError("arrival indices must increase")
        rows = [None if copies is None else [c.propose(x, meter) for c in copies]
                for copies in self.multis]
        return Plan(x, rows)

    def preview(self, plan: Plan) -> Optional[tuple[WeightedInstance, float]]:
        """Consistent instance and mapping cost of the run selected after ``plan``."""
        pick = self._pick(plan.rows)
        plan.pick = pick
        if pick is None:
            return None
        g, c = pick
        sk = self.multis[g][c]
        a = plan.rows[g][c]
        coords, weights, ids = sk.coords, sk.weights.copy(), list(sk.ids)
        cost = sk.cost_mu
        if a.kind == NEW:
            coords = np.vstack([coords, plan.x.coords[None, :]]) if sk.n else plan.x.coords[None, :].copy()
            weights = np.append(weights, 1.0)
            ids.append(plan.x.index)
        elif a.kind == ASSIGNED:
            weights[a.center] += 1
            cost += a.dp
        return WeightedInstance(coords, weights, ids), cost

    def apply(self, plan: Plan) -> None:
        x = plan.x
        for copies, row in zip(self.multis, plan.rows):
            if copies is None:
                continue
            for c, a in zip(copies, row):
                c.commit(x, a)
        if self.first_index is None:
            self.first_index = x.index
        self.last_index = x.index
        self.n_points += 1
        self._retire()

    def update(self, x: Point, meter: DistanceMeter) -> None:
        self.apply(self.plan(x, meter))

    def _retire(self) -> None:
        """Free guesses that fail the size or cost test; both only get worse."""
        cfg = self.cfg
        for g, copies in enumerate(self.multis):
            if copies is None:
                continue
            stats = [(c.closed, c.n, c.cost_mu) for c in copies]
            c = _select_copy(stats)
            if (c is None or sum(s[1] for s in stats) >= cfg.guess_size_bound
                    or (self.stop_on_cost and stats[c][2] >= cfg.guess_cost_factor * self.guesses[g])):
                self.multis[g] = None
        if self._size_safe():
            live = [g for g, copies in enumerate(self.multis) if copies is not None]
            for g in live[1:]:
                self.multis[g] = None

    # -- views -----------------------------------------------------------
    def _require(self) -> TrackedSketch:
        sk = self.selected()
        if sk is None:
            raise SketchInvalid("sketch invalid, widen bounds: no guess qualifies")
        return sk

    def view(self) -> tuple[WeightedInstance, float]:
        """Consistent weighted instance of the whole substream, with its mapping cost."""
        sk = self._require()
        return sk.instance(), sk.cost_mu

    def suffix(self, tau: int) -> tuple[WeightedInstance, float]:
        """eps-consistent instance of the points that arrived at or after ``tau``."""
        if self.n_points == 0:
            return WeightedInstance.empty(), 0.0
        return self._require().suffix(tau)

    def freeze(self) -> None:
        """Keep only the selected run; the sketch becomes read-only."""
        pick = self._pick()
        if pick is None:
            self.multis = [None] * len(self.multis)
        else:
            g, c = pick
            keep = self.multis[g][c]
            self.multis = [None] * len(self.multis)
            self.multis[g] = [keep]
        self.grid = None
        self.frozen = True

    def frozen_copy(self) -> "AugSketch":
        """Frozen snapshot of the selected run; this sketch is left untouched."""
        import copy
        clone = object.__new__(AugSketch)
        clone.__dict__.update(self.__dict__)
        pick = self._pick()
        clone.multis = [None] * len(self.multis)
        if pick is not None:
            g, c = pick
            sk = self.multis[g][c]
            clone.multis[g] = [copy.deepcopy(sk, {id(sk.metric): sk.metric})]
        clone.grid = None
        clone.frozen = True
        return clone

    def prune(self, tau: int) -> None:
        """Frozen sketches only: drop centers with no mapped point at or after ``tau``."""
        if not self.frozen:
            raise RuntimeError("only frozen sketches can be pruned")
        for copies in self.multis:
            if copies is None:
                continue
            for sk in copies:
                keep = [i for i in range(sk.n) if sk.hists[i].query(tau) > 0]
                if len(keep) < sk.n:
                    sk.remove_centers(np.asarray(keep, dtype=np.int64))

    def stored_ids(self) -> set[int]:
        """Arrival indices of the stream points held (centers and shell representatives)."""
        ids: set[int] = set()
        for copies in self.multis:
            if copies is None:
                continue
            for sk in copies:
                ids |= sk.stored_ids()
        return ids

    def points_stored(self) -> int:
        return len(self.stored_ids())

    def live_guesses(self) -> int:
        return sum(c is not None for c in self.multis)

    # -- persistence -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "slidingclust.augsketch",
            "version": FORMAT_VERSION,
            "config": _cfg_dict(self.cfg),
            "seed": self.seed,
            "key": list(self.key),
            "replace_centers": self.replace_centers,
            "stop_on_cost": self.stop_on_cost,
            "horizon": self.horizon,
            "first_index": self.first_index,
            "last_index": self.last_index,
            "n_points": self.n_points,
            "frozen": self.frozen,
            "guesses": [None if copies is None else [_sketch_dict(c) for c in copies]
                        for copies in self.multis],
        }

    @classmethod
    def from_dict(cls, d: dict, metric: Metric = EUCLIDEAN) -> "AugSketch":
        if d.get("format") != "slidingclust.augsketch":
            raise ValueError("not a serialized AugSketch")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported sketch format version {d.get('version')}")
        cfg = ProblemConfig(**d["config"])
        a = cls(cfg, d["seed"], tuple(d["key"]), metric, d["replace_centers"],
                d.get("stop_on_cost", True), d.get("horizon"))
        a.first_index = d["first_index"]
        a.last_index = d["last_index"]
        a.n_points = d["n_points"]
        a.frozen = d["frozen"]
        a.multis = [None if row is None else [_sketch_from(s, cfg, metric, a.replace_centers) for s in row]
                    for row in d["guesses"]]
        if a.frozen:
            a.grid = None
        return a


def union(a: tuple[WeightedInstance, float], b: tuple[WeightedInstance, float]) -> tuple[WeightedInstance, float]:
    """Concatenate two weighted instances and add their mapping costs."""
    ia, ca = a
    ib, cb = b
    if len(ia) == 0:
        return WeightedInstance(ib.coords, ib.weights, ib.indices), ca + cb
    if len(ib) == 0:
        return WeightedInstance(ia.coords, ia.weights, ia.indices), ca + cb
    return (WeightedInstance(np.vstack([ia.coords, ib.coords]),
                             np.concatenate([ia.weights, ib.weights]),
                             np.concatenate([ia.indices, ib.indices])), ca + cb)


def suffix(a: AugSketch, tau: int) -> tuple[WeightedInstance, float]:
    return a.suffix(tau)


def aug_update(a: AugSketch, x: Point, meter: DistanceMeter) -> None:
    a.update(x, meter)


# -- serialization helpers ------------------------------------------------

def _cfg_dict(cfg: ProblemConfig) -> dict:
    from dataclasses import asdict
    return asdict(cfg)


def _hist_dict(h) -> dict:
    return {"times": list(h.times), "prefix": list(h.prefix), "own": list(h.own),
            "total": h.total, "next": h._next_compact}


def _hist_load(h, d) -> None:
    h.times, h.prefix, h.own = list(d["times"]), list(d["prefix"]), list(d["own"])
    h.total = d["total"]
    h._next_compact = d["next"]


def _sketch_dict(sk: TrackedSketch) -> dict:
    version, state, gauss = sk.rng.getstate()
    return {
        "L": sk.L, "closed": sk.closed, "cost_mu": sk.cost_mu, "processed": sk.processed,
        "ids": list(sk.ids), "coords": sk.coords.tolist(), "weights": sk.weights.tolist(),
        "rng": [version, list(state), gauss],
        "hists": [_hist_dict(h) for h in sk.hists],
        "cost_hist": _hist_dict(sk.cost_hist),
        "shells": [None if s is None else {"idx": s.idx, "times": s.times, "ids": s.ids,
                                           "coords": [c.tolist() for c in s.coords]}
                   for s in sk.shells],
    }


def _sketch_from(d: dict, cfg: ProblemConfig, metric: Metric, replace: bool) -> TrackedSketch:
    import random
    rng = random.Random()
    version, state, gauss = d["rng"]
    rng.setstate((version, tuple(state), gauss))
    sk = TrackedSketch(d["L"], cfg.copy_cap, cfg.sampling_factor, cfg.p, rng, metric,
                       eps=cfg.epsilon, w=cfg.w, cost_cap=cfg.cost_cap,
                       shell_top=cfg.shell_top, replace=replace)
    sk.closed = d["closed"]
    sk.cost_mu = d["cost_mu"]
    sk.processed = d["processed"]
    n = len(d["ids"])
    if n:
        coords = np.asarray(d["coords"], dtype=float)
        cap = max(SingleSketch._INIT_CAP, n)
        sk._coords = np.empty((cap, coords.shape[1]))
        sk._coords[:n] = coords
        sk._weights = np.zeros(cap)
        sk._weights[:n] = d["weights"]
    sk.ids = list(d["ids"])
    sk.n = n
    for hd in d["hists"]:
        h = WeightHistogram(cfg.epsilon, cfg.w)
        _hist_load(h, hd)
        sk.hists.append(h)
    _hist_load(sk.cost_hist, d["cost_hist"])
    for sd in d["shells"]:
        if sd is None:
            sk.shells.append(None)
            continue
        s = ShellTable(cfg.epsilon, cfg.shell_top)
        s.idx, s.times, s.ids = list(sd["idx"]), list(sd["times"]), list(sd["ids"])
        s.coords = [np.asarray(c, dtype=float) for c in sd["coords"]]
        sk.shells.append(s)
    return sk
