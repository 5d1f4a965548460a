"""Sliding-window clustering from rotating pairs of augmented sketches.

For every threshold lambda on a geometric grid, a pair of sketches covers two
consecutive substreams A and B ending at the current point. B grows while its
estimated clustering cost stays within lambda; the first point that would
push it over starts a fresh B, and the old B becomes A. A query composes the
suffix of A inside the window with B (or a suffix of B alone) and runs the
offline solver on the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .augmented import AugSketch, SketchInvalid, union
from .config import ProblemConfig, derive_generator
from .metric import EUCLIDEAN, DistanceMeter, Metric, Point, WeightedInstance
from .meyerson import ASSIGNED, NEW
from .solver import Solution, solve_instance

EXACT = "exact"
LAZY = "lazy"
STRICT = "strict"
BEST_EFFORT = "best_effort"
PROOF = "proof"  # lambda selection as in the correctness argument

_UPDATE_STREAM = 1
_QUERY_STREAM = 2
_SKETCH_STREAM = 3


def lambda_grid(m: float, M: float, delta: float, beta: float, p: float) -> list[float]:
    """m, (1+delta) m, ... up to and including the first term >= 2^p beta (1+delta) M."""
    if not 0 < m <= M:
        raise ValueError("need 0 < m <= M")
    if delta <= 0 or beta < 1 or p < 1:
        raise ValueError("need delta > 0, beta >= 1, p >= 1")
    target = 2.0 ** p * beta * (1 + delta) * M
    out = [float(m)]
    i = 0
    while out[-1] < target * (1 - 1e-12):
        i += 1
        out.append(m * (1 + delta) ** i)
    return out


@dataclass
class LambdaPairState:
    """Sketches S1 over A = [a_start, a_end] and S2 over B = [b_start, now]."""

    lam: float
    index: int
    S1: Optional[AugSketch] = None
    S2: Optional[AugSketch] = None
    a_start: Optional[int] = None
    a_end: Optional[int] = None
    b_start: Optional[int] = None
    rotations: int = 0
    # estimated costs at commit time, kept for invariant checks
    a_cost: float = 0.0
    b_cost: float = 0.0
    a_plus_cost: float = math.inf

    def a_len(self) -> int:
        return 0 if self.a_start is None else self.a_end - self.a_start + 1


@dataclass
class _Group:
    """Pairs whose B substreams coincide and therefore share one S2 sketch.

    Sketch randomness is keyed by the substream's first index, so pairs that
    start B at the same point would build identical sketches anyway; sharing
    makes that explicit and lets one cost evaluation serve every threshold.
    """

    S2: AugSketch
    b_start: int
    pairs: list[LambdaPairState]
    # lazy-evaluation baseline
    last_n: int = 0
    last_cost: float = 0.0
    last_guess: Optional[int] = None
    evaluations: int = 0


@dataclass
class WindowClusterer:
    """Sliding-window k-clustering over the last ``cfg.w`` points.

    ``mode`` is ``"lazy"`` (re-evaluate B's cost only after it changed
    noticeably, and abandon sketch guesses for size only) or ``"exact"``
    (after every point). ``query_mode`` is ``"best_effort"``, ``"strict"`` or
    ``"proof"``. ``horizon``, when set, promises that no more than that many
    points will ever be fed, which lets lazy sketches drop spare guesses.
    """

    cfg: ProblemConfig
    seed: int = 0
    mode: str = LAZY
    query_mode: str = BEST_EFFORT
    replace_centers: bool = True
    lloyd_iters: int = 10
    eval_restarts: int = 1  # solver runs per update-time cost check
    query_restarts: int = 10  # solver runs per query candidate, as for the batch baseline
    prune_every: int = 0
    horizon: Optional[int] = None
    metric: Metric = EUCLIDEAN
    meter: DistanceMeter = field(default_factory=DistanceMeter)
    pairs: list[LambdaPairState] = field(init=False)
    t: Optional[int] = field(default=None, init=False)
    first_index: Optional[int] = field(default=None, init=False)
    n_seen: int = field(default=0, init=False)

    def __post_init__(self):
        if self.mode not in (EXACT, LAZY):
            raise ValueError(f"unknown update mode {self.mode!r}")
        if self.query_mode not in (STRICT, BEST_EFFORT, PROOF):
            raise ValueError(f"unknown query mode {self.query_mode!r}")
        c = self.cfg
        self.lambdas = lambda_grid(c.m, c.M, c.delta, c.beta, c.p)
        self.pairs = [LambdaPairState(lam, i) for i, lam in enumerate(self.lambdas)]
        self.groups: list[_Group] = []
        if self.prune_every <= 0:
            self.prune_every = max(1, c.w // 50)

    # -- helpers ---------------------------------------------------------
    def window_start(self) -> int:
        if self.t is None:
            raise ValueError("no point ingested yet")
        return max(self.t - self.cfg.w + 1, self.first_index)

    def _evaluate(self, view: tuple[WeightedInstance, float], rng: np.random.Generator,
                  restarts: int = 1) -> tuple[float, Optional[Solution]]:
        inst, cost_mu = view
        if len(inst) == 0 or inst.total_weight <= 0:
            return 2.0 ** (self.cfg.p - 1) * cost_mu, None
        sol = solve_instance(inst, self.cfg.k, self.cfg.p, rng, self.meter,
                             lloyd_iters=self.lloyd_iters, restarts=restarts, metric=self.metric)
        est = 2.0 ** (self.cfg.p - 1) * (cost_mu + sol.actual_instance_cost)
        sol.estimated_cost = est
        return est, sol

    # -- update ----------------------------------------------------------
    def update(self, x: Point) -> None:
        if self.t is not None and x.index <= self.t:
            raise ValueError(f"arrival index {x.index} not after {self.t}")
        if self.first_index is None:
            self.first_index = x.index
        self.t = x.index
        self.n_seen += 1
        rotating: list[LambdaPairState] = []
        kept: list[_Group] = []
        for g in self.groups:
            if self._group_update(g, x, rotating):
                kept.append(g)
        if not self.groups:
            rotating = list(self.pairs)
        if rotating:
            kept.append(self._start_group(sorted(rotating, key=lambda ps: ps.index), x))
        self.groups = kept
        if self.n_seen % self.prune_every == 0:
            self.prune()

    def _group_update(self, g: _Group, x: Point, rotating: list) -> bool:
        """Advance one group; pairs that must rotate go to ``rotating``. False if the group empties."""
        S2 = g.S2
        plan = S2.plan(x, self.meter)
        if self.mode == LAZY:
            pick = S2._pick(plan.rows)
            if pick is not None and not self._triggered(g, S2, plan, pick):
                S2.apply(plan)
                return True
        view = S2.preview(plan)
        if view is None:
            cost = math.inf
        else:
            rng = derive_generator(self.seed, _UPDATE_STREAM, g.b_start, x.index)
            cost, _ = self._evaluate(view, rng, self.eval_restarts)
            g.evaluations += 1
        stay = [ps for ps in g.pairs if cost <= ps.lam]
        go = [ps for ps in g.pairs if not cost <= ps.lam]
        if go:
            S1 = S2.frozen_copy() if stay else S2
            if not stay:
                S2.freeze()
            for ps in go:
                ps.S1 = S1
                ps.a_start, ps.a_end = g.b_start, S2.last_index
                ps.a_cost = ps.b_cost
                ps.a_plus_cost = cost
                ps.rotations += 1
                rotating.append(ps)
        if not stay:
            return False
        S2.apply(plan)
        g.pairs = stay
        for ps in stay:
            ps.b_cost = cost
        self._set_baseline(g)
        return True

    def _triggered(self, g: _Group, S2: AugSketch, plan, pick) -> bool:
        gi, c = pick
        if gi != g.last_guess:
            return True
        a = plan.rows[gi][c]
        if a.kind == NEW:
            return True
        eta = self.cfg.eta
        if S2.n_points + 1 >= (1 + eta) * g.last_n:
            return True
        cost = S2.multis[gi][c].cost_mu + (a.dp if a.kind == ASSIGNED else 0.0)
        return cost > (1 + eta) * g.last_cost

    def _set_baseline(self, g: _Group) -> None:
        S2 = g.S2
        sk = S2.selected()
        g.last_guess = S2.selected_guess()
        g.last_n = S2.n_points
        g.last_cost = 0.0 if sk is None else sk.cost_mu

    def _start_group(self, pairs: list[LambdaPairState], x: Point) -> _Group:
        S2 = AugSketch(self.cfg, self.seed, (_SKETCH_STREAM, x.index), self.metric, self.replace_centers,
                       stop_on_cost=self.mode == EXACT, horizon=self.horizon)
        S2.update(x, self.meter)
        g = _Group(S2, x.index, pairs)
        for ps in pairs:
            ps.S2 = S2
            ps.b_start = x.index
            ps.b_cost = 0.0
        self._set_baseline(g)
        return g

    def prune(self) -> None:
        """Release parts of A-sketches that no longer reach into the window."""
        if self.t is None:
            return
        tau = self.window_start()
        done = set()
        for ps in self.pairs:
            if ps.S1 is None:
                continue
            if ps.a_end < tau:
                ps.S1 = None
            elif id(ps.S1) not in done:
                done.add(id(ps.S1))
                ps.S1.prune(tau)

    # -- query -----------------------------------------------------------
    def _covers(self, ps: LambdaPairState, tau: int) -> bool:
        if ps.b_start is None:
            return False
        return ps.b_start <= tau or (ps.a_start is not None and ps.a_start <= tau)

    def _view(self, ps: LambdaPairState, tau: int) -> tuple[WeightedInstance, float]:
        """Instance for the window built from one pair; the pair must cover it."""
        if ps.b_start == tau:
            return ps.S2.view()
        if ps.b_start < tau:
            return ps.S2.suffix(tau)
        if ps.S1 is None:
            raise SketchInvalid("A-sketch already released")
        return union(ps.S1.suffix(tau), ps.S2.view())

    def _candidate_key(self, ps: LambdaPairState, tau: int) -> tuple[int, int]:
        # pairs with the same key see identical sketches and get identical solutions
        if ps.b_start <= tau:
            return ps.b_start, -1
        return ps.b_start, ps.a_start

    def _candidate(self, ps: LambdaPairState, tau: int, cache: Optional[dict] = None) -> Solution:
        key = self._candidate_key(ps, tau)
        if cache is not None and key in cache:
            return cache[key]
        view = self._view(ps, tau)
        rng = derive_generator(self.seed, _QUERY_STREAM, key[0], key[1] + 1, self.t)
        est, sol = self._evaluate(view, rng, self.query_restarts)
        if sol is None:
            raise SketchInvalid("empty window instance")
        if cache is not None:
            cache[key] = sol
        return sol

    def strict_pair(self, tau: Optional[int] = None, mode: Optional[str] = None) -> LambdaPairState:
        """Pair chosen by the strict rule (or the proof's rule in ``proof`` mode)."""
        if tau is None:
            tau = self.window_start()
        mode = mode or self.query_mode
        for ps in self.pairs:
            if ps.b_start == tau:
                return ps
        if mode == PROOF:
            inside = [i for i, ps in enumerate(self.pairs)
                      if ps.a_start is not None and ps.a_start >= tau]
            if inside:
                j = min(max(inside) + 1, len(self.pairs) - 1)
                if self._covers(self.pairs[j], tau):
                    return self.pairs[j]
        for ps in self.pairs:
            if ps.a_start is not None and ps.a_start < tau:
                return ps
        covering = [ps for ps in self.pairs if self._covers(ps, tau)]
        if covering:
            return covering[0]
        raise SketchInvalid("no lambda pair covers the window; widen bounds")

    def query(self, mode: Optional[str] = None) -> Solution:
        """Centers for the current window with their estimated cost."""
        mode = mode or self.query_mode
        tau = self.window_start()
        if mode != BEST_EFFORT:
            return self._candidate(self.strict_pair(tau, mode), tau)
        best = None
        cache: dict = {}
        for ps in self.pairs:
            if not self._covers(ps, tau):
                continue
            try:
                sol = self._candidate(ps, tau, cache)
            except SketchInvalid:
                continue
            if best is None or sol.estimated_cost < best.estimated_cost:
                best = sol
        if best is None:
            raise SketchInvalid("no lambda pair yields a valid window instance; widen bounds")
        return best

    def sketches(self) -> list[AugSketch]:
        """Distinct sketch objects currently held."""
        seen: dict[int, AugSketch] = {}
        for ps in self.pairs:
            for s in (ps.S1, ps.S2):
                if s is not None:
                    seen.setdefault(id(s), s)
        return list(seen.values())

    def stored_ids(self) -> set[int]:
        # frozen snapshots share their points with the sketch they came from
        ids: set[int] = set()
        for s in self.sketches():
            ids |= s.stored_ids()
        return ids

    def points_stored(self) -> int:
        """Distinct stream points held across all sketches."""
        return len(self.stored_ids())

    @property
    def evaluations(self) -> int:
        return sum(g.evaluations for g in self.groups)


class BoundedStreamClusterer:
    """Staggered restarts so that no inner sketch sees more than 2w points.

    A new inner clusterer starts every w points and is discarded once it has
    consumed 2w; queries go to the oldest live instance, which always spans
    the current window.
    """

    def __init__(self, make, w: int):
        self.make = make
        self.w = w
        self.instances: list[tuple[int, WindowClusterer]] = []  # (points seen, clusterer)
        self.n_seen = 0
        self.meter = DistanceMeter()
        self._started = 0

    def update(self, x: Point) -> None:
        if self.n_seen % self.w == 0:
            inner = self.make(self._started)
            inner.meter = self.meter
            self._started += 1
            self.instances.append([0, inner])
        for item in self.instances:
            item[1].update(x)
            item[0] += 1
        self.instances = [it for it in self.instances if it[0] < 2 * self.w]
        self.n_seen += 1

    @property
    def active(self) -> WindowClusterer:
        return self.instances[0][1]

    def query(self, mode: Optional[str] = None) -> Solution:
        return self.active.query(mode)

    def points_stored(self) -> int:
        ids: set[int] = set()
        for it in self.instances:
            ids |= it[1].stored_ids()
        return len(ids)
