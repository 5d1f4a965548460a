"""Stream loading, experiment orchestration and the metrics CSV."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .augmented import SketchInvalid
from .config import ProblemConfig, derive_generator, derive_seed
from .harness import (MetricRow, RunMetrics, SlidingSampler, assign_labels, batch_baseline,
                      estimate_bounds, synth_sset, v_measure)
from .metric import DistanceMeter, Point, clustering_cost
from .window import BEST_EFFORT, LAZY, BoundedStreamClusterer, WindowClusterer

log = logging.getLogger(__name__)

METRICS_HEADER = "# slidingclust metrics v1"
METRICS_COLUMNS = ["t", "algo", "cost", "estimated_cost", "points_stored", "distance_evals", "v_measure"]
ALGOS = ("sketch", "sampling", "batch")
SEED_ENV = "SLIDINGCLUST_SEED"


class InputError(ValueError):
    pass


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path: str, label_column: Optional[int] = None, standardize_data: bool = True
             ) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Rows of comma-separated numbers; a non-numeric first row is taken as a header."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        log.warning("%s is empty; the stream has no points", path)
        return np.empty((0, 0)), (None if label_column is None else np.empty(0, dtype=np.int64))
    start = 0 if all(_is_number(c) for c in rows[0]) else 1
    width = len(rows[start]) if start < len(rows) else 0
    data = []
    for lineno, r in enumerate(rows[start:], start=start + 1):
        if len(r) != width:
            raise InputError(f"row {lineno}: expected {width} columns, got {len(r)}")
        try:
            data.append([float(c) for c in r])
        except ValueError as e:
            raise InputError(f"row {lineno}: non-numeric cell ({e})") from None
    A = np.array(data, dtype=float).reshape(len(data), width)
    labels = None
    if label_column is not None:
        if not -width <= label_column < width:
            raise InputError(f"label column {label_column} out of range for {width} columns")
        labels = A[:, label_column].astype(np.int64)
        A = np.delete(A, label_column % width, axis=1)
    if standardize_data:
        A = standardize(A)
    return A, labels


def standardize(X: np.ndarray) -> np.ndarray:
    """Zero mean, unit population standard deviation per column (constant columns centered only)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        return X
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


@dataclass
class StreamSource:
    """Where points come from: a CSV path or a synthetic ``k:n:d:sep`` spec."""

    origin: str
    synthetic: bool = False
    shuffle: bool = False
    label_column: Optional[int] = None
    standardize: bool = True

    def load(self, seed: int) -> tuple[np.ndarray, Optional[np.ndarray]]:
        if self.synthetic:
            try:
                k, n, d, sep = self.origin.split(":")
                X, y = synth_sset(int(n), int(k), int(d), float(sep), derive_generator(seed, 11))
            except ValueError as e:
                raise InputError(f"bad synthetic spec {self.origin!r}: want k:n:d:sep ({e})") from None
            if self.standardize:
                X = standardize(X)
        else:
            X, y = load_csv(self.origin, self.label_column, self.standardize)
        if self.shuffle and len(X):
            perm = derive_generator(seed, 10).permutation(len(X))
            X = X[perm]
            y = None if y is None else y[perm]
        return X, y


@dataclass
class ExperimentSpec:
    source: StreamSource
    w: int
    k: int
    p: float = 2.0
    delta: float = 0.2
    epsilon: float = 0.05
    gamma: float = 0.1
    alpha: float = 0.5
    beta: float = 16.0
    eta: float = 0.05
    copies: str = "single"
    log_window: bool = False
    algos: tuple[str, ...] = ALGOS
    query_every: int = 100
    query_start: Optional[int] = None  # first query once this many points arrived; default w
    mode: str = LAZY
    query_mode: str = BEST_EFFORT
    replace_centers: bool = False
    bounded: bool = False
    bounds_samples: int = 10
    bounds_prefix: Optional[int] = None  # default 3w
    batch_runs: int = 10
    sample_cap: Optional[int] = None  # default ceil(w / 4)
    seed: int = 0
    out: Optional[str] = None
    max_points: Optional[int] = None

    def __post_init__(self):
        if self.query_every < 1:
            raise ValueError("query cadence must be >= 1")
        bad = set(self.algos) - set(ALGOS)
        if bad:
            raise ValueError(f"unknown algorithms: {sorted(bad)}")


@dataclass
class RunResult:
    metrics: RunMetrics
    config: ProblemConfig
    n_points: int
    max_points_stored: dict = field(default_factory=dict)
    total_evals: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return str(v)
        return repr(v)
    return str(v)


def metrics_csv(metrics: RunMetrics) -> str:
    buf = io.StringIO()
    buf.write(METRICS_HEADER + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(METRICS_COLUMNS)
    for r in metrics.rows:
        wr.writerow([_fmt(getattr(r, c)) for c in METRICS_COLUMNS])
    return buf.getvalue()


def write_metrics(metrics: RunMetrics, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(metrics_csv(metrics))


def make_config(spec: ExperimentSpec, m: float, M: float, Delta: float) -> ProblemConfig:
    return ProblemConfig(k=spec.k, w=spec.w, m=m, M=M, Delta=Delta, p=spec.p, epsilon=spec.epsilon,
                         delta=spec.delta, gamma=spec.gamma, alpha=spec.alpha, beta=spec.beta,
                         eta=spec.eta, copies=spec.copies, log_window=spec.log_window)


def run_experiment(spec: ExperimentSpec, X: Optional[np.ndarray] = None,
                   labels: Optional[np.ndarray] = None) -> RunResult:
    """Feed one stream to every enabled algorithm and record per-query metrics.

    The raw window kept here is for evaluation only; the sketch never sees it.
    """
    if X is None:
        X, labels = spec.source.load(spec.seed)
    if spec.max_points is not None:
        X = X[: spec.max_points]
        labels = None if labels is None else labels[: spec.max_points]
    n = X.shape[0]
    w, k, p = spec.w, spec.k, spec.p
    if n == 0:
        raise InputError("empty stream")

    prefix = X[: min(n, spec.bounds_prefix or 3 * w)]
    m, M, Delta = estimate_bounds(prefix, min(w, len(prefix)), k, p, derive_generator(spec.seed, 12),
                                  DistanceMeter(), n_samples=spec.bounds_samples, runs=spec.batch_runs)
    cfg = make_config(spec, m, M, Delta)
    log.info("bounds m=%.6g M=%.6g Delta=%.6g", m, M, Delta)

    sketch_seed = derive_seed(spec.seed, 13)
    meters = {a: DistanceMeter() for a in spec.algos}
    sketch = None
    if "sketch" in spec.algos:
        def make(i: int) -> WindowClusterer:
            return WindowClusterer(cfg, seed=derive_seed(sketch_seed, i), mode=spec.mode,
                                   query_mode=spec.query_mode, replace_centers=spec.replace_centers,
                                   horizon=2 * w if spec.bounded else None)
        if spec.bounded:
            sketch = BoundedStreamClusterer(make, w)
            sketch.meter = meters["sketch"]
        else:
            sketch = make(0)
            sketch.meter = meters["sketch"]
    sampler = None
    s_cap = spec.sample_cap or math.ceil(w / 4)
    if "sampling" in spec.algos:
        sampler = SlidingSampler(w, s_cap, derive_generator(spec.seed, 14), dim=X.shape[1])

    window = deque(maxlen=w)
    wlabels = deque(maxlen=w)
    metrics = RunMetrics()
    last_evals = {a: 0 for a in spec.algos}
    max_stored = {a: 0 for a in spec.algos}
    eval_meter = DistanceMeter()  # evaluation-only work, charged to nobody
    start = spec.query_start if spec.query_start is not None else min(w, n)

    for i in range(n):
        t = i + 1
        x = Point(X[i], t)
        window.append(X[i])
        if labels is not None:
            wlabels.append(labels[i])
        if sketch is not None:
            sketch.update(x)
        if sampler is not None:
            sampler.update(x)
            max_stored["sampling"] = max(max_stored["sampling"], sampler.stored())
        if t < start or t % spec.query_every != 0:
            continue
        W = np.array(window)
        truth = None if labels is None else np.array(wlabels)
        sketch_stored = None
        for algo in spec.algos:
            if algo == "sketch":
                try:
                    sol = sketch.query()
                except SketchInvalid as e:
                    raise SketchInvalid(f"t={t}: {e}") from None
                stored = sketch.points_stored()
                sketch_stored = stored
                est = sol.estimated_cost
            elif algo == "sampling":
                s = s_cap if sketch_stored is None else max(k, min(s_cap, sketch_stored))
                sol = sampler.query(k, p, derive_generator(spec.seed, 16, t), meters[algo], s=s,
                                    runs=spec.batch_runs)
                stored = sampler.stored()
                est = sol.actual_instance_cost * (len(W) / max(1, min(s, len(W))))
            else:
                sol = batch_baseline(W, k, p, derive_generator(spec.seed, 15, t), meters[algo],
                                     runs=spec.batch_runs)
                stored = len(W)
                est = sol.actual_instance_cost
            max_stored[algo] = max(max_stored[algo], stored)
            cost = clustering_cost(W, sol.coords, p, eval_meter)
            vm = None
            if truth is not None:
                vm = v_measure(assign_labels(W, sol.coords, eval_meter), truth)
            evals = meters[algo].count - last_evals[algo]
            last_evals[algo] = meters[algo].count
            metrics.add(MetricRow(t, algo, cost, est, stored, evals, vm))
    if spec.out:
        write_metrics(metrics, spec.out)
    return RunResult(metrics, cfg, n, max_stored, {a: meters[a].count for a in spec.algos})


def default_seed() -> int:
    v = os.environ.get(SEED_ENV)
    if v is None:
        return 0
    try:
        return int(v)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {v!r}") from None
