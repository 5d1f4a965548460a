import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slidingclust.harness import brute_force_opt
from slidingclust.metric import DistanceMeter, Point, WeightedInstance, weighted_cost
from slidingclust.solver import estimated_cost, solve, solve_instance, weighted_seed


def inst(rows, weights=None):
    X = np.asarray(rows, dtype=float)
    return WeightedInstance(X, np.ones(len(X)) if weights is None else weights)


def coords(points):
    return sorted(tuple(p.coords) for p in points)


def test_k_at_least_support_returns_all():
    I = inst([[0, 0], [1, 0], [5, 5]])
    sol = solve_instance(I, 5, 2, np.random.default_rng(0), DistanceMeter())
    assert coords(sol.centers) == coords(Point(r, i) for i, r in enumerate(I.coords))
    assert sol.actual_instance_cost == 0


def test_single_positive_center():
    I = inst([[0, 0], [3, 3]], np.array([0.0, 2.0]))
    assert coords(weighted_seed(I, 2, 2, np.random.default_rng(1), DistanceMeter())) == [(3.0, 3.0)]


def test_empty_instance_raises():
    with pytest.raises(ValueError):
        weighted_seed(WeightedInstance.empty(2), 2, 2, np.random.default_rng(0), DistanceMeter())
    with pytest.raises(ValueError):
        solve(inst([[0, 0]], np.array([0.0])), 1, 2, np.random.default_rng(0), DistanceMeter())


def test_far_point_always_seeded():
    # whichever point comes first, (0,0) dominates the D^2 mass unless it was first
    I = inst([[0, 0], [10, 0], [10.1, 0]])
    rng = np.random.default_rng(7)
    for _ in range(1000):
        assert (0.0, 0.0) in coords(weighted_seed(I, 2, 2, rng, DistanceMeter()))


def test_lloyd_off_equals_seed():
    rng = np.random.default_rng(3)
    I = inst(rng.normal(size=(60, 2)))
    a = weighted_seed(I, 4, 2, np.random.default_rng(11), DistanceMeter())
    b = solve(I, 4, 2, np.random.default_rng(11), DistanceMeter(), lloyd_iters=0)
    assert [p.index for p in a] == [p.index for p in b]


def test_two_clusters_match_brute_force():
    rng = np.random.default_rng(5)
    X = np.vstack([rng.normal(size=(5, 2)) * 0.3, rng.normal(size=(5, 2)) * 0.3 + 20])
    I = inst(X)
    sol = solve_instance(I, 2, 2, np.random.default_rng(0), DistanceMeter())
    opt, _ = brute_force_opt([Point(x, i) for i, x in enumerate(X)], 2, 2, DistanceMeter())
    assert sol.actual_instance_cost == pytest.approx(opt)


@pytest.mark.parametrize("seed", range(100))
def test_refinement_never_hurts(seed):
    rng = np.random.default_rng(seed)
    I = inst(rng.normal(size=(40, 2)) * rng.uniform(0.5, 3), rng.integers(1, 5, size=40).astype(float))
    m = DistanceMeter()
    seeds = weighted_seed(I, 3, 2, np.random.default_rng(seed), m)
    refined = solve_instance(I, 3, 2, np.random.default_rng(seed), m)
    assert refined.actual_instance_cost <= weighted_cost(I, np.array([p.coords for p in seeds]), 2, m) + 1e-9


def test_centers_are_instance_points_and_deterministic():
    rng = np.random.default_rng(9)
    I = WeightedInstance(rng.normal(size=(50, 3)), np.ones(50), np.arange(100, 150))
    a = solve_instance(I, 5, 2, np.random.default_rng(2), DistanceMeter(), restarts=3)
    b = solve_instance(I, 5, 2, np.random.default_rng(2), DistanceMeter(), restarts=3)
    assert [p.index for p in a.centers] == [p.index for p in b.centers]
    for p in a.centers:
        assert np.array_equal(I.coords[p.index - 100], p.coords)
    assert len(a.centers) <= 5


def test_p1_runs_without_lloyd():
    I = inst([[0, 0], [0, 1], [9, 9], [9, 8]])
    sol = solve_instance(I, 2, 1, np.random.default_rng(0), DistanceMeter())
    assert sol.actual_instance_cost == pytest.approx(2.0)


def test_estimated_cost_examples():
    I = inst([[0, 0], [4, 0]])
    m = DistanceMeter()
    assert estimated_cost((I, 0.0), I.coords, 2, m) == 0
    # instance cost 2 from a single unit-distance point with weight 2
    J = inst([[1, 0]], np.array([2.0]))
    C = np.array([[0.0, 0.0]])
    assert estimated_cost((J, 3.0), C, 1, m) == pytest.approx(5.0)
    assert estimated_cost((J, 3.0), C, 2, m) == pytest.approx(10.0)
    assert estimated_cost((J, 3.0), C, 2, m, instance_cost=2.0) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        estimated_cost((J, 0.0), np.empty((0, 2)), 2, m)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.0, 2.0]))
def test_estimated_cost_covers_raw_points(seed, p):
    # points mapped to instance centers: the estimate bounds the raw cost
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 2))
    centers = X[:5]
    lab = np.argmin(((X[:, None] - centers[None]) ** 2).sum(-1), axis=1)
    dp = np.linalg.norm(X - centers[lab], axis=1) ** p
    I = WeightedInstance(centers, np.bincount(lab, minlength=5).astype(float))
    m = DistanceMeter()
    sol = solve_instance(I, 2, p, rng, m)
    raw = weighted_cost(inst(X), sol.coords, p, m)
    assert raw <= estimated_cost((I, float(dp.sum())), sol.coords, p, m) * (1 + 1e-9)
