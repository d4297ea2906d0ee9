import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_ems import indicators
from adaptive_ems.nsga3 import (
    DecisionVector,
    Individual,
    OptimizerAbort,
    OptimizerConfig,
    Problem,
    das_dennis,
    dominates,
    fast_nondominated_sort,
    nondominated_sort,
    optimize,
    polynomial_mutation,
    sbx_crossover,
    survive,
    survive_indices,
)

from .oracles import brute_force_fronts, stars_and_bars


def individuals(F):
    return [Individual(DecisionVector([0.0], [(0.0, 1.0)]), f) for f in F]


# --------------------------------------------------------------------------
# dominance


@pytest.mark.parametrize(
    "a, b, expected",
    [((1, 2, 3), (1, 2, 3), False), ((0, 2), (1, 2), True), ((0, 3), (1, 2), False)],
)
def test_dominates_examples(a, b, expected):
    assert dominates(a, b) is expected


def test_dominates_length_mismatch():
    with pytest.raises(ValueError):
        dominates((1, 2), (1, 2, 3))


vec3 = st.lists(st.integers(0, 3), min_size=3, max_size=3)


@given(vec3, vec3, vec3)
def test_dominance_is_a_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    if dominates(a, b):
        assert not dominates(b, a)
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


# --------------------------------------------------------------------------
# sorting


def test_sort_small_examples():
    pop = individuals([(0, 1), (1, 0), (2, 2)])
    assert nondominated_sort(pop) == [[0, 1], [2]]
    assert [p.rank for p in pop] == [0, 0, 1]
    assert nondominated_sort(individuals([(5, 5)])) == [[0]]
    assert nondominated_sort([]) == []


def test_sort_matches_brute_force_on_32_points():
    F = np.random.default_rng(7).integers(0, 6, size=(32, 3)).astype(float)
    assert [f.tolist() for f in fast_nondominated_sort(F)] == brute_force_fronts(F)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(0, 4), min_size=2, max_size=2), min_size=1, max_size=25))
def test_sort_partitions_and_respects_rank_order(rows):
    F = np.asarray(rows, dtype=float)
    fronts = fast_nondominated_sort(F)
    flat = np.concatenate(fronts)
    assert sorted(flat.tolist()) == list(range(len(F)))
    rank = np.empty(len(F), dtype=int)
    for r, fr in enumerate(fronts):
        rank[fr] = r
    for a in range(len(F)):
        for b in range(len(F)):
            if rank[a] < rank[b]:
                assert not dominates(F[b], F[a])


# --------------------------------------------------------------------------
# reference directions


def test_das_dennis_two_objectives():
    refs = das_dennis(2, 2)
    got = {tuple(d) for d in refs.directions}
    assert got == {(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)}


def test_das_dennis_three_objectives_six_points():
    refs = das_dennis(3, 2)
    assert len(refs) == math.comb(4, 2) == 6
    assert {tuple(np.round(d, 12)) for d in refs.directions} == stars_and_bars(3, 2)


def test_das_dennis_two_layer_six_objectives():
    refs = das_dennis(6, [(3, 1.0), (2, 0.5)])
    assert len(refs) == 56 + 21 == 77
    assert len(stars_and_bars(6, 3)) == 56 and len(stars_and_bars(6, 2)) == 21
    assert np.allclose(refs.directions.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(refs.directions >= 0)
    assert len(np.unique(np.round(refs.directions, 12), axis=0)) == 77


@pytest.mark.parametrize("m", range(2, 8))
@pytest.mark.parametrize("h", range(1, 7))
def test_das_dennis_single_layer_count(m, h):
    refs = das_dennis(m, h)
    assert len(refs) == math.comb(h + m - 1, m - 1)
    assert {tuple(np.round(d, 12)) for d in refs.directions} == stars_and_bars(m, h)


def test_das_dennis_rejects_bad_arguments():
    with pytest.raises(ValueError):
        das_dennis(1, 3)
    with pytest.raises(ValueError):
        das_dennis(3, 0)
    with pytest.raises(ValueError):
        das_dennis(3, [(2, 1.5)])


# --------------------------------------------------------------------------
# survival


def test_survive_exact_size_returns_everyone():
    F = [(0, 3), (1, 2), (2, 1), (3, 0)]
    pop = individuals(F)
    kept = survive(pop, das_dennis(2, 3), 4)
    assert {id(p) for p in kept} == {id(p) for p in pop}


def test_survive_keeps_whole_first_front():
    F = [(0, 2), (1, 1), (2, 0), (1, 3), (2, 2), (3, 1), (3, 3)]
    pop = individuals(F)
    kept = survive(pop, das_dennis(2, 2), 3)
    assert sorted(pop.index(p) for p in kept) == [0, 1, 2]


def test_survive_rejects_oversized_target():
    with pytest.raises(ValueError):
        survive(individuals([(0, 1)]), das_dennis(2, 1), 2)


def test_niching_balances_counts():
    # one front, every direction has far more candidates than it can keep
    rng = np.random.default_rng(3)
    t = np.sort(rng.random(200))
    F = np.column_stack([t, 1.0 - t])
    refs = das_dennis(2, 9)
    res = survive_indices(F, refs, 40, np.random.default_rng(0))
    assert len(res.selected) == 40
    used = np.unique(res.niche)
    counts = np.bincount(res.niche[res.selected], minlength=len(refs))[used]
    assert counts.max() - counts.min() <= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 30))
def test_survive_never_drops_first_front_when_it_fits(seed, target):
    rng = np.random.default_rng(seed)
    F = rng.random((40, 3))
    first = set(fast_nondominated_sort(F)[0].tolist())
    res = survive_indices(F, das_dennis(3, 3), target, rng)
    if len(first) <= target:
        assert first <= set(res.selected.tolist())


# --------------------------------------------------------------------------
# variation


def unit(values):
    return DecisionVector(values, [(0.0, 1.0)] * len(values))


def test_sbx_probability_zero_is_identity():
    cfg = OptimizerConfig(crossover_probability=0.0)
    c1, c2 = sbx_crossover(unit([0.2, 0.7]), unit([0.8, 0.1]), cfg, np.random.default_rng(0))
    assert np.array_equal(c1.values, [0.2, 0.7]) and np.array_equal(c2.values, [0.8, 0.1])


def test_sbx_identical_parents():
    cfg = OptimizerConfig(crossover_probability=1.0)
    rng = np.random.default_rng(1)
    for _ in range(50):
        c1, c2 = sbx_crossover(unit([0.3, 0.9]), unit([0.3, 0.9]), cfg, rng)
        assert np.array_equal(c1.values, [0.3, 0.9]) and np.array_equal(c2.values, [0.3, 0.9])


def test_sbx_children_mean_is_symmetric():
    cfg = OptimizerConfig(crossover_probability=1.0)
    rng = np.random.default_rng(2)
    children = []
    for _ in range(10_000):
        c1, c2 = sbx_crossover(unit([0.2]), unit([0.8]), cfg, rng)
        children += [c1.values[0], c2.values[0]]
        assert 0.0 <= c1.values[0] <= 1.0 and 0.0 <= c2.values[0] <= 1.0
    assert abs(np.mean(children) - 0.5) < 0.05


def test_sbx_requires_matching_bounds():
    a = DecisionVector([0.5], [(0, 1)])
    b = DecisionVector([0.5], [(0, 2)])
    with pytest.raises(ValueError):
        sbx_crossover(a, b, OptimizerConfig(), np.random.default_rng(0))


def test_mutation_probability_zero_is_identity():
    cfg = OptimizerConfig(mutation_probability=0.0)
    p = unit([0.1, 0.5, 0.9])
    assert np.array_equal(polynomial_mutation(p, cfg, np.random.default_rng(0)).values, p.values)


def test_mutation_at_lower_bound_stays_in_bounds():
    cfg = OptimizerConfig(mutation_probability=1.0)
    rng = np.random.default_rng(4)
    p = DecisionVector([-5.0], [(-5.0, 5.0)])
    for _ in range(10_000):
        assert polynomial_mutation(p, cfg, rng).values[0] >= -5.0


def test_mutation_spread_shrinks_with_distribution_index():
    rng = np.random.default_rng(5)
    p = unit([0.5])

    def spread(eta):
        cfg = OptimizerConfig(mutation_probability=1.0, mutation_distribution_index=eta)
        return np.mean([abs(polynomial_mutation(p, cfg, rng).values[0] - 0.5) for _ in range(10_000)])

    assert spread(200) < spread(20)


# --------------------------------------------------------------------------
# optimize


def convex_problem():
    return Problem(
        evaluate=lambda X: np.column_stack([X[:, 0] ** 2, (X[:, 0] - 2.0) ** 2]),
        lower=[-5.0],
        upper=[5.0],
        n_obj=2,
    )


def test_optimize_convex_benchmark():
    cfg = OptimizerConfig(population_size=92, generations=100, rng_seed=11)
    front = optimize(convex_problem(), cfg, das_dennis(2, 91))
    x = np.sort(front.X[:, 0])
    assert x.min() >= -0.05 and x.max() <= 2.05
    assert np.max(np.diff(x)) < 0.2
    assert x.min() < 0.1 and x.max() > 1.9
    assert np.array_equal(front.lower, front.F.min(axis=0))
    assert np.array_equal(front.upper, front.F.max(axis=0))


def test_optimize_single_generation_is_initial_rank_zero():
    cfg = OptimizerConfig(population_size=30, generations=1, rng_seed=3)
    front = optimize(convex_problem(), cfg, das_dennis(2, 9))
    rng = np.random.default_rng(3)
    X0 = -5.0 + rng.random((30, 1)) * 10.0
    F0 = convex_problem().evaluate(X0)
    expected = X0[fast_nondominated_sort(F0)[0], 0]
    assert np.array_equal(np.sort(front.X[:, 0]), np.sort(np.unique(expected)))


def test_optimize_is_deterministic():
    cfg = OptimizerConfig(population_size=40, generations=15, rng_seed=9)
    a = optimize(convex_problem(), cfg, das_dennis(2, 20))
    b = optimize(convex_problem(), cfg, das_dennis(2, 20))
    assert a.X.tobytes() == b.X.tobytes() and a.F.tobytes() == b.F.tobytes()


def test_optimize_front_respects_bounds():
    problem = Problem(
        evaluate=lambda X: np.column_stack([X.sum(axis=1), -X[:, 0] + X[:, 1] ** 2, -X[:, 2]]),
        lower=[0.0, -1.0, 0.5],
        upper=[1.0, 1.0, 0.5],
        n_obj=3,
    )
    front = optimize(problem, OptimizerConfig(population_size=30, generations=20), das_dennis(3, 5))
    assert np.all(front.X >= problem.lower) and np.all(front.X <= problem.upper)


def test_optimize_resamples_non_finite_points():
    def f(X):
        out = np.column_stack([X[:, 0], 1.0 - X[:, 0]])
        out[X[:, 0] > 0.5] = np.nan
        return out

    problem = Problem(f, [0.0], [1.0], 2)
    front = optimize(problem, OptimizerConfig(population_size=20, generations=10), das_dennis(2, 9))
    assert np.all(front.X[:, 0] <= 0.5)
    assert np.all(np.isfinite(front.F))


def test_optimize_aborts_on_persistent_non_finite():
    problem = Problem(lambda X: np.full((len(X), 2), np.inf), [0.0], [1.0], 2)
    with pytest.raises(OptimizerAbort):
        optimize(problem, OptimizerConfig(population_size=20, generations=2), das_dennis(2, 9))


def test_optimize_rejects_population_smaller_than_directions():
    with pytest.raises(ValueError):
        optimize(convex_problem(), OptimizerConfig(population_size=10), das_dennis(2, 20))


def test_convex_front_igd_close_to_direction_placement():
    # best achievable with one member per direction: the direction/front intersections
    refs = das_dennis(2, 91)
    x = np.linspace(0.0, 2.0, 2001)
    truth = np.column_stack([x**2, (x - 2.0) ** 2])
    scaled = truth / 4.0
    ideal = []
    for w in refs.directions:
        d = np.linalg.norm(scaled - np.outer(scaled @ w / (w @ w), w), axis=1)
        ideal.append(truth[np.argmin(d)])
    floor = indicators.igd(np.asarray(ideal), truth)
    cfg = OptimizerConfig(population_size=92, generations=100, rng_seed=1)
    front = optimize(convex_problem(), cfg, refs)
    assert indicators.igd(front.F, truth) < 1.05 * floor
