import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_ems.indicators import (
    DegenerateFrontError,
    UndefinedMetricError,
    diversity_index,
    gd_ideal,
    hypervolume,
    hypervolume_estimate,
    igd,
    knee_point,
    mismatch_improvement,
    mismatch_pct,
    reference_point,
)
from adaptive_ems.nsga3 import fast_nondominated_sort

from .oracles import hv_inclusion_exclusion, hv_monte_carlo


def random_front(rng, n, m):
    F = rng.random((n * 4, m))
    return F[fast_nondominated_sort(F)[0]][:n]


# --------------------------------------------------------------------------
# hypervolume


def test_hv_examples():
    assert hypervolume([(0, 0)], (1, 1)) == pytest.approx(1.0, abs=1e-12)
    assert hypervolume([(0, 1), (1, 0)], (2, 2)) == pytest.approx(3.0, abs=1e-9)


def test_hv_rejects_point_beyond_ref():
    with pytest.raises(ValueError):
        hypervolume([(0, 3)], (2, 2))


@pytest.mark.parametrize("m", [2, 3, 4])
@pytest.mark.parametrize("seed", range(4))
def test_hv_exact_matches_inclusion_exclusion(m, seed):
    rng = np.random.default_rng(seed)
    F = random_front(rng, 7, m)
    ref = np.full(m, 1.1)
    assert hypervolume(F, ref) == pytest.approx(hv_inclusion_exclusion(F, ref), abs=1e-9)


def test_hv_dominated_points_are_ignored():
    F = [(0, 1), (1, 0), (1.5, 1.5), (0.5, 1.2)]
    assert hypervolume(F, (2, 2)) == pytest.approx(3.0, abs=1e-12)


@pytest.mark.slow
def test_hv_six_objective_monte_carlo_against_independent_estimate():
    rng = np.random.default_rng(42)
    F = random_front(rng, 12, 6)
    ref = reference_point(F)
    est, se = hypervolume_estimate(F, ref, samples=200_000, seed=1)
    oracle, oracle_se = hv_monte_carlo(F, ref, samples=10_000_000, seed=99)
    assert abs(est - oracle) <= 3.0 * math.hypot(se, oracle_se)
    assert se > 0


def test_hv_six_objectives_uses_estimate():
    F = [(0, 0, 0, 0, 0, 0)]
    assert hypervolume(F, np.ones(6)) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_hv_monotone_under_adding_a_nondominated_point(seed):
    rng = np.random.default_rng(seed)
    F = random_front(rng, 6, 3)
    ref = np.full(3, 1.2)
    extra = rng.random(3)
    assert hypervolume(np.vstack([F, extra]), ref) >= hypervolume(F, ref) - 1e-12


def test_reference_point_bounds_front():
    F = np.array([[0.0, 1.0], [1.0, 0.0]])
    ref = reference_point(F)
    assert np.allclose(ref, [1.1, 1.1])
    assert np.all(reference_point([[2.0, 2.0]]) >= [2.0, 2.0])


# --------------------------------------------------------------------------
# distances


def test_gd_ideal_examples():
    assert gd_ideal([(0, 0)], (0, 0)) == 0.0
    assert gd_ideal([(3, 4)], (0, 0)) == pytest.approx(5.0, abs=1e-9)
    assert gd_ideal([(1, 0), (0, 1)], (0, 0)) == pytest.approx(1.0, abs=1e-9)


def test_igd_examples():
    P = [(1, 0), (0, 1)]
    assert igd(P, P) == 0.0
    assert igd([(0, 0)], P) == pytest.approx(1.0, abs=1e-9)


points = st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=12)


@given(points, points, points)
def test_igd_superset_never_worse(A, B, P):
    assert igd(A + B, P) <= igd(A, P) + 1e-12
    assert igd(A, P) >= 0


@given(points)
def test_igd_zero_on_coverage(P):
    assert igd(P, P) == 0.0


# --------------------------------------------------------------------------
# knee


def test_knee_examples():
    k = knee_point([(0, 1), (0.1, 0.4), (1, 0)])
    assert k.index == 1
    assert k.distance == pytest.approx(abs(0.1 + 0.4 - 1) / math.sqrt(2), abs=1e-12)
    assert knee_point([(0.5, 0.5), (0, 1), (1, 0)]).index == 1


def test_knee_degenerate_cases():
    k = knee_point([(1.0, 0.0), (0.0, 1.0)])
    assert k.degenerate and k.index == 1
    with pytest.raises(DegenerateFrontError):
        knee_point([(1.0, 0.0)])


@settings(max_examples=50, deadline=None)
@given(
    st.integers(0, 10_000),
    st.tuples(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10)),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)),
)
def test_knee_invariant_under_positive_affine_rescaling(seed, scale, shift):
    F = random_front(np.random.default_rng(seed), 8, 3)
    if len(F) < 3:
        return
    G = F * np.asarray(scale) + np.asarray(shift)
    assert knee_point(F).index == knee_point(G).index


# --------------------------------------------------------------------------
# diversity


def test_diversity_two_points():
    d = diversity_index([(0, 1), (1, 0)])
    assert d[0] == d[1] == pytest.approx(math.sqrt(2))


def test_diversity_simplex_ends_sparser_than_interior():
    t = np.linspace(0.0, 1.0, 9)
    d = diversity_index(np.column_stack([t, 1.0 - t]))
    assert np.all(d[1:-1] < d[0]) and np.all(d[1:-1] < d[-1])
    assert d[4] == d.min()


def test_diversity_duplicate_contributes_zero():
    d1 = diversity_index([(0, 0), (0, 0), (1, 1)], k=1)
    assert d1[0] == 0.0 and d1[1] == 0.0
    assert diversity_index([(3, 3)]).tolist() == [0.0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_diversity_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    F = rng.random((10, 4))
    perm = rng.permutation(10)
    assert np.allclose(diversity_index(F)[perm], diversity_index(F[perm]))


# --------------------------------------------------------------------------
# mismatch


@pytest.mark.parametrize("load, supply, pct", [(5, 5, 0.0), (4, 3.8, 5.0), (2, 2.5, 25.0)])
def test_mismatch_pct(load, supply, pct):
    assert mismatch_pct(load, supply) == pytest.approx(pct, abs=1e-9)


def test_mismatch_errors():
    with pytest.raises(UndefinedMetricError):
        mismatch_pct(0.0, 1.0)
    with pytest.raises(UndefinedMetricError):
        mismatch_improvement(0.0, 1.0)


def test_mismatch_improvement():
    assert mismatch_improvement(10.0, 9.0) == pytest.approx(10.0)
    assert mismatch_improvement(4.0, 4.0) == 0.0
    assert mismatch_improvement(1.0, 2.0) < 0


@given(st.floats(1e-6, 1e6))
def test_mismatch_of_balance_is_zero(x):
    assert mismatch_pct(x, x) == 0.0
