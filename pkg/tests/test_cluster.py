import numpy as np
import pytest

from conftest import brute_force_ward
from sicomore.cluster import (EUCLIDEAN, ONE_MINUS_R2, Hierarchy, constrained_ward_cluster, dissimilarity,
                              gap_statistic_cut, ward_cluster, ward_from_dissimilarity)
from sicomore.errors import ConfigError, TooFewVariables


def merge_sets(h):
    return [(h.members(a), h.members(b)) for a, b in zip(h.left, h.right)]


def test_nearest_pair_merges_first(use_numba):
    x = np.array([[0.0, 1.0, 10.0]])
    h = ward_cluster(x, use_numba=use_numba)
    assert merge_sets(h)[0] == ((0,), (1,))


def test_duplicates_merge_at_zero(use_numba, rng):
    x = rng.standard_normal((10, 4))
    x[:, 2] = x[:, 0]
    h = ward_cluster(x, use_numba=use_numba)
    assert merge_sets(h)[0] == ((0,), (2,))
    assert h.height[0] == 0.0


def test_euclidean_heights_are_ward_costs(rng):
    x = rng.standard_normal((6, 5))
    h = ward_cluster(x)
    # classical Ward increase: |A||B|/(|A|+|B|) * ||c_A - c_B||^2
    for (a, b), hk in zip(merge_sets(h), h.cost):
        ca, cb = x[:, list(a)].mean(axis=1), x[:, list(b)].mean(axis=1)
        expected = len(a) * len(b) / (len(a) + len(b)) * np.sum((ca - cb) ** 2)
        assert np.isclose(hk, expected)


@pytest.mark.parametrize("seed", range(25))
def test_ward_matches_brute_force(seed, use_numba):
    rng = np.random.default_rng(seed)
    d = rng.integers(2, 9)
    x = rng.standard_normal((rng.integers(3, 12), d))
    h = ward_cluster(x, use_numba=use_numba)
    oracle = brute_force_ward(dissimilarity(x, EUCLIDEAN))
    assert merge_sets(h) == [(a, b) for a, b, _ in oracle]
    assert np.allclose(h.cost, [c for _, _, c in oracle])


@pytest.mark.parametrize("seed", range(25))
def test_constrained_matches_brute_force(seed, use_numba):
    rng = np.random.default_rng(100 + seed)
    d = rng.integers(2, 9)
    x = rng.standard_normal((rng.integers(4, 12), d))
    h = constrained_ward_cluster(x, use_numba=use_numba)
    oracle = brute_force_ward(dissimilarity(x, ONE_MINUS_R2), constrained=True)
    assert merge_sets(h) == [(a, b) for a, b, _ in oracle]
    assert np.allclose(h.cost, [c for _, _, c in oracle])


def test_backends_agree_on_larger_input(rng):
    x = rng.standard_normal((50, 60))
    for fn in (ward_cluster, constrained_ward_cluster):
        a, b = fn(x, use_numba=False), fn(x, use_numba=True)
        assert np.array_equal(a.left, b.left) and np.array_equal(a.right, b.right)
        assert np.allclose(a.height, b.height)


def test_constrained_clusters_are_intervals(rng):
    x = rng.standard_normal((20, 15))
    h = constrained_ward_cluster(x)
    for k in range(h.leaf_count):
        labels = h.labels_after(k)
        for lab in np.unique(labels):
            idx = np.flatnonzero(labels == lab)
            assert idx.max() - idx.min() + 1 == idx.size


def test_constrained_two_blocks_join_last(rng):
    base = rng.standard_normal((30, 2))
    x = np.column_stack([base[:, 0]] * 3 + [base[:, 1]] * 4) + 1e-3 * rng.standard_normal((30, 7))
    h = constrained_ward_cluster(x)
    a, b = merge_sets(h)[-1]
    assert (a, b) == ((0, 1, 2), (3, 4, 5, 6))


def test_hierarchy_invariants(rng):
    x = rng.standard_normal((15, 12))
    for h in (ward_cluster(x), constrained_ward_cluster(x)):
        assert np.all(np.diff(h.height) >= 0)
        for k in range(h.leaf_count):
            labels = h.labels_after(k)
            assert len(np.unique(labels)) == h.leaf_count - k
        for n in range(1, h.leaf_count + 1):
            assert sorted(np.unique(h.cut(n))) == list(range(n))


def test_ward_permutation_keeps_heights(rng):
    x = rng.standard_normal((10, 7))
    perm = rng.permutation(7)
    assert np.allclose(np.sort(ward_cluster(x).height), np.sort(ward_cluster(x[:, perm]).height))


def test_json_round_trip(rng):
    h = ward_cluster(rng.standard_normal((5, 6)))
    back = Hierarchy.from_json(h.to_json())
    assert np.array_equal(back.left, h.left) and np.allclose(back.height, h.height)


def test_too_few_variables():
    with pytest.raises(TooFewVariables):
        ward_from_dissimilarity(np.zeros((1, 1)))


def test_gap_statistic_examples(rng):
    n = 40
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    two = np.column_stack([a + 0.05 * rng.standard_normal(n) for _ in range(10)]
                          + [5 * b + 10 + 0.05 * rng.standard_normal(n) for _ in range(10)])
    h = ward_cluster(two)
    assert gap_statistic_cut(two, h, 6, n_ref=50, seed=1) == 2
    blob = rng.standard_normal((5, 30))
    assert gap_statistic_cut(blob, ward_cluster(blob), 6, n_ref=50, seed=1) == 1
    assert gap_statistic_cut(blob, ward_cluster(blob), 1) == 1
    with pytest.raises(ConfigError):
        gap_statistic_cut(blob, ward_cluster(blob), 0)
