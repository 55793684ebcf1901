import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sicomore.errors import AllZeroRow, ConfigError, NonPositiveEntry
from sicomore.model import Dataset, Response
from sicomore.preprocess import (ClrConfig, clr_counts, clr_transform, counts_to_proportions,
                                 screen_single_effects, standardize)


def test_proportions_examples():
    assert np.allclose(counts_to_proportions([[2, 2]]), [[0.5, 0.5]])
    # pseudocount is added to every cell, so (2, 2) stays balanced and (0, 4) shifts
    assert np.allclose(counts_to_proportions([[0, 4]]), [[0.1, 0.9]])
    with pytest.raises(AllZeroRow):
        counts_to_proportions([[0, 0]])


def test_multiplicative_replacement_keeps_closure():
    p = counts_to_proportions([[0, 3, 1]], ClrConfig("multiplicative", 0.5))
    assert np.isclose(p.sum(), 1.0)
    assert np.isclose(p[0, 0], 0.5 / 4)


def test_clr_examples():
    assert np.allclose(clr_transform(np.full((1, 4), 0.25)), 0.0)
    row = np.array([0.5, 0.25, 0.25])
    g = np.exp(np.mean(np.log(row)))
    assert np.allclose(clr_transform(row[None]), np.log(row / g)[None], atol=1e-14)
    with pytest.raises(NonPositiveEntry):
        clr_transform([[0.5, 0.0, 0.5]])


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(1.0, 1e6)), st.floats(1e-3, 1e3))
def test_clr_centered_and_scale_invariant(counts, c):
    props = counts / counts.sum(axis=1, keepdims=True)
    z = clr_transform(props)
    assert np.allclose(z.sum(axis=1), 0.0, atol=1e-10)
    z2 = clr_transform((c * counts) / (c * counts).sum(axis=1, keepdims=True))
    assert np.allclose(z, z2, atol=1e-10)


def test_clr_counts_pipeline_shape():
    z = clr_counts(np.array([[1, 2, 3], [0, 5, 5]]))
    assert z.shape == (2, 3)
    assert np.allclose(z.sum(axis=1), 0)


def test_standardize_examples():
    st_ = standardize(Dataset(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])))
    assert np.allclose(st_.data.values[:, 0], [-1, 0, 1])
    assert np.allclose(st_.data.values[:, 1], 0)
    assert st_.constant.tolist() == [False, True]


def test_standardize_idempotent(rng):
    z = standardize(Dataset(rng.standard_normal((30, 4)) * 7 + 3)).data
    again = standardize(z).data
    assert np.allclose(again.values, z.values, atol=1e-12)


def test_screen_examples(rng):
    x = Dataset(rng.standard_normal((40, 10)))
    y = Response(rng.standard_normal(40))
    assert screen_single_effects(x, y, 1.0).tolist() == list(range(10))
    y3 = Response(x.values[:, 3])
    assert screen_single_effects(x, y3, 0.1).tolist() == [3]
    with pytest.raises(ConfigError):
        screen_single_effects(x, y, 0.0)


def test_screen_matches_correlation_sort(rng):
    for _ in range(20):
        x = Dataset(rng.standard_normal((25, 12)))
        y = Response(rng.standard_normal(25))
        r = np.array([abs(np.corrcoef(x.values[:, j], y.y)[0, 1]) for j in range(12)])
        brute = sorted(sorted(range(12), key=lambda j: (-r[j], j))[:5])
        assert screen_single_effects(x, y, 5 / 12).tolist() == brute


def test_screen_is_monotone_in_keep_fraction(rng):
    x = Dataset(rng.standard_normal((25, 12)))
    y = Response(rng.standard_normal(25))
    prev = set()
    for f in np.linspace(0.1, 1.0, 10):
        cur = set(screen_single_effects(x, y, f).tolist())
        assert prev <= cur
        prev = cur
