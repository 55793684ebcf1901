import itertools

import numpy as np
import pytest

from sicomore.errors import DataError, DimensionMismatch
from sicomore.model import (CompactModel, Dataset, GroupStructure, Response, VariableInteractionMatrix,
                            expand_to_variables, load_dataset, load_response, validate_pairing,
                            write_dataset, write_response)


def _ds(n, d):
    return Dataset(np.zeros((n, d)))


def test_dataset_rejects_nonfinite_and_duplicate_names():
    with pytest.raises(DataError):
        Dataset(np.array([[1.0, np.nan]]))
    with pytest.raises(DataError):
        Dataset(np.ones((2, 2)), ["a", "a"])
    with pytest.raises(DimensionMismatch):
        Dataset(np.ones((2, 2)), ["a"])


def test_dataset_default_names_and_immutability():
    ds = Dataset(np.ones((3, 2)))
    assert ds.variable_names == ("V1", "V2")
    with pytest.raises(ValueError):
        ds.values[0, 0] = 5.0


def test_validate_pairing_examples():
    validate_pairing(_ds(100, 3), _ds(100, 2), Response(np.zeros(100)))
    with pytest.raises(DimensionMismatch, match="view M"):
        validate_pairing(_ds(100, 3), _ds(99, 2), Response(np.zeros(100)))
    with pytest.raises(DimensionMismatch, match="empty sample"):
        validate_pairing(_ds(0, 3), _ds(0, 2), Response(np.zeros(0)))


def test_validate_pairing_passes_iff_lengths_agree():
    for a, b, c in itertools.product(range(1, 4), repeat=3):
        ok = a == b == c
        try:
            validate_pairing(_ds(a, 1), _ds(b, 1), Response(np.zeros(c)))
            passed = True
        except DimensionMismatch:
            passed = False
        assert passed == ok


def test_group_structure_invariants():
    with pytest.raises(DataError):
        GroupStructure(((0,), ()), 1)
    with pytest.raises(DataError):
        GroupStructure(((0,),), 2)
    gs = GroupStructure.from_labels([2, 2, 0, 1, 1])
    assert gs.groups == ((0, 1), (2,), (3, 4))


def test_expand_single_hit():
    gs_G = GroupStructure(((0, 1), (2,)), 3)
    gs_M = GroupStructure(((0, 1), (2,)), 3)
    out = expand_to_variables(np.array([[False, True], [False, False]]), gs_G, gs_M).entries
    expected = np.zeros((3, 3), dtype=bool)
    expected[0, 2] = expected[1, 2] = True
    assert np.array_equal(out, expected)


def test_expand_empty_and_overlap_matches_brute_force(rng):
    gs_G = GroupStructure(((0, 1), (1, 2), (3,), (0, 1, 2, 3)), 4)
    gs_M = GroupStructure(((0,), (1, 2), (0, 1, 2)), 3)
    assert not expand_to_variables(np.zeros((4, 3), bool), gs_G, gs_M).entries.any()
    for _ in range(20):
        hit = rng.random((4, 3)) < 0.3
        brute = np.zeros((4, 3), dtype=bool)
        for g, m in zip(*np.nonzero(hit)):
            for j in gs_G.groups[g]:
                for jj in gs_M.groups[m]:
                    brute[j, jj] = True
        assert np.array_equal(expand_to_variables(hit, gs_G, gs_M).entries, brute)


def test_expand_is_monotone(rng):
    gs_G = GroupStructure.from_labels([0, 0, 1, 2])
    gs_M = GroupStructure.from_labels([0, 1, 1])
    hit = rng.random((3, 2)) < 0.4
    base = expand_to_variables(hit, gs_G, gs_M).entries
    more = hit.copy()
    more[0, 0] = True
    assert np.all(expand_to_variables(more, gs_G, gs_M).entries >= base)


def test_compact_model_predict():
    cm = CompactModel([1.0, 0.0], [2.0], [[0.5], [0.0]], intercept=1.0)
    xg = np.array([[1.0, 3.0], [2.0, 0.0]])
    xm = np.array([[1.0], [-1.0]])
    assert np.allclose(cm.predict(xg, xm), [1 + 1 + 2 + 0.5, 1 + 2 - 2 - 1.0])


def test_round_trip_tables(tmp_path, rng):
    ds = Dataset(rng.standard_normal((4, 3)), ["a", "b", "c"])
    write_dataset(tmp_path / "x.tsv", ds)
    back = load_dataset(tmp_path / "x.tsv")
    assert back.variable_names == ds.variable_names
    assert np.array_equal(back.values, ds.values)
    y = Response(rng.standard_normal(4))
    write_response(tmp_path / "y.tsv", y)
    assert np.array_equal(load_response(tmp_path / "y.tsv").y, y.y)


def test_interaction_matrix_hits():
    v = VariableInteractionMatrix(np.array([[0.0, 2.0]]))
    assert v.hits().tolist() == [[False, True]]
