import itertools
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sicomore.cluster import constrained_ward_cluster, ward_cluster
from sicomore.errors import ConfigError
from sicomore.explore import (ActiveSetStop, active_set_fit, build_interaction_features, explore,
                              explore_grid, information_criterion)


def cell(v, n_active=0, mse=None):
    return SimpleNamespace(criterion_value=float(v), n_active=n_active, mse=float(v) if mse is None else mse)


def test_interaction_features_layout(rng):
    xg, xm = rng.standard_normal((6, 3)), rng.standard_normal((6, 4))
    phi = build_interaction_features(xg, xm)
    assert phi.shape == (6, 12)
    for g, m in itertools.product(range(3), range(4)):
        np.testing.assert_array_equal(phi[:, g * 4 + m], xg[:, g] * xm[:, m])


def test_active_set_perfect_column(rng):
    phi = rng.standard_normal((40, 8))
    y = 3.0 * phi[:, 5] + 1.0
    fit = active_set_fit(phi, y, ActiveSetStop(max_features=3))
    assert fit.active_set.tolist() == [5]
    assert np.isclose(fit.theta[0], 3.0) and np.isclose(fit.intercept, 1.0)
    assert fit.mse < 1e-20


def test_active_set_zero_features(rng):
    phi, y = rng.standard_normal((20, 4)), rng.standard_normal(20)
    fit = active_set_fit(phi, y, ActiveSetStop(max_features=0))
    assert fit.active_set.size == 0
    assert np.isclose(fit.intercept, y.mean())
    assert np.isclose(fit.mse, np.var(y))


def greedy_oracle(phi, y, steps):
    """Refit OLS each step and recompute every residual correlation from scratch."""
    n = len(y)
    active = []
    for _ in range(steps):
        design = np.column_stack([np.ones(n), phi[:, active]])
        r = y - design @ np.linalg.lstsq(design, y, rcond=None)[0]
        corr = [-1.0 if j in active else abs(np.corrcoef(phi[:, j], r)[0, 1]) for j in range(phi.shape[1])]
        active.append(int(np.argmax(corr)))
    return active


@pytest.mark.parametrize("seed", range(10))
def test_active_set_matches_refit_oracle(seed):
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((30, 10))
    y = phi[:, :3] @ rng.uniform(0.5, 2, 3) + rng.standard_normal(30)
    fit = active_set_fit(phi, y, ActiveSetStop(max_features=4))
    assert fit.active_set.tolist() == greedy_oracle(phi, y, 4)
    design = np.column_stack([np.ones(30), phi[:, fit.active_set]])
    coef = np.linalg.lstsq(design, y, rcond=None)[0]
    np.testing.assert_allclose(fit.theta, coef[1:], atol=1e-8)


def test_mse_path_non_increasing_and_collinear_skipped(rng):
    phi = rng.standard_normal((25, 6))
    phi = np.column_stack([phi, phi[:, 0] + phi[:, 1]])
    y = phi[:, 6] + 0.1 * rng.standard_normal(25)
    fit = active_set_fit(phi, y)
    assert np.all(np.diff(fit.mse_path) <= 1e-12)
    assert len(set(fit.active_set.tolist())) == fit.active_set.size
    design = phi[:, fit.active_set]
    assert np.linalg.matrix_rank(design - design.mean(0)) == fit.active_set.size


def test_information_criterion():
    assert np.isclose(information_criterion(1.0, 100, 2, "aic"), 6.0)
    assert np.isclose(information_criterion(np.e, 10, 0, "bic"), 10 + np.log(10))
    with pytest.raises(ConfigError):
        information_criterion(1.0, 10, 0, "hqic")


def test_grid_monotone_rows_stop_early():
    surface = lambda a, b: a + b
    best_cell, best, visited = explore_grid(lambda a, b: cell(surface(a, b)), 4, 5)
    assert best_cell == (0, 0) and best.criterion_value == 0
    rows = {}
    for a, b, _ in visited:
        rows.setdefault(a, []).append(b)
    assert rows[0] == [0, 1]
    assert all(rows[a] == [0] for a in (1, 2, 3))


def test_grid_single_cell():
    best_cell, _, visited = explore_grid(lambda a, b: cell(7.0), 1, 1)
    assert best_cell == (0, 0) and len(visited) == 1


def test_grid_rules():
    vals = {(0, 0): cell(5, n_active=3, mse=1.0), (0, 1): cell(4, n_active=2, mse=2.0),
            (0, 2): cell(6, n_active=1, mse=3.0)}
    for rule, expected in (("criterion", (0, 1)), ("mse", (0, 0)), ("sparsest", (0, 2))):
        assert explore_grid(lambda a, b: vals[a, b], 1, 3, rule)[0] == expected
    with pytest.raises(ConfigError):
        explore_grid(lambda a, b: cell(0), 1, 1, "fastest")


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(1, 6), st.lists(st.floats(-5, 5), min_size=36, max_size=36))
def test_grid_staircase_and_best(n_outer, n_inner, flat):
    table = np.array(flat).reshape(6, 6)
    _, best, visited = explore_grid(lambda a, b: cell(table[a, b]), n_outer, n_inner)
    per_row = {}
    for a, b, v in visited:
        per_row.setdefault(a, []).append(b)
        assert best.criterion_value <= v.criterion_value
    assert sorted(per_row) == list(range(n_outer))
    for bs in per_row.values():
        assert bs == list(range(len(bs)))


def test_explore_on_small_hierarchies(rng):
    n = 60
    xg = rng.standard_normal((n, 6))
    xg[:, 1] = xg[:, 0] + 0.05 * rng.standard_normal(n)
    xm = rng.standard_normal((n, 5))
    y = xg[:, 0] * xm[:, 2] + 0.1 * rng.standard_normal(n)
    hG, hM = constrained_ward_cluster(xg), ward_cluster(xm)
    res = explore(hG, hM, xg, xm, y, stop=ActiveSetStop(max_features=3))
    assert res.outer == "G"
    assert res.n_visited >= 6
    assert all(res.best.criterion_value <= m.criterion_value for m in res.trace)
    lines = res.trace_tsv().splitlines()
    assert lines[0] == "k\tl\tcriterion\tn_active" and len(lines) == res.n_visited + 1
    res_m = explore(hG, hM, xg, xm, y, outer="M", stop=ActiveSetStop(max_features=3))
    assert res_m.outer == "M"
    with pytest.raises(ConfigError):
        explore(hG, hM, xg, xm, y, levels_G=[0, 9])
