"""Greedy search over pairs of tree levels for an interaction model.

A cell ``(k, l)`` cuts the G tree after ``k`` merges and the M tree after
``l`` merges (level 0 is the leaves), builds all cross-view products of the
two compressed representations and fits them by forward stepwise selection.
Cells are visited row by row.  A row is abandoned as soon as

* C_H1: its criterion rises compared with the previous cell of the row, or
* C_H2: its criterion exceeds the criterion of the current best row at the
  same inner position (only once a best row exists and that cell was seen).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import Hierarchy
from .compress import compress, groups_from_partition
from .errors import ConfigError, DimensionMismatch
from .model import GroupStructure

CRITERIA = ("aic", "bic")
RULES = ("criterion", "mse", "sparsest")


def build_interaction_features(xg: np.ndarray, xm: np.ndarray) -> np.ndarray:
    """All products ``xg[:, g] * xm[:, m]``, column ``g * n_M + m``."""
    xg = np.asarray(xg, dtype=float)
    xm = np.asarray(xm, dtype=float)
    if xg.ndim == 1:
        xg = xg[:, None]
    if xm.ndim == 1:
        xm = xm[:, None]
    if xg.shape[0] != xm.shape[0]:
        raise DimensionMismatch("interaction features")
    return (xg[:, :, None] * xm[:, None, :]).reshape(xg.shape[0], -1)


@dataclass(frozen=True)
class ActiveSetStop:
    """Stopping rule for forward selection.

    ``max_features`` of ``None`` means ``N - 2``.  Selection also stops when
    the best absolute residual correlation drops below ``min_corr`` or the
    training MSE improves by less than ``min_gain`` (relative).
    """

    max_features: int | None = None
    min_corr: float = 1e-8
    min_gain: float = 1e-10

    def __post_init__(self):
        if self.max_features is not None and self.max_features < 0:
            raise ConfigError("max_features must be >= 0")


@dataclass
class ActiveSetFit:
    active_set: np.ndarray
    theta: np.ndarray
    intercept: float
    mse_path: np.ndarray  # training MSE after 0, 1, ... additions
    skipped: list = field(default_factory=list)

    @property
    def mse(self) -> float:
        return float(self.mse_path[-1])


def active_set_fit(phi: np.ndarray, y, stop: ActiveSetStop | None = None, rank_tol: float = 1e-10) -> ActiveSetFit:
    """Forward stepwise OLS with an intercept.

    At each step the feature with the largest absolute correlation with the
    current residual enters (lowest index on ties) and the active set is
    refitted.  Features that are numerically in the span of the active set
    are skipped and recorded in ``skipped``.
    """
    stop = stop or ActiveSetStop()
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(getattr(y, "y", y), dtype=float)
    n, p = phi.shape
    if y.size != n:
        raise DimensionMismatch("active set response")
    limit = n - 2 if stop.max_features is None else stop.max_features
    limit = min(limit, p)
    xc = phi - phi.mean(axis=0)
    yc = y - y.mean()
    norms = np.linalg.norm(xc, axis=0)
    usable = norms > rank_tol * max(1.0, float(norms.max(initial=0.0)))
    basis = np.zeros((n, 0))
    r = yc.copy()
    active, skipped = [], []
    mse = [float(r @ r) / n]
    while len(active) < limit:
        rn = np.linalg.norm(r)
        if rn == 0:
            break
        score = np.zeros(p)
        score[usable] = np.abs(xc[:, usable].T @ r) / (norms[usable] * rn)
        j = int(np.argmax(score))
        if score[j] < stop.min_corr:
            break
        q = xc[:, j] - basis @ (basis.T @ xc[:, j])
        qn = np.linalg.norm(q)
        usable[j] = False
        if qn <= 1e-8 * norms[j]:
            skipped.append(j)
            continue
        q /= qn
        r_new = r - q * (q @ r)
        new_mse = float(r_new @ r_new) / n
        if mse[-1] - new_mse < stop.min_gain * max(mse[0], 1e-300):
            break
        basis = np.column_stack([basis, q])
        active.append(j)
        r = r_new
        mse.append(new_mse)
    active_arr = np.array(active, dtype=np.int64)
    if active:
        theta = np.linalg.lstsq(xc[:, active_arr], yc, rcond=None)[0]
        intercept = float(y.mean() - phi[:, active_arr].mean(axis=0) @ theta)
    else:
        theta = np.zeros(0)
        intercept = float(y.mean())
    return ActiveSetFit(active_arr, theta, intercept, np.array(mse), skipped)


def information_criterion(mse: float, n: int, n_active: int, kind: str = "bic") -> float:
    """``n log(RSS / n) + c (|active| + 1)`` with ``c`` 2 (AIC) or ``log n`` (BIC)."""
    if kind not in CRITERIA:
        raise ConfigError(f"unknown criterion {kind!r}")
    c = 2.0 if kind == "aic" else np.log(n)
    return n * np.log(max(mse, 1e-300)) + c * (n_active + 1)


@dataclass
class HeightModel:
    k: int
    l: int
    n_groups_G: int
    n_groups_M: int
    active_set: np.ndarray
    theta: np.ndarray
    criterion_value: float
    mse: float
    interaction_features: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return self.n_groups_G * self.n_groups_M

    @property
    def n_active(self) -> int:
        return int(self.active_set.size)

    def pairs(self):
        """Active features as (group G, group M) index pairs."""
        return [(int(j) // self.n_groups_M, int(j) % self.n_groups_M) for j in self.active_set]


def _better(cand, best, rule: str) -> bool:
    if best is None:
        return True
    if rule == "criterion":
        return cand.criterion_value < best.criterion_value
    if rule == "mse":
        return (cand.mse, cand.criterion_value) < (best.mse, best.criterion_value)
    return (cand.n_active, cand.criterion_value) < (best.n_active, best.criterion_value)


def explore_grid(evaluate, n_outer: int, n_inner: int, rule: str = "criterion"):
    """Early-stopped row-by-row search over an ``n_outer x n_inner`` grid.

    ``evaluate(a, b)`` returns an object with ``criterion_value``, ``mse``
    and ``n_active``.  Returns ``(best_cell, best_value, visited)`` where
    ``visited`` lists ``(a, b, value)`` in visit order.
    """
    if rule not in RULES:
        raise ConfigError(f"unknown rule {rule!r}")
    seen = {}
    visited = []
    best, best_cell = None, None
    for a in range(n_outer):
        prev = None
        for b in range(n_inner):
            val = evaluate(a, b)
            seen[a, b] = val
            visited.append((a, b, val))
            if _better(val, best, rule):
                best, best_cell = val, (a, b)
            if prev is not None and val.criterion_value > prev.criterion_value:
                break
            k_hat = best_cell[0]
            if a > k_hat and (k_hat, b) in seen and val.criterion_value > seen[k_hat, b].criterion_value:
                break
            prev = val
    return best_cell, best, visited


def _levels(h: Hierarchy, levels):
    if levels is None:
        return list(range(h.leaf_count))
    levels = [int(v) for v in levels]
    if not levels or min(levels) < 0 or max(levels) >= h.leaf_count:
        raise ConfigError("levels must lie in 0 .. D - 1")
    return levels


def _level_columns(h: Hierarchy, x: np.ndarray, k: int) -> np.ndarray:
    gs = GroupStructure.from_labels(h.labels_after(k))
    return compress(x, groups_from_partition(gs)).columns


@dataclass
class ExploreResult:
    best: HeightModel
    trace: list  # HeightModel per visited cell, in visit order
    outer: str

    @property
    def n_visited(self) -> int:
        return len(self.trace)

    def trace_tsv(self) -> str:
        lines = ["k\tl\tcriterion\tn_active"]
        for m in self.trace:
            lines.append(f"{m.k}\t{m.l}\t{m.criterion_value!r}\t{m.n_active}")
        return "\n".join(lines) + "\n"


def explore(hG: Hierarchy, hM: Hierarchy, xG, xM, y, criterion: str = "bic", rule: str = "criterion",
            outer: str = "deeper", levels_G=None, levels_M=None, stop: ActiveSetStop | None = None,
            keep_features: bool = False) -> ExploreResult:
    """Search tree-level pairs for the best forward-stepwise interaction model.

    ``outer`` picks the view driving the outer loop: ``"deeper"`` (the view
    with more levels to visit, G on ties), ``"shallower"``, ``"G"`` or ``"M"``.
    ``levels_G`` / ``levels_M`` restrict the visited levels (default all).
    """
    if criterion not in CRITERIA:
        raise ConfigError(f"unknown criterion {criterion!r}")
    xG = np.asarray(getattr(xG, "values", xG), dtype=float)
    xM = np.asarray(getattr(xM, "values", xM), dtype=float)
    yv = np.asarray(getattr(y, "y", y), dtype=float)
    if xG.shape[1] != hG.leaf_count or xM.shape[1] != hM.leaf_count:
        raise DimensionMismatch("hierarchy leaves vs columns")
    lg, lm = _levels(hG, levels_G), _levels(hM, levels_M)
    if outer == "deeper":
        g_outer = len(lg) >= len(lm)
    elif outer == "shallower":
        g_outer = len(lg) < len(lm)
    elif outer in ("G", "M"):
        g_outer = outer == "G"
    else:
        raise ConfigError(f"unknown outer {outer!r}")
    cache_G, cache_M = {}, {}

    def cols(cache, h, x, k):
        if k not in cache:
            cache[k] = _level_columns(h, x, k)
        return cache[k]

    def evaluate(a, b):
        i, j = (a, b) if g_outer else (b, a)
        k, l = lg[i], lm[j]
        cg, cm = cols(cache_G, hG, xG, k), cols(cache_M, hM, xM, l)
        phi = build_interaction_features(cg, cm)
        fit = active_set_fit(phi, yv, stop)
        crit = information_criterion(fit.mse, yv.size, fit.active_set.size, criterion)
        return HeightModel(k, l, cg.shape[1], cm.shape[1], fit.active_set, fit.theta, float(crit), fit.mse,
                           phi if keep_features else None)

    n_outer, n_inner = (len(lg), len(lm)) if g_outer else (len(lm), len(lg))
    _, best, visited = explore_grid(evaluate, n_outer, n_inner, rule)
    return ExploreResult(best, [v for _, _, v in visited], "G" if g_outer else "M")
