"""Flatten a tree into weighted groups and compress each group to one column.

Every node of the tree becomes a group.  A group lives from the height at
which it is created (0 for a leaf) to the height of the merge that absorbs
it; the length of that interval is its gap ``s`` and its penalty weight is
``rho = 1 / sqrt(s)``.  Long-lived groups are therefore penalised less.
The root has no parent, so its gap is the distance between the last two
merge heights.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cluster import Hierarchy
from .errors import ConfigError, DataError, EmptyGroup
from .model import Dataset, GroupStructure

RHO_MAX = 1e6
SUMMARIES = ("mean", "median", "pca1")


@dataclass(frozen=True)
class WeightedGroupSet:
    """Groups with their tree bookkeeping, aligned by position.

    ``node`` is the tree node id, ``level`` the number of merges applied
    when the group appears (0 for leaves).
    """

    members: tuple[tuple[int, ...], ...]
    node: np.ndarray
    level: np.ndarray
    created: np.ndarray
    destroyed: np.ndarray
    gap: np.ndarray
    rho: np.ndarray
    n_variables: int

    def __len__(self):
        return len(self.members)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.level == 0

    def structure(self) -> GroupStructure:
        return GroupStructure(self.members, self.n_variables)

    def take(self, idx) -> "WeightedGroupSet":
        idx = np.asarray(idx, dtype=np.int64)
        return WeightedGroupSet(tuple(self.members[i] for i in idx), self.node[idx], self.level[idx],
                                self.created[idx], self.destroyed[idx], self.gap[idx], self.rho[idx],
                                self.n_variables)

    def to_records(self, names=None):
        recs = []
        for i, mem in enumerate(self.members):
            rec = {
                "id": i,
                "node": int(self.node[i]),
                "members": [names[j] for j in mem] if names is not None else list(mem),
                "level": int(self.level[i]),
                "created": float(self.created[i]),
                "destroyed": float(self.destroyed[i]),
                "s": float(self.gap[i]),
                "rho": float(self.rho[i]),
            }
            recs.append(rec)
        return recs

    def to_json(self, names=None) -> str:
        return json.dumps(self.to_records(names), indent=1)


def gap_weight(s, rho_max: float = RHO_MAX):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(s > 0, 1.0 / np.sqrt(np.where(s > 0, s, 1.0)), rho_max)


def expand_hierarchy(h: Hierarchy, rho_max: float = RHO_MAX) -> WeightedGroupSet:
    """All ``2D - 1`` nodes of ``h`` as weighted groups (leaves first)."""
    d = h.leaf_count
    n = 2 * d - 1
    node = np.arange(n)
    level = np.concatenate([np.zeros(d, dtype=np.int64), np.arange(1, d, dtype=np.int64)])
    created = np.concatenate([np.zeros(d), h.height])
    parent = h.parent
    destroyed = np.empty(n)
    for v in range(n - 1):
        destroyed[v] = h.height[parent[v] - d]
    root_prev = h.height[-2] if d > 2 else 0.0
    destroyed[n - 1] = created[n - 1]
    gap = destroyed - created
    gap[n - 1] = h.height[-1] - root_prev
    members = tuple(h.members(v) for v in range(n))
    return WeightedGroupSet(members, node, level, created, destroyed, gap, gap_weight(gap, rho_max), d)


def restrict_search_space(wgs: WeightedGroupSet, factor: float = 5.0) -> WeightedGroupSet:
    """Keep at most ``ceil(factor * D)`` groups, preferring the largest gaps.

    Leaves always stay; among internal groups, ties in gap go to the
    earlier group.  Surviving groups keep their original order.
    """
    d = wgs.n_variables
    if factor * d < 1:
        raise ConfigError("factor * D must be at least 1")
    budget = math.ceil(factor * d - 1e-9)
    if budget >= len(wgs):
        return wgs
    leaves = np.flatnonzero(wgs.is_leaf)
    inner = np.flatnonzero(~wgs.is_leaf)
    room = max(budget - leaves.size, 0)
    order = inner[np.lexsort((inner, -wgs.gap[inner]))]
    keep = np.sort(np.concatenate([leaves, order[:room]]))
    return wgs.take(keep)


@dataclass(frozen=True)
class SuperVariableSet:
    columns: np.ndarray
    groups: WeightedGroupSet
    summary: str = "mean"

    @property
    def n_groups(self) -> int:
        return self.columns.shape[1]

    def names(self, prefix="g"):
        return [f"{prefix}{int(v)}" for v in self.groups.node]


def _pca1(sub: np.ndarray) -> np.ndarray:
    if sub.shape[1] == 1:
        return sub[:, 0].copy()
    centered = sub - sub.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    score = centered @ vt[0]
    avg = sub.mean(axis=1)
    if float(score @ (avg - avg.mean())) < 0:
        score = -score
    return score


def compress(x: Dataset | np.ndarray, wgs: WeightedGroupSet, summary: str = "mean") -> SuperVariableSet:
    """One supervariable per group: row-wise mean, median or first PC score."""
    values = x.values if isinstance(x, Dataset) else np.asarray(x, dtype=float)
    if summary not in SUMMARIES:
        raise ConfigError(f"unknown summary {summary!r}")
    for k, mem in enumerate(wgs.members):
        if not mem:
            raise EmptyGroup(k)
        if max(mem) >= values.shape[1] or min(mem) < 0:
            raise DataError(f"group {k} refers to columns outside the view")
    if summary == "mean":
        mem = wgs.structure().membership().astype(float) if len(wgs) else np.zeros((0, values.shape[1]))
        cols = values @ (mem.T / mem.sum(axis=1))
    elif summary == "median":
        cols = np.column_stack([np.median(values[:, list(m)], axis=1) for m in wgs.members])
    else:
        cols = np.column_stack([_pca1(values[:, list(m)]) for m in wgs.members])
    return SuperVariableSet(np.ascontiguousarray(cols), wgs, summary)


def groups_from_partition(gs: GroupStructure) -> WeightedGroupSet:
    """Unit-weight group set for a flat partition (no tree bookkeeping)."""
    n = gs.group_count
    z = np.zeros(n)
    return WeightedGroupSet(gs.groups, np.arange(n), np.zeros(n, dtype=np.int64), z, z.copy(),
                            np.ones(n), np.ones(n), gs.n_variables)
