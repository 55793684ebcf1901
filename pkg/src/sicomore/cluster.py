"""Agglomerative Ward trees over the columns of a view, and the Gap Statistic cut.

Both clusterers work from a pairwise dissimilarity ``delta`` between
columns, treated as a squared distance.  The within-cluster sum of squares
of a cluster ``C`` is ``ESS(C) = sum_{i,j in C} delta_ij / (2 |C|)`` and
the height recorded for a merge is the Ward cost ``ESS(A u B) - ESS(A) -
ESS(B)``.  With ``delta_ij = ||x_i - x_j||^2`` this is the classical Ward
criterion.

Clusters are identified by their smallest leaf index.  Among candidate
pairs with equal cost the lexicographically smallest pair of identifiers
is merged first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import _accel
from ._accel import njit
from .errors import ConfigError, TooFewVariables
from .model import Dataset, GroupStructure

EUCLIDEAN = "euclidean"
ONE_MINUS_R2 = "one-minus-squared-correlation"
_METRICS = (EUCLIDEAN, ONE_MINUS_R2)


@dataclass(frozen=True)
class Hierarchy:
    """Binary merge tree over ``leaf_count`` leaves.

    Leaves are nodes ``0..D-1``; merge ``k`` creates node ``D + k`` from
    ``left[k]`` and ``right[k]`` (the child holding the smaller leaf goes
    left).  ``height`` is non-decreasing; ``cost`` keeps the raw Ward cost,
    which can dip below an earlier merge under the adjacency constraint.
    """

    left: np.ndarray
    right: np.ndarray
    height: np.ndarray
    leaf_count: int
    method: str = "ward"
    metric: str = EUCLIDEAN
    cost: np.ndarray | None = None

    def __post_init__(self):
        for name in ("left", "right"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "height", np.asarray(self.height, dtype=float))
        if self.cost is None:
            object.__setattr__(self, "cost", self.height.copy())
        if self.left.size != self.leaf_count - 1:
            raise ValueError("a hierarchy over D leaves needs D - 1 merges")

    @property
    def n_merges(self) -> int:
        return self.left.size

    @property
    def merges(self):
        return list(zip(self.left.tolist(), self.right.tolist(), self.height.tolist()))

    @cached_property
    def _members(self) -> list[tuple[int, ...]]:
        d = self.leaf_count
        out: list[tuple[int, ...]] = [(j,) for j in range(d)]
        for k in range(self.n_merges):
            out.append(tuple(sorted(out[self.left[k]] + out[self.right[k]])))
        return out

    def members(self, node: int) -> tuple[int, ...]:
        return self._members[node]

    @cached_property
    def parent(self) -> np.ndarray:
        par = np.full(2 * self.leaf_count - 1, -1, dtype=np.int64)
        for k in range(self.n_merges):
            par[self.left[k]] = self.leaf_count + k
            par[self.right[k]] = self.leaf_count + k
        return par

    def created_at(self, node: int) -> float:
        return 0.0 if node < self.leaf_count else float(self.height[node - self.leaf_count])

    def labels_after(self, n_merges: int) -> np.ndarray:
        """Cluster label of each leaf after applying the first ``n_merges`` merges.

        Labels are numbered by first appearance along the leaves.
        """
        d = self.leaf_count
        root = np.arange(d)
        # union-find over leaves is overkill at these sizes
        owner = list(range(d))
        for k in range(n_merges):
            for j in self._members[d + k]:
                owner[j] = d + k
        _, labels = np.unique(np.asarray(owner), return_inverse=True)
        first = {}
        out = np.empty(d, dtype=np.int64)
        for j in root:
            out[j] = first.setdefault(labels[j], len(first))
        return out

    def cut(self, n_clusters: int) -> np.ndarray:
        if not 1 <= n_clusters <= self.leaf_count:
            raise ValueError("n_clusters out of range")
        return self.labels_after(self.leaf_count - n_clusters)

    def level(self, k: int) -> GroupStructure:
        """Partition after ``k`` merges; level 0 is the leaves."""
        return GroupStructure.from_labels(self.labels_after(k))

    def to_json(self) -> str:
        return json.dumps([{"left": int(a), "right": int(b), "height": float(h)}
                           for a, b, h in self.merges])

    @classmethod
    def from_json(cls, text: str, method: str = "ward", metric: str = EUCLIDEAN) -> "Hierarchy":
        rows = json.loads(text)
        return cls([r["left"] for r in rows], [r["right"] for r in rows],
                   [r["height"] for r in rows], len(rows) + 1, method, metric)


def dissimilarity(values: np.ndarray, metric: str = EUCLIDEAN) -> np.ndarray:
    """Pairwise column dissimilarity matrix."""
    x = np.asarray(values, dtype=float)
    if metric == EUCLIDEAN:
        return squareform(pdist(x.T, "sqeuclidean"))
    if metric == ONE_MINUS_R2:
        xc = x - x.mean(axis=0)
        norms = np.sqrt((xc * xc).sum(axis=0))
        safe = np.where(norms > 0, norms, 1.0)
        r = (xc.T @ xc) / np.outer(safe, safe)
        # a constant column is uncorrelated with everything, itself included
        r[norms == 0, :] = 0.0
        r[:, norms == 0] = 0.0
        d = 1.0 - np.clip(r * r, 0.0, 1.0)
        np.fill_diagonal(d, 0.0)
        return d
    raise ConfigError(f"unknown dissimilarity {metric!r}")


@njit
def _ward_kernel(delta):
    d = delta.shape[0]
    dist = delta * 0.5
    size = np.ones(d)
    node = np.arange(d)
    alive = np.ones(d, dtype=np.bool_)
    left = np.empty(d - 1, dtype=np.int64)
    right = np.empty(d - 1, dtype=np.int64)
    cost = np.empty(d - 1)
    for step in range(d - 1):
        best = np.inf
        bi = -1
        bj = -1
        for i in range(d):
            if not alive[i]:
                continue
            for j in range(i + 1, d):
                if alive[j] and dist[i, j] < best:
                    best = dist[i, j]
                    bi = i
                    bj = j
        left[step] = node[bi]
        right[step] = node[bj]
        cost[step] = best
        ni = size[bi]
        nj = size[bj]
        for k in range(d):
            if alive[k] and k != bi and k != bj:
                nk = size[k]
                v = ((ni + nk) * dist[bi, k] + (nj + nk) * dist[bj, k] - nk * best) / (ni + nj + nk)
                dist[bi, k] = v
                dist[k, bi] = v
        alive[bj] = False
        size[bi] = ni + nj
        node[bi] = d + step
    return left, right, cost


def _ward_numpy(delta):
    d = delta.shape[0]
    dist = delta * 0.5
    upper = np.triu(np.ones((d, d), dtype=bool), 1)
    work = np.where(upper, dist, np.inf)
    size = np.ones(d)
    node = np.arange(d)
    alive = np.ones(d, dtype=bool)
    left = np.empty(d - 1, dtype=np.int64)
    right = np.empty(d - 1, dtype=np.int64)
    cost = np.empty(d - 1)
    for step in range(d - 1):
        flat = int(np.argmin(work))
        bi, bj = divmod(flat, d)
        best = work[bi, bj]
        left[step], right[step], cost[step] = node[bi], node[bj], best
        ni, nj = size[bi], size[bj]
        others = alive.copy()
        others[[bi, bj]] = False
        nk = size[others]
        new = ((ni + nk) * dist[bi, others] + (nj + nk) * dist[bj, others] - nk * best) / (ni + nj + nk)
        dist[bi, others] = new
        dist[others, bi] = new
        alive[bj] = False
        size[bi] = ni + nj
        node[bi] = d + step
        work[bj, :] = np.inf
        work[:, bj] = np.inf
        idx = np.flatnonzero(others)
        lo = idx[idx < bi]
        hi = idx[idx > bi]
        work[lo, bi] = dist[lo, bi]
        work[bi, hi] = dist[bi, hi]
    return left, right, cost


@njit
def _block_sums(delta):
    d = delta.shape[0]
    s = np.zeros((d + 1, d + 1))
    for i in range(d):
        for j in range(d):
            s[i + 1, j + 1] = delta[i, j] + s[i, j + 1] + s[i + 1, j] - s[i, j]
    return s


@njit
def _interval_ess(s, a, b):
    # ESS of leaves a..b-1
    tot = s[b, b] - s[a, b] - s[b, a] + s[a, a]
    return tot / (2.0 * (b - a))


@njit
def _constrained_kernel(delta):
    d = delta.shape[0]
    s = _block_sums(delta)
    # cluster slot i covers leaves start[i]..stop[i]-1; slots stay in leaf order
    start = np.arange(d)
    stop = np.arange(1, d + 1)
    node = np.arange(d)
    ess = np.zeros(d)
    pair = np.empty(d - 1)
    for i in range(d - 1):
        pair[i] = _interval_ess(s, i, i + 2)
    left = np.empty(d - 1, dtype=np.int64)
    right = np.empty(d - 1, dtype=np.int64)
    cost = np.empty(d - 1)
    n = d
    for step in range(d - 1):
        best = np.inf
        bi = -1
        for i in range(n - 1):
            c = pair[i] - ess[i] - ess[i + 1]
            if c < best:
                best = c
                bi = i
        left[step] = node[bi]
        right[step] = node[bi + 1]
        cost[step] = best
        merged = pair[bi]
        stop[bi] = stop[bi + 1]
        node[bi] = d + step
        ess[bi] = merged
        for i in range(bi + 1, n - 1):
            start[i] = start[i + 1]
            stop[i] = stop[i + 1]
            node[i] = node[i + 1]
            ess[i] = ess[i + 1]
        for i in range(bi + 1, n - 2):
            pair[i] = pair[i + 1]
        n -= 1
        if bi > 0:
            pair[bi - 1] = _interval_ess(s, start[bi - 1], stop[bi])
        if bi < n - 1:
            pair[bi] = _interval_ess(s, start[bi], stop[bi + 1])
    return left, right, cost


def _constrained_numpy(delta):
    d = delta.shape[0]
    s = np.zeros((d + 1, d + 1))
    s[1:, 1:] = delta.cumsum(axis=0).cumsum(axis=1)

    def ess(a, b):
        return (s[b, b] - s[a, b] - s[b, a] + s[a, a]) / (2.0 * (b - a))

    bounds = np.arange(d + 1)  # cluster i covers bounds[i]..bounds[i+1]-1
    node = np.arange(d)
    left = np.empty(d - 1, dtype=np.int64)
    right = np.empty(d - 1, dtype=np.int64)
    cost = np.empty(d - 1)
    for step in range(d - 1):
        a, b, c = bounds[:-2], bounds[1:-1], bounds[2:]
        costs = ess(a, c) - ess(a, b) - ess(b, c)
        bi = int(np.argmin(costs))
        left[step], right[step], cost[step] = node[bi], node[bi + 1], costs[bi]
        bounds = np.delete(bounds, bi + 1)
        node = np.delete(node, bi + 1)
        node[bi] = d + step
    return left, right, cost


def _finish(left, right, cost, d, method, metric) -> Hierarchy:
    height = np.maximum.accumulate(np.maximum(cost, 0.0))
    return Hierarchy(left, right, height, d, method, metric, cost=np.asarray(cost, dtype=float))


def ward_from_dissimilarity(delta, method="ward", metric=EUCLIDEAN, use_numba=None) -> Hierarchy:
    delta = np.ascontiguousarray(delta, dtype=float)
    d = delta.shape[0]
    if d < 2:
        raise TooFewVariables("clustering needs at least 2 variables")
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    if method == "constrained":
        kernel = _constrained_kernel if use_numba else _constrained_numpy
    else:
        kernel = _ward_kernel if use_numba else _ward_numpy
    left, right, cost = kernel(delta)
    return _finish(left, right, cost, d, method, metric)


def ward_cluster(x: Dataset | np.ndarray, dissimilarity_metric: str = EUCLIDEAN, use_numba=None) -> Hierarchy:
    """Unconstrained agglomerative Ward clustering of the columns of ``x``."""
    values = x.values if isinstance(x, Dataset) else np.asarray(x, dtype=float)
    if dissimilarity_metric not in _METRICS:
        raise ConfigError(f"unknown dissimilarity {dissimilarity_metric!r}")
    if values.shape[1] < 2:
        raise TooFewVariables("clustering needs at least 2 variables")
    return ward_from_dissimilarity(dissimilarity(values, dissimilarity_metric),
                                   "ward", dissimilarity_metric, use_numba)


def constrained_ward_cluster(x: Dataset | np.ndarray, dissimilarity_metric: str = ONE_MINUS_R2,
                             use_numba=None) -> Hierarchy:
    """Ward clustering where only neighbouring intervals of columns may merge.

    Columns are taken in their given (chromosomal) order, so every cluster
    at every level is a contiguous run of columns.  The default
    dissimilarity ``1 - r^2`` stands in for linkage disequilibrium.
    """
    values = x.values if isinstance(x, Dataset) else np.asarray(x, dtype=float)
    if values.shape[1] < 2:
        raise TooFewVariables("clustering needs at least 2 variables")
    return ward_from_dissimilarity(dissimilarity(values, dissimilarity_metric),
                                   "constrained", dissimilarity_metric, use_numba)


def _cluster_like(values, h: Hierarchy) -> Hierarchy:
    if h.method == "constrained":
        return constrained_ward_cluster(values, h.metric)
    return ward_cluster(values, h.metric)


def _log_dispersions(values, h: Hierarchy, ks) -> np.ndarray:
    """log of the pooled within-cluster sum of squares of the tree cut at each k."""
    x = np.asarray(values, dtype=float)
    out = np.empty(len(ks))
    for t, k in enumerate(ks):
        labels = h.cut(k)
        w = 0.0
        for lab in range(k):
            cols = x[:, labels == lab]
            if cols.shape[1] > 1:
                w += float(((cols - cols.mean(axis=1, keepdims=True)) ** 2).sum())
        out[t] = np.log(max(w, 1e-300))
    return out


def gap_statistic(x: Dataset | np.ndarray, h: Hierarchy, k_max: int, n_ref: int = 20, seed=0):
    """Gap values and their standard errors for k = 1..k_max (+1 when possible).

    The variables (columns) are the points being clustered; reference sets
    are drawn uniformly over the bounding box of those points and clustered
    the same way as ``h``.
    """
    values = x.values if isinstance(x, Dataset) else np.asarray(x, dtype=float)
    d = values.shape[1]
    ks = list(range(1, min(k_max + 1, d) + 1))
    rng = np.random.default_rng(seed)
    lo = values.min(axis=1, keepdims=True)
    hi = values.max(axis=1, keepdims=True)
    obs = _log_dispersions(values, h, ks)
    ref = np.empty((n_ref, len(ks)))
    for b in range(n_ref):
        sample = lo + (hi - lo) * rng.random(values.shape)
        ref[b] = _log_dispersions(sample, _cluster_like(sample, h), ks)
    gap = ref.mean(axis=0) - obs
    sk = ref.std(axis=0) * np.sqrt(1.0 + 1.0 / n_ref)
    return np.asarray(ks), gap, sk


def gap_statistic_cut(x: Dataset | np.ndarray, h: Hierarchy, k_max: int, n_ref: int = 20, seed=0) -> int:
    """Smallest k with ``Gap(k) >= Gap(k+1) - s_{k+1}``; ``k_max`` if none."""
    if k_max < 1 or k_max > h.leaf_count:
        raise ConfigError("k_max must lie in 1..D")
    if n_ref < 1:
        raise ConfigError("n_ref must be >= 1")
    if k_max == 1:
        return 1
    ks, gap, sk = gap_statistic(x, h, k_max, n_ref, seed)
    for t in range(len(ks) - 1):
        if ks[t] >= k_max:
            break
        if gap[t] >= gap[t + 1] - sk[t + 1]:
            return int(ks[t])
    return int(k_max)
