"""Compositional transforms, zero handling, standardization and screening."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroRow, ConfigError, DataError, NonPositiveEntry
from .model import Dataset, Response


@dataclass(frozen=True)
class ClrConfig:
    """Zero handling for count data.

    ``pseudocount`` adds a constant to every count before closure.
    ``multiplicative`` closes first, then replaces zeros by
    ``delta = pseudocount / row_total`` and shrinks the nonzero parts so the
    row still sums to one.
    """

    zero_replacement: str = "pseudocount"
    pseudocount: float = 0.5

    def __post_init__(self):
        if self.zero_replacement not in ("pseudocount", "multiplicative"):
            raise ConfigError(f"unknown zero replacement {self.zero_replacement!r}")
        if not self.pseudocount > 0:
            raise ConfigError("pseudocount must be > 0")


def counts_to_proportions(counts, cfg: ClrConfig | None = None) -> np.ndarray:
    """Close each row of a count matrix to proportions after zero replacement."""
    cfg = cfg or ClrConfig()
    x = np.asarray(counts, dtype=float)
    if x.ndim != 2:
        raise DataError("counts must be a 2-D matrix")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DataError("counts must be finite and nonnegative")
    totals = x.sum(axis=1)
    empty = np.flatnonzero(totals <= 0)
    if empty.size:
        raise AllZeroRow(int(empty[0]))
    if cfg.zero_replacement == "pseudocount":
        x = x + cfg.pseudocount
        return x / x.sum(axis=1, keepdims=True)
    p = x / totals[:, None]
    delta = cfg.pseudocount / totals
    zeros = p == 0
    nz = zeros.sum(axis=1)
    shrink = 1.0 - nz * delta
    if np.any(shrink <= 0):
        raise DataError("multiplicative replacement would leave no mass for nonzero parts")
    return np.where(zeros, delta[:, None], p * shrink[:, None])


def clr_transform(props) -> np.ndarray:
    """Centered log-ratio: ``log p_ij`` minus the row mean of ``log p_i.``."""
    p = np.asarray(props, dtype=float)
    bad = np.argwhere(~(p > 0))
    if bad.size:
        i, j = bad[0]
        raise NonPositiveEntry(int(i), int(j))
    lp = np.log(p)
    return lp - lp.mean(axis=1, keepdims=True)


def clr_counts(counts, cfg: ClrConfig | None = None) -> np.ndarray:
    return clr_transform(counts_to_proportions(counts, cfg))


@dataclass(frozen=True)
class Standardized:
    data: Dataset
    means: np.ndarray
    sds: np.ndarray
    constant: np.ndarray


def standardize(x: Dataset, tol: float = 1e-12) -> Standardized:
    """Center columns and scale to unit sample standard deviation.

    Columns whose spread is below ``tol`` (relative to their magnitude) are
    set to zero and flagged in ``constant``.
    """
    v = x.values
    n = v.shape[0]
    means = v.mean(axis=0)
    centered = v - means
    sds = centered.std(axis=0, ddof=1) if n > 1 else np.zeros(v.shape[1])
    scale = np.maximum(np.abs(means), 1.0)
    constant = sds <= tol * scale
    safe = np.where(constant, 1.0, sds)
    z = np.where(constant, 0.0, centered / safe)
    return Standardized(x.with_values(z), means, np.where(constant, 0.0, sds), constant)


def screen_single_effects(x: Dataset, y: Response, keep_fraction: float = 1.0) -> np.ndarray:
    """Indices of the ``ceil(keep_fraction * D)`` columns most correlated with ``y``.

    Ranking is by absolute Pearson correlation; ties go to the lower index.
    Returned indices are sorted ascending.
    """
    if not 0 < keep_fraction <= 1:
        raise ConfigError("keep_fraction must lie in (0, 1]")
    d = x.n_variables
    k = min(d, math.ceil(keep_fraction * d - 1e-12))
    if k >= d:
        return np.arange(d)
    v = x.values - x.values.mean(axis=0)
    yc = y.y - y.y.mean()
    norms = np.sqrt((v * v).sum(axis=0)) * math.sqrt(float(yc @ yc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(norms > 0, np.abs(v.T @ yc) / np.where(norms > 0, norms, 1.0), 0.0)
    order = np.lexsort((np.arange(d), -r))
    return np.sort(order[:k])
