"""Scoring against ground truth, the averaged-estimator check and the benchmark harness."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, SingularDesign
from .model import VariableInteractionMatrix


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision_defined(self) -> bool:
        return self.tp + self.fp > 0

    @property
    def recall_defined(self) -> bool:
        return self.tp + self.fn > 0


def _entries(v):
    return np.asarray(v.entries if isinstance(v, VariableInteractionMatrix) else v) != 0


def precision_recall(estimated, truth):
    """``(precision, recall, counts)`` on variable-level hit matrices.

    Precision is NaN when nothing was called (``counts.precision_defined``
    is then False); recall is NaN when the truth is empty.
    """
    e, t = _entries(estimated), _entries(truth)
    if e.shape != t.shape:
        raise DimensionMismatch("estimated vs truth")
    tp = int(np.sum(e & t))
    fp = int(np.sum(e & ~t))
    fn = int(np.sum(~e & t))
    counts = ConfusionCounts(tp, fp, fn, int(e.size - tp - fp - fn))
    precision = tp / (tp + fp) if counts.precision_defined else math.nan
    recall = tp / (tp + fn) if counts.recall_defined else math.nan
    return precision, recall, counts


# --- averaged estimator versus least squares -------------------------------

@dataclass(frozen=True)
class TheoremCheckConfig:
    m: int = 2
    rho: float = 0.5
    beta: tuple = (0.0, 1.0)
    sigma: float = 0.1
    n_mc: int = 5000
    n_samples: int = 200
    seed: int = 0
    exact_gram: bool = False

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError("m must be >= 2")
        if len(self.beta) != self.m:
            raise ConfigError("beta must have length m")
        if not -1.0 / (self.m - 1) < self.rho < 1.0:
            raise ConfigError("rho must lie in (-1/(m-1), 1) for a positive definite correlation")
        if self.sigma < 0 or self.n_mc < 2 or self.n_samples <= self.m:
            raise ConfigError("need sigma >= 0, n_mc >= 2 and n_samples > m")


@dataclass(frozen=True)
class TheoremCheckResult:
    mse_ols: float
    mse_averaged: float
    predicted_threshold: float
    analytic_difference: float
    mc_difference: float
    mc_se: float

    def to_dict(self):
        return asdict(self)


def gain_threshold(beta, sigma: float) -> float:
    """Correlation above which averaging beats least squares (``-inf`` if always)."""
    beta = np.asarray(beta, dtype=float)
    spread = float(np.sum((beta - beta.mean()) ** 2)) / (beta.size - 1)
    if spread == 0:
        return -math.inf
    return 1.0 - sigma ** 2 / spread


def analytic_difference(beta, sigma: float, rho: float) -> float:
    """Expected ``mse_averaged - mse_ols`` for a unit-diagonal equicorrelated Gram."""
    beta = np.asarray(beta, dtype=float)
    return -sigma ** 2 * (beta.size - 1) / (1.0 - rho) + float(np.sum((beta - beta.mean()) ** 2))


def _designs(rng, cfg: TheoremCheckConfig) -> np.ndarray:
    m, n = cfg.m, cfg.n_samples
    corr = np.full((m, m), cfg.rho)
    np.fill_diagonal(corr, 1.0)
    chol = np.linalg.cholesky(corr)
    z = rng.standard_normal((cfg.n_mc, n, m))
    if cfg.exact_gram:
        z -= z.mean(axis=1, keepdims=True)
        q, _ = np.linalg.qr(z)
        return q @ chol.T
    x = z @ chol.T
    x -= x.mean(axis=1, keepdims=True)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def averaged_estimator_gain(cfg: TheoremCheckConfig) -> TheoremCheckResult:
    """Monte-Carlo risk of least squares and of its group-averaged version.

    Columns are centered and scaled to unit norm, so the Gram matrix has a
    unit diagonal.  The averaged estimator replaces every coefficient by
    the mean of the least-squares coefficients.
    """
    rng = np.random.default_rng(cfg.seed)
    beta = np.asarray(cfg.beta, dtype=float)
    x = _designs(rng, cfg)
    gram = np.swapaxes(x, 1, 2) @ x
    cond = np.linalg.cond(gram)
    if not np.all(np.isfinite(cond)) or cond.max() > 1e12:
        raise SingularDesign("empirical Gram matrix is numerically singular")
    y = x @ beta + cfg.sigma * rng.standard_normal((cfg.n_mc, cfg.n_samples))
    b_ols = np.linalg.solve(gram, np.einsum("rnm,rn->rm", x, y)[..., None])[..., 0]
    b_avg = np.repeat(b_ols.mean(axis=1, keepdims=True), cfg.m, axis=1)
    loss_ols = np.sum((b_ols - beta) ** 2, axis=1)
    loss_avg = np.sum((b_avg - beta) ** 2, axis=1)
    diff = loss_avg - loss_ols
    return TheoremCheckResult(
        float(loss_ols.mean()), float(loss_avg.mean()), gain_threshold(beta, cfg.sigma),
        analytic_difference(beta, cfg.sigma, cfg.rho), float(diff.mean()),
        float(diff.std(ddof=1) / math.sqrt(cfg.n_mc)),
    )


# --- benchmark ---------------------------------------------------------------

METHODS = ("sicomore", "hcar")
BENCH_COLUMNS = ("N", "sigma", "I", "method", "rep", "precision", "recall", "seconds")


@dataclass(frozen=True)
class BenchmarkRow:
    N: int
    sigma: float
    I: int
    method: str
    rep: int
    precision: float
    recall: float
    seconds: float
    seed: int


def _one_cell(args):
    from .pipeline import PipelineConfig, fit_hcar, fit_sicomore
    from .simulate import simulate_scenario

    n, sigma, n_int, rep, seed, methods, d_G, d_M, cfg_dict = args
    sc = simulate_scenario(n, sigma, n_int, seed=seed, d_G=d_G, d_M=d_M)
    cfg = PipelineConfig(**cfg_dict)
    rows = []
    for method in methods:
        t0 = time.perf_counter()
        if method == "sicomore":
            hits = fit_sicomore(sc.x_G, sc.x_M, sc.y, cfg).hits
        else:
            hits = fit_hcar(sc.x_G, sc.x_M, sc.y, cfg)
        sec = time.perf_counter() - t0
        p, r, _ = precision_recall(hits, sc.truth.theta)
        rows.append(BenchmarkRow(n, sigma, n_int, method, rep, p, r, sec, seed))
    return rows


def run_benchmark(Ns=(100,), sigmas=(0.5,), Is=(5,), methods=METHODS, n_reps: int = 10, seed: int = 0,
                  d_G: int = 200, d_M: int = 100, config=None, threads: int = 1) -> list[BenchmarkRow]:
    """Simulate and score every (N, sigma, I) cell ``n_reps`` times per method.

    Replicate ``r`` uses scenario seed ``seed ^ r`` in every cell.  Rows
    come back sorted by (cell, method, replicate) whatever ``threads`` is.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ConfigError(f"unknown methods: {sorted(unknown)}")
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    cfg_dict = (config.to_dict() if config is not None else {})
    jobs = [(int(n), float(s), int(i), rep, seed ^ rep, tuple(methods), d_G, d_M, cfg_dict)
            for n in Ns for s in sigmas for i in Is for rep in range(n_reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_one_cell, jobs))
    else:
        chunks = [_one_cell(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    order = {m: k for k, m in enumerate(methods)}
    rows.sort(key=lambda r: (r.N, r.sigma, r.I, order[r.method], r.rep))
    return rows


def _cell(v):
    return "NA" if isinstance(v, float) and math.isnan(v) else repr(v)


def benchmark_tsv(rows) -> str:
    lines = ["\t".join(BENCH_COLUMNS)]
    for r in rows:
        lines.append("\t".join(_cell(getattr(r, c)) if c not in ("method",) else r.method for c in BENCH_COLUMNS))
    return "\n".join(lines) + "\n"


def benchmark_summary(rows) -> dict:
    """Medians per (cell, method); undefined precisions are counted, not averaged in."""
    groups = {}
    for r in rows:
        groups.setdefault((r.N, r.sigma, r.I, r.method), []).append(r)
    cells = []
    for (n, s, i, method), rs in groups.items():
        prec = np.array([r.precision for r in rs])
        rec = np.array([r.recall for r in rs])
        cells.append({
            "N": n, "sigma": s, "I": i, "method": method, "n_reps": len(rs),
            "median_precision": _nanmedian(prec), "precision_undefined": int(np.isnan(prec).sum()),
            "median_recall": _nanmedian(rec),
            "median_seconds": float(np.median([r.seconds for r in rs])),
        })
    return {"cells": cells}


def _nanmedian(v):
    v = v[~np.isnan(v)]
    return float(np.median(v)) if v.size else None


def write_benchmark(rows, tsv_path, json_path):
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write(benchmark_tsv(rows))
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(benchmark_summary(rows), fh, indent=1)
