"""End-to-end interaction detection between two views.

Stages: load -> preprocess -> cluster -> compress -> select -> test -> report.
``fit_sicomore`` runs the method on in-memory data; ``run_pipeline`` adds
file loading, output writing and the run manifest.  ``fit_hcar`` is the
unweighted baseline used in benchmarks.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import platform
import shutil
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _accel
from .cluster import EUCLIDEAN, ONE_MINUS_R2, constrained_ward_cluster, ward_cluster
from .compress import compress, expand_hierarchy, restrict_search_space
from .errors import ConfigError, DataError, SicomoreError, StageError
from .interactions import InteractionReport, test_all_pairs
from .lasso import LassoConfig, LassoFit, weighted_lasso_path
from .model import (Dataset, Response, VariableInteractionMatrix, expand_to_variables, load_dataset,
                    load_response, validate_pairing)
from .preprocess import ClrConfig, clr_counts, screen_single_effects, standardize


@dataclass(frozen=True)
class PipelineConfig:
    x_G: str = ""
    x_M: str = ""
    y: str = ""
    out: str = "out"
    clr: bool = True
    zero_replacement: str = "pseudocount"
    pseudocount: float = 0.5
    screen_keep: float = 1.0
    cluster_G: str = "constrained"
    cluster_M: str = "ward"
    metric_G: str = ONE_MINUS_R2
    metric_M: str = EUCLIDEAN
    summary: str = "mean"
    restrict_factor: float = 5.0
    weighting: str = "gap"
    n_lambda: int = 100
    lambda_min_ratio: float | None = None
    select: str = "cv10"
    tol: float = 1e-6
    max_iter: int = 100_000
    alpha: float = 0.05
    correction: str = "holm"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.correction not in ("holm", "bh"):
            raise ConfigError(f"unknown correction {self.correction!r}")
        if self.weighting not in ("gap", "none"):
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        for name in ("cluster_G", "cluster_M"):
            if getattr(self, name) not in ("constrained", "ward"):
                raise ConfigError(f"{name} must be 'constrained' or 'ward'")
        if self.restrict_factor <= 0:
            raise ConfigError("restrict_factor must be > 0")
        ClrConfig(self.zero_replacement, self.pseudocount)
        LassoConfig(n_lambda=self.n_lambda, tol=self.tol, max_iter=self.max_iter, selection=self.select)

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def load_config(path) -> dict:
    """Read a flat TOML key/value file into a plain dict."""
    import tomli

    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: tables are not supported ({', '.join(nested)})")
    return data


@dataclass
class ViewResult:
    name: str
    kept: np.ndarray  # original column index of each analysed variable
    hierarchy: object
    groups: object
    supervariables: object
    lasso: LassoFit
    constant: np.ndarray


@dataclass
class PipelineResult:
    report: InteractionReport
    view_G: ViewResult
    view_M: ViewResult
    hits: VariableInteractionMatrix
    timings: dict = field(default_factory=dict)


class _Timer:
    def __init__(self):
        self.timings = {}

    def stage(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, exc_type, exc, tb):
                timer.timings[name] = timer.timings.get(name, 0.0) + time.perf_counter() - self.t0
                if exc is not None and not isinstance(exc, StageError):
                    raise StageError(name, exc) from exc
                return False

        return _Ctx()


def _preprocess(view: Dataset, y: Response, is_counts: bool, cfg: PipelineConfig):
    values = view.values
    if is_counts and cfg.clr:
        values = clr_counts(values, ClrConfig(cfg.zero_replacement, cfg.pseudocount))
    data = view.with_values(values)
    std = standardize(data)
    kept = np.arange(view.n_variables)
    if cfg.screen_keep < 1.0:
        kept = screen_single_effects(std.data, y, cfg.screen_keep)
        data = data.subset(kept)
        std = standardize(data)
    return data, std, kept


def _cluster(std: Dataset, method: str, metric: str):
    if method == "constrained":
        return constrained_ward_cluster(std, metric)
    return ward_cluster(std, metric)


def select_view(columns: np.ndarray, y: np.ndarray, rho: np.ndarray | None, cfg: PipelineConfig,
                seed_offset: int = 0) -> tuple[LassoFit, np.ndarray]:
    """Weighted Lasso on standardized supervariables with centered ``y``."""
    mean = columns.mean(axis=0)
    sd = columns.std(axis=0)
    constant = sd <= 1e-12 * np.maximum(np.abs(mean), 1.0)
    z = np.where(constant, 0.0, (columns - mean) / np.where(constant, 1.0, sd))
    yc = y - y.mean()
    lcfg = LassoConfig(n_lambda=cfg.n_lambda, lambda_min_ratio=cfg.lambda_min_ratio,
                       penalty_factors=rho, max_iter=cfg.max_iter, tol=cfg.tol,
                       selection=cfg.select, seed=cfg.seed + seed_offset)
    fit = weighted_lasso_path(z, yc, lcfg)
    fit.intercept = float(y.mean() - (mean / np.where(constant, 1.0, sd)) @ fit.beta)
    return fit, constant


def _view(name, view, y, is_counts, cfg, timer, seed_offset):
    with timer.stage(f"preprocess:view-{name}"):
        data, std, kept = _preprocess(view, y, is_counts, cfg)
    method = cfg.cluster_G if name == "G" else cfg.cluster_M
    metric = cfg.metric_G if name == "G" else cfg.metric_M
    with timer.stage(f"cluster:view-{name}"):
        h = _cluster(std.data, method, metric)
    with timer.stage(f"compress:view-{name}"):
        wgs = restrict_search_space(expand_hierarchy(h), cfg.restrict_factor)
        sv = compress(data, wgs, cfg.summary)
    with timer.stage(f"select:view-{name}"):
        rho = wgs.rho if cfg.weighting == "gap" else None
        fit, constant = select_view(sv.columns, y.y, rho, cfg, seed_offset)
    return ViewResult(name, kept, h, wgs, sv, fit, constant)


def _embed(hits_small: np.ndarray, kept_G, kept_M, d_G, d_M) -> VariableInteractionMatrix:
    full = np.zeros((d_G, d_M), dtype=bool)
    full[np.ix_(kept_G, kept_M)] = hits_small
    return VariableInteractionMatrix(full)


def fit_sicomore(x_G: Dataset, x_M: Dataset, y: Response, cfg: PipelineConfig | None = None,
                 timer: _Timer | None = None) -> PipelineResult:
    """Run the method on in-memory data; ``x_M`` holds raw counts when ``cfg.clr``."""
    cfg = cfg or PipelineConfig()
    timer = timer or _Timer()
    with timer.stage("validate"):
        validate_pairing(x_G, x_M, y)
    vg = _view("G", x_G, y, False, cfg, timer, 0)
    vm = _view("M", x_M, y, True, cfg, timer, 1)
    with timer.stage("test"):
        report = test_all_pairs(vg.supervariables.columns, vm.supervariables.columns, y, cfg.alpha,
                                cfg.correction, vg.lasso.active_set, vm.lasso.active_set,
                                vg.groups.structure(), vm.groups.structure())
        names_G = vg.supervariables.names("G")
        names_M = vm.supervariables.names("M")
        report.names_G = [names_G[i] for i in report.sel_G]
        report.names_M = [names_M[i] for i in report.sel_M]
        report.members_G = [[x_G.variable_names[vg.kept[j]] for j in vg.groups.members[i]] for i in report.sel_G]
        report.members_M = [[x_M.variable_names[vm.kept[j]] for j in vm.groups.members[i]] for i in report.sel_M]
        hits = _embed(report.hits_variables.entries, vg.kept, vm.kept, x_G.n_variables, x_M.n_variables)
    return PipelineResult(report, vg, vm, hits, timer.timings)


def fit_hcar(x_G: Dataset, x_M: Dataset, y: Response, cfg: PipelineConfig | None = None) -> VariableInteractionMatrix:
    """Unweighted hierarchical-clustering-and-averaging baseline.

    Both trees are flattened and averaged without gap weights, each view is
    screened by a plain Lasso, and a final plain Lasso over the retained
    main effects and all their cross-view products decides which
    interactions are kept (nonzero product coefficients).
    """
    cfg = dataclasses.replace(cfg or PipelineConfig(), weighting="none")
    timer = _Timer()
    validate_pairing(x_G, x_M, y)
    vg = _view("G", x_G, y, False, cfg, timer, 0)
    vm = _view("M", x_M, y, True, cfg, timer, 1)
    sel_G, sel_M = vg.lasso.active_set, vm.lasso.active_set
    small = np.zeros((len(vg.groups), len(vm.groups)), dtype=bool)
    if sel_G.size and sel_M.size:
        xg = vg.supervariables.columns[:, sel_G]
        xm = vm.supervariables.columns[:, sel_M]
        prods = (xg[:, :, None] * xm[:, None, :]).reshape(len(y), -1)
        design = np.hstack([xg, xm, prods])
        fit, _ = select_view(design, y.y, None, cfg, seed_offset=2)
        coef = fit.beta[sel_G.size + sel_M.size:].reshape(sel_G.size, sel_M.size)
        small[np.ix_(sel_G, sel_M)] = coef != 0
    hits = expand_to_variables(small, vg.groups.structure(), vm.groups.structure())
    return _embed(hits.entries, vg.kept, vm.kept, x_G.n_variables, x_M.n_variables)


def _versions():
    import numpy
    import scipy

    out = {"sicomore": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
           "scipy": scipy.__version__, "backend": _accel.backend()}
    if _accel.numba is not None:
        out["numba"] = _accel.numba.__version__
    return out


OUTPUT_FILES = ("report.tsv", "report.json", "groups_G.json", "groups_M.json", "manifest.json")


def run_pipeline(cfg: PipelineConfig):
    """Load inputs, run the method and write all outputs under ``cfg.out``.

    Outputs are written to a scratch directory first and moved into place
    only when every stage succeeded.
    """
    t_start = time.perf_counter()
    timer = _Timer()
    with timer.stage("load:view-G"):
        x_G = _load_view(cfg.x_G)
    with timer.stage("load:view-M"):
        x_M = _load_view(cfg.x_M)
    with timer.stage("load:response"):
        y = _load_y(cfg.y)
    result = fit_sicomore(x_G, x_M, y, cfg, timer)
    os.makedirs(cfg.out, exist_ok=True)
    scratch = tempfile.mkdtemp(prefix=".partial-", dir=cfg.out)
    moved = []
    try:
        with timer.stage("report"):
            _write(os.path.join(scratch, "report.tsv"), result.report.to_tsv())
            _write(os.path.join(scratch, "report.json"), result.report.to_json())
            for v, ds in ((result.view_G, x_G), (result.view_M, x_M)):
                names = [ds.variable_names[j] for j in v.kept]
                payload = {"groups": v.groups.to_records(names),
                           "lasso": v.lasso.to_dict(v.supervariables.names(v.name))}
                _write(os.path.join(scratch, f"groups_{v.name}.json"), json.dumps(payload, indent=1))
        manifest = {
            "config": cfg.to_dict(),
            "config_sha256": cfg.digest(),
            "seed": cfg.seed,
            "versions": _versions(),
            "timings": {k: round(v, 6) for k, v in timer.timings.items()},
            "total_seconds": round(time.perf_counter() - t_start, 6),
            "n_hits": result.report.n_hits,
        }
        _write(os.path.join(scratch, "manifest.json"), json.dumps(manifest, indent=1))
        for name in OUTPUT_FILES:
            os.replace(os.path.join(scratch, name), os.path.join(cfg.out, name))
            moved.append(name)
    except BaseException as exc:
        for name in moved:
            os.remove(os.path.join(cfg.out, name))
        if isinstance(exc, SicomoreError) or not isinstance(exc, Exception):
            raise
        raise StageError("report", exc) from exc
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    return result, manifest


def _load_view(path):
    if not path or not os.path.exists(path):
        raise DataError(f"missing file {path!r}")
    return load_dataset(path)


def _load_y(path):
    if not path or not os.path.exists(path):
        raise DataError(f"missing file {path!r}")
    return load_response(path)


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
