"""Synthetic paired views and interaction phenotypes.

All draws come from numpy's PCG64 generator (``numpy.random.default_rng``)
in a fixed order, so a seed reproduces the same data bit for bit on one
build.  Independent components of a scenario get independent child streams
spawned from one ``SeedSequence``.

Genotypes: each block of adjacent SNPs shares one exchangeable latent
Gaussian correlation and one minor allele frequency.  A haplotype carries
the minor allele where its latent value falls below the ``maf`` quantile; a
genotype is the sum of two independent haplotypes, giving values in
{0, 1, 2}.

Counts: latent ``Z_i ~ N(0, Sigma)`` with block-exchangeable ``Sigma`` and
``X_ij | Z_ij ~ Poisson(exp(mu_j + Z_ij))``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .compress import SuperVariableSet, compress, groups_from_partition
from .errors import ConfigError, InsufficientGroups
from .model import Dataset, GroupStructure, Response, VariableInteractionMatrix
from .preprocess import clr_counts


def _ordered(lo_hi, name, low=0.0, high=1.0, closed_high=False):
    lo, hi = lo_hi
    ok_hi = hi <= high if closed_high else hi < high
    if not (low <= lo <= hi and ok_hi):
        raise ConfigError(f"{name} must satisfy {low} <= low <= high < {high}")


@dataclass(frozen=True)
class SnpSimConfig:
    n_samples: int = 100
    n_variables: int = 200
    n_blocks: int = 16
    within_block_corr_range: tuple = (0.6, 0.95)
    maf_range: tuple = (0.05, 0.5)
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        _ordered(self.within_block_corr_range, "within_block_corr_range")
        _ordered(self.maf_range, "maf_range", 0.0, 0.5, closed_high=True)
        if not 1 <= self.n_blocks <= self.n_variables:
            raise ConfigError("need 1 <= n_blocks <= n_variables")


@dataclass(frozen=True)
class PlnSimConfig:
    n_samples: int = 100
    n_variables: int = 100
    n_blocks: int = 6
    corr_range: tuple = (0.5, 0.95)
    mu: float | np.ndarray | None = None
    mu_range: tuple = (1.0, 3.0)
    latent_sd: float = 1.0
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        _ordered(self.corr_range, "corr_range")
        if not 1 <= self.n_blocks <= self.n_variables:
            raise ConfigError("need 1 <= n_blocks <= n_variables")
        if self.latent_sd < 0:
            raise ConfigError("latent_sd must be >= 0")


@dataclass(frozen=True)
class PhenotypeSimConfig:
    n_interactions: int = 5
    noise_sd: float = 0.5
    effect_range: tuple = (0.5, 1.5)
    main_effects: bool = True
    null: bool = False
    standardize: bool = True
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if self.n_interactions < 1:
            raise ConfigError("n_interactions must be >= 1")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")


def block_sizes(rng, d: int, n_blocks: int, min_size: int = 2) -> np.ndarray:
    """Random sizes of ``n_blocks`` contiguous blocks covering ``d`` columns."""
    floor = min_size if n_blocks * min_size <= d else 1
    extra = d - floor * n_blocks
    shares = rng.dirichlet(np.full(n_blocks, 2.0))
    sizes = floor + rng.multinomial(extra, shares)
    return sizes


def _labels(sizes) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def _exchangeable(rng, n, size, rho, sd=1.0):
    common = rng.standard_normal(n)[:, None]
    own = rng.standard_normal((n, size))
    return sd * (np.sqrt(rho) * common + np.sqrt(1.0 - rho) * own)


def simulate_snp_matrix(cfg: SnpSimConfig):
    """Genotype-like matrix and its true block partition.

    Draw order: block sizes, block correlations, per-block minor allele
    frequencies, then for each block the two haplotypes' latent values.
    """
    rng = np.random.default_rng(cfg.seed)
    sizes = block_sizes(rng, cfg.n_variables, cfg.n_blocks)
    rho = rng.uniform(*cfg.within_block_corr_range, size=cfg.n_blocks)
    maf = rng.uniform(*cfg.maf_range, size=cfg.n_blocks)
    cut = np.repeat(ndtri(maf), sizes)
    x = np.empty((cfg.n_samples, cfg.n_variables))
    start = 0
    for b, size in enumerate(sizes):
        sl = slice(start, start + size)
        h1 = _exchangeable(rng, cfg.n_samples, size, rho[b]) < cut[sl]
        h2 = _exchangeable(rng, cfg.n_samples, size, rho[b]) < cut[sl]
        x[:, sl] = h1.astype(float) + h2
        start += size
    names = [f"SNP{j + 1}" for j in range(cfg.n_variables)]
    return Dataset(x, names), GroupStructure.from_labels(_labels(sizes))


def simulate_pln_matrix(cfg: PlnSimConfig):
    """Poisson-log-normal count matrix and its true block partition.

    Draw order: block sizes, block correlations, ``mu`` (when not given),
    latent block values, then the Poisson counts.
    """
    rng = np.random.default_rng(cfg.seed)
    sizes = block_sizes(rng, cfg.n_variables, cfg.n_blocks)
    rho = rng.uniform(*cfg.corr_range, size=cfg.n_blocks)
    if cfg.mu is None:
        mu = rng.uniform(*cfg.mu_range, size=cfg.n_variables)
    else:
        mu = np.broadcast_to(np.asarray(cfg.mu, dtype=float), (cfg.n_variables,))
    z = np.empty((cfg.n_samples, cfg.n_variables))
    start = 0
    for b, size in enumerate(sizes):
        z[:, start:start + size] = _exchangeable(rng, cfg.n_samples, size, rho[b], cfg.latent_sd)
        start += size
    counts = rng.poisson(np.exp(mu + z)).astype(float)
    names = [f"OTU{j + 1}" for j in range(cfg.n_variables)]
    return Dataset(counts, names), GroupStructure.from_labels(_labels(sizes))


@dataclass
class PhenotypeTruth:
    pairs: list  # (g, m, theta)
    beta_G: dict
    beta_M: dict
    theta: VariableInteractionMatrix
    gs_G: GroupStructure
    gs_M: GroupStructure

    def to_dict(self, names_G=None, names_M=None):
        def members(gs, k, names):
            mem = gs.groups[k]
            return [names[j] for j in mem] if names is not None else list(mem)

        return {
            "blocks_G": [list(g) for g in self.gs_G.groups],
            "blocks_M": [list(m) for m in self.gs_M.groups],
            "interactions": [
                {"g": g, "m": m, "theta": t,
                 "members_G": members(self.gs_G, g, names_G),
                 "members_M": members(self.gs_M, m, names_M)}
                for g, m, t in self.pairs
            ],
            "beta_G": {str(k): v for k, v in self.beta_G.items()},
            "beta_M": {str(k): v for k, v in self.beta_M.items()},
        }


def _effects(rng, k, lo_hi):
    return rng.choice([-1.0, 1.0], size=k) * rng.uniform(*lo_hi, size=k)


def _std(cols):
    c = cols - cols.mean(axis=0)
    sd = c.std(axis=0)
    return c / np.where(sd > 0, sd, 1.0)


def simulate_phenotype(svG: SuperVariableSet, svM: SuperVariableSet, cfg: PhenotypeSimConfig):
    """Response from the compact interaction model and its variable-level truth.

    ``I`` distinct pairs ``(g, m)`` interact; their groups form the main
    effect sets.  Effects are ``+-U(effect_range)``.  With ``null`` the
    interaction coefficients are zero (main effects stay).
    Draw order: pairs, main effects of G, main effects of M, interactions,
    noise.
    """
    rng = np.random.default_rng(cfg.seed)
    ng, nm = svG.n_groups, svM.n_groups
    if cfg.n_interactions > ng * nm:
        raise InsufficientGroups(f"{cfg.n_interactions} interactions need more than {ng}x{nm} groups")
    flat = rng.choice(ng * nm, size=cfg.n_interactions, replace=False)
    pairs = [(int(f // nm), int(f % nm)) for f in flat]
    set_G = sorted({g for g, _ in pairs})
    set_M = sorted({m for _, m in pairs})
    bg = _effects(rng, len(set_G), cfg.effect_range)
    bm = _effects(rng, len(set_M), cfg.effect_range)
    th = _effects(rng, len(pairs), cfg.effect_range)
    if not cfg.main_effects:
        bg[:] = 0.0
        bm[:] = 0.0
    if cfg.null:
        th[:] = 0.0
    xg = _std(svG.columns) if cfg.standardize else svG.columns
    xm = _std(svM.columns) if cfg.standardize else svM.columns
    n = xg.shape[0]
    y = np.zeros(n)
    y += xg[:, set_G] @ bg + xm[:, set_M] @ bm
    for (g, m), t in zip(pairs, th):
        y += t * xg[:, g] * xm[:, m]
    y += cfg.noise_sd * rng.standard_normal(n)
    gs_G, gs_M = svG.groups.structure(), svM.groups.structure()
    theta = np.zeros((gs_G.n_variables, gs_M.n_variables))
    for (g, m), t in zip(pairs, th):
        if t != 0:
            theta[np.ix_(gs_G.groups[g], gs_M.groups[m])] = t
    truth = PhenotypeTruth([(g, m, float(t)) for (g, m), t in zip(pairs, th)],
                           dict(zip(set_G, bg.tolist())), dict(zip(set_M, bm.tolist())),
                           VariableInteractionMatrix(theta), gs_G, gs_M)
    return Response(y), truth


@dataclass
class Scenario:
    x_G: Dataset
    x_M: Dataset
    y: Response
    truth: PhenotypeTruth
    params: dict = field(default_factory=dict)

    def truth_json(self) -> str:
        out = self.truth.to_dict(self.x_G.variable_names, self.x_M.variable_names)
        out["params"] = self.params
        return json.dumps(out, indent=1)


def simulate_scenario(n_samples=100, noise_sd=0.5, n_interactions=5, seed=0, d_G=200, d_M=100,
                      n_blocks_G=16, n_blocks_M=6, null=False, truth_groups="blocks") -> Scenario:
    """One replicate of the simulation study.

    Supervariables for the phenotype are block means of the genotypes and of
    the CLR-transformed counts.  ``truth_groups="gap"`` replaces the true
    genotype blocks by the Gap Statistic cut of the constrained tree.
    """
    ss = np.random.SeedSequence(seed)
    s_g, s_m, s_y, s_gap = ss.spawn(4)
    x_G, gs_G = simulate_snp_matrix(SnpSimConfig(n_samples, d_G, n_blocks_G, seed=s_g))
    x_M, gs_M = simulate_pln_matrix(PlnSimConfig(n_samples, d_M, n_blocks_M, seed=s_m))
    clr_M = clr_counts(x_M.values)
    if truth_groups == "gap":
        from .cluster import constrained_ward_cluster, gap_statistic_cut
        from .preprocess import standardize
        z = standardize(x_G).data
        h = constrained_ward_cluster(z)
        k = gap_statistic_cut(z, h, min(40, d_G), 10, s_gap)
        gs_G = GroupStructure.from_labels(h.cut(k))
    elif truth_groups != "blocks":
        raise ConfigError(f"unknown truth_groups {truth_groups!r}")
    svG = compress(x_G, groups_from_partition(gs_G))
    svM = compress(clr_M, groups_from_partition(gs_M))
    y, truth = simulate_phenotype(svG, svM, PhenotypeSimConfig(n_interactions, noise_sd, null=null, seed=s_y))
    params = {"n_samples": n_samples, "noise_sd": noise_sd, "n_interactions": n_interactions,
              "seed": int(seed), "d_G": d_G, "d_M": d_M, "null": null, "truth_groups": truth_groups}
    return Scenario(x_G, x_M, y, truth, params)
