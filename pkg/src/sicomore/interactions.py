"""Pairwise interaction tests between selected supervariables of two views.

For every selected pair ``(g, m)`` the model

    y = b0 + xg * bg + xm * bm + (xg * xm) * theta + eps

is fitted by least squares and ``theta`` is tested with a two-sided t-test
on ``N - 4`` degrees of freedom.  Raw p-values are then adjusted over the
whole family of testable pairs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .errors import ConfigError, DimensionMismatch, InvalidP, RankDeficient
from .model import GroupStructure, VariableInteractionMatrix, expand_to_variables

RANK_TOL = 1e-10


def t_two_sided_p(t, df):
    """``2 * (1 - F_t(|t|; df))`` through the regularized incomplete beta."""
    t = np.asarray(t, dtype=float)
    return betainc(0.5 * df, 0.5, df / (df + t * t))


def t_cdf(t, df):
    t = np.asarray(t, dtype=float)
    tail = 0.5 * t_two_sided_p(t, df)
    return np.where(t >= 0, 1.0 - tail, tail)


def pair_design(xg, xm) -> np.ndarray:
    xg = np.asarray(xg, dtype=float).ravel()
    xm = np.asarray(xm, dtype=float).ravel()
    return np.column_stack([np.ones_like(xg), xg, xm, xg * xm])


@dataclass(frozen=True)
class PairFit:
    coef: np.ndarray  # intercept, beta_g, beta_m, theta
    se: np.ndarray
    t_stat: float
    df: int
    p_raw: float

    @property
    def theta(self) -> float:
        return float(self.coef[3])


def fit_pair_model(xg, xm, y, g=None, m=None) -> PairFit:
    """OLS fit of the single-pair interaction model and the t-test on theta.

    Raises ``RankDeficient`` when the 4-column design is not of full rank.
    """
    x = pair_design(xg, xm)
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    if y.size != n:
        raise DimensionMismatch("pair response")
    if n < 5:
        raise DimensionMismatch("pair model needs N >= 5")
    u, sv, vt = np.linalg.svd(x, full_matrices=False)
    if sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficient(g, m)
    coef = vt.T @ ((u.T @ y) / sv)
    resid = y - x @ coef
    df = n - 4
    sigma2 = float(resid @ resid) / df
    cov_diag = ((vt.T / sv) ** 2).sum(axis=1)
    se = np.sqrt(sigma2 * cov_diag)
    if se[3] > 0:
        t = coef[3] / se[3]
    else:
        t = np.inf if coef[3] != 0 else 0.0
    p = float(t_two_sided_p(t, df)) if np.isfinite(t) else 0.0
    return PairFit(coef, se, float(t), df, p)


def adjust_pvalues(p, method: str = "holm") -> np.ndarray:
    """Holm step-down or Benjamini-Hochberg step-up adjustment, input order kept."""
    p = np.asarray(p, dtype=float).ravel()
    bad = np.flatnonzero(~((p >= 0) & (p <= 1)))
    if bad.size:
        raise InvalidP(int(bad[0]))
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    ps = p[order]
    if method == "holm":
        adj = np.maximum.accumulate((m - np.arange(m)) * ps)
    elif method == "bh":
        adj = np.minimum.accumulate((m * ps / np.arange(1, m + 1))[::-1])[::-1]
    else:
        raise ConfigError(f"unknown adjustment {method!r}")
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


@dataclass
class PairTestResult:
    g: int
    m: int
    theta_hat: float
    beta_g_hat: float
    beta_m_hat: float
    t_stat: float
    df: int
    p_raw: float
    p_adj: float
    testable: bool = True


@dataclass
class InteractionReport:
    pairs: list
    alpha: float
    method: str
    sel_G: np.ndarray
    sel_M: np.ndarray
    hits_compact: np.ndarray
    hits_variables: VariableInteractionMatrix | None = None
    names_G: list = field(default_factory=list)
    names_M: list = field(default_factory=list)
    members_G: list = field(default_factory=list)
    members_M: list = field(default_factory=list)

    @property
    def n_hits(self) -> int:
        return int(self.hits_compact.sum())

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "correction": self.method,
            "n_tests": sum(p.testable for p in self.pairs),
            "n_hits": self.n_hits,
            "selected_G": [int(v) for v in self.sel_G],
            "selected_M": [int(v) for v in self.sel_M],
            "pairs": [
                {
                    "g": p.g, "m": p.m,
                    "group_G": self.names_G[p.g] if self.names_G else p.g,
                    "group_M": self.names_M[p.m] if self.names_M else p.m,
                    "theta_hat": _num(p.theta_hat), "beta_g_hat": _num(p.beta_g_hat),
                    "beta_m_hat": _num(p.beta_m_hat), "t_stat": _num(p.t_stat),
                    "df": p.df, "p_raw": _num(p.p_raw), "p_adj": _num(p.p_adj),
                    "testable": p.testable,
                    "hit": bool(self.hits_compact[p.g, p.m]),
                }
                for p in self.pairs
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_tsv(self) -> str:
        lines = ["g\tm\tmembers_G\tmembers_M\ttheta_hat\tt_stat\tp_raw\tp_adj\thit"]
        for p in self.pairs:
            mg = ",".join(map(str, self.members_G[p.g])) if self.members_G else ""
            mm = ",".join(map(str, self.members_M[p.m])) if self.members_M else ""
            gname = self.names_G[p.g] if self.names_G else str(p.g)
            mname = self.names_M[p.m] if self.names_M else str(p.m)
            lines.append("\t".join([gname, mname, mg, mm, _fmt(p.theta_hat), _fmt(p.t_stat),
                                    _fmt(p.p_raw), _fmt(p.p_adj), str(int(self.hits_compact[p.g, p.m]))]))
        return "\n".join(lines) + "\n"


def _num(v):
    v = float(v)
    return v if np.isfinite(v) else None


def _fmt(v):
    return "NA" if not np.isfinite(v) else repr(float(v))


def test_all_pairs(xt_G, xt_M, y, alpha: float = 0.05, method: str = "holm",
                   sel_G=None, sel_M=None, gs_G: GroupStructure | None = None,
                   gs_M: GroupStructure | None = None) -> InteractionReport:
    """Test every pair of selected columns of ``xt_G`` and ``xt_M``.

    ``sel_G`` / ``sel_M`` index the selected columns (all columns when
    omitted).  Compact hit indices refer to positions within the selections.
    When group structures for the full column sets are given, hits are also
    expanded to the original variables.
    """
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    xt_G = np.asarray(xt_G, dtype=float)
    xt_M = np.asarray(xt_M, dtype=float)
    y = np.asarray(getattr(y, "y", y), dtype=float)
    sel_G = np.arange(xt_G.shape[1]) if sel_G is None else np.asarray(sel_G, dtype=np.int64)
    sel_M = np.arange(xt_M.shape[1]) if sel_M is None else np.asarray(sel_M, dtype=np.int64)
    pairs = []
    for a, gi in enumerate(sel_G):
        for b, mi in enumerate(sel_M):
            try:
                f = fit_pair_model(xt_G[:, gi], xt_M[:, mi], y, int(gi), int(mi))
            except RankDeficient:
                pairs.append(PairTestResult(a, b, np.nan, np.nan, np.nan, np.nan, len(y) - 4,
                                            np.nan, np.nan, testable=False))
                continue
            pairs.append(PairTestResult(a, b, f.theta, float(f.coef[1]), float(f.coef[2]), f.t_stat,
                                        f.df, f.p_raw, np.nan))
    testable = [p for p in pairs if p.testable]
    adj = adjust_pvalues([p.p_raw for p in testable], method)
    for p, q in zip(testable, adj):
        p.p_adj = float(q)
    hits = np.zeros((sel_G.size, sel_M.size), dtype=bool)
    for p in testable:
        hits[p.g, p.m] = p.p_adj <= alpha
    report = InteractionReport(pairs, alpha, method, sel_G, sel_M, hits)
    if gs_G is not None and gs_M is not None:
        report.hits_variables = expand_selected(hits, sel_G, sel_M, gs_G, gs_M)
    return report


test_all_pairs.__test__ = False


def expand_selected(hits, sel_G, sel_M, gs_G: GroupStructure, gs_M: GroupStructure):
    """Variable-level hits for a hit matrix over selected groups."""
    full = np.zeros((gs_G.group_count, gs_M.group_count), dtype=bool)
    if hits.size:
        full[np.ix_(sel_G, sel_M)] = hits
    return expand_to_variables(full, gs_G, gs_M)
