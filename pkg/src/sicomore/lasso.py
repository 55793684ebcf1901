"""Weighted Lasso by cyclic coordinate descent over a decreasing lambda path.

For each lambda the solver minimises

    1/(2N) * ||y - X beta||^2 + lambda * sum_j rho_j |beta_j|

so a solution satisfies, with ``g_j = x_j' r / N``,

    |g_j| <= lambda rho_j              if beta_j == 0
    g_j == sign(beta_j) lambda rho_j   otherwise.

A sweep over all coordinates is followed by sweeps over the nonzero ones
until they settle.  If the KKT residual is still above ``tol`` the
sign-restricted normal equations of the current active set are solved
directly and the result is kept when its signs agree; this finishes the
badly conditioned end of the path in one step instead of hundreds of
sweeps.  Each lambda is warm-started from the previous solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from ._accel import njit
from .errors import ConfigError, DimensionMismatch, NoConvergence, NonFiniteInput


# auto paths stop once this fraction of the sum of squares is explained
DEV_MAX = 0.999


@dataclass(frozen=True)
class LassoConfig:
    lambdas: tuple | None = None
    n_lambda: int = 100
    lambda_min_ratio: float | None = None
    penalty_factors: np.ndarray | None = None
    max_iter: int = 100_000
    tol: float = 1e-6
    selection: str = "cv10"
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")
        if self.n_lambda < 1 or self.max_iter < 1:
            raise ConfigError("n_lambda and max_iter must be >= 1")
        parse_rule(self.selection)


@dataclass
class LassoFit:
    beta: np.ndarray
    active_set: np.ndarray
    lambda_selected: float
    lambdas: np.ndarray
    path: np.ndarray
    objective: float
    selected_index: int = 0
    n_iter: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    intercept: float = 0.0
    scores: np.ndarray | None = None
    rule: str = ""

    def to_dict(self, names=None):
        act = self.active_set.tolist()
        return {
            "lambda_selected": float(self.lambda_selected),
            "rule": self.rule,
            "active_set": act,
            "active_names": [names[j] for j in act] if names is not None else None,
            "coefficients": [float(self.beta[j]) for j in act],
            "intercept": float(self.intercept),
            "objective": float(self.objective),
        }


def parse_rule(rule: str):
    rule = rule.lower()
    if rule == "bic":
        return "bic", 0
    if rule.startswith("cv"):
        k = int(rule[2:] or 10)
        if k < 2:
            raise ConfigError("cross-validation needs at least 2 folds")
        return "cv", k
    raise ConfigError(f"unknown selection rule {rule!r}")


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def objective(x, y, beta, lam, pf) -> float:
    r = y - x @ beta
    return float(r @ r) / (2 * len(y)) + lam * float(np.sum(pf * np.abs(beta)))


def kkt_residual(x, y, beta, lam, pf) -> float:
    """Largest violation of the optimality conditions at ``beta``."""
    n = len(y)
    g = x.T @ (y - x @ beta) / n
    t = lam * pf
    viol = np.where(beta != 0, np.abs(g - np.sign(beta) * t), np.maximum(np.abs(g) - t, 0.0))
    return float(viol.max(initial=0.0))


def lambda_max(x, y, pf) -> float:
    n = len(y)
    return float(np.max(np.abs(x.T @ y) / (n * pf), initial=0.0))


@njit
def _kkt_nb(x, r, beta, lam, pf, n):
    worst = 0.0
    for j in range(x.shape[1]):
        g = 0.0
        for i in range(n):
            g += x[i, j] * r[i]
        g /= n
        t = lam * pf[j]
        if beta[j] != 0.0:
            v = abs(g - t) if beta[j] > 0 else abs(g + t)
        else:
            v = abs(g) - t
        if v > worst:
            worst = v
    return worst


@njit
def _update_nb(x, r, beta, colsq, lam, pf, j, n):
    if colsq[j] == 0.0:
        return 0.0
    g = 0.0
    for i in range(n):
        g += x[i, j] * r[i]
    z = g / n + colsq[j] * beta[j]
    t = lam * pf[j]
    if z > t:
        new = (z - t) / colsq[j]
    elif z < -t:
        new = (z + t) / colsq[j]
    else:
        new = 0.0
    delta = new - beta[j]
    if delta != 0.0:
        for i in range(n):
            r[i] -= x[i, j] * delta
        beta[j] = new
    return abs(delta) * np.sqrt(colsq[j])


@njit
def _polish_nb(x, y, r, beta, lam, pf, n):
    # exact solve on the current active set and signs; kept only if signs hold
    act = np.flatnonzero(beta)
    k = act.size
    if k == 0 or k >= n:
        return False
    xa = np.empty((n, k))
    for c in range(k):
        xa[:, c] = x[:, act[c]]
    rhs = xa.T @ y
    for c in range(k):
        rhs[c] -= n * lam * pf[act[c]] * np.sign(beta[act[c]])
    sol, _, rank, _ = np.linalg.lstsq(xa.T @ xa, rhs, 1e-12)
    if rank < k:
        return False
    for c in range(k):
        if np.sign(sol[c]) != np.sign(beta[act[c]]):
            return False
    for c in range(k):
        beta[act[c]] = sol[c]
    r[:] = y - xa @ sol
    return True


@njit
def _cd_path_nb(x, y, lambdas, pf, max_iter, tol, dev_max):
    n, p = x.shape
    tss = 0.0
    for i in range(n):
        tss += y[i] * y[i]
    colsq = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += x[i, j] * x[i, j]
        colsq[j] = s / n
    beta = np.zeros(p)
    r = y.copy()
    path = np.zeros((lambdas.size, p))
    iters = np.zeros(lambdas.size, dtype=np.int64)
    converged = np.ones(lambdas.size, dtype=np.bool_)
    loose = max(tol, 1e-4 * np.sqrt(tss / n))
    for li in range(lambdas.size):
        lam = lambdas[li]
        sweeps = 0
        ok = False
        failed = np.zeros(p)  # sign pattern whose polish last failed
        while sweeps < max_iter:
            for j in range(p):
                _update_nb(x, r, beta, colsq, lam, pf, j, n)
            sweeps += 1
            while sweeps < max_iter:
                change = 0.0
                for j in range(p):
                    if beta[j] != 0.0:
                        c = _update_nb(x, r, beta, colsq, lam, pf, j, n)
                        if c > change:
                            change = c
                sweeps += 1
                if change <= loose:
                    break
            if _kkt_nb(x, r, beta, lam, pf, n) <= tol:
                ok = True
                break
            sgn = np.sign(beta)
            if np.array_equal(sgn, failed):
                continue
            saved = beta.copy()
            if _polish_nb(x, y, r, beta, lam, pf, n):
                if _kkt_nb(x, r, beta, lam, pf, n) <= tol:
                    ok = True
                    break
                beta[:] = saved
                r[:] = y - x @ beta
            failed = sgn
        path[li] = beta
        iters[li] = sweeps
        converged[li] = ok
        if dev_max < 1.0 and tss > 0.0:
            rss = 0.0
            for i in range(n):
                rss += r[i] * r[i]
            if 1.0 - rss / tss >= dev_max:
                return path[:li + 1], iters[:li + 1], converged[:li + 1]
    return path, iters, converged


def _cd_path_np(x, y, lambdas, pf, max_iter, tol, dev_max):
    n, p = x.shape
    tss = float(y @ y)
    colsq = (x * x).sum(axis=0) / n
    scale = np.sqrt(colsq)
    beta = np.zeros(p)
    r = y.copy()
    path = np.zeros((lambdas.size, p))
    iters = np.zeros(lambdas.size, dtype=np.int64)
    converged = np.ones(lambdas.size, dtype=bool)
    cols = [np.ascontiguousarray(x[:, j]) for j in range(p)]

    def update(j, lam):
        if colsq[j] == 0.0:
            return 0.0
        z = cols[j] @ r / n + colsq[j] * beta[j]
        t = lam * pf[j]
        new = (np.sign(z) * max(abs(z) - t, 0.0)) / colsq[j]
        delta = new - beta[j]
        if delta != 0.0:
            r[:] -= cols[j] * delta
            beta[j] = new
        return abs(delta) * scale[j]

    def polish(lam):
        act = np.flatnonzero(beta)
        if act.size == 0 or act.size >= n:
            return False
        xa = x[:, act]
        sgn = np.sign(beta[act])
        sol, _, rank, _ = np.linalg.lstsq(xa.T @ xa, xa.T @ y - n * lam * pf[act] * sgn, rcond=1e-12)
        if rank < act.size:
            return False
        if np.any(np.sign(sol) != sgn):
            return False
        beta[act] = sol
        r[:] = y - xa @ sol
        return True

    loose = max(tol, 1e-4 * np.sqrt(tss / n))
    for li, lam in enumerate(lambdas):
        sweeps, ok = 0, False
        failed = None  # sign pattern whose polish last failed
        while sweeps < max_iter:
            for j in range(p):
                update(j, lam)
            sweeps += 1
            while sweeps < max_iter:
                active = np.flatnonzero(beta)
                change = max((update(j, lam) for j in active), default=0.0)
                sweeps += 1
                if change <= loose:
                    break
            if kkt_residual(x, y, beta, lam, pf) <= tol:
                ok = True
                break
            sgn = np.sign(beta)
            if failed is not None and np.array_equal(sgn, failed):
                continue
            saved = beta.copy()
            if polish(lam):
                if kkt_residual(x, y, beta, lam, pf) <= tol:
                    ok = True
                    break
                beta[:] = saved
                r[:] = y - x @ beta
            failed = sgn
        path[li], iters[li], converged[li] = beta, sweeps, ok
        if dev_max < 1.0 and tss > 0.0 and 1.0 - float(r @ r) / tss >= dev_max:
            return path[:li + 1], iters[:li + 1], converged[:li + 1]
    return path, iters, converged


def lambda_grid(x, y, pf, n_lambda=100, lambda_min_ratio=None) -> np.ndarray:
    n, p = x.shape
    lmax = lambda_max(x, y, pf)
    if lmax <= 0:
        return np.zeros(1)
    ratio = lambda_min_ratio if lambda_min_ratio is not None else (1e-2 if p > n else 1e-3)
    if n_lambda == 1:
        return np.array([lmax])
    return np.geomspace(lmax, lmax * ratio, n_lambda)


def _check(x, y, pf):
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise DimensionMismatch("design and response")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("design or response has non-finite entries")
    pf = np.ones(x.shape[1]) if pf is None else np.ascontiguousarray(pf, dtype=float).ravel()
    if pf.size != x.shape[1]:
        raise DimensionMismatch("penalty_factors")
    if not (np.all(np.isfinite(pf)) and np.all(pf > 0)):
        raise NonFiniteInput("penalty factors must be finite and > 0")
    return x, y, pf


def solve_path(x, y, lambdas, pf=None, max_iter=100_000, tol=1e-6, dev_max=1.0, use_numba=None):
    """Coefficients for the lambdas in ``lambdas``, processed in the given order.

    With ``dev_max < 1`` the path stops early once that fraction of the
    (uncentered) sum of squares of ``y`` is explained, so fewer rows than
    lambdas may come back.
    """
    x, y, pf = _check(x, y, pf)
    lambdas = np.ascontiguousarray(lambdas, dtype=float).ravel()
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    kernel = _cd_path_nb if use_numba else _cd_path_np
    path, iters, converged = kernel(x, y, lambdas, pf, int(max_iter), float(tol), float(dev_max))
    if not converged.all():
        bad = int(np.flatnonzero(~converged)[0])
        raise NoConvergence(float(lambdas[bad]), int(iters[bad]))
    return path, iters


def weighted_lasso_path(x, y, cfg: LassoConfig | None = None, select: bool = True) -> LassoFit:
    """Fit the weighted Lasso path and pick a lambda with ``cfg.selection``.

    ``x`` is expected column-standardized and ``y`` centered; no intercept is
    fitted here.
    """
    cfg = cfg or LassoConfig()
    x, y, pf = _check(x, y, cfg.penalty_factors)
    if cfg.lambdas is not None:
        lambdas = np.sort(np.asarray(cfg.lambdas, dtype=float))[::-1]
        dev_max = 1.0
    else:
        lambdas = lambda_grid(x, y, pf, cfg.n_lambda, cfg.lambda_min_ratio)
        dev_max = DEV_MAX
    path, iters = solve_path(x, y, lambdas, pf, cfg.max_iter, cfg.tol, dev_max)
    lambdas = lambdas[:path.shape[0]]
    fit = LassoFit(path[0], np.flatnonzero(path[0]), float(lambdas[0]), lambdas, path,
                   objective(x, y, path[0], lambdas[0], pf), 0, iters)
    if select:
        idx, scores = select_lambda(fit, x, y, cfg)
        _pick(fit, x, y, pf, idx)
        fit.scores = scores
        fit.rule = cfg.selection
    return fit


def _pick(fit: LassoFit, x, y, pf, idx):
    fit.selected_index = int(idx)
    fit.beta = fit.path[idx].copy()
    fit.active_set = np.flatnonzero(fit.beta)
    fit.lambda_selected = float(fit.lambdas[idx])
    fit.objective = objective(x, y, fit.beta, fit.lambda_selected, pf)


def bic_scores(x, y, path) -> np.ndarray:
    n = len(y)
    resid = y[:, None] - x @ path.T
    rss = np.maximum((resid * resid).sum(axis=0), 1e-300)
    k = (path != 0).sum(axis=1)
    return n * np.log(rss / n) + k * np.log(n)


def cv_scores(x, y, lambdas, pf, k, seed, max_iter, tol) -> np.ndarray:
    """Mean squared held-out error per lambda; ``inf`` past the shortest fold path."""
    n = len(y)
    k = min(k, n)
    rng = np.random.default_rng(seed)
    fold = np.empty(n, dtype=np.int64)
    fold[rng.permutation(n)] = np.arange(n) % k
    err = np.zeros(lambdas.size)
    reached = lambdas.size
    for f in range(k):
        tr, te = fold != f, fold == f
        xm, ym = x[tr].mean(axis=0), y[tr].mean()
        path, _ = solve_path(x[tr] - xm, y[tr] - ym, lambdas, pf, max_iter, tol, DEV_MAX)
        reached = min(reached, path.shape[0])
        pred = ym + (x[te] - xm) @ path.T
        err[:path.shape[0]] += ((y[te][:, None] - pred) ** 2).sum(axis=0)
    err[reached:] = np.inf
    return err / n


def select_lambda(fit: LassoFit, x, y, cfg: LassoConfig):
    """Index into ``fit.lambdas`` chosen by the configured rule, and the scores.

    ``cvK`` minimises K-fold mean squared prediction error with folds drawn
    from ``cfg.seed``; ``bic`` minimises ``n log(RSS/n) + |active| log n``.
    Ties go to the larger lambda.
    """
    if fit.lambdas.size == 1:
        return 0, np.zeros(1)
    rule, k = parse_rule(cfg.selection)
    x, y, pf = _check(x, y, cfg.penalty_factors)
    if rule == "bic":
        scores = bic_scores(x, y, fit.path)
    else:
        scores = cv_scores(x, y, fit.lambdas, pf, k, cfg.seed, cfg.max_iter, cfg.tol)
    return int(np.argmin(scores)), scores
