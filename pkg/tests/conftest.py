import itertools

import numpy as np
import pytest

from sicomore import _accel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = [False, True] if _accel.numba is not None else [False]


@pytest.fixture(params=BACKENDS, ids=lambda b: "numba" if b else "numpy")
def use_numba(request):
    return request.param


# --- brute-force oracles shared by several test modules ---------------------

def ess(delta, members):
    idx = list(members)
    return float(delta[np.ix_(idx, idx)].sum()) / (2 * len(idx))


def brute_force_ward(delta, constrained=False):
    """Agglomerate from scratch, recomputing every candidate cost each step.

    Clusters are keyed by their smallest leaf; ties go to the
    lexicographically smallest key pair.  Returns [(members_a, members_b, cost)].
    """
    clusters = {j: (j,) for j in range(delta.shape[0])}
    out = []
    while len(clusters) > 1:
        keys = sorted(clusters)
        if constrained:
            cands = list(zip(keys[:-1], keys[1:]))
        else:
            cands = list(itertools.combinations(keys, 2))
        best = None
        for a, b in cands:
            ma, mb = clusters[a], clusters[b]
            c = ess(delta, ma + mb) - ess(delta, ma) - ess(delta, mb)
            if best is None or c < best[0]:
                best = (c, a, b)
        c, a, b = best
        out.append((clusters[a], clusters[b], c))
        clusters[a] = tuple(sorted(clusters[a] + clusters.pop(b)))
    return out


def lasso_qp_oracle(x, y, lam, pf):
    """Exact weighted Lasso by enumerating sign patterns and solving KKT systems."""
    n, p = x.shape
    best, best_obj = np.zeros(p), np.inf
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, dtype=float)
        act = np.flatnonzero(s)
        beta = np.zeros(p)
        if act.size:
            xa = x[:, act]
            rhs = xa.T @ y - n * lam * pf[act] * s[act]
            try:
                sol = np.linalg.solve(xa.T @ xa, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(np.sign(sol) != s[act]):
                continue
            beta[act] = sol
        g = x.T @ (y - x @ beta) / n
        inactive = s == 0
        if np.any(np.abs(g[inactive]) > lam * pf[inactive] * (1 + 1e-9) + 1e-12):
            continue
        obj = float((y - x @ beta) @ (y - x @ beta)) / (2 * n) + lam * float(pf @ np.abs(beta))
        if obj < best_obj:
            best, best_obj = beta, obj
    return best
