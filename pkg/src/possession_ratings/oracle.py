"""Reference solver for small problems, independent of the production solvers.

Accelerated proximal gradient (FISTA with gradient-based restart) on dense
matrices, with closed-form proximal operators written separately from the
update rules in :mod:`possession_ratings.solvers` and
:mod:`possession_ratings.genlasso`. A run is certified when continuing for
ten times as many iterations changes the objective by at most ``certify_tol``.

For up to three penalised columns a zooming grid search is also available;
it is slow but assumes nothing about the penalty beyond being evaluable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.special import expit

from .errors import ConfigurationError

MAX_COLUMNS = 30


@dataclass
class ReferenceResult:
    beta: np.ndarray
    objective: float
    iterations: int
    certified: bool


def _loss(beta, X, y):
    eta = X @ beta
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def _loss_grad(beta, X, y):
    return X.T @ (expit(X @ beta) - y) / X.shape[0]


# --- penalty values -------------------------------------------------------------

def _groups_of(spec):
    g = np.asarray(spec.grouping.groups)
    return [np.flatnonzero(g == l) for l in range(int(g.max()) + 1)]


def penalty_value(b: np.ndarray, spec) -> float:
    """Penalty evaluated from first principles on the penalised block."""
    lam = spec.lam
    if spec.kind == "ridge":
        return lam * float(np.sum(b * b))
    if spec.kind == "lasso":
        return lam * float(np.sum(np.abs(b)))
    if spec.kind == "group_lasso":
        return lam * sum(np.sqrt(len(m)) * np.sqrt(np.sum(b[m] ** 2)) for m in _groups_of(spec))
    if spec.kind == "exclusive_lasso":
        return 0.5 * lam * sum(np.sum(np.abs(b[m])) ** 2 for m in _groups_of(spec))
    if spec.kind == "generalized_lasso":
        total = 0.0
        for kind, start, size, w in _d_blocks(spec.d_spec):
            v = b[start:start + size]
            if kind == "identity":
                total += float(np.sum(w * np.abs(v)))
            else:
                i, j = np.triu_indices(size, 1)
                total += float(np.sum(w * np.abs(v[i] - v[j])))
        return lam * total
    raise ConfigurationError(f"unknown kind {spec.kind!r}")


def _d_blocks(d_spec):
    out, start = [], 0
    for b, (kind, size) in enumerate(d_spec.blocks):
        w = None if d_spec.weights is None else d_spec.weights[b]
        m = size if kind == "identity" else size * (size - 1) // 2
        out.append((kind, start, size, np.broadcast_to(np.asarray(1.0 if w is None else w, float), (m,))))
        start += size
    return out


# --- proximal operators ---------------------------------------------------------------

def prox_exclusive(v: np.ndarray, tau: float) -> np.ndarray:
    """argmin_x 1/2 ||x - v||^2 + tau/2 ||x||_1^2.

    With support size k the l1 mass is ``S = sum_top_k |v| / (1 + tau k)``;
    k is the largest size whose smallest member still exceeds ``tau S``.
    """
    a = np.sort(np.abs(v))[::-1]
    csum = np.cumsum(a)
    k = np.arange(1, a.size + 1)
    S_k = csum / (1.0 + tau * k)
    ok = a > tau * S_k
    if not ok.any():
        return np.zeros_like(v)
    S = S_k[np.flatnonzero(ok).max()]
    return np.sign(v) * np.maximum(np.abs(v) - tau * S, 0.0)


def prox_ranking(v: np.ndarray, tau: float) -> np.ndarray:
    """argmin_x 1/2 ||x - v||^2 + tau sum_{i<j} |x_i - x_j| (unit weights).

    The solution keeps the order of ``v``. In ascending order the penalty is
    linear with coefficient ``2i - k - 1`` on the i-th smallest entry, so the
    prox is the isotonic fit of ``v_sorted - tau (2i - k - 1)``.
    """
    k = v.size
    order = np.argsort(v, kind="stable")
    c = 2.0 * np.arange(1, k + 1) - k - 1
    fitted = isotonic_regression(v[order] - tau * c, increasing=True).x
    out = np.empty_like(v)
    out[order] = fitted
    return out


def prox_weighted_pairs(v: np.ndarray, tau: float, w: np.ndarray, iters: int = 5000) -> np.ndarray:
    """Weighted pairwise prox via projected gradient on the box-constrained dual."""
    k = v.size
    i, j = np.triu_indices(k, 1)
    bound = tau * w
    u = np.zeros(i.size)
    step = 1.0 / (2.0 * k)

    def DT(u):
        out = np.zeros(k)
        np.add.at(out, i, u)
        np.add.at(out, j, -u)
        return out

    for _ in range(iters):
        x = v - DT(u)
        u = np.clip(u + step * (x[i] - x[j]), -bound, bound)
    return v - DT(u)


def prox(v: np.ndarray, t: float, spec) -> np.ndarray:
    """Proximal map of ``t * penalty`` on the penalised block."""
    lam = spec.lam * t
    if spec.kind == "ridge":
        return v / (1.0 + 2.0 * lam)
    if spec.kind == "lasso":
        return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)
    out = v.copy()
    if spec.kind == "group_lasso":
        for m in _groups_of(spec):
            nrm = np.sqrt(np.sum(v[m] ** 2))
            out[m] = 0.0 if nrm == 0 else max(0.0, 1.0 - lam * np.sqrt(len(m)) / nrm) * v[m]
        return out
    if spec.kind == "exclusive_lasso":
        for m in _groups_of(spec):
            out[m] = prox_exclusive(v[m], lam)
        return out
    if spec.kind == "generalized_lasso":
        for kind, start, size, w in _d_blocks(spec.d_spec):
            sl = slice(start, start + size)
            if kind == "identity":
                out[sl] = np.sign(v[sl]) * np.maximum(np.abs(v[sl]) - lam * w, 0.0)
            elif np.all(w == 1.0):
                out[sl] = prox_ranking(v[sl], lam)
            else:
                out[sl] = prox_weighted_pairs(v[sl], lam, w)
        return out
    raise ConfigurationError(f"unknown kind {spec.kind!r}")


# --- FISTA -----------------------------------------------------------------------------------

def _dense(X):
    return X.toarray() if hasattr(X, "toarray") else np.asarray(X, dtype=float)


def _fista(Xi, y, spec, beta, n_iter, step):
    x = beta.copy()
    z = beta.copy()
    t = 1.0
    for _ in range(n_iter):
        g = _loss_grad(z, Xi, y)
        v = z - step * g
        new = v.copy()
        new[:-1] = prox(v[:-1], step, spec)
        # restart when momentum points uphill
        if np.dot(z - new, new - x) > 0:
            t = 1.0
            z = new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = new + ((t - 1.0) / t_new) * (new - x)
            t = t_new
        x = new
    return x


def reference_solve(X, y, spec, n_iter: int = 400, certify_tol: float = 1e-8,
                    max_rounds: int = 4) -> ReferenceResult:
    """Minimise ``nll + penalty`` to a certified objective; intercept unpenalised."""
    X = _dense(X)
    if X.shape[1] > MAX_COLUMNS:
        raise ConfigurationError(f"reference solver handles at most {MAX_COLUMNS} penalised columns")
    y = np.asarray(y, dtype=float)
    Xi = np.hstack([X, np.ones((X.shape[0], 1))])
    L = np.linalg.norm(Xi, 2) ** 2 / (4.0 * Xi.shape[0])
    step = 1.0 / L
    beta = np.zeros(Xi.shape[1])
    ybar = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    beta[-1] = np.log(ybar / (1 - ybar))
    F = lambda b: _loss(b, Xi, y) + penalty_value(b[:-1], spec)
    total = 0
    for _ in range(max_rounds):
        short = _fista(Xi, y, spec, beta, n_iter, step)
        long = _fista(Xi, y, spec, short, 9 * n_iter, step)
        total += 10 * n_iter
        f1, f2 = F(short), F(long)
        beta = long
        if f1 - f2 <= certify_tol:
            return ReferenceResult(beta, f2, total, True)
        n_iter *= 10
    return ReferenceResult(beta, F(beta), total, False)


def grid_search(X, y, spec, radius: float = 3.0, points: int = 41, levels: int = 8) -> ReferenceResult:
    """Zooming grid search over at most three penalised columns.

    The intercept is profiled out by a one-dimensional Newton solve at every
    grid point.
    """
    X = _dense(X)
    if X.shape[1] > 3:
        raise ConfigurationError("grid search handles at most 3 penalised columns")
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    center = np.zeros(p)
    width = radius
    best_b, best_f = None, np.inf
    for _ in range(levels):
        axes = [np.linspace(c - width, c + width, points) for c in center]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, p)
        eta0 = X @ grid.T                        # n x G
        c = np.zeros(grid.shape[0])
        for _ in range(30):
            h = expit(eta0 + c)
            g = (h - y[:, None]).mean(axis=0)
            H = (h * (1 - h)).mean(axis=0)
            c -= g / np.maximum(H, 1e-12)
        eta = eta0 + c
        loss = np.mean(np.logaddexp(0.0, eta) - y[:, None] * eta, axis=0)
        pen = np.array([penalty_value(b, spec) for b in grid])
        f = loss + pen
        i = int(np.argmin(f))
        if f[i] < best_f:
            best_f, best_b = float(f[i]), np.append(grid[i], c[i])
        center = grid[i]
        width *= 4.0 / (points - 1)
    return ReferenceResult(best_b, best_f, levels, True)
