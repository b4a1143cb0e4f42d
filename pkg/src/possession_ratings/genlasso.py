"""Generalized (ranking) lasso for logistic regression.

Solves ``min nll(beta) + lam ||D beta||_1`` where ``D`` is block diagonal over
the involvement and on-field blocks. A ranking block over ``k`` columns has
one row ``w_ij (e_i - e_j)`` per pair ``i < j``; an identity block penalises
the coefficients themselves (plain lasso). Pair weights are folded into the
rows of ``D``.

Two backends:

``splitting``
    ADMM on ``D beta = gamma`` with an l1 prox on ``gamma`` and Newton steps
    for the logistic subproblem, followed by a polish step that re-solves the
    problem restricted to the fused structure ADMM found.
``conic``
    The epigraph form: per observation two exponential cones bound the
    logistic loss, and ``r`` bounds ``||D beta||_1`` through ``-s <= D beta <= s``.
    Solved by a generic conic solver through cvxpy.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, lsq_linear
from scipy.special import expit

from . import glm
from .errors import ConfigurationError
from .solvers import (KKT_TOL, FitResult, PenaltySpec, _null_start, _solve_pd, fit_ridge,
                      prepare)

BLOCK_KINDS = ("ranking", "identity")
# ADMM works on a dense copy of designs with at most this many entries
DENSE_LIMIT = 4_000_000
# looser ADMM tolerances tried first; the polished fit is kept once it certifies
ADMM_STAGES = (1e-5, 1e-6)


def build_ranking_D(k: int, weights=None) -> sparse.csr_matrix:
    """All pairwise differences over ``k`` columns, rows ordered (i asc, j asc).

    ``weights`` is a scalar or one weight per row (``k(k-1)/2`` of them).
    """
    if k < 2:
        raise ConfigurationError(f"ranking D needs at least 2 columns, got {k}")
    i, j = np.triu_indices(k, 1)
    m = i.size
    w = np.broadcast_to(np.asarray(1.0 if weights is None else weights, dtype=float), (m,))
    if np.any(w < 0):
        raise ConfigurationError("pair weights must be non-negative")
    rows = np.repeat(np.arange(m), 2)
    cols = np.column_stack([i, j]).ravel()
    vals = np.column_stack([w, -w]).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, k))


def pair_index(k: int):
    return np.triu_indices(k, 1)


def adaptive_weights(coef_block, eps: float = 1e-4) -> np.ndarray:
    """``1 / (|b_i - b_j| + eps)`` for each pair, in ranking-row order."""
    b = np.asarray(coef_block, dtype=float)
    i, j = pair_index(b.size)
    return 1.0 / (np.abs(b[i] - b[j]) + eps)


@dataclass(frozen=True)
class DMatrixSpec:
    """Block-diagonal penalty matrix description.

    ``blocks`` is a tuple of ``(kind, size)``; ``weights`` optionally gives,
    per block, a scalar or per-row weight array (None for unit weights).
    """
    blocks: tuple
    weights: tuple | None = None

    def __post_init__(self):
        for kind, size in self.blocks:
            if kind not in BLOCK_KINDS:
                raise ConfigurationError(f"unknown D block kind {kind!r}")
            if kind == "ranking" and size < 2:
                raise ConfigurationError("ranking block needs at least 2 columns")
        if self.weights is not None and len(self.weights) != len(self.blocks):
            raise ConfigurationError("one weight entry per block required")

    @classmethod
    def for_players(cls, k: int, inv: str = "ranking", of: str = "ranking", weights=None):
        return cls(((inv, k), (of, k)), weights)

    @classmethod
    def single(cls, kind: str, k: int, weights=None):
        return cls(((kind, k),), None if weights is None else (weights,))

    @property
    def n_columns(self) -> int:
        return sum(size for _, size in self.blocks)

    def block_weights(self, b: int):
        return None if self.weights is None else self.weights[b]

    def offsets(self):
        out, start = [], 0
        for kind, size in self.blocks:
            out.append((kind, start, size))
            start += size
        return out

    def matrix(self, n_columns: int | None = None) -> sparse.csr_matrix:
        if n_columns is not None and n_columns != self.n_columns:
            raise ConfigurationError(
                f"D covers {self.n_columns} columns, problem has {n_columns} penalised columns")
        parts = []
        for b, (kind, size) in enumerate(self.blocks):
            w = self.block_weights(b)
            if kind == "ranking":
                parts.append(build_ranking_D(size, w))
            else:
                ww = np.broadcast_to(np.asarray(1.0 if w is None else w, dtype=float), (size,))
                parts.append(sparse.diags(ww, format="csr"))
        return sparse.block_diag(parts, format="csr")

    def unit_weights(self) -> bool:
        if self.weights is None:
            return True
        return all(w is None or np.all(np.asarray(w) == 1.0) for w in self.weights)


# --- null space, lambda_max -----------------------------------------------------

def _null_basis(d_spec: DMatrixSpec) -> sparse.csr_matrix:
    """Columns spanning {beta : D beta = 0}: one constant vector per ranking block."""
    cols = []
    for kind, start, size in d_spec.offsets():
        if kind == "ranking":
            v = np.zeros(d_spec.n_columns)
            v[start:start + size] = 1.0
            cols.append(v)
    if not cols:
        return sparse.csr_matrix((d_spec.n_columns, 0))
    return sparse.csr_matrix(np.column_stack(cols))


def _restricted_beta(Xi, y, d_spec):
    """Unpenalised fit over the null space of D (plus intercept)."""
    N = _null_basis(d_spec)
    p = Xi.shape[1]
    M = sparse.block_diag([N, sparse.csr_matrix(np.ones((1, 1)))], format="csc")
    Xr = Xi @ M
    if not sparse.issparse(Xr):
        Xr = np.asarray(Xr)
    # Xr already contains the intercept column last; fit through ridge(0) on the
    # other columns.
    Xr_dense = Xr.toarray() if sparse.issparse(Xr) else Xr
    fit = fit_ridge(Xr_dense[:, :-1], y, 0.0)
    return np.asarray(M @ fit.beta).ravel()[:p]


def _ranking_flow_bound(a: np.ndarray) -> float:
    """min ||u||_inf subject to D_rank' u = a on the unit-weight complete graph.

    By max-flow/min-cut the value is ``max_S a(S) / (|S| (k - |S|))``, and
    for fixed |S| the best S holds the largest entries of ``a``.
    """
    k = a.size
    s = np.arange(1, k)
    top = np.cumsum(np.sort(a)[::-1])[:-1]
    return float(np.max(top / (s * (k - s))))


def _min_inf_norm_lp(Db: sparse.csr_matrix, a: np.ndarray) -> float:
    m = Db.shape[0]
    # variables (u, t): minimise t s.t. Db' u = a, -t <= u <= t
    c = np.zeros(m + 1); c[-1] = 1.0
    A_eq = sparse.hstack([Db.T, sparse.csr_matrix((Db.shape[1], 1))], format="csr")
    eye = sparse.identity(m, format="csr")
    ones = sparse.csr_matrix(np.ones((m, 1)))
    A_ub = sparse.vstack([sparse.hstack([eye, -ones]), sparse.hstack([-eye, -ones])], format="csr")
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(2 * m), A_eq=A_eq, b_eq=a,
                  bounds=[(None, None)] * m + [(0, None)], method="highs")
    if res.status != 0:
        raise ConfigurationError(f"lambda_max LP failed: {res.message}")
    return float(res.x[-1])


def generalized_lambda_max(matrix, y, d_spec: DMatrixSpec) -> float:
    """Smallest lambda with a minimiser satisfying ``D beta = 0``."""
    Xi, y, _ = prepare(matrix, y)
    if d_spec.n_columns != Xi.shape[1] - 1:
        raise ConfigurationError("D column count differs from penalised coefficient count")
    beta = _restricted_beta(Xi, y, d_spec)
    g = glm.gradient(beta, Xi, y)[:-1]
    best = 0.0
    for b, (kind, start, size) in enumerate(d_spec.offsets()):
        gb = g[start:start + size]
        w = d_spec.block_weights(b)
        if kind == "identity":
            ww = np.broadcast_to(np.asarray(1.0 if w is None else w, dtype=float), (size,))
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(gb == 0, 0.0, np.abs(gb) / ww)
            best = max(best, float(ratio.max(initial=0.0)))
        elif w is None or np.all(np.asarray(w) == 1.0):
            best = max(best, _ranking_flow_bound(-gb))
        else:
            best = max(best, _min_inf_norm_lp(build_ranking_D(size, w), -gb))
    return best


# --- optimality certificate -----------------------------------------------------

def generalized_kkt(beta, Xi, y, D, lam, zero_rows=None, zero_tol=1e-9, u_hint=None,
                    max_lsq_rows: int = 20000) -> float:
    """Residual ``min_u ||grad + lam D' u||_inf`` over admissible subgradients.

    Rows with ``|D beta| > zero_tol`` (or outside ``zero_rows``) have ``u``
    fixed to the sign; the rest are free in [-1, 1] and fitted by bounded
    least squares.
    """
    g = glm.gradient(beta, Xi, y)
    res = abs(float(g[-1]))
    gp = g[:-1]
    Db = D @ beta[:-1]
    if zero_rows is None:
        zero_rows = np.abs(Db) <= zero_tol
    nz = ~zero_rows
    b = gp + lam * (D[nz].T @ np.sign(Db[nz]))
    if not np.any(zero_rows) or lam == 0:
        return max(res, float(np.abs(b).max(initial=0.0)))
    DF = D[zero_rows]
    best = math.inf
    if u_hint is not None:
        u = np.clip(np.asarray(u_hint)[zero_rows], -1.0, 1.0)
        best = float(np.abs(b + lam * (DF.T @ u)).max(initial=0.0))
    if best > KKT_TOL["generalized_lasso"] and DF.shape[0] <= max_lsq_rows:
        A = (lam * DF.T).tocsr()
        if DF.shape[0] <= 2000:
            A = A.toarray()
        sol = lsq_linear(A, -b, bounds=(-1.0, 1.0), method="trf", tol=1e-14,
                         lsq_solver="exact" if DF.shape[0] <= 2000 else "lsmr", max_iter=2000)
        best = min(best, float(np.abs(b + A @ sol.x).max(initial=0.0)))
    return max(res, best)


# --- splitting backend -------------------------------------------------------------

def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _admm(Xi, y, D, lam, beta, tol, max_iter, state=None):
    """ADMM; ``state`` = (gamma, scaled dual, rho) resumes a previous run."""
    n, p = Xi.shape
    if sparse.issparse(Xi) and n * p <= DENSE_LIMIT:
        Xi = Xi.toarray()
    Dfull = sparse.hstack([D, sparse.csr_matrix((D.shape[0], 1))], format="csr")
    DtD = (Dfull.T @ Dfull).toarray()
    if state is None:
        h = expit(glm.linear_predictor(beta, Xi))
        hdiag = np.asarray(glm.weighted_gram(Xi, h * (1 - h) / n).diagonal())
        rho = max(float(hdiag[:-1].mean()), 1e-8)
        gamma = Dfull @ beta
        u = np.zeros(D.shape[0])
    else:
        gamma, u, rho = state
    r = s = math.inf
    for it in range(1, max_iter + 1):
        # beta step: Newton on nll + rho/2 ||D beta - gamma + u||^2
        for _ in range(50):
            eta = glm.linear_predictor(beta, Xi)
            hh = expit(eta)
            resid = Dfull @ beta - gamma + u
            grad = np.asarray(Xi.T @ (hh - y)).ravel() / n + rho * (Dfull.T @ resid)
            if np.abs(grad).max() <= 1e-12:
                break
            H = glm.weighted_gram(Xi, hh * (1 - hh) / n) + rho * DtD
            step = _solve_pd(H, -grad)
            f0 = glm.nll_from_eta(eta, y) + 0.5 * rho * float(resid @ resid)
            t = 1.0
            for _ in range(40):
                cand = beta + t * step
                rc = Dfull @ cand - gamma + u
                f1 = glm.nll(cand, Xi, y) + 0.5 * rho * float(rc @ rc)
                if f1 <= f0 + 1e-4 * t * float(grad @ step) + 1e-15 * abs(f0):
                    break
                t *= 0.5
            beta = cand
            if np.abs(t * step).max() <= 1e-15:
                break
        Db = Dfull @ beta
        gamma_old = gamma
        gamma = _soft(Db + u, lam / rho)
        u = u + Db - gamma
        r = float(np.abs(Db - gamma).max(initial=0.0))
        s = rho * float(np.abs(Dfull.T @ (gamma - gamma_old)).max(initial=0.0))
        if r <= tol and s <= tol:
            return beta, gamma, rho * u, it, True, (gamma, u, rho)
        # residual balancing
        if it % 5 == 0:
            if r > 10 * s:
                rho *= 2.0; u /= 2.0
            elif s > 10 * r:
                rho /= 2.0; u *= 2.0
    return beta, gamma, rho * u, max_iter, False, (gamma, u, rho)


def _fused_structure(d_spec: DMatrixSpec, zero_rows: np.ndarray):
    """Cluster label per penalised column; -1 marks columns fixed at zero."""
    parent = np.arange(d_spec.n_columns)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    fixed_zero = np.zeros(d_spec.n_columns, dtype=bool)
    row = 0
    for kind, start, size in d_spec.offsets():
        if kind == "ranking":
            i, j = pair_index(size)
            z = zero_rows[row:row + i.size]
            for a, b in zip(i[z] + start, j[z] + start):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            row += i.size
        else:
            fixed_zero[start:start + size] = zero_rows[row:row + size]
            row += size
    roots = np.array([find(a) for a in range(d_spec.n_columns)])
    zero_roots = set(roots[fixed_zero])
    labels = -np.ones(d_spec.n_columns, dtype=int)
    index = {}
    for c, r in enumerate(roots):
        if r in zero_roots:
            continue
        labels[c] = index.setdefault(r, len(index))
    return labels, len(index)


def _polish(Xi, y, D, d_spec, lam, beta, zero_rows, signs):
    """Re-solve on the fused structure with the sign pattern held fixed.

    Returns the polished coefficients, or None when the sign pattern does not
    survive (the fused structure was not the optimal one).
    """
    labels, n_clusters = _fused_structure(d_spec, zero_rows)
    p = Xi.shape[1]
    cols = [(c, labels[c]) for c in range(p - 1) if labels[c] >= 0]
    M = sparse.csr_matrix((np.ones(len(cols) + 1),
                           ([c for c, _ in cols] + [p - 1], [l for _, l in cols] + [n_clusters])),
                          shape=(p, n_clusters + 1))
    DM = (D @ M[:-1]).tocsr()
    active = np.abs(DM).sum(axis=1).A1 > 0
    s = signs.copy()
    s[~active] = 0.0
    if np.any(s[active] == 0):
        return None
    lin = lam * np.asarray(DM.T @ s).ravel()
    Xr = Xi @ M
    Xr = Xr.toarray() if sparse.issparse(Xr) else np.asarray(Xr)
    # warm start at the cluster means
    c = np.asarray(sparse.linalg.lsqr(M, beta, atol=1e-15, btol=1e-15)[0])
    n = Xr.shape[0]
    for _ in range(100):
        eta = Xr @ c
        h = expit(eta)
        grad = Xr.T @ (h - y) / n + lin
        if np.abs(grad).max() <= 1e-13:
            break
        H = (Xr * (h * (1 - h) / n)[:, None]).T @ Xr
        step = _solve_pd(H, -grad)
        f0 = glm.nll_from_eta(eta, y) + lin @ c
        t = 1.0
        for _ in range(40):
            cand = c + t * step
            if glm.nll_from_eta(Xr @ cand, y) + lin @ cand <= f0 + 1e-4 * t * grad @ step \
                    + 1e-15 * abs(f0):
                break
            t *= 0.5
        c = cand
        if np.abs(t * step).max() <= 1e-15:
            break
    new = np.asarray(M @ c).ravel()
    got = np.sign(D @ new[:-1])
    if np.any(got[active] != s[active]):
        return None
    return new


POLISH_THRESHOLDS = (1e-6, 1e-5)


def _best_polish(Xi, y, D, d_spec, spec, beta, structures, extra):
    """Try each ``(zero_rows, signs)`` structure, plus the near-zero rows of
    ``D beta`` and the fully fused structure, and keep the best polished point.

    A candidate must keep its sign pattern and must not raise the objective.
    """
    Db = D @ beta[:-1]
    scale = 1.0 + float(np.abs(beta[:-1]).max(initial=0.0))
    for t in POLISH_THRESHOLDS:
        rows = np.abs(Db) <= t * scale
        structures.append((rows, np.where(rows, 0.0, np.sign(Db))))
    # everything fused: the solution for any lambda at or above lambda_max
    structures.append((np.ones(Db.size, bool), np.zeros(Db.size)))
    best_f = extra["raw_objective"] + 1e-12
    best, best_rows = beta, structures[0][0]
    seen = set()
    for rows, signs in structures:
        key = rows.tobytes()
        if key in seen:
            continue
        seen.add(key)
        pol = _polish(Xi, y, D, d_spec, spec.lam, beta, rows, signs)
        if pol is None:
            continue
        f_pol = glm.nll(pol, Xi, y) + spec.value(pol[:-1])
        if f_pol <= best_f:
            best_f, best = f_pol, pol
            best_rows = np.abs(D @ pol[:-1]) == 0
            extra["polished"] = True
    return best, best_rows


def fit_generalized_lasso(matrix, y=None, lam: float = 0.0, d_spec: DMatrixSpec = None,
                          backend: str = "splitting", beta0=None, tol: float = 1e-7,
                          max_iter: int = 20000, polish: bool = True, **_) -> FitResult:
    """Minimise ``nll + lam ||D beta||_1`` with the chosen backend."""
    if d_spec is None:
        raise ConfigurationError("generalized lasso needs a D specification")
    spec = PenaltySpec("generalized_lasso", lam, d_spec=d_spec)
    Xi, y, players = prepare(matrix, y)
    D = d_spec.matrix(Xi.shape[1] - 1)
    beta = _null_start(Xi, y) if beta0 is None else np.array(beta0, dtype=float)
    extra = {"backend": backend}
    if backend == "splitting":
        stages = [t for t in ADMM_STAGES if t > tol] if polish and lam > 0 else []
        state, iters = None, 0
        for stage_tol in stages + [tol]:
            raw, gamma, dual, used, ok, state = _admm(Xi, y, D, lam, beta, stage_tol,
                                                      max_iter - iters, state)
            beta, iters = raw, iters + used
            zero_rows = gamma == 0
            u_hint = dual / lam if lam > 0 else None
            if polish and lam > 0:
                extra.update(raw_objective=glm.nll(raw, Xi, y) + spec.value(raw[:-1]))
                beta, zero_rows = _best_polish(Xi, y, D, d_spec, spec, raw,
                                               [(zero_rows, np.sign(gamma))], extra)
                kkt = generalized_kkt(beta, Xi, y, D, lam, zero_rows=zero_rows, u_hint=u_hint)
                if ok and kkt <= KKT_TOL["generalized_lasso"]:
                    break
            if stage_tol != tol:
                beta = raw
        extra.update(raw_objective=glm.nll(raw, Xi, y) + spec.value(raw[:-1]),
                     admm_converged=ok, admm_tolerance=stage_tol)
        message = "" if ok else "ADMM iteration limit"
    elif backend == "conic":
        beta, ok, message = _conic(Xi, y, D, lam)
        extra["raw_objective"] = glm.nll(beta, Xi, y) + spec.value(beta[:-1])
        zero_rows = np.abs(D @ beta[:-1]) <= 1e-6 * (1 + np.abs(beta).max())
        u_hint = None
        iters = 0
        if polish and lam > 0 and ok:
            beta, zero_rows = _best_polish(Xi, y, D, d_spec, spec, beta,
                                           [(zero_rows, np.sign(D @ beta[:-1]))], extra)
    else:
        raise ConfigurationError(f"unknown backend {backend!r}")
    kkt = generalized_kkt(beta, Xi, y, D, lam, zero_rows=zero_rows, u_hint=u_hint)
    converged = bool(ok and kkt <= KKT_TOL["generalized_lasso"])
    if ok and not converged:
        message = message or f"KKT residual {kkt:.2e} above tolerance"
    return FitResult(beta=beta, lam=lam, kind="generalized_lasso",
                     objective=glm.nll(beta, Xi, y) + spec.value(beta[:-1]),
                     iterations=iters, converged=converged, kkt_residual=kkt,
                     players=players, message=message, extra=extra)


# --- conic backend -------------------------------------------------------------------

def conic_program(Xi, y, D, lam):
    """Epigraph program over (r, beta, s, t, z1, z2) with two exponential cones per row.

    ``u_i = -(2 y_i - 1) x_i' beta`` so that ``t_i >= log(1 + exp(u_i))`` is the
    logistic loss of row i. Returns the cvxpy problem and the beta variable.
    """
    import cvxpy as cp

    n, p = Xi.shape
    m = D.shape[0]
    beta = cp.Variable(p)
    t = cp.Variable(n)
    z1 = cp.Variable(n)
    z2 = cp.Variable(n)
    s = cp.Variable(m)
    r = cp.Variable()
    sign = 2.0 * np.asarray(y) - 1.0
    Xs = sparse.diags(-sign) @ sparse.csr_matrix(Xi)
    u = Xs @ beta
    ones = np.ones(n)
    Dfull = sparse.hstack([D, sparse.csr_matrix((m, 1))], format="csr")
    Db = Dfull @ beta
    cons = [
        cp.constraints.ExpCone(u - t, ones, z1),
        cp.constraints.ExpCone(-t, ones, z2),
        z1 + z2 <= 1,
        -s <= Db, Db <= s,
        r >= cp.sum(s),
    ]
    prob = cp.Problem(cp.Minimize(cp.sum(t) / n + lam * r), cons)
    return prob, beta


def _conic(Xi, y, D, lam):
    import cvxpy as cp

    prob, beta = conic_program(Xi, y, D, lam)
    try:
        with warnings.catch_warnings():
            # an inaccurate status is reported through the fit message instead
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11,
                       tol_feas=1e-11, max_iter=500)
    except cp.error.SolverError as exc:
        return np.zeros(Xi.shape[1]), False, f"conic solver failed: {exc}"
    ok = prob.status in ("optimal", "optimal_inaccurate") and beta.value is not None
    value = np.asarray(beta.value if beta.value is not None else np.zeros(Xi.shape[1]))
    return value, ok, "" if prob.status == "optimal" else f"conic status {prob.status}"


# --- clusters -------------------------------------------------------------------------

@dataclass(frozen=True)
class Cluster:
    block: str
    value: float
    members: tuple
    rank: int


def extract_clusters(fit: FitResult, tol: float = 1e-6, players=None) -> list[Cluster]:
    """Group players whose coefficients agree within ``tol`` (single linkage on
    sorted values), per block, ranked from the highest value."""
    players = players if players is not None else fit.players
    k = len(players)
    out = []
    for block, coefs in (("inv", fit.beta[:k]), ("of", fit.beta[k:2 * k])):
        order = np.argsort(-coefs, kind="stable")
        groups = []
        for idx in order:
            if groups and abs(coefs[groups[-1][-1]] - coefs[idx]) <= tol:
                groups[-1].append(idx)
            else:
                groups.append([idx])
        for rank, g in enumerate(groups, start=1):
            out.append(Cluster(block, float(np.mean(coefs[g])),
                               tuple(players[i] for i in g), rank))
    return out


def write_cluster_csv(clusters, header: str | None = None) -> str:
    lines = [header.rstrip("\n")] if header else []
    lines.append("cluster_id,block,value,members,rank")
    for cid, c in enumerate(clusters):
        lines.append(f"{cid},{c.block},{c.value!r},{';'.join(c.members)},{c.rank}")
    return "\n".join(lines) + "\n"
