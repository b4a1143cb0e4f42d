"""Penalised logistic regression: ridge, lasso, group lasso, exclusive lasso.

Every fit minimises

    nll(beta) + penalty(beta_penalised)

with the ``1/n``-scaled binomial NLL from :mod:`possession_ratings.glm` and an
unpenalised intercept appended as the last column. Coefficient vectors are
therefore laid out as ``[penalised columns..., intercept]``.

With the scaled NLL, the ridge ``lam`` here equals ``lam * n`` of the
unscaled formulation.

Ridge is solved by damped Newton. The non-smooth penalties use proximal
Newton: a quadratic model of the NLL is minimised with coordinate descent
(lasso, exclusive lasso) or exact block coordinate descent (group lasso), and
the resulting direction is accepted with a backtracking line search on the
full objective.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, sparse
from scipy.optimize import brentq
from scipy.special import expit

from . import glm
from ._cd import cd_exclusive, cd_lasso
from .design import GroupingScheme, PossessionMatrix
from .errors import ConfigurationError

KINDS = ("ridge", "lasso", "group_lasso", "exclusive_lasso", "generalized_lasso")
GROUPED = ("group_lasso", "exclusive_lasso")
KKT_TOL = {"ridge": 1e-8, "lasso": 1e-8, "group_lasso": 1e-8,
           "exclusive_lasso": 1e-7, "generalized_lasso": 1e-6}
REL_TOL = 1e-10
MAX_SWEEPS = 10_000
MAX_NEWTON = 200
# |eta| beyond this means fitted probabilities are numerically 0 or 1
SATURATION = 36.0


@dataclass(frozen=True)
class PenaltySpec:
    kind: str
    lam: float = 0.0
    grouping: GroupingScheme | None = None
    d_spec: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown penalty kind {self.kind!r}")
        if not self.lam >= 0:
            raise ConfigurationError(f"lambda must be non-negative, got {self.lam}")
        if (self.kind in GROUPED) != (self.grouping is not None):
            raise ConfigurationError(f"{self.kind}: grouping required iff penalty is grouped")
        if self.kind == "generalized_lasso" and self.d_spec is None:
            raise ConfigurationError("generalized_lasso needs a D specification")

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return replace(self, lam=float(lam))

    def value(self, coef) -> float:
        coef = np.asarray(coef, dtype=float)
        lam = self.lam
        if self.kind == "ridge":
            return lam * float(coef @ coef)
        if self.kind == "lasso":
            return lam * float(np.abs(coef).sum())
        if self.kind == "group_lasso":
            return lam * sum(math.sqrt(len(m)) * float(np.linalg.norm(coef[m]))
                             for m in self.grouping.members())
        if self.kind == "exclusive_lasso":
            return 0.5 * lam * sum(float(np.abs(coef[m]).sum()) ** 2
                                   for m in self.grouping.members())
        return lam * float(np.abs(self.d_spec.matrix(coef.shape[0]) @ coef).sum())


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    lam: float
    kind: str
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    players: tuple | None = None
    message: str = ""
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def coef(self) -> np.ndarray:
        return self.beta[:-1]

    @property
    def intercept(self) -> float:
        return float(self.beta[-1])

    def pairs(self) -> dict:
        """``player_id -> (beta_inv, beta_of)``."""
        if self.players is None:
            raise ValueError("fit carries no player index")
        k = len(self.players)
        return {p: (float(self.beta[j]), float(self.beta[k + j]))
                for j, p in enumerate(self.players)}


# --- shared helpers ---------------------------------------------------------

def prepare(matrix, y=None):
    """Return ``(X with intercept column, y, players)`` for any supported input."""
    players = None
    if isinstance(matrix, PossessionMatrix):
        players = matrix.players
        if y is None:
            y = matrix.y
        matrix = matrix.X
    if y is None:
        raise ValueError("response vector required")
    y = np.asarray(y, dtype=float).ravel()
    n = matrix.shape[0]
    if sparse.issparse(matrix):
        Xi = sparse.hstack([matrix, np.ones((n, 1))], format="csc")
    else:
        Xi = np.hstack([np.asarray(matrix, dtype=float), np.ones((n, 1))])
    return Xi, y, players


def objective(beta, Xi, y, spec: PenaltySpec) -> float:
    return glm.nll(beta, Xi, y) + spec.value(beta[:-1])


def kkt_residual(beta, grad, spec: PenaltySpec) -> float:
    """Largest violation of the subgradient optimality conditions.

    ``grad`` is the NLL gradient including the intercept entry (last).
    """
    coef, g = np.asarray(beta[:-1]), np.asarray(grad[:-1])
    lam = spec.lam
    res = abs(float(grad[-1]))
    if spec.kind == "ridge":
        r = np.abs(g + 2.0 * lam * coef)
        return max(res, float(r.max(initial=0.0)))
    if spec.kind == "lasso":
        active = coef != 0
        r_act = np.abs(g[active] + lam * np.sign(coef[active]))
        r_zero = np.maximum(np.abs(g[~active]) - lam, 0.0)
        return max(res, float(r_act.max(initial=0.0)), float(r_zero.max(initial=0.0)))
    if spec.kind == "group_lasso":
        for m in spec.grouping.members():
            w = lam * math.sqrt(len(m))
            nb = np.linalg.norm(coef[m])
            if nb == 0:
                res = max(res, float(np.linalg.norm(g[m])) - w)
            else:
                res = max(res, float(np.abs(g[m] + w * coef[m] / nb).max()))
        return max(res, 0.0)
    if spec.kind == "exclusive_lasso":
        for m in spec.grouping.members():
            mass = float(np.abs(coef[m]).sum())
            cm, gm = coef[m], g[m]
            active = cm != 0
            r_act = np.abs(gm[active] + lam * mass * np.sign(cm[active]))
            r_zero = np.maximum(np.abs(gm[~active]) - lam * mass, 0.0)
            res = max(res, float(r_act.max(initial=0.0)), float(r_zero.max(initial=0.0)))
        return res
    raise ConfigurationError("generalized lasso KKT lives in possession_ratings.genlasso")


def lambda_max(matrix, y=None, spec: PenaltySpec | None = None, kind: str = "lasso") -> float:
    """Smallest lambda at which the penalised block is exactly zero.

    Ridge and exclusive lasso have no finite value; their grids anchor at the
    lasso value.
    """
    if spec is not None:
        kind = spec.kind
    if kind == "generalized_lasso":
        from .genlasso import generalized_lambda_max
        return generalized_lambda_max(matrix, y, spec.d_spec)
    Xi, y, _ = prepare(matrix, y)
    ybar = y.mean()
    g = np.asarray(Xi.T @ (np.full_like(y, ybar) - y)).ravel()[:-1] / Xi.shape[0]
    if kind == "group_lasso":
        return max(float(np.linalg.norm(g[m])) / math.sqrt(len(m))
                   for m in spec.grouping.members())
    return float(np.abs(g).max(initial=0.0))


def default_grid(lam_max: float, n: int = 50, ratio: float = 1e-4) -> np.ndarray:
    return np.logspace(math.log10(lam_max), math.log10(lam_max * ratio), n)


def _null_start(Xi, y):
    beta = np.zeros(Xi.shape[1])
    ybar = min(max(y.mean(), 1e-12), 1 - 1e-12)
    beta[-1] = math.log(ybar / (1 - ybar))
    return beta


def _solve_pd(H, rhs):
    # tiny diagonal damping keeps unidentified directions (zero columns,
    # collinear on-field blocks) from making the Newton system singular
    damp = 1e-12 * (1.0 + float(np.abs(np.diag(H)).max(initial=0.0)))
    try:
        c = linalg.cho_factor(H + damp * np.eye(H.shape[0]), check_finite=False)
        return linalg.cho_solve(c, rhs, check_finite=False)
    except linalg.LinAlgError:
        return np.linalg.lstsq(H, rhs, rcond=None)[0]


def _result(beta, spec, Xi, y, players, iters, converged, message="", **extra):
    g = glm.gradient(beta, Xi, y)
    return FitResult(beta=beta, lam=spec.lam, kind=spec.kind,
                     objective=objective(beta, Xi, y, spec), iterations=iters,
                     converged=converged, kkt_residual=kkt_residual(beta, g, spec),
                     players=players, message=message, extra=extra)


# --- ridge ---------------------------------------------------------------------

def fit_ridge(matrix, y=None, lam: float = 0.0, beta0=None, tol: float | None = None,
              max_iter: int = MAX_NEWTON) -> FitResult:
    """Minimise ``nll + lam ||beta||_2^2`` (intercept unpenalised) by Newton."""
    spec = PenaltySpec("ridge", lam)
    Xi, y, players = prepare(matrix, y)
    tol = KKT_TOL["ridge"] if tol is None else tol
    n, p = Xi.shape
    beta = _null_start(Xi, y) if beta0 is None else np.array(beta0, dtype=float)
    pen = np.ones(p); pen[-1] = 0.0
    F = objective(beta, Xi, y, spec)
    F_prev = math.inf
    for it in range(max_iter):
        eta = glm.linear_predictor(beta, Xi)
        if np.abs(eta).max(initial=0.0) > SATURATION:
            return _result(beta, spec, Xi, y, players, it, False,
                           "fitted probabilities saturated (separable data)")
        h = expit(eta)
        grad = np.asarray(Xi.T @ (h - y)).ravel() / n + 2.0 * lam * pen * beta
        kkt = float(np.abs(grad).max())
        if kkt <= tol and abs(F_prev - F) <= REL_TOL * max(1.0, abs(F)):
            return _result(beta, spec, Xi, y, players, it, True)
        H = glm.weighted_gram(Xi, h * (1 - h) / n)
        H[np.diag_indices(p)] += 2.0 * lam * pen
        d = _solve_pd(H, -grad)
        slope = float(grad @ d)
        t = 1.0
        for _ in range(60):
            F_new = objective(beta + t * d, Xi, y, spec)
            if F_new <= F + 1e-4 * t * slope + 1e-15 * abs(F):
                break
            t *= 0.5
        beta = beta + t * d
        F_prev, F = F, F_new
    return _result(beta, spec, Xi, y, players, max_iter, False, "iteration limit")


# --- proximal Newton for the non-smooth penalties -----------------------------

def _group_block_solve(evals, evecs, z, tau):
    """argmin_b 1/2 b'Ab - z'b + tau ||b||_2 with ``A = V diag(evals) V'``."""
    nz = float(np.linalg.norm(z))
    # a relative margin keeps a group that sits exactly on its threshold at zero
    if nz <= tau * (1.0 + 1e-12):
        return np.zeros_like(z)
    if tau == 0.0:
        return evecs @ ((evecs.T @ z) / evals)
    zt = evecs.T @ z

    def excess(mu):
        return float(np.linalg.norm(mu * zt / (evals + mu))) - tau

    lo = tau * evals.min() / (nz - tau)
    hi = tau * evals.max() / (nz - tau)
    if hi <= lo:
        mu = hi
    else:
        lo = max(lo * (1 - 1e-12), 1e-300)
        hi = hi * (1 + 1e-12)
        f_lo, f_hi = excess(lo), excess(hi)
        if f_lo * f_hi > 0:
            # the bracket is exact; only rounding can leave both ends on one side
            mu = lo if abs(f_lo) < abs(f_hi) else hi
        else:
            mu = brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return evecs @ (zt / (evals + mu))


def _bcd_group(H, q0, b0, members, weights, max_sweeps, tol):
    p = b0.shape[0]
    b = b0.copy()
    grad = q0.copy()
    damp = 1e-12 * (1.0 + float(np.abs(np.diag(H)).max()))
    blocks = []
    for m, w in zip(members, weights):
        A = H[np.ix_(m, m)] + damp * np.eye(len(m))
        ev, V = np.linalg.eigh(A)
        blocks.append((m, w, np.maximum(ev, damp), V))
    free = np.array([p - 1])
    Afree = H[p - 1, p - 1] + damp
    for sweep in range(max_sweeps):
        maxdelta = 0.0
        for m, w, ev, V in blocks:
            z = V @ (ev * (V.T @ b[m])) - grad[m]
            new = _group_block_solve(ev, V, z, w)
            delta = new - b[m]
            if np.any(delta):
                grad += H[:, m] @ delta
                b[m] = new
                maxdelta = max(maxdelta, float(np.sqrt(ev.max()) * np.abs(delta).max()))
        j = free[0]
        delta = -grad[j] / Afree
        if delta:
            grad += H[:, j] * delta
            b[j] += delta
            maxdelta = max(maxdelta, abs(delta) * math.sqrt(Afree))
        if maxdelta < tol:
            return b, sweep + 1
    return b, max_sweeps


def _inner_solve(spec, H, q, beta, inner_tol, sweeps_left):
    p = beta.shape[0]
    if spec.kind == "lasso":
        lam = np.full(p, spec.lam); lam[-1] = 0.0
        return cd_lasso(H, q, beta, lam, sweeps_left, inner_tol)
    if spec.kind == "exclusive_lasso":
        grp = np.append(np.asarray(spec.grouping.groups, dtype=np.int64), -1)
        return cd_exclusive(H, q, beta, grp, spec.grouping.n_groups, spec.lam,
                            sweeps_left, inner_tol)
    members = spec.grouping.members()
    weights = [spec.lam * math.sqrt(len(m)) for m in members]
    return _bcd_group(H, q, beta, members, weights, sweeps_left, inner_tol)


def _prox_newton(spec, matrix, y, beta0, tol, max_sweeps):
    Xi, y, players = prepare(matrix, y)
    if spec.grouping is not None and len(spec.grouping.groups) != Xi.shape[1] - 1:
        raise ConfigurationError(
            f"grouping covers {len(spec.grouping.groups)} columns, matrix has {Xi.shape[1] - 1}")
    tol = KKT_TOL[spec.kind] if tol is None else tol
    n, p = Xi.shape
    beta = _null_start(Xi, y) if beta0 is None else np.array(beta0, dtype=float)
    F = objective(beta, Xi, y, spec)
    F_prev = math.inf
    sweeps = 0
    for it in range(MAX_NEWTON):
        eta = glm.linear_predictor(beta, Xi)
        if np.abs(eta).max(initial=0.0) > SATURATION:
            return _result(beta, spec, Xi, y, players, sweeps, False,
                           "fitted probabilities saturated (separable data)")
        h = expit(eta)
        g = np.asarray(Xi.T @ (h - y)).ravel() / n
        kkt = kkt_residual(beta, g, spec)
        if kkt <= tol and abs(F_prev - F) <= REL_TOL * max(1.0, abs(F)):
            return _result(beta, spec, Xi, y, players, sweeps, True)
        if sweeps >= max_sweeps:
            break
        H = np.ascontiguousarray(glm.weighted_gram(Xi, h * (1 - h) / n))
        inner_tol = max(min(1e-4, 1e-2 * kkt), 1e-15)
        target, used = _inner_solve(spec, H, g, beta, inner_tol, max_sweeps - sweeps)
        sweeps += used
        d = target - beta
        P0 = spec.value(beta[:-1])
        delta = float(g @ d) + spec.value(target[:-1]) - P0
        t = 1.0
        for _ in range(60):
            cand = beta + t * d
            F_new = objective(cand, Xi, y, spec)
            if F_new <= F + 1e-4 * t * delta + 1e-15 * abs(F):
                break
            t *= 0.5
        beta = cand
        F_prev, F = F, F_new
    return _result(beta, spec, Xi, y, players, sweeps, False, "sweep limit")


def fit_lasso(matrix, y=None, lam: float = 0.0, beta0=None, tol=None,
              max_sweeps: int = MAX_SWEEPS) -> FitResult:
    """Minimise ``nll + lam ||beta||_1``; exact zeros are returned as zeros."""
    return _prox_newton(PenaltySpec("lasso", lam), matrix, y, beta0, tol, max_sweeps)


def fit_group_lasso(matrix, y=None, lam: float = 0.0, grouping: GroupingScheme = None,
                    beta0=None, tol=None, max_sweeps: int = MAX_SWEEPS) -> FitResult:
    """Minimise ``nll + lam sum_l sqrt(p_l) ||beta_l||_2``."""
    return _prox_newton(PenaltySpec("group_lasso", lam, grouping), matrix, y, beta0, tol,
                        max_sweeps)


def fit_exclusive_lasso(matrix, y=None, lam: float = 0.0, grouping: GroupingScheme = None,
                        beta0=None, tol=None, max_sweeps: int = MAX_SWEEPS) -> FitResult:
    """Minimise ``nll + lam/2 sum_l ||beta_l||_1^2``."""
    return _prox_newton(PenaltySpec("exclusive_lasso", lam, grouping), matrix, y, beta0, tol,
                        max_sweeps)


def fit(matrix, y, spec: PenaltySpec, beta0=None, **kw) -> FitResult:
    if spec.kind == "ridge":
        return fit_ridge(matrix, y, spec.lam, beta0=beta0, **kw)
    if spec.kind == "generalized_lasso":
        from .genlasso import fit_generalized_lasso
        return fit_generalized_lasso(matrix, y, spec.lam, spec.d_spec, beta0=beta0, **kw)
    return _prox_newton(spec, matrix, y, beta0, kw.get("tol"), kw.get("max_sweeps", MAX_SWEEPS))


def fit_path(matrix, y, spec: PenaltySpec, grid, **kw) -> list[FitResult]:
    """Warm-started fits along a descending lambda grid."""
    grid = [float(l) for l in grid]
    if any(a < b for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("lambda grid must be sorted in descending order")
    out, beta = [], None
    for lam in grid:
        res = fit(matrix, y, spec.with_lambda(lam), beta0=beta, **kw)
        out.append(res)
        beta = res.beta
    return out


# --- flat record file ---------------------------------------------------------

FIT_CSV_HEADER = ("player_id", "position", "beta_inv", "beta_of", "lambda", "penalty_kind")


def write_fit_csv(fit: FitResult, positions: dict | None = None, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(header.rstrip("\n") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIT_CSV_HEADER)
    for p, (bi, bo) in fit.pairs().items():
        w.writerow([p, (positions or {}).get(p, ""), repr(bi), repr(bo), repr(fit.lam), fit.kind])
    return buf.getvalue()


def read_fit_csv(text: str) -> FitResult:
    rows = list(csv.DictReader(ln for ln in text.splitlines() if not ln.startswith("#")))
    if not rows:
        raise ConfigurationError("empty fit file")
    players = tuple(r["player_id"] for r in rows)
    beta = np.array([float(r["beta_inv"]) for r in rows]
                    + [float(r["beta_of"]) for r in rows] + [0.0])
    return FitResult(beta=beta, lam=float(rows[0]["lambda"]), kind=rows[0]["penalty_kind"],
                     objective=float("nan"), iterations=0, converged=True,
                     kkt_residual=float("nan"), players=players,
                     extra={"positions": {r["player_id"]: r["position"] for r in rows}})
