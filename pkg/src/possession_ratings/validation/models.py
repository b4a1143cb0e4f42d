"""Match-outcome models driven by a single strength-difference covariate.

Ordered logistic regression (OLR) on the outcome A < D < H, and a bivariate
Poisson model (BP) on the goal counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import minimize
from scipy.special import expit, gammaln

from ..errors import ConvergenceError, PlanningError

GOAL_CAP = 15


@dataclass(frozen=True)
class Forecast:
    p_home: float
    p_draw: float
    p_away: float

    def __post_init__(self):
        p = (self.p_home, self.p_draw, self.p_away)
        if min(p) < 0 or max(p) > 1 or abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"not a probability vector: {p}")

    def prob(self, outcome: str) -> float:
        return {"H": self.p_home, "D": self.p_draw, "A": self.p_away}[outcome]

    def vector(self) -> np.ndarray:
        """Probabilities in (H, D, A) order."""
        return np.array([self.p_home, self.p_draw, self.p_away])


def _forecast(pH, pD, pA) -> Forecast:
    v = np.clip(np.array([pH, pD, pA], dtype=float), 0.0, 1.0)
    v = v / v.sum()
    # put any residual rounding into the largest entry
    v[np.argmax(v)] += 1.0 - v.sum()
    return Forecast(*map(float, v))


def _check_training(n, outcomes):
    if n < 3:
        raise PlanningError(f"need at least 3 training matches, got {n}")
    if len(set(np.asarray(outcomes).tolist())) < 2:
        raise PlanningError("training outcomes take a single value")


# --- ordered logistic -------------------------------------------------------------------

@dataclass(frozen=True)
class OLRModel:
    theta: tuple          # (theta_1, theta_2), theta_1 < theta_2
    gamma: float
    se: tuple             # standard errors of (theta_1, theta_2, gamma); gamma's is nan if fixed
    loglik: float
    grad_norm: float
    diverged: bool = False

    def forecast(self, delta: float) -> Forecast:
        a1 = self.theta[0] - self.gamma * delta
        a2 = self.theta[1] - self.gamma * delta
        pA = expit(a1)
        pH = expit(-a2)
        return _forecast(pH, 1.0 - pA - pH, pA)


def _olr_terms(params, delta, y, with_gamma):
    """Log-likelihood, gradient and Hessian in (theta_1, theta_2[, gamma])."""
    th1, th2 = params[0], params[1]
    gam = params[2] if with_gamma else 0.0
    a = np.stack([th1 - gam * delta, th2 - gam * delta])      # 2 x n
    F = expit(a)
    f = F * (1 - F)
    fp = f * (1 - 2 * F)
    n = y.size
    P = np.where(y == 0, F[0], np.where(y == 2, expit(-a[1]), F[1] - F[0]))
    ll = float(np.sum(np.log(P)))
    has_u = y <= 1        # upper threshold index y (0 -> a1, 1 -> a2)
    has_l = y >= 1        # lower threshold index y-1
    iu = np.minimum(y, 1)
    il = np.maximum(y - 1, 0)
    fu = np.where(has_u, f[iu, np.arange(n)], 0.0)
    fl = np.where(has_l, f[il, np.arange(n)], 0.0)
    fpu = np.where(has_u, fp[iu, np.arange(n)], 0.0)
    fpl = np.where(has_l, fp[il, np.arange(n)], 0.0)
    du = fu / P
    dl = -fl / P
    huu = fpu / P - du ** 2
    hll = -fpl / P - dl ** 2
    hul = -du * dl          # = fu fl / P^2
    k = 3 if with_gamma else 2
    Ju = np.zeros((n, k)); Jl = np.zeros((n, k))
    Ju[np.arange(n), iu] = has_u
    Jl[np.arange(n), il] = has_l
    if with_gamma:
        Ju[:, 2] = -delta * has_u
        Jl[:, 2] = -delta * has_l
    g = Ju.T @ du + Jl.T @ dl
    H = (Ju * huu[:, None]).T @ Ju + (Jl * hll[:, None]).T @ Jl \
        + (Ju * hul[:, None]).T @ Jl + (Jl * hul[:, None]).T @ Ju
    return ll, g, H


def fit_olr(outcomes, delta, tol: float = 1e-8, max_iter: int = 200) -> OLRModel:
    """Proportional-odds maximum likelihood, ``P(Y <= j) = logistic(theta_j - gamma delta)``.

    ``outcomes`` are codes 0 (A), 1 (D), 2 (H). When ``delta`` is identically
    zero the slope is fixed at 0 and only the thresholds are fitted.
    """
    y = np.asarray(outcomes, dtype=int)
    delta = np.asarray(delta, dtype=float)
    _check_training(y.size, y)
    with_gamma = bool(np.any(delta != 0))
    c = np.array([np.mean(y == 0), np.mean(y <= 1)])
    c = np.clip(c, 1e-3, 1 - 1e-3)
    if c[1] <= c[0]:
        c[1] = min(c[0] + 1e-3, 1 - 1e-4)
    params = np.log(c / (1 - c))
    if with_gamma:
        params = np.append(params, 0.0)
    ll, g, H = _olr_terms(params, delta, y, with_gamma)
    diverged = False
    for _ in range(max_iter):
        if np.abs(g).max() <= tol * y.size:
            break
        try:
            step = linalg.solve(-H, g, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = g / max(np.abs(np.diag(H)).max(), 1.0)
        t = 1.0
        while t > 1e-12:
            cand = params + t * step
            if cand[0] < cand[1]:
                ll_c, g_c, H_c = _olr_terms(cand, delta, y, with_gamma)
                if ll_c >= ll - 1e-12 * abs(ll):
                    break
            t *= 0.5
        if t <= 1e-12:
            break
        params, ll, g, H = cand, ll_c, g_c, H_c
        if np.abs(params[:2]).max() > 50:
            diverged = True
            break
    gnorm = float(np.abs(g).max()) / y.size
    try:
        cov = linalg.inv(-H)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except linalg.LinAlgError:
        se = np.full(params.size, np.nan)
    if not with_gamma:
        se = np.append(se, np.nan)
    diverged = diverged or gnorm > tol
    return OLRModel((float(params[0]), float(params[1])),
                    float(params[2]) if with_gamma else 0.0,
                    tuple(map(float, se)), ll, gnorm, diverged)


def simulate_olr(theta, gamma, delta, rng) -> np.ndarray:
    a = np.stack([theta[0] - gamma * delta, theta[1] - gamma * delta])
    F = expit(a)
    u = rng.random(delta.size)
    return np.where(u < F[0], 0, np.where(u < F[1], 1, 2))


# --- bivariate Poisson -------------------------------------------------------------------

def bp_logpmf(x, y, lam1, lam2, lam3):
    """Joint log-mass of the bivariate Poisson with covariance ``lam3``."""
    x = np.asarray(x, dtype=int); y = np.asarray(y, dtype=int)
    lam1, lam2, lam3 = np.broadcast_arrays(np.asarray(lam1, float), np.asarray(lam2, float),
                                           np.asarray(lam3, float))
    base = -(lam1 + lam2 + lam3) + x * np.log(lam1) + y * np.log(lam2) \
        - gammaln(x + 1) - gammaln(y + 1)
    log_s, _ = _log_sum(x, y, lam3 / (lam1 * lam2))
    return base + log_s


def _log_sum(x, y, rho):
    """``log S`` and ``S'/S`` with ``S = sum_k C(x,k) C(y,k) k! rho^k``.

    ``S'/S`` is the derivative of log S with respect to log rho.
    """
    x, y, rho = np.broadcast_arrays(np.asarray(x), np.asarray(y), np.asarray(rho, float))
    shape = x.shape
    x, y, rho = x.ravel(), y.ravel(), rho.ravel()
    m = np.minimum(x, y)
    K = int(m.max(initial=0))
    k = np.arange(K + 1)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = gammaln(x + 1) - gammaln(x - k + 1) - gammaln(k + 1) \
            + gammaln(y + 1) - gammaln(y - k + 1) + k * np.log(np.where(rho > 0, rho, 1.0))
    valid = (k <= m) & ((k == 0) | (rho > 0))
    logc = np.where(valid, logc, -np.inf)
    top = logc.max(axis=0)
    w = np.exp(logc - top)
    S = w.sum(axis=0)
    return (top + np.log(S)).reshape(shape), ((k * w).sum(axis=0) / S).reshape(shape)


@dataclass(frozen=True)
class BPModel:
    mu: float
    home: float
    gamma: float
    lam3: float
    se: tuple            # (mu, home, gamma, log lam3)
    loglik: float
    grad_norm: float

    def intensities(self, delta):
        l1 = np.exp(self.mu + self.home + self.gamma * np.asarray(delta, float))
        l2 = np.exp(self.mu - self.gamma * np.asarray(delta, float))
        return l1, l2, self.lam3

    def score_grid(self, delta: float, cap: int = GOAL_CAP) -> np.ndarray:
        l1, l2, l3 = self.intensities(delta)
        g = np.arange(cap + 1)
        X, Y = np.meshgrid(g, g, indexing="ij")
        return np.exp(bp_logpmf(X, Y, l1, l2, max(l3, 1e-300)))

    def forecast(self, delta: float, cap: int = GOAL_CAP) -> Forecast:
        P = self.score_grid(delta, cap)
        total = P.sum()
        return _forecast(np.tril(P, -1).sum() / total, np.trace(P) / total,
                         np.triu(P, 1).sum() / total)


def _bp_nll(params, hg, ag, delta, with_gamma):
    mu, h, gam, c = params if with_gamma else (params[0], params[1], 0.0, params[2])
    l1 = np.exp(mu + h + gam * delta)
    l2 = np.exp(mu - gam * delta)
    l3 = math.exp(c)
    rho = l3 / (l1 * l2)
    log_s, T = _log_sum(hg, ag, rho)
    ll = -(l1 + l2 + l3) + hg * np.log(l1) + ag * np.log(l2) \
        - gammaln(hg + 1) - gammaln(ag + 1) + log_s
    A1 = hg - l1 - T
    A2 = ag - l2 - T
    n = hg.size
    g = [np.sum(A1 + A2), np.sum(A1)]
    if with_gamma:
        g.append(np.sum(delta * (A1 - A2)))
    g.append(np.sum(T) - n * l3)
    return -float(ll.sum()) / n, -np.array(g) / n


def fit_bp(home_goals, away_goals, delta, tol: float = 1e-6) -> BPModel:
    """Bivariate Poisson maximum likelihood by BFGS with ``lam3 = exp(c)``."""
    hg = np.asarray(home_goals, dtype=int)
    ag = np.asarray(away_goals, dtype=int)
    delta = np.asarray(delta, dtype=float)
    outcome = np.sign(hg - ag)
    _check_training(hg.size, outcome)
    with_gamma = bool(np.any(delta != 0))
    m1, m2 = max(hg.mean(), 1e-3), max(ag.mean(), 1e-3)
    x0 = [math.log(m2), math.log(m1 / m2)] + ([0.0] if with_gamma else []) + [math.log(0.05)]
    fun = lambda p: _bp_nll(p, hg, ag, delta, with_gamma)
    # line searches may probe overflowing intensities; they come back as inf/nan
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        res = minimize(fun, np.array(x0), jac=True, method="BFGS",
                       options={"gtol": tol * 1e-2, "maxiter": 2000})
        f, g = fun(res.x)
    gnorm = float(np.linalg.norm(g))
    if not np.isfinite(f) or gnorm > tol:
        raise ConvergenceError(
            f"bivariate Poisson fit did not converge: |grad|={gnorm:.2e}, "
            f"params={np.round(res.x, 6).tolist()}, {res.message}")
    # observed information by central differences of the analytic gradient
    k = res.x.size
    H = np.empty((k, k))
    for j in range(k):
        e = np.zeros(k); e[j] = 1e-5
        H[:, j] = (fun(res.x + e)[1] - fun(res.x - e)[1]) / 2e-5
    H = 0.5 * (H + H.T) * hg.size
    try:
        se = np.sqrt(np.maximum(np.diag(linalg.inv(H)), 0.0))
    except linalg.LinAlgError:
        se = np.full(k, np.nan)
    p = res.x
    if with_gamma:
        mu, h, gam, c = p
        se_t = tuple(map(float, se))
    else:
        mu, h, c = p; gam = 0.0
        se_t = (float(se[0]), float(se[1]), float("nan"), float(se[2]))
    return BPModel(float(mu), float(h), float(gam), float(math.exp(c)), se_t,
                   -f * hg.size, gnorm)


def simulate_bp(mu, home, gamma, lam3, delta, rng):
    l1 = np.exp(mu + home + gamma * delta)
    l2 = np.exp(mu - gamma * delta)
    z = rng.poisson(lam3, delta.size)
    return rng.poisson(l1) + z, rng.poisson(l2) + z
