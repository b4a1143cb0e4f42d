"""Scaled binomial negative log-likelihood and derivatives.

All functions use the ``1/n`` scaling. ``X`` may be a dense array or any
scipy sparse matrix; the caller decides whether an intercept column is part
of it.
"""
import numpy as np
from scipy import sparse
from scipy.special import expit


def _check(beta, X, y):
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise ValueError("non-finite coefficients")
    if X.shape[1] != beta.shape[0] or X.shape[0] != np.shape(y)[0]:
        raise ValueError(f"dimension mismatch: X{X.shape}, beta{beta.shape}, y{np.shape(y)}")
    return beta


def linear_predictor(beta, X):
    return np.asarray(X @ beta).ravel()


def nll_from_eta(eta, y) -> float:
    # softplus(eta) - y*eta, stable for any eta
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def nll(beta, X, y) -> float:
    """``-(1/n) sum[y log h + (1-y) log(1-h)]`` with ``h = expit(X beta)``."""
    beta = _check(beta, X, y)
    return nll_from_eta(linear_predictor(beta, X), np.asarray(y, dtype=float))


def gradient(beta, X, y) -> np.ndarray:
    """``(1/n) X^T (h - y)``."""
    beta = _check(beta, X, y)
    r = expit(linear_predictor(beta, X)) - y
    return np.asarray(X.T @ r).ravel() / X.shape[0]


def hessian(beta, X, y) -> np.ndarray:
    """Dense ``(1/n) X^T diag(h(1-h)) X``."""
    beta = _check(beta, X, y)
    h = expit(linear_predictor(beta, X))
    return weighted_gram(X, h * (1.0 - h) / X.shape[0])


def weighted_gram(X, w) -> np.ndarray:
    if sparse.issparse(X):
        Xw = sparse.diags(w) @ X
        return np.asarray((X.T @ Xw).toarray())
    return (X * w[:, None]).T @ X


def deviance(beta, X, y) -> float:
    """Scaled binomial deviance, ``2 * nll`` for 0/1 responses."""
    return 2.0 * nll(beta, X, y)
