"""Cross-validated choice of the penalty level.

Folds are stratified on the goal indicator: with only about one positive in
seventy-five rows, unstratified folds can end up with no goals at all.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import glm
from .design import PossessionMatrix
from .errors import PlanningError
from .solvers import PenaltySpec, fit_path, prepare


@dataclass(frozen=True)
class CVPlan:
    folds: np.ndarray        # row -> fold index
    n_folds: int
    stratified: bool
    seed: int

    def test_rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.folds == k)

    def train_rows(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.folds != k)


def make_plan(y, n_folds: int = 10, stratified: bool = True, seed: int = 0) -> CVPlan:
    """Assign rows to folds.

    Stratified plans shuffle the positives and deal them round-robin over the
    folds, then do the same for the negatives, so fold positive counts differ
    by at most one.
    """
    y = np.asarray(y)
    n = y.size
    if n_folds < 2:
        raise PlanningError(f"need at least 2 folds, got {n_folds}")
    if n < n_folds:
        raise PlanningError(f"{n} rows cannot fill {n_folds} folds")
    pos = np.flatnonzero(y == 1)
    if pos.size == 0 or pos.size == n:
        raise PlanningError("response is constant; every fold would be degenerate")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=int)
    if stratified:
        if pos.size < n_folds:
            raise PlanningError(
                f"only {pos.size} positives for {n_folds} stratified folds: some fold has none")
        neg = np.flatnonzero(y != 1)
        start = 0
        for rows in (pos, neg):
            perm = rng.permutation(rows)
            folds[perm] = (start + np.arange(perm.size)) % n_folds
            # continue dealing where the positives stopped to balance fold sizes
            start = (start + perm.size) % n_folds
    else:
        perm = rng.permutation(n)
        folds[perm] = np.arange(n) % n_folds
    return CVPlan(folds, n_folds, stratified, seed)


@dataclass
class CVResult:
    grid: np.ndarray
    mean_deviance: np.ndarray
    se_deviance: np.ndarray
    fold_deviance: np.ndarray    # folds x grid
    selected_lambda: float
    selected_index: int
    plan: CVPlan
    all_converged: bool

    def report_csv(self, header: str | None = None) -> str:
        lines = [header.rstrip("\n")] if header else []
        lines.append("lambda,mean_deviance,se_deviance,fold_count,seed")
        for lam, m, s in zip(self.grid, self.mean_deviance, self.se_deviance):
            lines.append(f"{float(lam)!r},{float(m)!r},{float(s)!r},{self.plan.n_folds},"
                         f"{self.plan.seed}")
        return "\n".join(lines) + "\n"


def _rows(X, idx):
    return X[idx] if not sparse.issparse(X) else X.tocsr()[idx]


def cross_validate(matrix, y, spec: PenaltySpec, grid, plan: CVPlan, **fit_kw) -> CVResult:
    """Held-out scaled deviance along ``grid`` for every fold; pick the minimum mean."""
    if isinstance(matrix, PossessionMatrix):
        y = matrix.y if y is None else y
        X = matrix.X
    else:
        X = matrix
    y = np.asarray(y, dtype=float)
    if plan.folds.size != y.size:
        raise PlanningError("plan does not match the number of rows")
    grid = np.asarray(grid, dtype=float)
    dev = np.empty((plan.n_folds, grid.size))
    converged = True
    Xr = X.tocsr() if sparse.issparse(X) else np.asarray(X, dtype=float)
    for k in range(plan.n_folds):
        tr, te = plan.train_rows(k), plan.test_rows(k)
        if plan.stratified and not np.any(y[te] == 1):
            raise PlanningError(f"fold {k} has no positives")
        path = fit_path(_rows(Xr, tr), y[tr], spec, grid, **fit_kw)
        Xte, yte, _ = prepare(_rows(Xr, te), y[te])
        for j, res in enumerate(path):
            converged &= res.converged
            dev[k, j] = glm.deviance(res.beta, Xte, yte)
    mean = dev.mean(axis=0)
    se = dev.std(axis=0, ddof=1) / np.sqrt(plan.n_folds)
    best = int(np.argmin(mean))
    return CVResult(grid, mean, se, dev, float(grid[best]), best, plan, converged)
