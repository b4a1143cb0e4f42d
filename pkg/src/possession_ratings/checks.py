"""Random small instances on which every solver is compared with the reference solver."""
from __future__ import annotations

import numpy as np

from .design import GroupingScheme
from .genlasso import DMatrixSpec, fit_generalized_lasso
from .oracle import reference_solve
from .solvers import PenaltySpec, fit, lambda_max

TOLERANCE = {"ridge": 1e-6, "lasso": 1e-6, "group_lasso": 1e-6, "exclusive_lasso": 1e-6,
             "generalized_lasso": 1e-5}
CHECK_KINDS = ("ridge", "lasso", "group_lasso", "exclusive_lasso", "generalized_lasso/splitting",
               "generalized_lasso/conic")


def random_instance(rng, max_players: int = 15, max_rows: int = 500):
    """Possession-like design: 0/1 involvement block and a -1/0/+1 on-field block."""
    k = int(rng.integers(2, max_players + 1))
    n = int(rng.integers(40, max_rows + 1))
    inv = (rng.random((n, k)) < rng.uniform(0.1, 0.5)).astype(float)
    of = rng.choice([-1.0, 0.0, 1.0], size=(n, k), p=[0.35, 0.3, 0.35])
    X = np.hstack([inv, of])
    beta = rng.normal(0, 0.4, 2 * k)
    p = 1 / (1 + np.exp(-(X @ beta + rng.uniform(-2.0, 0.0))))
    y = (rng.random(n) < p).astype(float)
    if y.min() == y.max():
        y[0] = 1.0 - y[0]
    n_groups = int(rng.integers(1, min(4, 2 * k) + 1))
    labels = np.concatenate([np.arange(n_groups), rng.integers(0, n_groups, 2 * k - n_groups)])
    grouping = GroupingScheme.from_labels("random", labels.tolist())
    return X, y, k, grouping


def instance_specs(X, y, k, grouping, rng):
    lm = lambda_max(X, y, kind="lasso")
    frac = float(np.exp(rng.uniform(np.log(0.01), np.log(0.9))))
    d = DMatrixSpec.for_players(k)
    return {
        "ridge": PenaltySpec("ridge", lm * frac),
        "lasso": PenaltySpec("lasso", lm * frac),
        "group_lasso": PenaltySpec("group_lasso", lm * frac, grouping=grouping),
        "exclusive_lasso": PenaltySpec("exclusive_lasso", lm * frac, grouping=grouping),
        "generalized_lasso": PenaltySpec("generalized_lasso", lm * frac / max(1, k // 2),
                                         d_spec=d),
    }


def oracle_agreement(n_instances: int = 50, seed: int = 0, kinds=CHECK_KINDS):
    """Yield one record per (instance, solver) with the objective gap to the reference."""
    rng = np.random.default_rng(seed)
    for i in range(n_instances):
        X, y, k, grouping = random_instance(rng)
        specs = instance_specs(X, y, k, grouping, rng)
        refs = {}
        for name in kinds:
            kind, _, backend = name.partition("/")
            spec = specs[kind]
            if kind not in refs:
                refs[kind] = reference_solve(X, y, spec)
            ref = refs[kind]
            if kind == "generalized_lasso":
                res = fit_generalized_lasso(X, y, spec.lam, spec.d_spec, backend=backend)
            else:
                res = fit(X, y, spec)
            diff = res.objective - ref.objective
            tol = TOLERANCE[kind]
            yield {"instance": i, "kind": name, "n_rows": X.shape[0], "n_cols": X.shape[1],
                   "objective": repr(res.objective), "reference": repr(ref.objective),
                   "difference": f"{diff:.3e}", "tolerance": tol, "converged": res.converged,
                   "certified": ref.certified, "kkt": res.kkt_residual,
                   "ok": bool(abs(diff) <= tol and ref.certified and res.converged)}
