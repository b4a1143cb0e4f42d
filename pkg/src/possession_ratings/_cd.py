"""Coordinate-descent kernels for the quadratic subproblems of proximal Newton.

Each kernel minimises

    q0'(b - b0) + 1/2 (b - b0)' H (b - b0) + penalty(b)

over ``b`` starting from ``b0``. ``H`` must be symmetric with C-contiguous rows.
Coordinates are visited in fixed index order.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _soft(z, t):
    # below a relative margin of the threshold the coordinate stays at zero, so
    # ties broken by rounding do not leave 1e-16 entries behind
    if abs(z) <= t * (1.0 + 1e-12):
        return 0.0
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def cd_lasso(H, q0, b0, lam, max_sweeps, tol):
    """Weighted l1 penalty ``sum_j lam[j] |b_j|``; ``lam[j] = 0`` leaves j free."""
    p = b0.shape[0]
    b = b0.copy()
    grad = q0.copy()
    for sweep in range(max_sweeps):
        maxdelta = 0.0
        for j in range(p):
            a = H[j, j]
            if a <= 0.0:
                continue
            z = a * b[j] - grad[j]
            new = _soft(z, lam[j]) / a
            delta = new - b[j]
            if delta != 0.0:
                row = H[j]
                for k in range(p):
                    grad[k] += delta * row[k]
                b[j] = new
                d = abs(delta) * np.sqrt(a)
                if d > maxdelta:
                    maxdelta = d
        if maxdelta < tol:
            return b, sweep + 1
    return b, max_sweeps


@njit(cache=True)
def cd_exclusive(H, q0, b0, group, n_groups, lam, max_sweeps, tol):
    """Exclusive penalty ``lam/2 sum_l ||b_l||_1^2``; ``group[j] < 0`` leaves j free.

    With ``S`` the l1 mass of the other members of j's group, the exact
    coordinate minimiser is ``soft(a b_j - g_j, lam S) / (a + lam)``.
    """
    p = b0.shape[0]
    b = b0.copy()
    grad = q0.copy()
    mass = np.zeros(n_groups)
    for sweep in range(max_sweeps):
        # recomputed each sweep so rounding in the running sums cannot drift
        mass[:] = 0.0
        for j in range(p):
            if group[j] >= 0:
                mass[group[j]] += abs(b[j])
        maxdelta = 0.0
        for j in range(p):
            a = H[j, j]
            g = group[j]
            z = a * b[j] - grad[j]
            if g < 0:
                if a <= 0.0:
                    continue
                new = z / a
            else:
                other = mass[g] - abs(b[j])
                if other < 0.0:
                    other = 0.0
                new = _soft(z, lam * other) / (a + lam)
                mass[g] = other + abs(new)
            delta = new - b[j]
            if delta != 0.0:
                row = H[j]
                for k in range(p):
                    grad[k] += delta * row[k]
                b[j] = new
                d = abs(delta) * np.sqrt(a + (lam if g >= 0 else 0.0))
                if d > maxdelta:
                    maxdelta = d
        if maxdelta < tol:
            return b, sweep + 1
    return b, max_sweeps
