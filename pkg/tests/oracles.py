"""Independent oracles used by the test suite.

Everything here deliberately avoids the library's solver paths: winner
determination is checked against exhaustive enumeration of item
assignments, and the SVR trainer against an accelerated projected
(proximal) gradient method on the same dual.
"""

from __future__ import annotations

import itertools

import numpy as np


def enumerate_assignments(m: int, n: int) -> np.ndarray:
    """(n+1)^m x n integer masks: row r assigns each item to one of the n
    bidders or to nobody; column i is bidder i's bundle mask."""
    total = (n + 1) ** m
    owners = np.empty((total, m), dtype=np.int64)
    ids = np.arange(total)
    for j in range(m):
        owners[:, j] = ids % (n + 1)
        ids = ids // (n + 1)
    masks = np.zeros((total, n), dtype=np.int64)
    for j in range(m):
        for i in range(n):
            masks[:, i] |= (owners[:, j] == i + 1) << j
    return masks


def brute_force_wdp(tables, m: int):
    """(best welfare, masks) over all feasible allocations, given per-bidder
    value tables indexed by bundle mask (use -inf to forbid a bundle)."""
    n = len(tables)
    masks = enumerate_assignments(m, n)
    welfare = np.zeros(len(masks))
    for i, V in enumerate(tables):
        welfare += np.asarray(V)[masks[:, i]]
    best = np.nanmax(welfare)
    idx = int(np.argmax(welfare))
    return float(best), [int(x) for x in masks[idx]]


def brute_force_wdp_reports(reports, economy=None):
    """Optimal reported welfare by trying every combination of reported (or
    empty) bundles; independent of the library's memoized search."""
    n = len(reports)
    econ = sorted(range(n) if economy is None else set(economy))
    m = reports[0].m

    def mask(bundle):
        return sum(1 << j for j, b in enumerate(bundle) if b)

    options = []
    for i in econ:
        opts = [(0, 0.0)]
        opts.extend((mask(r.bundle), r.value) for r in reports[i].reports)
        options.append(opts)
    best = 0.0
    for combo in itertools.product(*options):
        used = 0
        total = 0.0
        ok = True
        for mk, v in combo:
            if mk & used:
                ok = False
                break
            used |= mk
            total += v
        if ok and total > best:
            best = total
    return best


def svr_dual_prox(K: np.ndarray, y: np.ndarray, eps: float, c: float,
                  max_iter: int = 200_000, tol: float = 1e-9) -> np.ndarray:
    """Accelerated proximal gradient (FISTA) on the SVR dual in the
    theta = alpha - beta parametrization:

        maximize -0.5 theta' K theta + y' theta - eps * |theta|_1
        subject to -c <= theta <= c
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ell = len(y)
    L = max(float(np.linalg.eigvalsh(K).max()), 1e-12)
    step = 1.0 / L
    theta = np.zeros(ell)
    momentum = theta.copy()
    t = 1.0
    for _ in range(max_iter):
        grad = y - K @ momentum
        z = momentum + step * grad
        new = np.clip(np.sign(z) * np.maximum(np.abs(z) - step * eps, 0.0), -c, c)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum = new + (t - 1.0) / t_next * (new - theta)
        if np.abs(new - theta).max() <= tol:
            theta = new
            break
        theta, t = new, t_next
    return theta


def dual_value(K: np.ndarray, y: np.ndarray, theta: np.ndarray, eps: float) -> float:
    return float(-0.5 * theta @ K @ theta + y @ theta - eps * np.abs(theta).sum())


def quadratic_feature_map(X: np.ndarray, lam: float) -> np.ndarray:
    """Explicit features phi with phi(x).phi(z) = x.z + lam * (x.z)^2."""
    X = np.asarray(X, dtype=np.float64)
    pairs = np.einsum("ki,kj->kij", X, X).reshape(len(X), -1)
    return np.hstack([X, np.sqrt(lam) * pairs])
