"""Independent reference implementations used to check the library."""

from itertools import combinations

import mpmath
import numpy as np


def normal_quantile(p: float, dps: int = 40) -> float:
    """High-precision normal quantile by root-finding on the erf-based CDF."""
    with mpmath.workdps(dps):
        p = mpmath.mpf(p)
        cdf = lambda x: (1 + mpmath.erf(x / mpmath.sqrt(2))) / 2 - p
        return float(mpmath.findroot(cdf, mpmath.sqrt(2) * mpmath.erfinv(2 * p - 1)))


def midranks(values) -> np.ndarray:
    """Average of the 1-based positions each value occupies in a stable sort."""
    values = list(values)
    order = sorted(range(len(values)), key=lambda i: values[i])
    pos = {}
    for k, i in enumerate(order, start=1):
        pos.setdefault(values[i], []).append(k)
    return np.array([np.mean(pos[v]) for v in values])


def check_objective(design, response, weights, tau, coef) -> float:
    r = np.asarray(response) - np.asarray(design) @ np.asarray(coef)
    return float(np.sum(np.asarray(weights) * r * (tau - (r < 0))))


def vertex_qr(design, response, weights, tau) -> tuple[float, np.ndarray]:
    """Minimum of the weighted check loss over all exact-interpolation vertices."""
    design = np.asarray(design, float)
    response = np.asarray(response, float)
    weights = np.asarray(weights, float)
    rows = np.flatnonzero(weights > 0)
    q = design.shape[1]
    best, best_coef = np.inf, None
    for subset in combinations(rows, q):
        sub = design[list(subset)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        coef = np.linalg.solve(sub, response[list(subset)])
        val = check_objective(design, response, weights, tau, coef)
        if val < best:
            best, best_coef = val, coef
    return best, best_coef


def loo_local_linear_bandwidth(x, y, grid) -> float:
    """Bandwidth minimising leave-one-out squared error of a Gaussian local-linear mean fit."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    best_h, best_err = None, np.inf
    for h in grid:
        d = x[:, None] - x[None, :]
        w = np.exp(-0.5 * (d / h) ** 2)
        np.fill_diagonal(w, 0.0)
        s0 = w.sum(1)
        s1 = (w * d).sum(1)
        s2 = (w * d * d).sum(1)
        t0 = w @ y
        t1 = (w * d) @ y
        fit = (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1)
        err = float(np.mean((y - fit) ** 2))
        if err < best_err:
            best_h, best_err = h, err
    return best_h
