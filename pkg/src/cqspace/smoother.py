"""Check loss, weighted linear quantile regression and local-linear quantile smoothing.

The weighted quantile regression problem

    minimize_c  sum_k w_k * rho_tau(y_k - D_k @ c)

is solved by a majorize-minimize (iteratively reweighted least squares)
scheme on the Huber-smoothed check loss, followed by an optional exact
vertex descent.  The descent walks between "basic" solutions that
interpolate ``q = D.shape[1]`` observations, which is where a minimizer of a
piecewise-linear convex objective always lives.

The batched smoother ``fitted_quantiles`` runs the same IRLS iteration for
all evaluation points at once, walks each fit to a nearby vertex with a
restricted exchange descent, certifies the vertex with the subgradient
optimality condition and falls back to the full descent when that fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtri

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Kernel weights below this fraction of K(0) are treated as zero.
KERNEL_FLOOR = 1e-12
MAX_DOUBLINGS = 10
IRLS_MAX_ITER = 50
IRLS_TOL = 1e-8
# smoothing continuation: eps starts at EPS_START * spread(y), shrinks by EPS_DECAY
EPS_START = 0.1
EPS_DECAY = 0.6
# batched smoother: exchange candidates and steps for the restricted vertex descent
DESCENT_CANDIDATES = 8
WIDE_CANDIDATES = 24
DESCENT_STEPS = 40
BATCH_IRLS_ITER = 15


class SmootherError(RuntimeError):
    pass


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return tau


def check_loss(u: ArrayLike, tau: float):
    """rho_tau(u) = u * (tau - 1{u < 0})."""
    tau = _check_tau(tau)
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 0, tau * u, (tau - 1.0) * u)
    return float(out) if out.ndim == 0 else out


def gaussian_product_kernel(z: ArrayLike) -> float | NDArray[np.float64]:
    """Product of standard normal densities over the last axis of ``z``."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z[None]
    d = z.shape[-1]
    out = np.exp(-0.5 * np.sum(z * z, axis=-1)) / _SQRT_2PI**d
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian product kernel with a single bandwidth.

    ``scales`` optionally rescales each projected coordinate before the
    bandwidth is applied (used for d* > 1 so one ``h`` fits all axes).
    """

    dim: int
    bandwidth: float
    kind: str = "gaussian"
    scales: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("kernel dim must be >= 1")
        if not self.bandwidth > 0 or not math.isfinite(self.bandwidth):
            raise ValueError(f"bandwidth must be positive and finite, got {self.bandwidth}")
        if self.kind != "gaussian":
            raise ValueError(f"unsupported kernel kind {self.kind!r}")
        if self.scales is not None and len(self.scales) != self.dim:
            raise ValueError("scales length must equal kernel dim")


@dataclass
class LocalFit:
    q_hat: float
    s_hat: NDArray[np.float64]
    effective_points: int
    bandwidth: float


# ---------------------------------------------------------------------------
# bandwidths


def normal_scale_bandwidth(x: ArrayLike) -> float:
    x = np.asarray(x, dtype=float)
    return 1.06 * float(np.std(x, ddof=1)) * x.size ** (-0.2)


def _block_fits(xs: NDArray, ys: NDArray, n_blocks: int) -> tuple[float, float] | None:
    """Residual sum of squares and summed squared second derivative of blockwise quartics."""
    edges = np.linspace(0, xs.size, n_blocks + 1).round().astype(int)
    rss = 0.0
    curv = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        xb, yb = xs[a:b], ys[a:b]
        # centre/scale for a well-conditioned polynomial fit
        c, s = xb.mean(), xb.std()
        if s <= 0:
            return None
        t = (xb - c) / s
        coef = np.polynomial.polynomial.polyfit(t, yb, 4)
        rss += float(np.sum((yb - np.polynomial.polynomial.polyval(t, coef)) ** 2))
        d2 = np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(coef, 2)) / s**2
        curv += float(np.sum(d2**2))
    return rss, curv


def _blocked_quartic_plugin(x: NDArray, y: NDArray, max_blocks: int) -> float:
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = xs.size
    max_blocks = max(1, min(max_blocks, n // 20))
    fits = {}
    for k in range(1, max_blocks + 1):
        res = _block_fits(xs, ys, k)
        if res is None:
            break
        fits[k] = res
    if not fits:
        return math.nan
    # Mallows' Cp picks the block count; variance reference from the finest blocking
    finest = max(fits)
    ref = fits[finest][0] / (n - 5 * finest)
    if ref > 0:
        n_blocks = min(fits, key=lambda k: fits[k][0] / ref - (n - 10 * k))
    else:
        n_blocks = finest
    rss, curv = fits[n_blocks]
    theta22 = curv / n
    sigma2 = rss / (n - 5 * n_blocks)
    spread = xs[-1] - xs[0]
    if not (theta22 > 0 and sigma2 > 0 and math.isfinite(theta22)):
        return math.nan
    # AMISE-optimal local linear bandwidth for a Gaussian kernel:
    # R(K) = 1/(2 sqrt(pi)), mu_2(K) = 1.
    h = (sigma2 * spread / (2.0 * math.sqrt(math.pi) * theta22 * n)) ** 0.2
    if not math.isfinite(h) or h <= 0 or h > spread:
        return math.nan
    return h


def mean_bandwidth(x: ArrayLike, y: ArrayLike, n_blocks: int = 4) -> float:
    """Direct plug-in bandwidth for local-linear mean regression of y on x.

    Curvature and residual variance come from quartic polynomial fits on
    equal-count blocks of the sorted data, with the number of blocks (at
    most ``n_blocks``) chosen by Mallows' Cp.  When those pilot
    fits are degenerate (no curvature signal, too few points, bandwidth
    exceeding the data range) the normal-scale rule
    ``1.06 * sd(x) * n^(-1/5)`` is returned instead.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if x.size < 2 or np.ptp(x) <= 0:
        raise ValueError("mean_bandwidth: x has zero spread")
    h = math.nan
    if x.size >= 10 * n_blocks:
        h = _blocked_quartic_plugin(x, y, n_blocks)
    if math.isnan(h):
        h = normal_scale_bandwidth(x)
    return h


def quantile_bandwidth(h_m: float, tau: float) -> float:
    """Rule-of-thumb quantile bandwidth ``h_m * [tau(1-tau) / phi(Phi^-1(tau))^2]^(1/5)``."""
    tau = _check_tau(tau)
    if not h_m > 0:
        raise ValueError("h_m must be positive")
    z = float(ndtri(tau))
    dens = math.exp(-0.5 * z * z) / _SQRT_2PI
    return h_m * (tau * (1.0 - tau) / dens**2) ** 0.2


def projection_bandwidth(u: NDArray, y: NDArray, tau: float, scale: float = 1.0) -> tuple[float, tuple[float, ...] | None]:
    """Bandwidth for smoothing ``y`` on projections ``u`` (n, d).

    For d > 1 each coordinate is standardized, ``h_m`` is computed per
    coordinate and combined by geometric mean; the coordinate standard
    deviations are returned as kernel scales.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float).T).T
    d = u.shape[1]
    if d == 1:
        h_m = mean_bandwidth(u[:, 0], y)
        return scale * quantile_bandwidth(h_m, tau), None
    sds = u.std(axis=0, ddof=1)
    if np.any(sds <= 0):
        raise ValueError("a projected coordinate has zero spread")
    hs = [mean_bandwidth(u[:, j] / sds[j], y) for j in range(d)]
    h_m = float(np.exp(np.mean(np.log(hs))))
    return scale * quantile_bandwidth(h_m, tau), tuple(float(s) for s in sds)


# ---------------------------------------------------------------------------
# weighted linear quantile regression


def qr_objective(design, response, weights, tau, coef) -> float:
    r = np.asarray(response) - np.asarray(design) @ np.asarray(coef)
    return float(np.sum(np.asarray(weights) * check_loss(r, tau)))


def _irls(D: NDArray, y: NDArray, w: NDArray, tau: float) -> NDArray:
    """Majorize-minimize iterations on the smoothed check loss.

    rho_tau(r) = (|r| + (2 tau - 1) r) / 2 and |r| <= r^2 / (2 s) + s / 2 with
    s = max(|r_0|, eps) give a quadratic majorizer; each step is one
    weighted least-squares solve.
    """
    spread = float(np.ptp(y)) or 1.0
    eps = EPS_START * spread
    floor = 1e-12 * spread
    lin = (2.0 * tau - 1.0) * (D.T @ w)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(D * sw[:, None], y * sw, rcond=None)
    for _ in range(IRLS_MAX_ITER):
        r = y - D @ coef
        a = w / np.maximum(np.abs(r), eps)
        lhs = (D * a[:, None]).T @ D
        rhs = D.T @ (a * y) + lin
        try:
            new = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError:
            new, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
        step = float(np.max(np.abs(new - coef)))
        coef = new
        if step < IRLS_TOL and eps <= floor:
            break
        eps = max(EPS_DECAY * eps, floor)
    return coef


def _initial_basis(D: NDArray, r: NDArray) -> list[int] | None:
    q = D.shape[1]
    basis: list[int] = []
    for k in np.argsort(np.abs(r), kind="stable"):
        trial = basis + [int(k)]
        if np.linalg.matrix_rank(D[trial]) == len(trial):
            basis = trial
            if len(basis) == q:
                return basis
    return None


def _vertex_descent(D: NDArray, y: NDArray, w: NDArray, tau: float, coef: NDArray, max_steps: int = 200) -> NDArray:
    """Exchange descent over interpolating solutions (exact line search along edges)."""
    m, q = D.shape
    basis = _initial_basis(D, y - D @ coef)
    if basis is None:
        return coef
    cur = np.linalg.solve(D[basis], y[basis])
    f_cur = qr_objective(D, y, w, tau, cur)
    for _ in range(max_steps):
        best_f, best = f_cur, None
        others = np.setdiff1d(np.arange(m), basis)
        if others.size == 0:
            break
        for j in range(q):
            mats = np.repeat(D[basis][None], others.size, axis=0)
            rhs = np.repeat(y[basis][None], others.size, axis=0)
            mats[:, j, :] = D[others]
            rhs[:, j] = y[others]
            dets = np.linalg.det(mats)
            ok = np.abs(dets) > 1e-12 * np.max(np.abs(dets), initial=1.0)
            if not np.any(ok):
                continue
            cands = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
            res = y[None, :] - cands @ D.T
            f = np.sum(w[None, :] * np.where(res >= 0, tau * res, (tau - 1.0) * res), axis=1)
            k = int(np.argmin(f))
            if f[k] < best_f - 1e-13 * (1.0 + abs(best_f)):
                best_f, best = float(f[k]), (j, int(others[ok][k]), cands[k])
        if best is None:
            break
        j, k, cur = best
        basis[j] = k
        f_cur = best_f
    return cur


def weighted_linear_qr(design: ArrayLike, response: ArrayLike, weights: ArrayLike, tau: float, exact: bool = True) -> NDArray[np.float64]:
    """Minimize ``sum_k weights_k * rho_tau(response_k - design_k @ coef)``.

    Parameters
    ----------
    design : (m, q) array, normally with a leading column of ones.
    response : (m,) array.
    weights : (m,) nonnegative array.
    tau : quantile level in (0, 1).
    exact : finish with vertex descent so the returned point is a true
        minimizer (up to floating point); otherwise the IRLS point or its
        nearest vertex, whichever has the smaller objective.
    """
    tau = _check_tau(tau)
    D = np.asarray(design, dtype=float)
    if D.ndim == 1:
        D = D[:, None]
    y = np.asarray(response, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if D.shape[0] != y.size or w.size != y.size:
        raise ValueError("design, response and weights must have matching rows")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    pos = w > 0
    if not np.any(pos):
        raise SmootherError("all weights are zero")
    Dp, yp, wp = D[pos], y[pos], w[pos]
    q = D.shape[1]
    if Dp.shape[0] < q or np.linalg.matrix_rank(Dp) < q:
        raise SmootherError(f"weighted design is rank deficient (need rank {q} from {Dp.shape[0]} weighted rows)")
    coef = _irls(Dp, yp, wp, tau)
    f_irls = qr_objective(Dp, yp, wp, tau, coef)
    if exact:
        vert = _vertex_descent(Dp, yp, wp, tau, coef)
    else:
        basis = _initial_basis(Dp, yp - Dp @ coef)
        vert = np.linalg.solve(Dp[basis], yp[basis]) if basis is not None else coef
    if qr_objective(Dp, yp, wp, tau, vert) <= f_irls:
        return vert
    return coef


# ---------------------------------------------------------------------------
# local-linear conditional quantiles


def _kernel_arg(projected: NDArray, points: NDArray, h: float, scales) -> NDArray:
    diff = projected[None, :, :] - points[:, None, :]
    if scales is not None:
        diff = diff / np.asarray(scales)[None, None, :]
    return diff / h


def local_linear_quantile(projected: ArrayLike, y: ArrayLike, eval_point: ArrayLike, tau: float, kernel: KernelConfig) -> LocalFit:
    """Kernel-weighted linear quantile fit centred at ``eval_point``.

    The bandwidth is doubled (at most ``MAX_DOUBLINGS`` times) until at least
    d* + 2 observations carry non-negligible kernel weight.
    """
    tau = _check_tau(tau)
    u = np.asarray(projected, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    y = np.asarray(y, dtype=float).ravel()
    e = np.atleast_1d(np.asarray(eval_point, dtype=float))
    n, d = u.shape
    if kernel.dim != d or e.size != d:
        raise ValueError(f"kernel dim {kernel.dim}, projection dim {d}, eval point dim {e.size} must agree")
    if n < d + 2:
        raise SmootherError(f"need at least {d + 2} observations, got {n}")
    h = kernel.bandwidth
    for _ in range(MAX_DOUBLINGS + 1):
        z = _kernel_arg(u, e[None, :], h, kernel.scales)[0]
        k = np.exp(-0.5 * np.sum(z * z, axis=1))
        k[k < KERNEL_FLOOR] = 0.0
        eff = int(np.count_nonzero(k))
        if eff >= d + 2:
            break
        h *= 2.0
    else:
        raise SmootherError("bandwidth escalation exhausted: fewer than d*+2 usable points")
    design = np.column_stack([np.ones(n), u - e[None, :]])
    coef = weighted_linear_qr(design, y, k, tau)
    return LocalFit(q_hat=float(coef[0]), s_hat=coef[1:], effective_points=eff, bandwidth=h)


def _batched_solve(delta: NDArray, a: NDArray, y: NDArray, lin: NDArray) -> NDArray:
    """Solve the local weighted least-squares systems for every evaluation point.

    The design for point i is ``[1, delta[i]]``; the normal equations are
    assembled from kernel-weighted moments, plus the linear term ``lin``.
    """
    m, n, d = delta.shape
    q = d + 1
    ad = a[:, :, None] * delta
    lhs = np.empty((m, q, q))
    lhs[:, 0, 0] = a.sum(axis=1)
    s1 = ad.sum(axis=1)
    lhs[:, 0, 1:] = s1
    lhs[:, 1:, 0] = s1
    lhs[:, 1:, 1:] = np.matmul(ad.transpose(0, 2, 1), delta)
    rhs = np.empty((m, q))
    rhs[:, 0] = a @ y
    rhs[:, 1:] = np.matmul(ad.transpose(0, 2, 1), y)
    rhs += lin
    try:
        return np.linalg.solve(lhs, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return np.stack([np.linalg.lstsq(L, r, rcond=None)[0] for L, r in zip(lhs, rhs)])


def _local_residuals(delta: NDArray, y: NDArray, coef: NDArray) -> NDArray:
    return y[None, :] - coef[:, :1] - np.matmul(delta, coef[:, 1:, None])[..., 0]


def _batched_local_fit(u: NDArray, y: NDArray, points: NDArray, tau: float, h: float, scales) -> NDArray:
    n, d = u.shape
    m = points.shape[0]
    q = d + 1
    # kernel weights with per-row bandwidth escalation
    hs = np.full(m, h)
    z = _kernel_arg(u, points, 1.0, scales)
    sq = np.sum(z * z, axis=2)
    K = np.exp(-0.5 * sq / h**2)
    K[K < KERNEL_FLOOR] = 0.0
    eff = np.count_nonzero(K, axis=1)
    for _ in range(MAX_DOUBLINGS):
        thin = eff < d + 2
        if not np.any(thin):
            break
        hs[thin] *= 2.0
        Kt = np.exp(-0.5 * sq[thin] / hs[thin, None] ** 2)
        Kt[Kt < KERNEL_FLOOR] = 0.0
        K[thin] = Kt
        eff[thin] = np.count_nonzero(Kt, axis=1)
    if np.any(eff < d + 2):
        raise SmootherError("bandwidth escalation exhausted: fewer than d*+2 usable points")

    delta = u[None, :, :] - points[:, None, :]
    spread = float(np.ptp(y)) or 1.0
    eps = EPS_START * spread
    lin = np.empty((m, q))
    lin[:, 0] = K.sum(axis=1)
    lin[:, 1:] = (K[:, :, None] * delta).sum(axis=1)
    lin *= 2.0 * tau - 1.0
    coef = _batched_solve(delta, K, y, np.zeros((m, q)))
    for _ in range(BATCH_IRLS_ITER):
        r = _local_residuals(delta, y, coef)
        a = K / np.maximum(np.abs(r), eps)
        new = _batched_solve(delta, a, y, lin)
        step = float(np.max(np.abs(new - coef)))
        coef = new
        if step < IRLS_TOL:
            break
        eps *= EPS_DECAY
    irls = coef
    coef, basis, is_vertex = _batched_descent(delta, y, K, tau, irls, DESCENT_CANDIDATES)
    certified = is_vertex & _vertex_certified(delta, y, K, tau, coef, basis)
    retry = np.flatnonzero(~certified)
    if retry.size:
        # second pass over a wider exchange neighbourhood
        c2, b2, v2 = _batched_descent(delta[retry], y, K[retry], tau, irls[retry], WIDE_CANDIDATES)
        ok2 = v2 & _vertex_certified(delta[retry], y, K[retry], tau, c2, b2)
        coef[retry[ok2]] = c2[ok2]
        certified[retry[ok2]] = True
    for i in np.flatnonzero(~certified):
        pos = K[i] > 0
        Dp = np.column_stack([np.ones(int(pos.sum())), delta[i, pos]])
        coef[i] = _vertex_descent(Dp, y[pos], K[i, pos], tau, coef[i])
    return coef[:, 0]


def _batched_descent(delta: NDArray, y: NDArray, K: NDArray, tau: float, coef: NDArray,
                     candidates: int = DESCENT_CANDIDATES) -> tuple[NDArray, NDArray, NDArray]:
    """Vertex exchange descent for many local problems at once.

    Exchanges are restricted to the observations with the smallest absolute
    residuals at the current vertex, which is where the optimal basis lies
    once IRLS has brought the fit close.
    """
    m, n, d = delta.shape
    q = d + 1

    def objective(res):
        return np.sum(K_act * np.where(res >= 0, tau * res, (tau - 1.0) * res), axis=-1)

    def design_rows(i, idx):
        # rows [1, delta[i, k]] for index arrays i, idx of equal shape
        out = np.empty(idx.shape + (q,))
        out[..., 0] = 1.0
        out[..., 1:] = delta[i, idx]
        return out

    K_act = K
    ky = K @ y
    kd = np.empty((m, q))
    kd[:, 0] = K.sum(axis=1)
    kd[:, 1:] = np.matmul(K[:, None, :], delta)[:, 0, :]
    r_irls = _local_residuals(delta, y, coef)
    f_irls = objective(r_irls)
    r = np.where(K > 0, np.abs(r_irls), np.inf)
    basis = np.argsort(r, axis=1, kind="stable")[:, :q]
    rows = np.arange(m)[:, None]
    B = design_rows(rows, basis)
    ok = np.abs(np.linalg.det(B)) > 1e-10
    cur = coef.copy()
    cur[ok] = np.linalg.solve(B[ok], y[basis[ok]][..., None])[..., 0]
    f_cur = np.full(m, np.inf)
    f_cur[ok] = objective(_local_residuals(delta, y, cur))[ok]
    C = min(candidates, n - q)
    active = ok.copy()
    for _ in range(DESCENT_STEPS):
        idx = np.flatnonzero(active)
        if idx.size == 0 or C <= 0:
            break
        ba = basis[idx]
        ii = idx[:, None]
        Ka = K[idx]
        ra = np.abs(y[None, :] - cur[idx, :1] - np.matmul(delta[idx], cur[idx, 1:, None])[..., 0])
        ra[Ka <= 0] = np.inf
        ra[np.arange(idx.size)[:, None], ba] = np.inf
        cand = np.argpartition(ra, C - 1, axis=1)[:, :C]
        Bb = design_rows(ii, ba)                      # (a, q, q)
        Bc = design_rows(ii, cand)                    # (a, C, q)
        mats = np.repeat(np.repeat(Bb[:, None, None], q, axis=1), C, axis=2)
        rhs = np.repeat(np.repeat(y[ba][:, None, None], q, axis=1), C, axis=2)
        for j in range(q):
            mats[:, j, :, j, :] = Bc
            rhs[:, j, :, j] = y[cand]
        good = np.abs(np.linalg.det(mats)) > 1e-10
        mats[~good] = np.eye(q)
        rhs[~good] = 0.0
        sol = np.linalg.solve(mats, rhs[..., None])[..., 0]     # (a, q, C, q)
        sol = sol.reshape(idx.size, q * C, q)
        res = y[None, None, :] - sol[..., :1] - np.matmul(sol[..., 1:], delta[idx].transpose(0, 2, 1))
        # rho(r) = (|r| + (2 tau - 1) r) / 2, and the linear part is a moment sum
        lin_part = ky[idx, None] - np.matmul(sol, kd[idx, :, None])[..., 0]
        f = 0.5 * (np.matmul(np.abs(res), Ka[:, :, None])[..., 0] + (2.0 * tau - 1.0) * lin_part)
        f[~good.reshape(idx.size, -1)] = np.inf
        best = np.argmin(f, axis=1)
        fbest = f[np.arange(idx.size), best]
        improve = fbest < f_cur[idx] - 1e-13 * (1.0 + np.abs(f_cur[idx]))
        jj, cc = np.divmod(best, C)
        sel = np.flatnonzero(improve)
        tgt = idx[sel]
        basis[tgt, jj[sel]] = cand[sel, cc[sel]]
        cur[tgt] = sol[sel, best[sel]]
        f_cur[tgt] = fbest[sel]
        active[:] = False
        active[tgt] = True
    use_vertex = f_cur <= f_irls
    out = np.where(use_vertex[:, None], cur, coef)
    return out, basis, use_vertex


def _vertex_certified(delta: NDArray, y: NDArray, K: NDArray, tau: float, coef: NDArray, basis: NDArray) -> NDArray:
    """Subgradient optimality test at interpolating solutions.

    At a vertex interpolating the basis rows B, zero lies in the
    subdifferential iff the multipliers v solving
    ``D_B^T (w_B * v) = -sum_{k not in B} w_k psi_tau(r_k) D_k`` satisfy
    ``tau - 1 <= v <= tau``.
    """
    m, n, d = delta.shape
    q = d + 1
    rows = np.arange(m)[:, None]
    r = _local_residuals(delta, y, coef)
    psi = np.where(r >= 0, tau, tau - 1.0) * K
    psi[rows, basis] = 0.0
    g = np.empty((m, q))
    g[:, 0] = psi.sum(axis=1)
    g[:, 1:] = (psi[:, :, None] * delta).sum(axis=1)
    DB = np.empty((m, q, q))
    DB[..., 0] = 1.0
    DB[..., 1:] = delta[rows, basis]
    wB = K[rows, basis]
    ok = (np.abs(np.linalg.det(DB)) > 1e-10) & np.all(wB > 0, axis=1)
    v = np.full((m, q), np.inf)
    if np.any(ok):
        lam = np.linalg.solve(DB[ok].transpose(0, 2, 1), -g[ok][..., None])[..., 0]
        v[ok] = lam / wB[ok]
    tol = 1e-9
    return ok & np.all((v >= tau - 1.0 - tol) & (v <= tau + tol), axis=1)


def fitted_quantiles(projected: ArrayLike, y: ArrayLike, tau: float, bandwidth: float | None = None,
                     bandwidth_scale: float = 1.0, chunk: int = 256) -> NDArray[np.float64]:
    """Local-linear conditional quantile estimates at every sample point.

    ``projected`` is the (n, d*) matrix of sufficient predictors.  The
    bandwidth defaults to the rule-of-thumb quantile bandwidth built from
    the plug-in mean-regression bandwidth.
    """
    tau = _check_tau(tau)
    u = np.asarray(projected, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, d = u.shape
    if n < d + 2:
        raise SmootherError(f"need at least {d + 2} observations, got {n}")
    if bandwidth is None:
        h, scales = projection_bandwidth(u, y, tau, bandwidth_scale)
    else:
        h, scales = bandwidth * bandwidth_scale, None
    out = np.empty(n)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        out[start:stop] = _batched_local_fit(u, y, u[start:stop], tau, h, scales)
    return out
