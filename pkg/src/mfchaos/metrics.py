"""Distances and functionals for empirical and Gaussian laws.

Covers the quadratic Wasserstein distance between equal-weight point clouds
(exact assignment, an entropic surrogate, and the index-pairing upper
bound), closed forms between Gaussian laws, the total-variation bound from
relative entropy, the k-marginal reduction, and the Monte Carlo
law-of-large-numbers gap estimator.

The total variation convention throughout is sup over test functions
bounded by 1, i.e. the integral of |p - q| for densities; it is twice the
probabilists' convention, and enters only through ``pinsker_tv_bound``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

__all__ = [
    "PointCloud",
    "GaussianLaw",
    "EstimateCI",
    "ConvergenceError",
    "w2_exact",
    "w2_sinkhorn",
    "w2_pairing_bound",
    "marginal_chaos_bound",
    "gaussian_w2",
    "gaussian_kl",
    "pinsker_tv_bound",
    "lln_gap",
]


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver stops before reaching tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class PointCloud:
    """Equal-weight empirical measure on N points in R^D."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite entries")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class GaussianLaw:
    """Gaussian law with symmetric positive semidefinite covariance.

    Symmetry is required to 1e-12; eigenvalues below zero by at most 1e-10
    are treated as numerical noise and clipped.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean {mean.shape}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
            raise ValueError("covariance is not symmetric within 1e-12")
        eigs = np.linalg.eigvalsh(cov)
        if eigs.min(initial=0.0) < -1e-10:
            raise ValueError(f"covariance has negative eigenvalue {eigs.min():.3e}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class EstimateCI:
    """Monte Carlo estimate with a 95% normal-approximation interval."""

    value: float
    stderr: float
    ci_low: float
    ci_high: float
    n_trials: int


def _points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, dtype=float))


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"clouds must have equal size and dimension, got {a.shape} vs {b.shape}")


def w2_exact(a, b) -> float:
    """Quadratic Wasserstein distance between equal-size equal-weight clouds.

    For uniform weights the optimal coupling is a perfect matching, so the
    distance is computed by an exact assignment solver on the squared
    Euclidean cost matrix: sqrt(min_perm (1/N) sum_i |a_i - b_perm(i)|^2).
    """
    pa, pb = _points(a), _points(b)
    _check_same_shape(pa, pb)
    cost = cdist(pa, pb, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(max(cost[rows, cols].mean(), 0.0))


def w2_sinkhorn(a, b, eps: float, max_iter: int = 10_000, tol: float = 1e-9) -> float:
    """Entropic surrogate of ``w2_exact`` (log-domain Sinkhorn iterations).

    Returns the square root of the transport cost under the converged
    entropic plan, which upper-bounds and approaches the exact value as
    eps -> 0.  Stops once the worst marginal violation (L1) drops below
    ``tol``; raises ConvergenceError with the residual otherwise.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    pa, pb = _points(a), _points(b)
    _check_same_shape(pa, pb)
    n = pa.shape[0]
    cost = cdist(pa, pb, "sqeuclidean")
    log_w = -math.log(n)
    f = np.zeros(n)
    g = np.zeros(n)
    residual = math.inf
    for _ in range(max_iter):
        f = eps * (log_w - logsumexp((g[None, :] - cost) / eps, axis=1))
        g = eps * (log_w - logsumexp((f[:, None] - cost) / eps, axis=0))
        log_plan = (f[:, None] + g[None, :] - cost) / eps
        row_sums = np.exp(logsumexp(log_plan, axis=1))
        residual = float(np.abs(row_sums - 1.0 / n).sum())
        if residual < tol:
            plan = np.exp(log_plan)
            return math.sqrt(max(float((plan * cost).sum()), 0.0))
    raise ConvergenceError(f"Sinkhorn did not converge in {max_iter} iterations", residual)


def w2_pairing_bound(a, b) -> float:
    """Index-pairing upper bound sqrt((1/N) sum_i |a_i - b_i|^2) for w2_exact."""
    pa, pb = _points(a), _points(b)
    _check_same_shape(pa, pb)
    return math.sqrt(float(np.mean(np.sum((pa - pb) ** 2, axis=1))))


def marginal_chaos_bound(full_sq: float, k: int, N: int) -> float:
    """Reduce a squared full-system distance to a k-marginal bound: (k/N) * full_sq."""
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    return (k / N) * full_sq


def _psd_sqrt(S: np.ndarray) -> np.ndarray:
    # symmetric square root with small negative eigenvalues clipped
    eigs, vecs = np.linalg.eigh(S)
    if eigs.min(initial=0.0) < -1e-10:
        raise ValueError(f"matrix is not PSD: eigenvalue {eigs.min():.3e}")
    eigs = np.clip(eigs, 0.0, None)
    return (vecs * np.sqrt(eigs)) @ vecs.T


def gaussian_w2(g1: GaussianLaw, g2: GaussianLaw) -> float:
    """Closed-form quadratic Wasserstein distance between Gaussian laws."""
    if g1.dim != g2.dim:
        raise ValueError("laws must share a dimension")
    root2 = _psd_sqrt(g2.cov)
    cross = _psd_sqrt(root2 @ g1.cov @ root2)
    mean_sq = float(np.sum((g1.mean - g2.mean) ** 2))
    trace = float(np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * np.trace(cross))
    return math.sqrt(max(mean_sq + trace, 0.0))


def gaussian_kl(g_from: GaussianLaw, g_to: GaussianLaw) -> float:
    """Relative entropy Ent(g_from | g_to) in closed form.

    Requires the target covariance to be strictly positive definite; a
    singular target makes the entropy infinite, reported as an error.
    """
    if g_from.dim != g_to.dim:
        raise ValueError("laws must share a dimension")
    D = g_from.dim
    try:
        chol = np.linalg.cholesky(g_to.cov)
    except np.linalg.LinAlgError:
        raise ValueError("target covariance is singular: relative entropy is infinite")
    solve = np.linalg.solve
    inv_to_from = solve(chol.T, solve(chol, g_from.cov))
    dm = g_to.mean - g_from.mean
    half_white = solve(chol, dm)
    sign, logdet_to = np.linalg.slogdet(g_to.cov)
    sign_f, logdet_from = np.linalg.slogdet(g_from.cov)
    if sign_f <= 0:
        # degenerate source: entropy against a nondegenerate target is finite
        # only via the trace and mean terms; logdet -> -inf means +inf KL
        raise ValueError("source covariance is singular: relative entropy is infinite")
    kl = 0.5 * (np.trace(inv_to_from) + float(half_white @ half_white) - D + logdet_to - logdet_from)
    return max(float(kl), 0.0)


def pinsker_tv_bound(ent: float) -> float:
    """Total-variation bound sqrt(2 * ent) (sup-over-|f|<=1 convention)."""
    if ent < 0.0:
        raise ValueError("relative entropy must be nonnegative")
    return math.sqrt(2.0 * ent)


def lln_gap(
    h,
    sampler,
    conditional_mean,
    N: int,
    trials: int,
    seed: int = 0,
    chunk: int = 200_000,
) -> EstimateCI:
    """Monte Carlo estimate of E | mean_m h(Z_1, Z_m) - E_y h(Z_1, y) |^2.

    The inner average runs over all N draws including Z_1 itself.  ``h``
    must broadcast over leading axes; ``sampler(rng, shape)`` yields i.i.d.
    draws; ``conditional_mean(z)`` supplies the exact integral of
    h(z, .) against the sampling law (closed form, or a declared
    high-accuracy approximation).
    """
    rng = np.random.default_rng(seed)
    block = max(1, min(trials, max(1, chunk // max(N, 1))))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        b = min(block, trials - done)
        z = np.asarray(sampler(rng, (b, N)), dtype=float)
        z1 = z[:, :1]
        vals = h(z1, z)  # (b, N)
        gap = vals.mean(axis=1) - conditional_mean(z1[:, 0])
        sq = gap**2
        total += float(sq.sum())
        total_sq += float((sq**2).sum())
        done += b
    mean = total / trials
    var = max(total_sq / trials - mean**2, 0.0)
    stderr = math.sqrt(var / trials)
    return EstimateCI(
        value=mean,
        stderr=stderr,
        ci_low=mean - 1.96 * stderr,
        ci_high=mean + 1.96 * stderr,
        n_trials=trials,
    )
