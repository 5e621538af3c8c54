"""Truncated-least-squares rotation estimation via graduated non-convexity.

The inner solver is the closed-form weighted rotation alignment: the
optimal rotation maximizing sum_k w_k <b_k, R a_k> is read off the
extremal eigenvector of a 4x4 accumulation matrix built from the
quaternion product matrices.  The outer loop anneals a surrogate of the
truncated cost from nearly-least-squares to the exact truncated cost,
rewriting per-measurement weights in closed form at each step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import left_product_matrix, quat_to_matrix, right_product_matrix

COLLINEAR_REL_TOL = 1e-9


@dataclass(frozen=True)
class RotationProblem:
    """Scaled pairwise measurements for rotation-only estimation.

    a_bars must already carry the scale estimate (s_hat * raw difference);
    beta_bars are the propagated inlier bounds.
    """

    a_bars: np.ndarray
    b_bars: np.ndarray
    beta_bars: np.ndarray
    cbar_sq: float = 1.0

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_bars, dtype=float))
        b = np.atleast_2d(np.asarray(self.b_bars, dtype=float))
        bb = np.asarray(self.beta_bars, dtype=float).ravel()
        if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
            raise ValueError("a_bars and b_bars must both be (K, 3)")
        if a.shape[0] < 2:
            raise ValueError("need at least two measurements")
        if bb.shape != (a.shape[0],) or not np.all(bb > 0):
            raise ValueError("beta_bars must be (K,) positive")
        if not self.cbar_sq > 0:
            raise ValueError("cbar_sq must be positive")
        object.__setattr__(self, "a_bars", a)
        object.__setattr__(self, "b_bars", b)
        object.__setattr__(self, "beta_bars", bb)

    @property
    def size(self) -> int:
        return self.a_bars.shape[0]


@dataclass(frozen=True)
class GncOptions:
    max_iterations: int = 100
    mu_factor: float = 1.4
    mu_stop: float = 1e6
    mu_min: float = 1e-6
    weight_tol: float = 1e-6


@dataclass(frozen=True)
class RotationSolution:
    rotation: np.ndarray  # unit quaternion [x, y, z, w]
    theta: np.ndarray  # +-1 per measurement
    cost: float  # truncated objective with the returned theta
    gnc_iterations: int
    converged: bool
    degenerate: bool
    surrogate_trace: tuple = field(default=(), repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)


def _accumulation_matrix(a_bars, b_bars, weights) -> np.ndarray:
    """4x4 matrix whose max-eigenvalue eigenvector maximizes the weighted
    alignment sum_k w_k b_k . (R a_k)."""
    K = a_bars.shape[0]
    a_hom = np.concatenate([a_bars, np.zeros((K, 1))], axis=1)
    b_hom = np.concatenate([b_bars, np.zeros((K, 1))], axis=1)
    M = np.zeros((4, 4))
    for k in range(K):
        w = weights[k]
        if w == 0.0:
            continue
        M += w * left_product_matrix(b_hom[k]).T @ right_product_matrix(a_hom[k])
    return 0.5 * (M + M.T)


def check_collinear(a_bars, weights) -> bool:
    """True when all weight-positive directions share one line (rotation
    about that line is unobservable)."""
    w = np.asarray(weights, dtype=float)
    pts = np.asarray(a_bars, dtype=float)[w > 0]
    if pts.shape[0] < 2:
        return True
    scatter = pts.T @ pts
    eigvals = np.linalg.eigvalsh(scatter)
    return eigvals[1] <= COLLINEAR_REL_TOL * max(eigvals[-1], 1e-300)


def horn_weighted(a_bars, b_bars, weights, warn_degenerate: bool = True) -> np.ndarray:
    """Global minimizer of sum_k w_k ||b_k - R a_k||^2 over rotations.

    Returns a unit quaternion.  Degenerate (collinear) input still yields
    a valid rotation but the component about the common axis is arbitrary;
    a warning is emitted.
    """
    a = np.atleast_2d(np.asarray(a_bars, dtype=float))
    b = np.atleast_2d(np.asarray(b_bars, dtype=float))
    w = np.asarray(weights, dtype=float).ravel()
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if np.count_nonzero(w) < 2:
        raise ValueError("need at least two weight-positive measurements")
    if warn_degenerate and check_collinear(a, w):
        warnings.warn("collinear rotation geometry: solution not unique", stacklevel=2)
    M = _accumulation_matrix(a, b, w)
    eigvals, eigvecs = np.linalg.eigh(M)
    q = eigvecs[:, -1]
    # Inverse-iteration polish: the 4x4 eigensolver's vector error grows
    # with 1/eigengap; two shifted solves push it to machine precision.
    scale = max(abs(eigvals[0]), abs(eigvals[-1]), 1e-300)
    shift = eigvals[-1] + 1e-13 * scale
    for _ in range(2):
        refined = np.linalg.solve(M - shift * np.eye(4), q)
        norm = np.linalg.norm(refined)
        if not np.isfinite(norm) or norm == 0.0:
            break
        q = refined / norm
    if q[3] < 0:
        q = -q
    return q / np.linalg.norm(q)


def truncated_cost(p: RotationProblem, q) -> float:
    """Exact truncated objective at a rotation."""
    R = quat_to_matrix(q)
    r_sq = np.sum((p.b_bars - p.a_bars @ R.T) ** 2, axis=1) / p.beta_bars**2
    return float(np.sum(np.minimum(r_sq, p.cbar_sq)))


def binary_cost(p: RotationProblem, q, theta) -> float:
    """Objective of the binary-indicator form: inliers pay their weighted
    squared residual, outliers pay the truncation constant."""
    R = quat_to_matrix(q)
    r_sq = np.sum((p.b_bars - p.a_bars @ R.T) ** 2, axis=1) / p.beta_bars**2
    theta = np.asarray(theta)
    return float(np.sum(np.where(theta > 0, r_sq, p.cbar_sq)))


def _surrogate(r_sq, weights, mu, eps_sq) -> float:
    # Annealed objective: weighted residuals plus the penalty whose
    # minimizer over w in [0, 1] reproduces the closed-form update below.
    return float(np.sum(weights * r_sq + mu * (1.0 - weights) / (mu + weights) * eps_sq))


def _weight_update(r_sq, mu, eps_sq) -> np.ndarray:
    w = np.empty_like(r_sq)
    lo = mu / (mu + 1.0) * eps_sq
    hi = (mu + 1.0) / mu * eps_sq
    w[r_sq <= lo] = 1.0
    w[r_sq >= hi] = 0.0
    mid = (r_sq > lo) & (r_sq < hi)
    w[mid] = np.sqrt(eps_sq * mu * (mu + 1.0) / r_sq[mid]) - mu
    return np.clip(w, 0.0, 1.0)


def solve_gnc_tls(p: RotationProblem, opts: GncOptions = GncOptions()) -> RotationSolution:
    """Graduated non-convexity for the truncated rotation objective.

    Starts from the identity rotation, anneals the control parameter
    geometrically until the surrogate matches the truncated cost, and
    re-evaluates the exact objective at the final rotation/indicators.
    """
    eps_sq = p.cbar_sq
    inv_beta_sq = 1.0 / p.beta_bars**2

    def residuals_sq(q):
        R = quat_to_matrix(q)
        return np.sum((p.b_bars - p.a_bars @ R.T) ** 2, axis=1) * inv_beta_sq

    q = np.array([0.0, 0.0, 0.0, 1.0])
    r_sq = residuals_sq(q)
    r_max_sq = float(np.max(r_sq))
    mu = eps_sq / max(2.0 * r_max_sq - eps_sq, 1e-12)
    mu = max(mu, opts.mu_min)

    degenerate = check_collinear(p.a_bars, np.ones(p.size))
    weights = np.ones(p.size)
    trace = []
    converged = False
    iterations = 0
    for iterations in range(1, opts.max_iterations + 1):
        before = _surrogate(r_sq, weights, mu, eps_sq)
        weights = _weight_update(r_sq, mu, eps_sq)
        after_weights = _surrogate(r_sq, weights, mu, eps_sq)

        if np.count_nonzero(weights * inv_beta_sq) >= 2:
            q = horn_weighted(p.a_bars, p.b_bars, weights * inv_beta_sq, warn_degenerate=False)
        r_sq = residuals_sq(q)
        after_solve = _surrogate(r_sq, weights, mu, eps_sq)
        trace.append((before, after_weights, after_solve))

        binary = np.max(np.minimum(weights, 1.0 - weights)) < opts.weight_tol
        if mu >= opts.mu_stop or binary:
            converged = True
            break
        mu *= opts.mu_factor

    theta = np.where(weights >= 0.5, 1, -1).astype(np.int64)
    return RotationSolution(
        rotation=q,
        theta=theta,
        cost=binary_cost(p, q, theta),
        gnc_iterations=iterations,
        converged=converged,
        degenerate=degenerate,
        surrogate_trace=tuple(trace),
    )
