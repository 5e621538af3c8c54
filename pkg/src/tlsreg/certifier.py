"""A-posteriori global-optimality certification for the rotation stage.

The truncated rotation objective, after cloning one quaternion per
measurement with a sign indicator, is a quadratic form x^T Q x over
x = [q; theta_1 q; ...; theta_K q].  A candidate (q_hat, theta_hat) with
cost mu_hat is globally optimal when a dual matrix exists that is PSD,
kills x_hat, and differs from Q - mu_hat * J by a structured correction
(diagonal 4x4 blocks summing to zero, skew off-diagonal blocks).

Working in the frame rotated by q_hat turns the candidate into the
constant vector x_bar = [1, theta_1, ..., theta_K] (x) [0,0,0,1] and makes
both projections of the Douglas-Rachford splitting closed-form; the
minimum eigenvalue of the affine-feasible iterate yields the relative
sub-optimality bound eta = |lambda_1| (K+1) / mu_hat at every step.

Internally the measurements are normalized by their noise bounds
(a <- a/beta, b <- b/beta), which drops every beta^2 denominator from the
block formulas; costs are unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .geometry import left_product_matrix, quat_to_matrix, right_product_matrix
from .rotation import RotationProblem

E_AXIS = np.array([0.0, 0.0, 0.0, 1.0])


class Verdict(Enum):
    CERTIFIED = "certified"
    SUBOPTIMAL = "suboptimal"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class QcqpData:
    """Dense symmetric cost matrix with the arrow block pattern.

    Only blocks (0,0), (0,k), (k,0), (k,k) may be nonzero.  na/nb keep the
    bound-normalized measurements for the projection formulas.
    """

    Q: np.ndarray
    K: int
    cbar_sq: float
    na: np.ndarray
    nb: np.ndarray

    def block(self, i: int, j: int) -> np.ndarray:
        return self.Q[4 * i : 4 * i + 4, 4 * j : 4 * j + 4]


@dataclass(frozen=True)
class CandidateSolution:
    q_hat: np.ndarray
    thetas: np.ndarray
    mu_hat: float


@dataclass(frozen=True)
class RotatedData:
    """Candidate-frame quantities consumed by the projections."""

    Q_bar: np.ndarray
    x_bar: np.ndarray
    xi: np.ndarray  # (K, 3) rotated residuals of the normalized TIMs
    na: np.ndarray  # (K, 3) normalized source differences
    thetas: np.ndarray  # (K+1,) with the leading +1 prepended
    mu_hat: float
    cbar_sq: float
    K: int
    stationarity_residual: float


@dataclass(frozen=True)
class Certificate:
    eta: float
    iterations_used: int
    verdict: Verdict
    min_eigenvalue_trace: tuple
    mu_hat: float
    stationarity_residual: float
    # False when the candidate violates the inlier stationarity identity
    # beyond tolerance; the dual subspace then kills the candidate vector
    # only approximately and the sub-optimality bound degrades gracefully.
    candidate_stationary: bool = True

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED


@dataclass(frozen=True)
class CertifyOptions:
    max_iters: int = 200
    eta_target: float = 1e-3
    gamma: float = 1.0
    fixed_point_tol: float = 1e-10
    # |lambda_1| below this times max(1, ||M||_F) is numerically zero: the
    # dual certificate holds to machine precision.
    eig_zero_rel_tol: float = 1e-10
    stationarity_tol: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.gamma < 2.0:
            raise ValueError("gamma must be in (0, 2)")


def x_vector(q, thetas) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    return np.concatenate([q] + [t * q for t in thetas])


def make_candidate(p: RotationProblem, q, thetas) -> CandidateSolution:
    """Candidate with its cost evaluated in the binary-indicator form."""
    from .rotation import binary_cost

    q = np.asarray(q, dtype=float)
    thetas = np.asarray(thetas, dtype=np.int64)
    if thetas.shape != (p.size,) or not np.all(np.abs(thetas) == 1):
        raise ValueError("thetas must be +-1 of length K")
    return CandidateSolution(q_hat=q, thetas=thetas, mu_hat=binary_cost(p, q, thetas))


def build_cost_matrix(p: RotationProblem) -> QcqpData:
    """Assemble Q so that x^T Q x reproduces the binary-indicator cost."""
    K = p.size
    na = p.a_bars / p.beta_bars[:, None]
    nb = p.b_bars / p.beta_bars[:, None]
    cb = p.cbar_sq

    n = 4 * (K + 1)
    Q = np.zeros((n, n))
    eye4 = np.eye(4)
    for k in range(K):
        a_hom = np.append(na[k], 0.0)
        b_hom = np.append(nb[k], 0.0)
        core = (np.dot(na[k], na[k]) + np.dot(nb[k], nb[k])) * eye4 + 2.0 * (
            left_product_matrix(b_hom) @ right_product_matrix(a_hom)
        )
        core = 0.5 * (core + core.T)
        q_kk = 0.5 * core + 0.5 * cb * eye4
        q_0k = 0.25 * core - 0.25 * cb * eye4
        r = 4 * (k + 1)
        Q[r : r + 4, r : r + 4] = q_kk
        Q[0:4, r : r + 4] = q_0k
        Q[r : r + 4, 0:4] = q_0k
    return QcqpData(Q=Q, K=K, cbar_sq=cb, na=na, nb=nb)


def qcqp_cost(data: QcqpData, q, thetas) -> float:
    x = x_vector(q, thetas)
    return float(x @ data.Q @ x)


def rotate_to_candidate_frame(data: QcqpData, cand: CandidateSolution) -> RotatedData:
    """Similarity-transform Q by the block-diagonal candidate rotation.

    The candidate vector becomes [1, theta] (x) e; eigenvalues of Q are
    preserved, so sub-optimality bounds transfer unchanged.
    """
    K = data.K
    O = left_product_matrix(cand.q_hat / np.linalg.norm(cand.q_hat))
    Qr = data.Q.reshape(K + 1, 4, K + 1, 4)
    Q_bar = np.einsum("pa,ipjq,qb->iajb", O, Qr, O, optimize=True).reshape(data.Q.shape)
    Q_bar = 0.5 * (Q_bar + Q_bar.T)

    thetas = np.concatenate([[1.0], np.asarray(cand.thetas, dtype=float)])
    x_bar = np.kron(thetas, E_AXIS)

    R = quat_to_matrix(cand.q_hat)
    xi = data.nb @ R - data.na  # R^T nb_k - na_k, row-wise
    inlier = cand.thetas > 0
    stat = np.zeros(3)
    for k in np.nonzero(inlier)[0]:
        stat += np.cross(xi[k], data.na[k])
    return RotatedData(
        Q_bar=Q_bar,
        x_bar=x_bar,
        xi=xi,
        na=data.na,
        thetas=thetas,
        mu_hat=cand.mu_hat,
        cbar_sq=data.cbar_sq,
        K=K,
        stationarity_residual=float(np.linalg.norm(stat)),
    )


def _j_term(n_blocks: int, mu_hat: float) -> np.ndarray:
    J = np.zeros((4 * n_blocks, 4 * n_blocks))
    J[0:4, 0:4] = mu_hat * np.eye(4)
    return J


def _diag_scalar_targets(rot: RotatedData) -> np.ndarray:
    """Fixed scalar parts of the correction's diagonal blocks."""
    th = rot.thetas[1:]
    xi_sq = np.sum(rot.xi**2, axis=1)
    vals = -(0.25 * th + 0.5) * xi_sq + (0.25 * th - 0.5) * rot.cbar_sq
    return np.concatenate([[-vals.sum()], vals])


def _phi_vectors(rot: RotatedData) -> np.ndarray:
    """Fixed part of the diagonal blocks' vector coupling."""
    th = rot.thetas[1:]
    cross = np.cross(rot.xi, rot.na)  # skew(xi_k) @ na_k, row-wise
    phi_k = -(0.5 * th + 1.0)[:, None] * cross
    return np.concatenate([[-phi_k.sum(axis=0)], phi_k])


def initial_dual_guess(rot: RotatedData) -> np.ndarray:
    """Analytic correction that lands in the dual subspace directly.

    Off-diagonal correction blocks are zero; the diagonal blocks' scalar
    and vector parts enforce the null-vector equations, and the matrix
    parts are chosen so the guess is already PSD on noise-free data.
    """
    K = rot.K
    th = rot.thetas[1:]
    xi_sq = np.sum(rot.xi**2, axis=1)
    scalars = _diag_scalar_targets(rot)
    phis = _phi_vectors(rot)

    delta = np.zeros_like(rot.Q_bar)
    mat_sum = np.zeros((3, 3))
    for k in range(1, K + 1):
        q0k_m = rot.Q_bar[0:3, 4 * k : 4 * k + 3]
        mat = -q0k_m - ((0.25 * th[k - 1] + 0.25) * xi_sq[k - 1] + 0.5 * rot.cbar_sq) * np.eye(3)
        mat = 0.5 * (mat + mat.T)
        mat_sum += mat
        blk = delta[4 * k : 4 * k + 4, 4 * k : 4 * k + 4]
        blk[0:3, 0:3] = mat
        blk[0:3, 3] = phis[k]
        blk[3, 0:3] = phis[k]
        blk[3, 3] = scalars[k]
    blk0 = delta[0:4, 0:4]
    blk0[0:3, 0:3] = -mat_sum
    blk0[0:3, 3] = phis[0]
    blk0[3, 0:3] = phis[0]
    blk0[3, 3] = scalars[0]

    return rot.Q_bar - _j_term(K + 1, rot.mu_hat) + delta


def project_to_psd_cone(M: np.ndarray) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix."""
    sym = 0.5 * (M + M.T)
    eigvals, eigvecs = scipy.linalg.eigh(sym, driver="evd", check_finite=False)
    clipped = np.clip(eigvals, 0.0, None)
    out = (eigvecs * clipped) @ eigvecs.T
    return 0.5 * (out + out.T)


def project_to_dual_subspace(M: np.ndarray, rot: RotatedData) -> np.ndarray:
    """Frobenius-nearest member of the rotated dual subspace.

    Block-component recipe on H = M - Q_bar + mu_hat * J: demean the
    diagonal 3x3 matrix parts, pin the diagonal scalar and vector parts to
    their analytic targets, skew-symmetrize off-diagonal matrix parts,
    zero off-diagonal scalars, and solve the coupled off-diagonal vector
    system through its closed-form inverse; finally add Q_bar - mu_hat * J
    back.
    """
    K = rot.K
    n_blocks = K + 1
    J = _j_term(n_blocks, rot.mu_hat)
    H = 0.5 * (M + M.T) - rot.Q_bar + J
    Hr = H.reshape(n_blocks, 4, n_blocks, 4)

    mats = Hr[:, 0:3, :, 0:3]  # (B, 3, B, 3)
    vec_top = Hr[:, 0:3, :, 3]  # (B, 3, B) -> transpose for (B, B, 3)
    vec_bot = Hr[:, 3, :, 0:3]  # (B, B, 3)
    top = np.transpose(vec_top, (0, 2, 1))  # top[i, j] = upper-right 3-vec

    out = np.zeros_like(Hr)

    # Diagonal blocks: demeaned matrix part, pinned scalar and vector parts.
    idx = np.arange(n_blocks)
    diag_mats = mats[idx, :, idx, :]  # (B, 3, 3)
    diag_mats = diag_mats - diag_mats.mean(axis=0)
    scalars = _diag_scalar_targets(rot)
    phis = _phi_vectors(rot)

    # Off-diagonal vector parts: signed antisymmetric system solved in
    # closed form.  V collects theta-weighted right-hand sides; the
    # solution is V/2 - (row-sum differences)/(2K+6).
    th = rot.thetas
    d = top[idx, idx]  # diagonal blocks' vector parts (B, 3)
    tt = np.outer(th, th)
    V = tt[:, :, None] * (top - vec_bot) + (
        phis[:, None, :] - phis[None, :, :] - d[:, None, :] + d[None, :, :]
    )
    V[idx, idx] = 0.0
    RS = V.sum(axis=1)  # (B, 3)
    p2 = 1.0 / (2.0 * K + 6.0)
    V_new = 0.5 * V - p2 * (RS[:, None, :] - RS[None, :, :])
    V_new[idx, idx] = 0.0
    W = tt[:, :, None] * V_new  # top-right vector of every off-diag block

    diag_vecs = phis - RS / (K + 3.0)

    # Off-diagonal matrix parts: nearest skew-symmetric (element-axis
    # transpose within each 3x3 block).
    skew_mats = 0.5 * (mats - np.transpose(mats, (0, 3, 2, 1)))

    out[:, 0:3, :, 0:3] = skew_mats
    out[idx, 0:3, idx, 0:3] = diag_mats
    out[:, 0:3, :, 3] = np.transpose(W, (0, 2, 1))
    out[:, 3, :, 0:3] = -W
    out[idx, 0:3, idx, 3] = diag_vecs
    out[idx, 3, idx, 0:3] = diag_vecs
    out[idx, 3, idx, 3] = scalars

    H_proj = out.reshape(M.shape)
    result = H_proj + rot.Q_bar - J
    return 0.5 * (result + result.T)


def min_eigenvalue(M: np.ndarray) -> float:
    vals = scipy.linalg.eigh(
        M, eigvals_only=True, subset_by_index=(0, 0), check_finite=False
    )
    return float(vals[0])


def certify(
    data: QcqpData, cand: CandidateSolution, opts: CertifyOptions = CertifyOptions()
) -> Certificate:
    """Douglas-Rachford search for a PSD dual certificate.

    Returns the best sub-optimality bound seen across iterations; the
    candidate is certified when the bound drops below the target.  A
    minimum eigenvalue within round-off of zero (relative to the iterate's
    norm) counts as exactly zero: the certificate then holds to machine
    precision and eta is reported as 0.
    """
    if not np.all(np.isfinite(data.Q)):
        raise ValueError("cost matrix must be finite")
    if not np.isfinite(cand.mu_hat):
        raise ValueError("candidate cost must be finite")

    rot = rotate_to_candidate_frame(data, cand)
    check = qcqp_cost(data, cand.q_hat, cand.thetas)
    if abs(check - cand.mu_hat) > 1e-9 * max(1.0, abs(check)):
        raise ValueError("candidate mu_hat does not match x^T Q x")

    K = data.K
    M = initial_dual_guess(rot)
    eta = np.inf
    trace = []
    verdict = Verdict.BUDGET_EXHAUSTED
    iterations = 0
    for iterations in range(1, opts.max_iters + 1):
        M_psd = project_to_psd_cone(M)
        M_aff = project_to_dual_subspace(2.0 * M_psd - M, rot)
        M = M + opts.gamma * (M_aff - M_psd)

        lam1 = min_eigenvalue(M_aff)
        scale = max(1.0, float(np.linalg.norm(M_aff)))
        if abs(lam1) <= opts.eig_zero_rel_tol * scale:
            lam1 = 0.0
        trace.append(lam1)

        if lam1 == 0.0:
            eta_t = 0.0
        elif rot.mu_hat > 0.0:
            eta_t = abs(lam1) * (K + 1) / rot.mu_hat
        else:
            eta_t = np.inf
        eta = min(eta, eta_t)

        if eta < opts.eta_target:
            verdict = Verdict.CERTIFIED
            break
        if float(np.linalg.norm(M_aff - M_psd)) < opts.fixed_point_tol:
            verdict = Verdict.SUBOPTIMAL
            break

    return Certificate(
        eta=float(eta),
        iterations_used=iterations,
        verdict=verdict,
        min_eigenvalue_trace=tuple(trace),
        mu_hat=rot.mu_hat,
        stationarity_residual=rot.stationarity_residual,
        candidate_stationary=rot.stationarity_residual <= opts.stationarity_tol,
    )
