"""Exact scalar truncated-least-squares estimation by adaptive voting.

Each measurement s_k with bound alpha_k contributes min((s - s_k)^2 /
alpha_k^2, cbar_sq) to the cost.  The consensus set {k : |s - s_k| <=
alpha_k * cbar} only changes at the 2K interval boundaries s_k -+
alpha_k * cbar, so sweeping the sorted boundaries enumerates every
candidate consensus set (at most 2K - 1 of them) and the weighted
least-squares center of each is a global-minimizer candidate.

The sweep keeps running sums of 1/alpha^2, s/alpha^2 and s^2/alpha^2, so
the whole solve is O(K log K) instead of the O(K^2) re-scan of the naive
enumeration.  The same sweep powers consensus maximization (return the
largest consensus set instead of the cheapest one).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDARY_MERGE_REL_TOL = 1e-12


@dataclass(frozen=True)
class ScalarTlsProblem:
    measurements: np.ndarray
    alphas: np.ndarray
    cbar_sq: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.measurements, dtype=float).ravel()
        a = np.asarray(self.alphas, dtype=float).ravel()
        if s.size == 0:
            raise ValueError("need at least one measurement")
        if a.shape != s.shape:
            raise ValueError("measurements and alphas must have equal length")
        if not np.all(np.isfinite(s)) or not np.all(np.isfinite(a)):
            raise ValueError("inputs must be finite")
        if not np.all(a > 0):
            raise ValueError("alphas must be positive")
        if not self.cbar_sq > 0:
            raise ValueError("cbar_sq must be positive")
        object.__setattr__(self, "measurements", s)
        object.__setattr__(self, "alphas", a)


@dataclass(frozen=True)
class ScalarTlsSolution:
    estimate: float
    cost: float
    inlier_mask: np.ndarray
    n_candidates: int = 0


@dataclass(frozen=True)
class ConsensusDiagnostics:
    """Inputs to the TLS / consensus-maximization agreement condition."""

    equivalent: bool
    max_size: int
    second_size: int
    inlier_residual_sum: float
    threshold: float


def tls_cost(p: ScalarTlsProblem, estimate: float) -> float:
    """Evaluate the truncated cost at a point (the recomputable objective)."""
    r = (estimate - p.measurements) / p.alphas
    return float(np.sum(np.minimum(r * r, p.cbar_sq)))


def _consensus_mask(p: ScalarTlsProblem, estimate: float) -> np.ndarray:
    r = (estimate - p.measurements) / p.alphas
    return r * r <= p.cbar_sq * (1.0 + 1e-12)


@dataclass(frozen=True)
class _Sweep:
    """Per-interval consensus statistics from the boundary sweep.

    Arrays are aligned: interval i spans (lo[i], hi[i]) with n[i] active
    measurements whose weighted sums are w[i], s1[i], s2[i].
    """

    lo: np.ndarray
    hi: np.ndarray
    n: np.ndarray
    w: np.ndarray
    s1: np.ndarray
    s2: np.ndarray


def _sweep_intervals(p: ScalarTlsProblem) -> _Sweep:
    s, a = p.measurements, p.alphas
    cbar = np.sqrt(p.cbar_sq)
    half = a * cbar
    K = s.size

    pos = np.concatenate([s - half, s + half])
    inv_a2 = 1.0 / (a * a)
    delta_n = np.concatenate([np.ones(K), -np.ones(K)])
    delta_w = np.concatenate([inv_a2, -inv_a2])
    delta_s1 = np.concatenate([s * inv_a2, -s * inv_a2])
    delta_s2 = np.concatenate([s * s * inv_a2, -s * s * inv_a2])

    order = np.argsort(pos, kind="stable")
    pos = pos[order]

    # Collapse boundaries that coincide within relative tolerance so ties
    # produce one event group instead of zero-width intervals.
    scale = np.maximum(1.0, np.abs(pos))
    new_group = np.empty(pos.size, dtype=bool)
    new_group[0] = True
    new_group[1:] = np.diff(pos) > BOUNDARY_MERGE_REL_TOL * scale[1:]
    group_id = np.cumsum(new_group) - 1
    n_groups = group_id[-1] + 1
    group_pos = pos[new_group]

    cum_n = np.cumsum(delta_n[order])
    cum_w = np.cumsum(delta_w[order])
    cum_s1 = np.cumsum(delta_s1[order])
    cum_s2 = np.cumsum(delta_s2[order])
    last_of_group = np.nonzero(np.append(new_group[1:], True))[0]

    # State after processing all events of group g is valid on the open
    # interval (group_pos[g], group_pos[g + 1]).
    return _Sweep(
        lo=group_pos[: n_groups - 1],
        hi=group_pos[1:],
        n=np.rint(cum_n[last_of_group][: n_groups - 1]).astype(np.int64),
        w=cum_w[last_of_group][: n_groups - 1],
        s1=cum_s1[last_of_group][: n_groups - 1],
        s2=cum_s2[last_of_group][: n_groups - 1],
    )


def solve_scalar_tls(p: ScalarTlsProblem) -> ScalarTlsSolution:
    """Globally optimal truncated-least-squares estimate.

    Ties between candidates of equal cost prefer the larger consensus set,
    then the smaller estimate, so the output is deterministic.
    """
    sweep = _sweep_intervals(p)
    K = p.measurements.size
    occupied = sweep.n > 0
    n_candidates = int(np.count_nonzero(occupied))
    assert n_candidates <= 2 * K - 1
    if n_candidates == 0:
        # All interval boundaries collapsed to one point: that point covers
        # every measurement.
        estimate = float(np.min(p.measurements - p.alphas * np.sqrt(p.cbar_sq)))
        return ScalarTlsSolution(
            estimate=estimate,
            cost=tls_cost(p, estimate),
            inlier_mask=_consensus_mask(p, estimate),
            n_candidates=0,
        )

    n = sweep.n[occupied]
    w = sweep.w[occupied]
    s1 = sweep.s1[occupied]
    s2 = sweep.s2[occupied]

    estimates = s1 / w
    # Cost of keeping exactly this consensus set: weighted SSE at its
    # least-squares center plus the truncation penalty of everything else.
    sse = np.maximum(s2 - s1 * s1 / w, 0.0)
    costs = sse + (K - n) * p.cbar_sq

    best = np.lexsort((estimates, -n, costs))[0]
    estimate = float(estimates[best])
    mask = _consensus_mask(p, estimate)
    return ScalarTlsSolution(
        estimate=estimate,
        cost=tls_cost(p, estimate),
        inlier_mask=mask,
        n_candidates=n_candidates,
    )


def solve_consensus_max(p: ScalarTlsProblem) -> ScalarTlsSolution:
    """Maximize the consensus-set size; estimate is the midpoint of the
    winning feasibility interval (every member stays within threshold).

    Reported cost is the truncated objective at that estimate.  Ties on
    cardinality prefer the smaller estimate.
    """
    sweep = _sweep_intervals(p)
    occupied = sweep.n > 0
    n_candidates = int(np.count_nonzero(occupied))
    if n_candidates == 0:
        estimate = float(np.min(p.measurements - p.alphas * np.sqrt(p.cbar_sq)))
        return ScalarTlsSolution(
            estimate=estimate,
            cost=tls_cost(p, estimate),
            inlier_mask=_consensus_mask(p, estimate),
            n_candidates=0,
        )

    n = sweep.n[occupied]
    mids = 0.5 * (sweep.lo[occupied] + sweep.hi[occupied])
    best = np.lexsort((mids, -n))[0]
    estimate = float(mids[best])
    mask = _consensus_mask(p, estimate)
    return ScalarTlsSolution(
        estimate=estimate,
        cost=tls_cost(p, estimate),
        inlier_mask=mask,
        n_candidates=n_candidates,
    )


def consensus_equivalence_check(p: ScalarTlsProblem) -> ConsensusDiagnostics:
    """Sufficient condition for TLS to select the maximum consensus set.

    If the second-largest consensus set is smaller than N_max -
    r_in / cbar_sq, where r_in is the weighted residual sum of the maximum
    consensus set at its best representative, the TLS solution picks the
    same inliers as consensus maximization.
    """
    sweep = _sweep_intervals(p)
    occupied = sweep.n > 0
    if not np.any(occupied):
        K = p.measurements.size
        return ConsensusDiagnostics(True, K, 0, 0.0, float(K))
    n = sweep.n[occupied]
    lo = sweep.lo[occupied]
    hi = sweep.hi[occupied]
    w = sweep.w[occupied]
    s1 = sweep.s1[occupied]

    mids = 0.5 * (lo + hi)
    best = np.lexsort((mids, -n))[0]
    max_size = int(n[best])
    second_size = 0
    if n.size > 1:
        rest = np.delete(n, best)
        second_size = int(rest.max())

    # Best representative of the winning set: its weighted least-squares
    # center clamped into the feasibility interval (minimizes r_in there).
    center = float(np.clip(s1[best] / w[best], lo[best], hi[best]))
    members = _consensus_mask(p, mids[best])
    r = (center - p.measurements[members]) / p.alphas[members]
    r_in = float(np.sum(r * r))

    threshold = max_size - r_in / p.cbar_sq
    return ConsensusDiagnostics(
        equivalent=second_size < threshold,
        max_size=max_size,
        second_size=second_size,
        inlier_residual_sum=r_in,
        threshold=threshold,
    )
