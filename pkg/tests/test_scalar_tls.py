"""Exactness of the adaptive-voting scalar solver against brute force."""

import itertools

import numpy as np
import pytest

from tlsreg.scalar_tls import (
    ScalarTlsProblem,
    consensus_equivalence_check,
    solve_consensus_max,
    solve_scalar_tls,
    tls_cost,
)

RNG = np.random.default_rng(7)


def subset_oracle(p: ScalarTlsProblem):
    """Enumerate all inlier subsets: weighted-LS center of each, keep the
    ones whose members actually satisfy the threshold, return the subset
    with minimum total truncated cost and, separately, the maximum
    cardinality among valid subsets.
    """
    s, a, cb = p.measurements, p.alphas, p.cbar_sq
    K = s.size
    best_cost = K * cb
    best_estimate = None
    best_size = 0
    cbar = np.sqrt(cb)
    for r in range(1, K + 1):
        for subset in itertools.combinations(range(K), r):
            idx = list(subset)
            # Feasibility of the whole subset at one point (max consensus):
            lo = np.max(s[idx] - a[idx] * cbar)
            hi = np.min(s[idx] + a[idx] * cbar)
            if lo <= hi + 1e-12 and r > best_size:
                best_size = r
            w = 1.0 / a[idx] ** 2
            center = np.sum(w * s[idx]) / np.sum(w)
            if np.any(np.abs(center - s[idx]) > a[idx] * cbar * (1 + 1e-12)):
                continue
            cost = float(np.sum(w * (center - s[idx]) ** 2) + (K - r) * cb)
            if cost < best_cost - 1e-15:
                best_cost = cost
                best_estimate = center
    return best_cost, best_estimate, best_size


def random_problem(rng, K, spread=5.0):
    s = rng.uniform(-spread, spread, size=K)
    a = rng.uniform(0.1, 2.0, size=K)
    return ScalarTlsProblem(s, a, cbar_sq=float(rng.uniform(0.5, 2.0)))


class TestSolveTls:
    def test_worked_example(self):
        # Two coincident measurements at 0 and one at 3 with alpha 2, cbar 1:
        # optimal estimate 0 with cost 1, consensus {0, 1}.
        p = ScalarTlsProblem([0.0, 0.0, 3.0], [2.0, 2.0, 2.0], cbar_sq=1.0)
        sol = solve_scalar_tls(p)
        assert sol.estimate == pytest.approx(0.0, abs=1e-12)
        assert sol.cost == pytest.approx(1.0, abs=1e-12)
        assert sol.inlier_mask.tolist() == [True, True, False]

    def test_single_measurement(self):
        sol = solve_scalar_tls(ScalarTlsProblem([5.0], [0.7]))
        assert sol.estimate == pytest.approx(5.0)
        assert sol.cost == pytest.approx(0.0, abs=1e-15)

    def test_matches_exhaustive_oracle(self):
        for trial in range(60):
            K = int(RNG.integers(1, 11))
            p = random_problem(RNG, K)
            sol = solve_scalar_tls(p)
            oracle_cost, _, _ = subset_oracle(p)
            assert sol.cost <= oracle_cost + 1e-9
            assert sol.cost >= oracle_cost - 1e-9

    def test_cost_is_recomputable(self):
        for _ in range(50):
            p = random_problem(RNG, int(RNG.integers(2, 30)))
            sol = solve_scalar_tls(p)
            assert abs(tls_cost(p, sol.estimate) - sol.cost) < 1e-10

    def test_candidate_bound(self):
        for _ in range(50):
            K = int(RNG.integers(1, 40))
            sol = solve_scalar_tls(random_problem(RNG, K))
            assert sol.n_candidates <= 2 * K - 1

    def test_mask_consistent_with_estimate(self):
        for _ in range(50):
            p = random_problem(RNG, 15)
            sol = solve_scalar_tls(p)
            r = (sol.estimate - p.measurements) / p.alphas
            expected = r * r <= p.cbar_sq * (1 + 1e-12)
            assert np.array_equal(sol.inlier_mask, expected)

    def test_rejects_empty_problem(self):
        with pytest.raises(ValueError):
            ScalarTlsProblem([], [])

    def test_deterministic_tie_break(self):
        # Two symmetric clusters of equal cost: the smaller estimate wins.
        p = ScalarTlsProblem([-1.0, -1.0, 1.0, 1.0], [0.5] * 4, cbar_sq=1.0)
        sol = solve_scalar_tls(p)
        assert sol.estimate == pytest.approx(-1.0)


class TestConsensusMax:
    def test_worked_example(self):
        # Same instance as above: all three measurements fit at 1.5.
        p = ScalarTlsProblem([0.0, 0.0, 3.0], [2.0, 2.0, 2.0], cbar_sq=1.0)
        sol = solve_consensus_max(p)
        assert sol.inlier_mask.tolist() == [True, True, True]
        assert sol.estimate == pytest.approx(1.5)

    def test_identical_measurements(self):
        p = ScalarTlsProblem([2.0] * 6, [1.0] * 6)
        sol = solve_consensus_max(p)
        assert np.all(sol.inlier_mask)
        assert sol.estimate == pytest.approx(2.0)

    def test_cardinality_matches_oracle(self):
        for _ in range(60):
            K = int(RNG.integers(1, 11))
            p = random_problem(RNG, K)
            sol = solve_consensus_max(p)
            _, _, oracle_size = subset_oracle(p)
            assert int(np.sum(sol.inlier_mask)) == oracle_size


class TestEquivalenceCondition:
    def test_tight_cluster_plus_far_outlier(self):
        p = ScalarTlsProblem([1.0, 1.0 + 1e-9, 1.0 - 1e-9, 50.0], [1.0] * 4)
        diag = consensus_equivalence_check(p)
        assert diag.equivalent
        tls = solve_scalar_tls(p)
        mc = solve_consensus_max(p)
        assert np.array_equal(tls.inlier_mask, mc.inlier_mask)

    def test_worked_example_not_equivalent(self):
        p = ScalarTlsProblem([0.0, 0.0, 3.0], [2.0, 2.0, 2.0], cbar_sq=1.0)
        diag = consensus_equivalence_check(p)
        assert not diag.equivalent
        tls = solve_scalar_tls(p)
        mc = solve_consensus_max(p)
        assert not np.array_equal(tls.inlier_mask, mc.inlier_mask)

    def test_condition_implies_identical_masks(self):
        found = 0
        trials = 0
        while found < 50 and trials < 3000:
            trials += 1
            K = int(RNG.integers(2, 12))
            p = random_problem(RNG, K)
            diag = consensus_equivalence_check(p)
            if not diag.equivalent:
                continue
            found += 1
            tls = solve_scalar_tls(p)
            mc = solve_consensus_max(p)
            assert np.array_equal(tls.inlier_mask, mc.inlier_mask), (
                p.measurements,
                p.alphas,
                p.cbar_sq,
            )
        assert found == 50


class TestScaling:
    def test_near_linear_growth(self):
        # Each tenfold increase in K from 1e3 to 1e5 may grow the wall
        # clock by at most 30x (near-linear; rules out quadratic sweeps).
        import time

        def run(K):
            rng = np.random.default_rng(123)
            p = ScalarTlsProblem(
                rng.uniform(0, 10, size=K), rng.uniform(0.05, 0.5, size=K)
            )
            best = np.inf
            for _ in range(3):
                t0 = time.perf_counter()
                solve_scalar_tls(p)
                best = min(best, time.perf_counter() - t0)
            return max(best, 1e-4)

        run(1000)  # warm-up
        times = [run(K) for K in (1000, 10_000, 100_000)]
        for smaller, larger in zip(times, times[1:]):
            assert larger / smaller < 30.0
