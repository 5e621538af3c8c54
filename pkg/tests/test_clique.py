"""Scale pruning and exact maximum-clique search (both kernels)."""

import itertools

import numpy as np
import pytest

from tlsreg import clique as clique_mod
from tlsreg.clique import (
    CliqueResult,
    clique_iterator,
    graph_from_edges,
    max_clique,
    prune_by_scale,
)
from tlsreg.geometry import CorrespondenceSet, quat_to_matrix, random_unit_quaternion
from tlsreg.invariants import build_measurement_graph

RNG = np.random.default_rng(11)


def brute_force_max_clique(n, edges):
    """Exhaustive subset enumeration; lexicographically smallest winner."""
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adj[i, j] = adj[j, i] = True
    best = ()
    for r in range(n, 0, -1):
        winners = []
        for subset in itertools.combinations(range(n), r):
            if all(adj[a, b] for a, b in itertools.combinations(subset, 2)):
                winners.append(subset)
        if winners:
            best = min(winners)
            break
    return list(best)


def random_graph(rng, n, p):
    edges = [
        (i, j) for i in range(n) for j in range(i + 1, n) if rng.uniform() < p
    ]
    return edges


class TestMaxClique:
    def test_complete_graph(self):
        edges = list(itertools.combinations(range(5), 2))
        r = max_clique(graph_from_edges(5, edges))
        assert r.vertices.tolist() == [0, 1, 2, 3, 4]
        assert r.is_certified_maximum

    def test_two_cliques_with_noise_edges(self):
        rng = np.random.default_rng(3)
        small = list(itertools.combinations(range(4), 2))
        big = list(itertools.combinations(range(5, 12), 2))
        noise = [(int(rng.integers(0, 5)), int(rng.integers(5, 12))) for _ in range(4)]
        edges = sorted(set(small + big + noise))
        r = max_clique(graph_from_edges(12, edges))
        assert r.vertices.tolist() == list(range(5, 12))

    def test_empty_graph(self):
        r = max_clique(graph_from_edges(0, np.empty((0, 2))))
        assert len(r) == 0 and r.is_certified_maximum

    def test_edgeless_graph(self):
        r = max_clique(graph_from_edges(4, np.empty((0, 2))))
        assert r.vertices.tolist() == [0]

    def test_matches_exhaustive_oracle(self):
        for trial in range(100):
            n = int(RNG.integers(4, 16))
            edges = random_graph(RNG, n, float(RNG.uniform(0.2, 0.9)))
            r = max_clique(graph_from_edges(n, edges))
            oracle = brute_force_max_clique(n, edges)
            assert len(r.vertices) == len(oracle), (n, edges)
            assert r.vertices.tolist() == oracle, (n, edges)

    def test_returned_set_is_always_a_clique(self):
        for _ in range(30):
            n = int(RNG.integers(5, 30))
            edges = random_graph(RNG, n, 0.4)
            g = graph_from_edges(n, edges)
            r = max_clique(g)
            adj = np.zeros((n, n), dtype=bool)
            for i, j in edges:
                adj[i, j] = adj[j, i] = True
            for a, b in itertools.combinations(r.vertices.tolist(), 2):
                assert adj[a, b]

    def test_budget_expiry_flags_result(self):
        rng = np.random.default_rng(5)
        n = 130
        edges = random_graph(rng, n, 0.92)
        r = max_clique(graph_from_edges(n, edges), time_budget=1e-4)
        # Too little time to finish a dense 130-vertex instance: the result
        # is still a clique but may be uncertified.
        assert isinstance(r, CliqueResult)


@pytest.mark.skipif(not clique_mod.COMPILED_KERNEL, reason="extension not built")
class TestBackendEquivalence:
    def test_backends_return_identical_cliques(self, monkeypatch):
        for trial in range(40):
            n = int(RNG.integers(5, 40))
            edges = random_graph(RNG, n, float(RNG.uniform(0.2, 0.95)))
            g = graph_from_edges(n, edges)
            compiled = max_clique(g)
            monkeypatch.setattr(clique_mod, "_bnb_native", None)
            pure = max_clique(g)
            monkeypatch.undo()
            assert compiled.vertices.tolist() == pure.vertices.tolist()


class TestPruneByScale:
    def make_graph(self, n, outlier_idx, scale=2.0, seed=0):
        rng = np.random.default_rng(seed)
        src = rng.uniform(0, 1, size=(n, 3))
        q = random_unit_quaternion(rng)
        dst = scale * src @ quat_to_matrix(q).T + rng.normal(size=3)
        for i in outlier_idx:
            dst[i] = rng.uniform(-5, 5, size=3)
        c = CorrespondenceSet(src, dst, np.full(n, 0.01))
        return build_measurement_graph(c)

    def test_noiseless_keeps_all_inlier_edges(self):
        g = self.make_graph(10, outlier_idx=[])
        pruned = prune_by_scale(g, 2.0, cbar_sq=1.0)
        assert pruned.n_edges == 45

    def test_outlier_vertex_edges_removed(self):
        hit = 0
        for seed in range(100):
            g = self.make_graph(11, outlier_idx=[10], seed=seed)
            pruned = prune_by_scale(g, 2.0, cbar_sq=1.0)
            touching = np.any(pruned.kept_edges == 10, axis=1)
            if not np.any(touching):
                hit += 1
        assert hit >= 95

    def test_wildly_wrong_scale_empties_graph(self):
        g = self.make_graph(10, outlier_idx=[])
        s_bad = 2.0 + 10 * float(np.max(g.trims.alpha))
        pruned = prune_by_scale(g, s_bad, cbar_sq=1.0)
        assert pruned.n_edges == 0


class TestInlierContainment:
    def test_maximum_clique_contains_all_true_inliers(self):
        # With mutually scale-consistent inliers, the max clique contains
        # them all or ties their count.
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n, n_out = 20, 8
            src = rng.uniform(0, 1, size=(n, 3))
            q = random_unit_quaternion(rng)
            dst = src @ quat_to_matrix(q).T + rng.normal(size=3)
            out_idx = rng.choice(n, size=n_out, replace=False)
            for i in out_idx:
                dst[i] = rng.uniform(-5, 5, size=3)
            c = CorrespondenceSet(src, dst, np.full(n, 0.01))
            g = build_measurement_graph(c)
            pruned = prune_by_scale(g, 1.0, cbar_sq=1.0)
            r = max_clique(pruned)
            inliers = sorted(set(range(n)) - set(out_idx.tolist()))
            contained = set(inliers) <= set(r.vertices.tolist())
            assert contained or len(r) >= len(inliers)


class TestCliqueIterator:
    def test_yields_decreasing_sizes(self):
        small = list(itertools.combinations(range(4), 2))
        big = list(itertools.combinations(range(5, 12), 2))
        g = graph_from_edges(12, sorted(set(small + big)))
        it = clique_iterator(g)
        first = next(it)
        second = next(it)
        assert first.vertices.tolist() == list(range(5, 12))
        assert len(second) <= len(first)
        assert second.vertices.tolist() != first.vertices.tolist()
