from __future__ import annotations

import time
from itertools import permutations

import numpy as np
import pytest

from graphorder.baselines import (brute_force_order, degree_order, greedy_order)
from graphorder.graph import Graph, gen_erdos_renyi
from graphorder.locality import (as_similarity, candidate_gain, locality_score)

from conftest import FIVE_VERTEX_SIM, random_digraph


def naive_best_order(source, w):
    """Reference oracle: plain python enumeration in lexicographic order."""
    src = as_similarity(source)
    best_score, best_perm = -1, None
    for perm in permutations(range(src.n)):
        score = locality_score(src, list(perm), w)
        if score > best_score:
            best_score, best_perm = score, perm
    return np.array(best_perm), best_score


class TestGreedyOrder:
    def test_worked_fixture(self, five_sim):
        order = greedy_order(five_sim, 3)
        assert order.tolist() == [0, 1, 3, 4, 2]
        assert locality_score(five_sim, order, 3) == 7

    def test_single_vertex(self):
        assert greedy_order(Graph(1), 3).tolist() == [0]

    def test_always_bijection(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(1, 30))
            g = random_digraph(rng, n, 0.2)
            order = greedy_order(g, int(rng.integers(1, 6)))
            assert sorted(order.tolist()) == list(range(n))

    def test_each_step_attains_max_gain(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            n = int(rng.integers(2, 15))
            g = random_digraph(rng, n, 0.3)
            w = int(rng.integers(1, 5))
            src = as_similarity(g)
            order = greedy_order(g, w)
            for i in range(n):
                recent = order[max(0, i - w):i].tolist()
                chosen = candidate_gain(src, recent, int(order[i]))
                rest = [candidate_gain(src, recent, v)
                        for v in range(n) if v not in order[:i + 1]]
                assert all(chosen >= r for r in rest)

    def test_approximation_bound_small(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            g = random_digraph(rng, n, 0.3)
            for w in (2, 3):
                _, best = brute_force_order(g, w)
                got = locality_score(g, greedy_order(g, w), w)
                assert got * 2 * w >= best

    def test_runtime_scales_quadratically(self):
        # doubling n should cost no more than ~4x plus generous slack
        times = {}
        for n in (500, 1000, 2000):
            g = gen_erdos_renyi(n, 8.0 / n, seed=1)
            t0 = time.perf_counter()
            greedy_order(g, 5)
            times[n] = time.perf_counter() - t0
        print(f"greedy runtimes: {times}")
        assert times[2000] / max(times[500], 1e-3) < 40


class TestBruteForce:
    def test_matches_naive_enumeration(self, five_sim):
        perm, score = brute_force_order(five_sim, 3)
        naive_perm, naive_score = naive_best_order(five_sim, 3)
        assert score == naive_score == 7
        assert perm.tolist() == naive_perm.tolist()

    def test_matches_naive_on_random_graphs(self):
        rng = np.random.default_rng(13)
        for _ in range(15):
            n = int(rng.integers(2, 7))
            g = random_digraph(rng, n, 0.35)
            w = int(rng.integers(1, 4))
            perm, score = brute_force_order(g, w)
            naive_perm, naive_score = naive_best_order(g, w)
            assert score == naive_score
            assert perm.tolist() == naive_perm.tolist()

    def test_all_zero_similarity(self):
        perm, score = brute_force_order(np.zeros((4, 4), dtype=int), 2)
        assert score == 0
        assert perm.tolist() == [0, 1, 2, 3]

    def test_two_vertices(self):
        perm, score = brute_force_order([[0, 5], [5, 0]], 1)
        assert score == 5
        assert perm.tolist() == [0, 1]

    def test_refuses_large_n(self):
        with pytest.raises(ValueError):
            brute_force_order(np.zeros((11, 11), dtype=int), 2)


class TestDegreeOrder:
    def test_star(self):
        g = Graph(4, [(0, 1), (0, 2), (0, 3)])
        assert degree_order(g).tolist() == [0, 1, 2, 3]

    def test_regular_ties_to_identity(self):
        g = Graph.from_undirected(5, [(i, (i + 1) % 5) for i in range(5)])
        assert degree_order(g).tolist() == [0, 1, 2, 3, 4]

    def test_path(self):
        g = Graph(3, [(0, 1), (1, 2)])
        assert degree_order(g).tolist() == [1, 0, 2]
