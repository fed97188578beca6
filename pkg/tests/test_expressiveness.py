import numpy as np
import pytest

from rum import expressiveness as E
from rum import graphs as G


def cycle(n):
    return G.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def two_triangles():
    return G.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])


@pytest.fixture
def path3():
    return G.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def triangle():
    return cycle(3)


class TestWLRefine:
    def test_regular_graph_single_color(self):
        hist = E.wl_refine(cycle(7))
        assert len(hist) == 1 and sum(hist.values()) == 7

    def test_path_splits_by_degree(self, path3):
        hist = E.wl_refine(path3)
        assert sorted(hist.values()) == [1, 2]

    def test_csl_pairs_share_histogram(self):
        g1 = G.csl_graph(41, 2)
        g2 = G.csl_graph(41, 3)
        assert E.wl_refine(g1) == E.wl_refine(g2)
        assert not E.wl_distinguish(g1, g2)

    def test_initial_labels_refine_further(self, path3):
        hist = E.wl_refine(path3, labels=[0, 0, 1])
        assert len(hist) == 3

    def test_histogram_total_is_node_count(self):
        g = G.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)])
        assert sum(E.wl_refine(g).values()) == 5


class TestWLDistinguish:
    def test_isomorphic_relabelings_agree(self):
        g = G.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)])
        perm = np.array([3, 0, 4, 1, 2])
        assert not E.wl_distinguish(g, g.permuted(perm))

    def test_c6_vs_two_triangles_fails(self):
        assert not E.wl_distinguish(cycle(6), two_triangles())

    def test_path_vs_triangle_succeeds(self, path3, triangle):
        assert E.wl_distinguish(path3, triangle)


class TestAnonDistinguish:
    def test_path_vs_triangle_at_l3(self, path3, triangle):
        # the full-cycle return pattern has positive mass only on the triangle
        assert E.anon_distinguish(path3, triangle, l=3)

    def test_isomorphic_graphs_never_distinguished(self):
        g = G.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)])
        rng = np.random.default_rng(0)
        for l in (2, 3, 6):
            gp = g.permuted(rng.permutation(5))
            assert not E.anon_distinguish(g, gp, l=l)

    def test_c6_vs_two_triangles_succeeds_at_l3(self):
        # the witness class for strictness over color refinement
        assert E.anon_distinguish(cycle(6), two_triangles(), l=3)

    def test_symmetric_and_irreflexive(self, path3, triangle):
        assert E.anon_distinguish(triangle, path3, l=3)
        assert not E.anon_distinguish(triangle, triangle, l=3)

    def test_labels_can_separate_when_topology_cannot(self):
        g = cycle(4)
        same = E.anon_distinguish(g, g, l=3, labels1=[0, 1, 0, 1], labels2=[0, 1, 0, 1])
        diff = E.anon_distinguish(g, g, l=3, labels1=[0, 1, 0, 1], labels2=[0, 0, 1, 1])
        assert not same and diff

    def test_monte_carlo_agrees_on_easy_pairs(self, path3, triangle):
        assert E.anon_distinguish(path3, triangle, l=3, mode="monte-carlo",
                                  n_samples=20_000, seed=3)
        assert not E.anon_distinguish(triangle, triangle, l=3, mode="monte-carlo",
                                      n_samples=20_000, seed=4)

    def test_witness_pattern_for_triangles(self, path3, triangle):
        key = E.witness_pattern(triangle, path3, l=3)
        assert key is not None


class TestDetectCycle:
    def test_triangle_has_3_cycle(self, triangle):
        assert E.detect_cycle(triangle, 3)

    def test_path_has_no_cycles(self, path3):
        for k in (3, 4, 5):
            assert not E.detect_cycle(path3, k)

    def test_c6_cycle_lengths(self):
        g = cycle(6)
        assert not E.detect_cycle(g, 3)
        assert E.detect_cycle(g, 6)

    def test_agrees_with_bruteforce_on_small_graphs(self):
        for n in (4, 5, 6):
            for g in E.enumerate_connected_graphs(n):
                for k in range(3, n + 1):
                    assert E.detect_cycle(g, k) == E.has_cycle_bruteforce(g, k), \
                        f"n={n} k={k}"

    def test_monte_carlo_finds_obvious_cycle(self, triangle):
        assert E.detect_cycle(triangle, 3, mode="monte-carlo", n_samples=2000, seed=0)

    def test_k_below_3_rejected(self, triangle):
        with pytest.raises(G.GraphError):
            E.detect_cycle(triangle, 2)


class TestLongestAnonPath:
    def test_path3(self, path3):
        assert E.longest_anon_path(path3, 5) == 2

    def test_triangle(self, triangle):
        assert E.longest_anon_path(triangle, 5) == 2

    def test_star(self):
        star = G.from_edges(4, [(0, 1), (0, 2), (0, 3)])
        assert E.longest_anon_path(star, 5) == 2

    def test_exceeds_diameter_on_complete_graph(self):
        # the all-distinct-walk maximum is the longest simple path, which is
        # n-1 on K4 even though the diameter is 1
        k4 = G.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        assert E.longest_anon_path(k4, 6) == 3

    def test_monte_carlo_close_on_small_graph(self, path3):
        assert E.longest_anon_path(path3, 4, mode="monte-carlo",
                                   n_samples=4000, seed=1) == 2


class TestSmallGraphCorpus:
    def test_counts_match_known_values(self):
        # connected unlabeled graphs on 2..5 nodes
        assert [len(E.enumerate_connected_graphs(n)) for n in (2, 3, 4, 5)] == [1, 2, 6, 21]

    def test_wl_never_beats_exact_anon_at_n_plus_1(self):
        # refinement separating a pair while exact anonymous distributions at
        # l = N+1 do not must never happen on the exhaustive small corpus
        for n in (3, 4, 5):
            gs = E.enumerate_connected_graphs(n)
            for i in range(len(gs)):
                for j in range(i + 1, len(gs)):
                    if E.wl_distinguish(gs[i], gs[j]):
                        assert E.anon_distinguish(gs[i], gs[j], l=n + 1)
