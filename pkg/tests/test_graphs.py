import numpy as np
import pytest

from rum import graphs as G


@pytest.fixture
def path3():
    return G.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def triangle():
    return G.from_edges(3, [(0, 1), (1, 2), (0, 2)])


class TestLoading:
    def test_path_graph_degrees(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("0 1\n1 2\n")
        g = G.load_edge_list(p, symmetrize=True)
        assert list(g.degrees()) == [1, 2, 1]

    def test_duplicate_directions_collapse(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("0 1\n1 0\n")
        g = G.load_edge_list(p, symmetrize=True)
        assert len(g.neighbors) == 2
        assert g.num_edges == 1

    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("# header\n\n0 1\n")
        assert G.load_edge_list(p).num_edges == 1

    def test_malformed_line_reports_number(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("0 1\n0 1 2\n")
        with pytest.raises(G.GraphError, match=":2"):
            G.load_edge_list(p)

    def test_non_integer_rejected(self, tmp_path):
        p = tmp_path / "edges.txt"
        p.write_text("0 x\n")
        with pytest.raises(G.GraphError):
            G.load_edge_list(p)

    def test_self_loops_dropped(self):
        g = G.from_edges(2, [(0, 0), (0, 1)])
        assert g.num_edges == 1
        g.validate()

    def test_roundtrip_edge_list(self, tmp_path, triangle):
        p = tmp_path / "out.txt"
        triangle.write_edge_list(p)
        reloaded = G.load_edge_list(p)
        np.testing.assert_array_equal(reloaded.offsets, triangle.offsets)
        np.testing.assert_array_equal(reloaded.neighbors, triangle.neighbors)


class TestDataset:
    def test_assembles_with_dims(self, tmp_path, path3):
        (tmp_path / "f.tsv").write_text("1.0\t2.0\n3.0\t4.0\n5.0\t6.0\n")
        (tmp_path / "y.txt").write_text("0\n1\n0\n")
        ds = G.load_features_labels_masks(path3, tmp_path / "f.tsv", tmp_path / "y.txt")
        assert ds.features.shape == (3, 2)

    def test_overlapping_masks_rejected(self, tmp_path, path3):
        (tmp_path / "f.tsv").write_text("1.0\n2.0\n3.0\n")
        (tmp_path / "y.txt").write_text("0\n1\n0\n")
        (tmp_path / "m1.txt").write_text("1\n0\n0\n")
        (tmp_path / "m2.txt").write_text("1\n1\n0\n")
        with pytest.raises(G.GraphError, match="overlap"):
            G.load_features_labels_masks(path3, tmp_path / "f.tsv", tmp_path / "y.txt",
                                         train_mask_path=tmp_path / "m1.txt",
                                         test_mask_path=tmp_path / "m2.txt")

    def test_row_count_mismatch_rejected(self, tmp_path, path3):
        (tmp_path / "f.tsv").write_text("1.0\n2.0\n")
        (tmp_path / "y.txt").write_text("0\n1\n")
        with pytest.raises(G.GraphError):
            G.load_features_labels_masks(path3, tmp_path / "f.tsv", tmp_path / "y.txt")

    def test_graph_dataset_dir(self, tmp_path):
        (tmp_path / "g0.txt").write_text("0 1\n1 2\n2 0\n")
        (tmp_path / "g1.txt").write_text("0 1\n1 2\n")
        (tmp_path / "index.tsv").write_text("g0.txt\t1\ng1.txt\t0\n")
        corpus = G.load_graph_dataset_dir(tmp_path / "index.tsv")
        assert [int(d.labels) for d in corpus] == [1, 0]
        assert corpus[0].graph.num_edges == 3


class TestDegreeAndEnergy:
    def test_degree_of_path_middle(self, path3):
        assert path3.degree(1) == 2

    def test_isolated_node_degree_zero(self):
        g = G.from_edges(3, [(0, 1)])
        assert g.degree(2) == 0

    def test_degree_out_of_range(self, path3):
        with pytest.raises(G.GraphError):
            path3.degree(3)

    def test_csl_graphs_are_4_regular(self):
        for skip in G.CSL_DEFAULT_SKIPS:
            g = G.csl_graph(41, skip)
            assert set(g.degrees().tolist()) == {4}

    def test_energy_zero_on_constant(self, triangle):
        X = np.ones((3, 4))
        assert G.dirichlet_energy(X, triangle) == 0.0

    def test_energy_single_edge(self):
        g = G.from_edges(2, [(0, 1)])
        X = np.array([[0.0], [2.0]])
        assert G.dirichlet_energy(X, g) == pytest.approx(2.0)

    def test_energy_triangle_hand_value(self, triangle):
        # rows 0,1,2: edge diffs 1,1,4 -> (1/3)*6 = 2
        X = np.array([[0.0], [1.0], [2.0]])
        assert G.dirichlet_energy(X, triangle) == pytest.approx(2.0)

    def test_energy_permutation_invariant(self):
        rng = np.random.default_rng(0)
        g = G.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)])
        X = rng.normal(size=(6, 3))
        base = G.dirichlet_energy(X, g)
        for _ in range(5):
            perm = rng.permutation(6)
            gp = g.permuted(perm)
            Xp = np.empty_like(X)
            Xp[perm] = X
            assert G.dirichlet_energy(Xp, gp) == pytest.approx(base, rel=1e-12)

    def test_energy_zero_iff_constant_per_component(self):
        g = G.from_edges(4, [(0, 1), (2, 3)])
        X = np.array([[1.0], [1.0], [5.0], [5.0]])
        assert G.dirichlet_energy(X, g) == 0.0
        X[1] = 2.0
        assert G.dirichlet_energy(X, g) > 0.0

    def test_energy_dimension_mismatch(self, triangle):
        with pytest.raises(G.GraphError):
            G.dirichlet_energy(np.ones((2, 1)), triangle)


class TestPerturbation:
    def test_fraction_zero_is_identity(self, triangle):
        g = G.add_random_edges(triangle, 0.0, seed=1)
        assert g.num_edges == triangle.num_edges

    def test_forced_single_candidate(self, path3):
        g = G.add_random_edges(path3, 0.5, seed=3)  # floor(0.5*2)=1 new edge
        assert g.num_edges == 3
        assert g.has_edge(0, 2)

    def test_exact_growth_and_validity(self):
        rng = np.random.default_rng(9)
        g = G.from_edges(30, [(i, j) for i in range(30) for j in range(i + 1, 30)
                              if rng.random() < 0.2])
        before = g.num_edges
        out = G.add_random_edges(g, 0.10, seed=5)
        assert out.num_edges == before + int(0.10 * before)
        out.validate()

    def test_deterministic_per_seed(self, path3):
        a = G.add_random_edges(path3, 0.5, seed=7)
        b = G.add_random_edges(path3, 0.5, seed=7)
        np.testing.assert_array_equal(a.neighbors, b.neighbors)

    def test_complement_exhausted(self, triangle):
        with pytest.raises(G.GraphError):
            G.add_random_edges(triangle, 1.0, seed=0)


class TestGenerators:
    def test_cycle_is_2_regular(self):
        ds = G.gen_cycle(6)
        assert set(ds.graph.degrees().tolist()) == {2}

    def test_cycle_too_small(self):
        with pytest.raises(G.GraphError):
            G.gen_cycle(2)

    def test_csl_regular_and_labeled(self):
        ds = G.gen_csl(41, skip=2)
        assert ds.graph.num_nodes == 41
        assert set(ds.graph.degrees().tolist()) == {4}
        assert int(ds.labels) == 0

    def test_csl_invalid_skip(self):
        with pytest.raises(G.GraphError):
            G.csl_graph(41, 1)
        with pytest.raises(G.GraphError):
            G.csl_graph(41, 40)
        with pytest.raises(G.GraphError):
            G.csl_graph(40, 8)  # shares a factor

    def test_csl_corpus_identical_degree_histograms(self):
        corpus = G.csl_corpus(n_nodes=41, copies_per_class=2, seed=0)
        hists = {tuple(sorted(d.graph.degrees().tolist())) for d in corpus}
        assert len(hists) == 1

    def test_tree_match_shape(self):
        ds = G.gen_tree_match(2, seed=0)
        assert ds.graph.num_nodes == 7
        leaves = [v for v in range(7) if ds.graph.degree(v) == 1]
        assert len(leaves) == 4
        assert 0 <= ds.labels[0] < 4

    def test_tree_match_label_matches_designated_leaf(self):
        ds = G.gen_tree_match(3, seed=5)
        num_keys = 8
        flag_col = ds.features[:, num_keys]
        designated = int(np.argmax(flag_col))
        key = int(np.argmax(ds.features[designated, :num_keys]))
        assert ds.labels[0] == key
