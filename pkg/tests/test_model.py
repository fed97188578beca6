import numpy as np
import pytest

from rum import graphs as G
from rum import model as M
from rum import tensor as T
from rum.optim import Adam


def small_cfg(**kw):
    base = dict(walk_length=3, num_samples=2, hidden_dim=6, feat_state_dim=5,
                anon_state_dim=4, merge_dim=5, max_walk_length=6, dropout=0.0)
    base.update(kw)
    return M.TrainConfig(**base)


@pytest.fixture
def triangle():
    return G.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def single_edge():
    return G.from_edges(2, [(0, 1)])


def make(cfg, in_dim=3, num_classes=2, seed=0):
    return M.init_params(np.random.default_rng(seed), in_dim, num_classes, cfg)


class TestGruForward:
    def test_empty_sequence_returns_h0(self):
        cfg = small_cfg()
        params = make(cfg)
        h0 = T.Tensor(np.ones((2, cfg.feat_state_dim)))
        h, steps = M.gru_forward(params, "gru_x", [], h0)
        assert h is h0 and steps == []

    def test_zero_weights_halve_hidden(self):
        cfg = small_cfg()
        params = make(cfg)
        for k, p in params.items():
            if k.startswith("gru_x"):
                p.data[:] = 0.0
        h0 = T.Tensor(np.full((1, cfg.feat_state_dim), 8.0))
        seq = [T.Tensor(np.zeros((1, cfg.hidden_dim))) for _ in range(3)]
        h, steps = M.gru_forward(params, "gru_x", seq, h0)
        # z = sigmoid(0) = 1/2 and the candidate is tanh(0) = 0, so each
        # step leaves h_t = h_{t-1}/2
        np.testing.assert_allclose(steps[0].data, np.full((1, 5), 4.0))
        np.testing.assert_allclose(h.data, np.full((1, 5), 1.0))

    def test_final_equals_last_step(self):
        cfg = small_cfg()
        params = make(cfg, seed=3)
        rng = np.random.default_rng(1)
        seq = [T.Tensor(rng.normal(size=(4, cfg.hidden_dim))) for _ in range(5)]
        h, steps = M.gru_forward(params, "gru_x", seq)
        np.testing.assert_array_equal(h.data, steps[-1].data)

    def test_dim_mismatch_rejected(self):
        cfg = small_cfg()
        params = make(cfg)
        with pytest.raises(G.GraphError):
            M.gru_forward(params, "gru_x", [T.Tensor(np.zeros((2, cfg.hidden_dim + 1)))])

    def test_gru_step_grad_check(self):
        cfg = small_cfg(hidden_dim=3, feat_state_dim=4)
        params = make(cfg, in_dim=3)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, cfg.hidden_dim))

        names = [k for k in params if k.startswith("gru_x")]

        def loss_fn(*tensors):
            p = dict(zip(names, tensors))
            h, _ = M.gru_forward(p, "gru_x", [T.Tensor(x), T.Tensor(x * 0.5)])
            return T.tsum(T.square(h))

        err = T.grad_check(loss_fn, [params[k] for k in names])
        assert err < 1e-4


class TestEncodeAnon:
    def test_one_hot_positions(self):
        out = M.encode_anon(np.array([[0, 1, 0, 1]]), width=5)
        assert len(out) == 4
        cols = [int(np.argmax(t.data[0])) for t in out]
        assert cols == [0, 1, 0, 1]

    def test_single_index(self):
        out = M.encode_anon(np.array([[0]]), width=3)
        np.testing.assert_array_equal(out[0].data, [[1, 0, 0]])

    def test_all_distinct_walk(self):
        out = M.encode_anon(np.array([[0, 1, 2, 3]]), width=5)
        stacked = np.stack([t.data[0] for t in out])
        assert np.array_equal(stacked.argmax(axis=1), [0, 1, 2, 3])
        assert np.all(stacked.sum(axis=1) == 1)

    def test_overflow_rejected(self):
        with pytest.raises(G.GraphError):
            M.encode_anon(np.array([[0, 1, 2]]), width=2)


class TestWalkEmbedding:
    def test_deterministic_for_identical_inputs(self, triangle):
        cfg = small_cfg()
        params = make(cfg)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(3, 3))
        proj = M.project_features(params, X)
        walks = np.array([[0, 1, 2, 0], [0, 1, 2, 0]])
        h, _, _ = M.embed_walks(params, proj, walks, cfg)
        np.testing.assert_array_equal(h.data[0], h.data[1])

    def test_invariant_to_node_relabeling(self):
        # same anonymous structure and identical per-step features must embed
        # identically even when node ids differ
        cfg = small_cfg()
        params = make(cfg)
        X = np.tile(np.array([[0.3, -1.0, 2.0]]), (6, 1))
        proj = M.project_features(params, X)
        h, _, _ = M.embed_walks(params, proj, np.array([[0, 1, 0, 2], [3, 5, 3, 4]]), cfg)
        np.testing.assert_allclose(h.data[0], h.data[1], atol=1e-12)

    def test_zero_merge_weights_give_bias(self, triangle):
        cfg = small_cfg()
        params = make(cfg)
        params["merge.w1"].data[:] = 0.0
        params["merge.w2"].data[:] = 0.0
        params["merge.b1"].data[:] = 0.0
        params["merge.b2"].data[:] = 7.0
        proj = M.project_features(params, np.ones((3, 3)))
        h, _, _ = M.embed_walks(params, proj, np.array([[0, 1, 2, 0]]), cfg)
        np.testing.assert_allclose(h.data, np.full((1, cfg.merge_dim), 7.0))

    def test_length_mismatch_rejected(self):
        cfg = small_cfg()
        params = make(cfg)
        xs = [T.Tensor(np.zeros((1, cfg.hidden_dim)))] * 3
        with pytest.raises(G.GraphError):
            M.walk_embedding(params, xs, (0, 1), cfg)


class TestNodeRepresentation:
    def test_k1_is_single_walk_embedding(self, triangle):
        cfg = small_cfg(num_samples=1)
        params = make(cfg)
        X = np.random.default_rng(0).normal(size=(3, 3))
        psi, h, walks, _, _ = M.node_embeddings(params, triangle, X, [1], cfg, seed=4)
        np.testing.assert_allclose(psi.data[0], h.data[0], rtol=1e-12)

    def test_forced_walks_sample_independent(self, single_edge):
        cfg = small_cfg()
        params = make(cfg)
        X = np.random.default_rng(1).normal(size=(2, 3))
        a = M.node_representation(params, single_edge, X, 0, cfg, seed=1)
        b = M.node_representation(params, single_edge, X, 0,
                                  cfg.with_overrides(num_samples=7), seed=99)
        np.testing.assert_allclose(a.data, b.data, rtol=1e-12)

    def test_variance_shrinks_like_one_over_k(self):
        star = G.from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])
        cfg = small_cfg(walk_length=2)
        params = make(cfg)
        X = np.random.default_rng(2).normal(size=(5, 3))

        def spread(k, seeds):
            vals = [M.node_representation(params, star, X, 0,
                                          cfg.with_overrides(num_samples=k),
                                          seed=s).data[0, 0]
                    for s in seeds]
            return np.var(vals)

        v1 = spread(1, range(300))
        v8 = spread(8, range(300, 600))
        assert v1 > 0
        ratio = v1 / v8
        assert 4.0 < ratio < 16.0  # ~8 expected, loose band

    def test_isolated_node_rejected(self):
        g = G.from_edges(3, [(0, 1)])
        cfg = small_cfg()
        params = make(cfg)
        from rum.walks import SamplingError
        with pytest.raises(SamplingError):
            M.node_representation(params, g, np.ones((3, 3)), 2, cfg, seed=0)


class TestGraphRepresentation:
    def test_sum_of_node_representations(self, single_edge):
        cfg = small_cfg()
        params = make(cfg)
        X = np.random.default_rng(3).normal(size=(2, 3))
        total = M.graph_representation(params, single_edge, X, cfg, seed=5)
        psi, _, _, _, _ = M.node_embeddings(params, single_edge, X, [0, 1], cfg, seed=5)
        np.testing.assert_allclose(total.data, psi.data.sum(axis=0), rtol=1e-12)

    def test_exact_mode_identical_on_isomorphic_labeled_graphs(self):
        g = G.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        cfg = small_cfg(walk_length=3)
        params = make(cfg)
        rng = np.random.default_rng(4)
        X = rng.normal(size=(4, 3))
        perm = np.array([2, 0, 3, 1])
        gp = g.permuted(perm)
        Xp = np.empty_like(X)
        Xp[perm] = X
        a = M.exact_graph_representation(params, g, X, cfg)
        b = M.exact_graph_representation(params, gp, Xp, cfg)
        np.testing.assert_allclose(a.data, b.data, atol=1e-9)


class TestExactEquivariance:
    def test_psi_permutation_equivariant_exact_mode(self):
        g = G.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)])
        cfg = small_cfg(walk_length=3)
        params = make(cfg)
        rng = np.random.default_rng(7)
        X = rng.normal(size=(5, 3))
        psi = np.vstack([M.exact_node_representation(params, g, X, v, cfg).data
                         for v in range(5)])
        perm = np.array([3, 1, 4, 0, 2])
        gp = g.permuted(perm)
        Xp = np.empty_like(X)
        Xp[perm] = X
        psi_p = np.vstack([M.exact_node_representation(params, gp, Xp, v, cfg).data
                           for v in range(5)])
        np.testing.assert_allclose(psi_p[perm], psi, atol=1e-9)

    def test_psi_depends_only_on_walk_pair_multisets(self):
        # both endpoints of a path see the same (features, anonymous) walk
        # multisets when features are symmetric, so psi must match exactly
        g = G.from_edges(3, [(0, 1), (1, 2)])
        cfg = small_cfg(walk_length=4)
        params = make(cfg)
        X = np.array([[1.0, 2.0, 0.5], [0.0, -1.0, 0.25], [1.0, 2.0, 0.5]])
        a = M.exact_node_representation(params, g, X, 0, cfg)
        b = M.exact_node_representation(params, g, X, 2, cfg)
        np.testing.assert_allclose(a.data, b.data, atol=1e-12)


class TestLosses:
    def test_consistency_zero_for_identical_one_hot(self):
        rows = np.tile(np.array([[1.0, 0.0, 0.0]]), (4, 1))
        loss = M.consistency_loss(T.Tensor(rows), temperature=0.5)
        assert float(loss.data) == pytest.approx(0.0, abs=1e-12)

    def test_consistency_zero_for_identical_rows_at_t1(self):
        rows = np.tile(np.array([[0.3, 0.7]]), (3, 1))
        loss = M.consistency_loss(T.Tensor(rows), temperature=1.0)
        assert float(loss.data) == pytest.approx(0.0, abs=1e-12)

    def test_consistency_hand_value(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0]])
        loss = M.consistency_loss(T.Tensor(rows), temperature=1.0)
        assert float(loss.data) == pytest.approx(0.5)

    def test_consistency_rejects_unnormalized(self):
        with pytest.raises(G.GraphError):
            M.consistency_loss(T.Tensor(np.array([[0.5, 0.6], [0.5, 0.5]])), 1.0)

    def test_consistency_needs_two_samples(self):
        with pytest.raises(G.GraphError):
            M.consistency_loss(T.Tensor(np.array([[1.0, 0.0]])), 1.0)

    def test_self_supervised_zero_when_prediction_is_target(self):
        cfg = small_cfg(feat_state_dim=4, hidden_dim=4)
        params = make(cfg)
        params["self_head.w"].data[:] = np.eye(4)
        params["self_head.b"].data[:] = 0.0
        rng = np.random.default_rng(0)
        xs = [T.Tensor(rng.normal(size=(2, 4))) for _ in range(3)]
        hx_steps = [T.Tensor(xs[t + 1].data.copy()) for t in range(2)] + [
            T.Tensor(np.zeros((2, 4)))]
        loss = M.self_supervised_loss(params, hx_steps, xs)
        assert float(loss.data) == pytest.approx(0.0, abs=1e-12)

    def test_self_supervised_positive_at_random_init(self, triangle):
        cfg = small_cfg()
        params = make(cfg)
        X = np.random.default_rng(1).normal(size=(3, 3))
        _, _, hx_steps, xs = M.node_class_probs(params, triangle, X, [0, 1], cfg, seed=0)
        loss = M.self_supervised_loss(params, hx_steps, xs)
        assert float(loss.data) > 0

    def test_self_supervised_short_sequence_is_zero(self):
        cfg = small_cfg()
        params = make(cfg)
        loss = M.self_supervised_loss(params, [T.Tensor(np.zeros((1, 5)))],
                                      [T.Tensor(np.zeros((1, 6)))])
        assert float(loss.data) == 0.0

    def test_self_supervised_decreases_under_training(self, triangle):
        cfg = small_cfg()
        params = make(cfg, seed=2)
        X = np.random.default_rng(3).normal(size=(3, 3))
        opt = Adam(params, lr=5e-3)
        losses = []
        for step in range(100):
            _, _, hx_steps, xs = M.node_class_probs(params, triangle, X, [0, 1, 2],
                                                    cfg, seed=11)
            loss = M.self_supervised_loss(params, hx_steps, xs)
            losses.append(float(loss.data))
            opt.zero_grad()
            T.backward(loss)
            opt.step()
        assert np.mean(losses[-10:]) < np.mean(losses[:10])

    def test_total_loss_combinations(self):
        nll = T.Tensor(2.0)
        ls = T.Tensor(0.5)
        lc = T.Tensor(0.25)
        assert float(M.total_loss(nll, ls, lc, 0.0, 0.0).data) == 2.0
        assert float(M.total_loss(nll, ls, lc, 1.0, 1.0).data) == 2.75
        zero = T.Tensor(0.0)
        assert float(M.total_loss(zero, zero, zero, 1.0, 1.0).data) == 0.0


class TestTrainingProperties:
    def test_gradient_reaches_first_walk_node_features(self, triangle):
        # the far end of the walk still moves the loss: lower-bounded
        # sensitivity along the walk
        from rum.walks import batch_walks
        cfg = small_cfg(walk_length=4, num_samples=1)
        params = make(cfg, in_dim=3, num_classes=2)
        X = T.Tensor(np.random.default_rng(0).normal(size=(3, 3)), requires_grad=True)
        feats = M.project_features(params, X)
        w = batch_walks(triangle, [0], cfg.walk_length, 1, seed=3)
        h, _, _ = M.embed_walks(params, feats, w.reshape(1, -1), cfg)
        logits = h @ params["head.w"] + params["head.b"]
        loss = T.softmax_cross_entropy(logits, [1])
        T.backward(loss)
        first = int(w.reshape(-1)[0])
        assert np.abs(X.grad[first]).sum() > 0

    def test_fixed_seed_reproduces_losses(self, triangle):
        cfg = small_cfg()
        X = np.random.default_rng(0).normal(size=(3, 3))

        def run():
            params = make(cfg, seed=9)
            per, mix, hx, xs = M.node_class_probs(params, triangle, X, [0, 1, 2],
                                                  cfg, seed=42)
            nll = T.nll_from_probs(mix, [0, 1, 0])
            cons = M.consistency_loss(per, cfg.temperature)
            self_l = M.self_supervised_loss(params, hx, xs)
            return float(M.total_loss(nll, self_l, cons, 1.0, 1.0).data)

        assert run() == run()

    def test_parameter_count_independent_of_walk_length(self):
        for l in (2, 5, 9):
            cfg = small_cfg(walk_length=l, max_walk_length=12)
            params = make(cfg)
            if l == 2:
                base = M.num_parameters(params)
            assert M.num_parameters(params) == base

    def test_ablation_switches_zero_the_signals(self, triangle):
        cfg = small_cfg()
        params = make(cfg)
        X = np.random.default_rng(5).normal(size=(3, 3))
        normal = M.predict_node_probs(params, triangle, X, [0], cfg, seed=1)
        no_feat = M.predict_node_probs(params, triangle, X, [0], cfg, seed=1,
                                       switches=M.SignalSwitches(zero_features=True))
        no_anon = M.predict_node_probs(params, triangle, X, [0], cfg, seed=1,
                                       switches=M.SignalSwitches(zero_anon=True))
        assert not np.allclose(normal, no_feat)
        assert not np.allclose(normal, no_anon)

    def test_end_to_end_grad_check_on_5_node_graph(self):
        g = G.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
        cfg = small_cfg(walk_length=3, num_samples=2, hidden_dim=3,
                        feat_state_dim=3, anon_state_dim=3, merge_dim=3,
                        max_walk_length=4)
        params = make(cfg, in_dim=2, num_classes=2, seed=1)
        X = np.random.default_rng(2).normal(size=(5, 2))
        labels = [0, 1, 0, 1, 0]
        names = sorted(params)

        def loss_fn(*tensors):
            p = dict(zip(names, tensors))
            per, mix, hx, xs = M.node_class_probs(p, g, X, [0, 1, 2, 3, 4],
                                                  cfg, seed=8)
            nll = T.nll_from_probs(mix, labels)
            cons = M.consistency_loss(per, cfg.temperature)
            self_l = M.self_supervised_loss(p, hx, xs)
            return M.total_loss(nll, self_l, cons, 1.0, 1.0)

        err = T.grad_check(loss_fn, [params[k] for k in names])
        assert err < 1e-3


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            M.TrainConfig(walk_length=0).validate()
        with pytest.raises(ValueError):
            M.TrainConfig(temperature=0.0).validate()
        with pytest.raises(ValueError):
            M.TrainConfig(walk_length=20, max_walk_length=16).validate()
        M.TrainConfig().validate()

    def test_overrides(self):
        cfg = M.TrainConfig().with_overrides(walk_length=5)
        assert cfg.walk_length == 5
