"""Training loops, comparison experiments, and report plumbing.

Node classification follows the usual protocol: full-batch epochs, model
selection by best validation accuracy with patience, evaluation as the mean
of per-walk class probabilities over fresh walks. Graph classification uses
stratified folds over graph corpora. All experiment entry points snapshot
their configuration into the returned report.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import model as M
from . import tensor as T
from .gcn import (evaluate_gcn, gcn_forward, gcn_forward_shared_adjacency,
                  init_gcn, normalized_adjacency, train_gcn_node_classifier)
from .graphs import Graph, add_random_edges, dirichlet_energy
from .optim import Adam
from .walks import batch_walks


class TrainingError(RuntimeError):
    """Divergence or invalid state during optimization."""


@dataclass
class Metrics:
    """Per-epoch history plus the selected-epoch outcome of one run."""

    history: list = field(default_factory=list)
    best_epoch: int = -1
    val_accuracy: float = float("nan")
    test_accuracy: float = float("nan")
    train_accuracy: float = float("nan")
    wall_time: float = 0.0
    fold_accuracies: list = field(default_factory=list)


@dataclass
class ExperimentReport:
    """Config snapshot, seeds, per-seed metrics, and mean/std aggregates."""

    name: str
    config: dict
    seeds: list
    per_seed: list
    aggregates: dict

    def to_json(self, path):
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2, default=float)


def aggregate(name, config, seeds, per_seed, key="test_accuracy"):
    vals = np.array([m[key] for m in per_seed], dtype=float)
    agg = {f"mean_{key}": float(vals.mean())}
    if len(vals) >= 2:
        agg[f"std_{key}"] = float(vals.std(ddof=1))
    return ExperimentReport(name=name, config=dict(config), seeds=list(seeds),
                            per_seed=per_seed, aggregates=agg)


def write_csv(path, header, rows):
    import csv
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def row_normalize(X):
    """Scale feature rows to unit sum (bag-of-words normalization)."""
    X = np.asarray(X, dtype=np.float64)
    s = X.sum(axis=1, keepdims=True)
    return X / np.maximum(s, 1e-12)


# ---------------------------------------------------------------------------
# node classification
# ---------------------------------------------------------------------------

def _accuracy(params, data, X, nodes, cfg, seed, stream, switches=None):
    with T.no_grad():
        probs = M.predict_node_probs(params, data.graph, X, nodes, cfg, seed,
                                     stream=stream, switches=switches)
    return float((probs.argmax(axis=1) == data.labels[nodes]).mean())


def loss_anchor_nodes(data, consistency_unlabeled):
    """Node ids contributing to any loss term: train nodes first, then
    (optionally) nodes outside every mask. Validation and test nodes are
    never anchors."""
    train_idx = np.flatnonzero(data.train_mask)
    if not consistency_unlabeled:
        return train_idx
    unmasked = ~(data.train_mask | data.val_mask | data.test_mask)
    return np.concatenate([train_idx, np.flatnonzero(unmasked)])


def train_node_classifier(cfg, data, switches=None, consistency_unlabeled=False,
                          normalize_rows=True, verbose=False):
    """Walk-model training on a masked node-classification dataset.

    Only train-mask nodes contribute to the task NLL; the label-free
    regularizers optionally extend to nodes outside every mask, never to
    validation or test nodes. Returns (Metrics, trained params).
    """
    cfg.validate()
    if data.train_mask is None or data.val_mask is None or data.test_mask is None:
        raise TrainingError("node training requires train/val/test masks")
    X = row_normalize(data.features) if normalize_rows else data.features
    y = data.labels
    train_idx = np.flatnonzero(data.train_mask)
    val_idx = np.flatnonzero(data.val_mask)
    test_idx = np.flatnonzero(data.test_mask)
    loss_nodes = loss_anchor_nodes(data, consistency_unlabeled)
    n_train = len(train_idx)

    rng = np.random.default_rng(cfg.seed)
    drop_rng = np.random.default_rng(cfg.seed + 1)
    params = M.init_params(rng, X.shape[1], data.num_classes, cfg)
    opt = Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)

    metrics = Metrics()
    best_val, best_params, since_best = -1.0, None, 0
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        per, mix, hx_steps, xs = M.node_class_probs(
            params, data.graph, X, loss_nodes, cfg, seed=cfg.seed,
            stream=4 * epoch, train=True, rng=drop_rng, switches=switches)
        nll = T.nll_from_probs(T.slice_rows(mix, 0, n_train), y[train_idx])
        if cfg.num_samples >= 2 and cfg.consistency_coef:
            l_cons = M.consistency_loss(per, cfg.temperature)
        else:
            l_cons = T.Tensor(0.0)
        l_self = (M.self_supervised_loss(params, hx_steps, xs)
                  if cfg.self_sup_coef else T.Tensor(0.0))
        loss = M.total_loss(nll, l_self, l_cons, cfg.self_sup_coef, cfg.consistency_coef)
        if not np.isfinite(loss.data):
            raise TrainingError(f"loss diverged at epoch {epoch}")
        opt.zero_grad()
        T.backward(loss)
        opt.step()

        val_acc = _accuracy(params, data, X, val_idx, cfg, cfg.seed,
                            stream=4 * epoch + 1, switches=switches)
        metrics.history.append({
            "epoch": epoch, "loss": float(loss.data), "nll": float(nll.data),
            "self": float(l_self.data), "consistency": float(l_cons.data),
            "val_acc": val_acc,
        })
        if verbose and epoch % 20 == 0:
            print(f"epoch {epoch}: loss={float(loss.data):.4f} val={val_acc:.4f}")
        if val_acc > best_val:
            best_val = val_acc
            best_params = {k: v.data.copy() for k, v in params.items()}
            metrics.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                break
    for k, v in params.items():
        v.data[:] = best_params[k]
    metrics.val_accuracy = best_val
    metrics.test_accuracy = _accuracy(params, data, X, test_idx, cfg, cfg.seed,
                                      stream=4 * cfg.epochs + 3, switches=switches)
    metrics.train_accuracy = _accuracy(params, data, X, train_idx, cfg, cfg.seed,
                                       stream=4 * cfg.epochs + 2, switches=switches)
    metrics.wall_time = time.perf_counter() - t0
    return metrics, params


def evaluate_on_graph(params, graph, data, cfg, seed=0, stream=10_000,
                      normalize_rows=True, mask=None):
    """Test accuracy of trained params with walks drawn on `graph` (used for
    the fake-edge robustness evaluation)."""
    X = row_normalize(data.features) if normalize_rows else data.features
    idx = np.flatnonzero(data.test_mask if mask is None else mask)
    with T.no_grad():
        probs = M.predict_node_probs(params, graph, X, idx, cfg, seed, stream=stream)
    return float((probs.argmax(axis=1) == data.labels[idx]).mean())


# ---------------------------------------------------------------------------
# graph classification
# ---------------------------------------------------------------------------

def disjoint_union(graphs):
    """One CSR graph holding every input graph as its own component."""
    offsets = [np.zeros(1, dtype=np.int64)]
    neighbors = []
    shift = 0
    for g in graphs:
        offsets.append(g.offsets[1:] + (offsets[-1][-1]))
        neighbors.append(g.neighbors + shift)
        shift += g.num_nodes
    return Graph(offsets=np.concatenate(offsets),
                 neighbors=np.concatenate(neighbors) if neighbors else
                 np.empty(0, dtype=np.int64))


def stratified_folds(labels, n_folds, seed):
    """Fold id per item, class-balanced, shuffled per seed."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = np.zeros(len(labels), dtype=np.int64)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        folds[idx] = np.arange(len(idx)) % n_folds
    return folds


def _graph_logits(params, corpus, indices, cfg, seed, stream, train=False, rng=None):
    """Logits per graph: head(sum over nodes of psi), batched over a
    disjoint union of the selected graphs."""
    graphs = [corpus[i].graph for i in indices]
    union = disjoint_union(graphs)
    X = np.vstack([corpus[i].features for i in indices])
    sizes = [g.num_nodes for g in graphs]
    psi, _, _, _, _ = M.node_embeddings(params, union, X,
                                        np.arange(union.num_nodes), cfg,
                                        seed, stream=stream, train=train, rng=rng)
    bounds = np.cumsum([0] + sizes)
    rows = [T.tsum(T.slice_rows(psi, bounds[i], bounds[i + 1]), axis=0)
            for i in range(len(indices))]
    stacked = T.reshape(T.concat(rows, axis=-1), (len(indices), psi.shape[1]))
    return stacked @ params["head.w"] + params["head.b"]


def train_graph_classifier(cfg, datasets, n_folds=5, batch_size=16, verbose=False):
    """Stratified k-fold training over a corpus of single-graph datasets.

    Minibatched cross-entropy on the summed node representations; reports
    per-fold test accuracy. Disconnected graphs are rejected up front.
    """
    from .graphs import is_connected
    cfg.validate()
    for i, ds in enumerate(datasets):
        if not is_connected(ds.graph):
            raise TrainingError(f"graph {i} in the corpus is disconnected")
    labels = np.array([int(ds.labels) for ds in datasets])
    num_classes = int(labels.max()) + 1
    folds = stratified_folds(labels, n_folds, cfg.seed)
    in_dim = datasets[0].features.shape[1]
    metrics = Metrics()
    t0 = time.perf_counter()
    for fold in range(n_folds):
        train_ids = np.flatnonzero(folds != fold)
        test_ids = np.flatnonzero(folds == fold)
        rng = np.random.default_rng(cfg.seed + 100 + fold)
        drop_rng = np.random.default_rng(cfg.seed + 200 + fold)
        params = M.init_params(rng, in_dim, num_classes, cfg)
        opt = Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
        order_rng = np.random.default_rng(cfg.seed + 300 + fold)
        stream = 0
        for epoch in range(cfg.epochs):
            order = order_rng.permutation(train_ids)
            for lo in range(0, len(order), batch_size):
                batch = order[lo:lo + batch_size]
                stream += 1
                logits = _graph_logits(params, datasets, batch, cfg, cfg.seed,
                                       stream, train=True, rng=drop_rng)
                loss = T.softmax_cross_entropy(logits, labels[batch])
                if not np.isfinite(loss.data):
                    raise TrainingError(f"fold {fold} diverged at epoch {epoch}")
                opt.zero_grad()
                T.backward(loss)
                opt.step()
            if verbose and epoch % 10 == 0:
                print(f"fold {fold} epoch {epoch}: loss={float(loss.data):.4f}")
        with T.no_grad():
            logits = _graph_logits(params, datasets, test_ids, cfg, cfg.seed,
                                   stream=10 ** 6 + fold)
        acc = float((logits.data.argmax(axis=1) == labels[test_ids]).mean())
        metrics.fold_accuracies.append(acc)
        if verbose:
            print(f"fold {fold}: test accuracy {acc:.3f}")
    metrics.test_accuracy = float(np.mean(metrics.fold_accuracies))
    metrics.wall_time = time.perf_counter() - t0
    return metrics


def untrained_graph_accuracy(cfg, datasets, n_folds=5):
    """Accuracy of an untrained model on the same folds (chance baseline)."""
    labels = np.array([int(ds.labels) for ds in datasets])
    num_classes = int(labels.max()) + 1
    rng = np.random.default_rng(cfg.seed)
    params = M.init_params(rng, datasets[0].features.shape[1], num_classes, cfg)
    with T.no_grad():
        logits = _graph_logits(params, datasets, np.arange(len(datasets)), cfg,
                               cfg.seed, stream=7)
    return float((logits.data.argmax(axis=1) == labels).mean())


def gcn_graph_classifier_accuracy(datasets, hidden=32, layers=4, lr=1e-2,
                                  weight_decay=5e-4, epochs=100, n_folds=5, seed=0):
    """WL-bounded baseline on graph classification: GCN stack, sum pooling.

    All corpus graphs must share a node count (true for the ring corpus);
    uses the shared-adjacency batched forward per graph individually since
    adjacencies differ across permuted copies.
    """
    labels = np.array([int(ds.labels) for ds in datasets])
    num_classes = int(labels.max()) + 1
    folds = stratified_folds(labels, n_folds, seed)
    in_dim = datasets[0].features.shape[1]
    a_hats = [T.Tensor(normalized_adjacency(ds.graph)) for ds in datasets]

    def pooled_logits(params, ids, train=False, rng=None):
        rows = []
        for i in ids:
            h = gcn_forward(params, a_hats[i], datasets[i].features,
                            train=train, dropout_p=0.0, rng=rng)
            rows.append(T.tsum(h, axis=0))
        return T.reshape(T.concat(rows, axis=-1), (len(ids), num_classes))

    accs = []
    for fold in range(n_folds):
        train_ids = np.flatnonzero(folds != fold)
        test_ids = np.flatnonzero(folds == fold)
        rng = np.random.default_rng(seed + fold)
        params = init_gcn(rng, [in_dim] + [hidden] * (layers - 1) + [num_classes])
        opt = Adam(params, lr=lr, weight_decay=weight_decay)
        order_rng = np.random.default_rng(seed + 50 + fold)
        for epoch in range(epochs):
            order = order_rng.permutation(train_ids)
            for lo in range(0, len(order), 32):
                batch = order[lo:lo + 32]
                loss = T.softmax_cross_entropy(pooled_logits(params, batch, train=True),
                                               labels[batch])
                opt.zero_grad()
                T.backward(loss)
                opt.step()
        with T.no_grad():
            pred = pooled_logits(params, test_ids).data.argmax(axis=1)
        accs.append(float((pred == labels[test_ids]).mean()))
    return accs


# ---------------------------------------------------------------------------
# over-smoothing: Dirichlet energy vs depth
# ---------------------------------------------------------------------------

def run_dirichlet_experiment(data, depth_grid, cfg=None, seed=0,
                             trained_params=None, normalize_rows=True):
    """Energy of walk-model representations and GCN layer outputs per depth.

    The walk model reuses one parameter set for every walk length (parameter
    count is length-independent); the GCN stack is evaluated at its layer
    outputs. Returns a list of row dicts, one per depth.
    """
    cfg = cfg or M.TrainConfig(max_walk_length=max(depth_grid))
    X = row_normalize(data.features) if normalize_rows else data.features
    rng = np.random.default_rng(seed)
    params = M.init_params(rng, X.shape[1], int(data.labels.max()) + 1, cfg)
    gcn_params = init_gcn(rng, [X.shape[1]] + [cfg.hidden_dim] * max(depth_grid))
    with T.no_grad():
        _, hidden = gcn_forward(gcn_params, normalized_adjacency(data.graph), X,
                                return_hidden=True)
    gcn_energy = {i + 1: dirichlet_energy(hidden[i].data, data.graph)
                  for i in range(len(hidden))}
    rows = []
    all_nodes = np.arange(data.graph.num_nodes)
    for L in depth_grid:
        with T.no_grad():
            psi, _, _, _, _ = M.node_embeddings(params, data.graph, X, all_nodes,
                                                cfg, seed, stream=L, walk_length=L)
        row = {"depth": L,
               "rum_energy": dirichlet_energy(psi.data, data.graph),
               "gcn_energy": gcn_energy.get(L, float("nan")),
               "input_energy": dirichlet_energy(X, data.graph)}
        if trained_params is not None:
            with T.no_grad():
                psi_t, _, _, _, _ = M.node_embeddings(trained_params, data.graph, X,
                                                      all_nodes, cfg, seed,
                                                      stream=L, walk_length=L)
            row["rum_energy_trained"] = dirichlet_energy(psi_t.data, data.graph)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# over-squashing: neighborhood matching
# ---------------------------------------------------------------------------

def train_tree_match(cfg, corpus, eval_samples=32, verbose=False):
    """Fit root labels on matching trees; returns best training accuracy.

    Root representations are computed on a disjoint union of all instance
    trees; evaluation redraws walks with `eval_samples` per root.
    """
    cfg.validate()
    labels = np.array([int(ds.labels[0]) for ds in corpus])
    num_classes = int(max(int(ds.labels[0]) for ds in corpus)) + 1
    m = corpus[0].graph.num_nodes
    union = disjoint_union([ds.graph for ds in corpus])
    X = np.vstack([ds.features for ds in corpus])
    roots = np.arange(len(corpus)) * m
    rng = np.random.default_rng(cfg.seed)
    drop_rng = np.random.default_rng(cfg.seed + 1)
    params = M.init_params(rng, X.shape[1], num_classes, cfg)
    opt = Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    best = 0.0
    for epoch in range(cfg.epochs):
        per, mix, _, _ = M.node_class_probs(params, union, X, roots, cfg,
                                            seed=cfg.seed, stream=2 * epoch,
                                            train=True, rng=drop_rng)
        loss = T.nll_from_probs(mix, labels)
        if not np.isfinite(loss.data):
            raise TrainingError(f"diverged at epoch {epoch}")
        opt.zero_grad()
        T.backward(loss)
        opt.step()
        with T.no_grad():
            probs = M.predict_node_probs(
                params, union, X, roots,
                cfg.with_overrides(num_samples=eval_samples),
                seed=cfg.seed, stream=2 * epoch + 1)
        acc = float((probs.argmax(axis=1) == labels).mean())
        best = max(best, acc)
        if verbose and epoch % 10 == 0:
            print(f"epoch {epoch}: loss={float(loss.data):.4f} train_acc={acc:.3f}")
        if best == 1.0:
            break
    return best


def train_tree_match_gcn(corpus, hidden=32, lr=1e-2, weight_decay=0.0,
                         epochs=400, seed=0):
    """GCN counterpart on the same trees: depth+1 layers, best train accuracy."""
    labels = np.array([int(ds.labels[0]) for ds in corpus])
    num_classes = int(labels.max()) + 1
    m = corpus[0].graph.num_nodes
    depth = int(np.log2(m + 1)) - 1
    a_hat = normalized_adjacency(corpus[0].graph)
    X = np.stack([ds.features for ds in corpus])
    B = len(corpus)
    rng = np.random.default_rng(seed)
    layers = depth + 1
    in_dim = X.shape[2]
    params = init_gcn(rng, [in_dim] + [hidden] * (layers - 1) + [num_classes])
    opt = Adam(params, lr=lr, weight_decay=weight_decay)
    best = 0.0
    for epoch in range(epochs):
        out = gcn_forward_shared_adjacency(params, a_hat, X)
        root_logits = T.slice_rows(out, 0, B)
        loss = T.softmax_cross_entropy(root_logits, labels)
        opt.zero_grad()
        T.backward(loss)
        opt.step()
        acc = float((root_logits.data.argmax(axis=1) == labels).mean())
        best = max(best, acc)
        if best == 1.0:
            break
    return best


def run_neighborsmatch(depth_grid, cfg=None, n_instances=128, hidden=32, seed=0,
                       verbose=False):
    """Best training accuracy per tree depth for the walk model and GCN."""
    from .graphs import tree_match_corpus
    rows = []
    for depth in depth_grid:
        corpus = tree_match_corpus(depth, n_instances, seed)
        depth_cfg = (cfg or M.TrainConfig(
            walk_length=16, num_samples=16, max_walk_length=16, dropout=0.0,
            weight_decay=0.0, lr=3e-3, epochs=150, consistency_coef=0.0,
            self_sup_coef=0.0, seed=seed))
        rum_acc = train_tree_match(depth_cfg, corpus, verbose=verbose)
        gcn_acc = train_tree_match_gcn(corpus, hidden=hidden, seed=seed)
        rows.append({"depth": depth, "rum_train_acc": rum_acc,
                     "gcn_train_acc": gcn_acc})
        if verbose:
            print(rows[-1])
    return rows


# ---------------------------------------------------------------------------
# robustness to fake edges
# ---------------------------------------------------------------------------

def run_robustness(data, fractions, seeds, cfg=None, retrain=False,
                   consistency_unlabeled=False, verbose=False):
    """Train on the clean graph, evaluate with fake edges added.

    With `retrain` the models are retrained per perturbed graph instead.
    Returns rows of mean accuracies per fraction for both models.
    """
    cfg = cfg or M.TrainConfig()
    rum_acc = {f: [] for f in fractions}
    gcn_acc = {f: [] for f in fractions}
    for seed in seeds:
        run_cfg = cfg.with_overrides(seed=seed)
        if not retrain:
            _, params = train_node_classifier(run_cfg, data,
                                              consistency_unlabeled=consistency_unlabeled)
            gcn_params, _ = train_gcn_node_classifier(data, seed=seed)
        for i, f in enumerate(fractions):
            perturbed = (data.graph if f == 0 else
                         add_random_edges(data.graph, f, seed=9000 + 31 * seed + i))
            if retrain:
                pdata = type(data)(graph=perturbed, features=data.features,
                                   labels=data.labels, train_mask=data.train_mask,
                                   val_mask=data.val_mask, test_mask=data.test_mask)
                m, _ = train_node_classifier(run_cfg, pdata,
                                             consistency_unlabeled=consistency_unlabeled)
                rum = m.test_accuracy
                _, gm = train_gcn_node_classifier(pdata, seed=seed)
                gcn = gm["test_accuracy"]
            else:
                rum = evaluate_on_graph(params, perturbed, data, run_cfg,
                                        seed=seed, stream=50_000 + i)
                gcn = evaluate_gcn(gcn_params, perturbed, data.features,
                                   data.labels, data.test_mask)
            rum_acc[f].append(rum)
            gcn_acc[f].append(gcn)
            if verbose:
                print(f"seed {seed} fraction {f}: rum={rum:.3f} gcn={gcn:.3f}")
    rows = []
    for f in fractions:
        rows.append({"fraction": f,
                     "rum_accuracy": float(np.mean(rum_acc[f])),
                     "gcn_accuracy": float(np.mean(gcn_acc[f]))})
    return rows


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------

ABLATION_VARIANTS = ("full", "zero_anon", "zero_features", "no_self", "no_consistency")


def run_ablation(data, cfg=None, seeds=(0, 1, 2), consistency_unlabeled=False,
                 verbose=False):
    """Test accuracy per deleted component, mean and std over shared seeds."""
    cfg = cfg or M.TrainConfig()
    table = {}
    for variant in ABLATION_VARIANTS:
        accs = []
        for seed in seeds:
            run_cfg = cfg.with_overrides(seed=seed)
            switches = None
            if variant == "zero_anon":
                switches = M.SignalSwitches(zero_anon=True)
            elif variant == "zero_features":
                switches = M.SignalSwitches(zero_features=True)
            elif variant == "no_self":
                run_cfg = run_cfg.with_overrides(self_sup_coef=0.0)
            elif variant == "no_consistency":
                run_cfg = run_cfg.with_overrides(consistency_coef=0.0)
            m, _ = train_node_classifier(run_cfg, data, switches=switches,
                                         consistency_unlabeled=consistency_unlabeled)
            accs.append(m.test_accuracy)
            if verbose:
                print(f"{variant} seed {seed}: {m.test_accuracy:.3f}")
        table[variant] = {"mean": float(np.mean(accs)),
                          "std": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
                          "per_seed": accs}
    return table


# ---------------------------------------------------------------------------
# samples/length sweep
# ---------------------------------------------------------------------------

def run_sweep(data, k_grid, l_grid, cfg=None, seeds=(0, 1),
              consistency_unlabeled=False, verbose=False):
    """Mean test accuracy per (samples, length) cell."""
    cfg = cfg or M.TrainConfig()
    rows = []
    for k in k_grid:
        for l in l_grid:
            accs = []
            for seed in seeds:
                run_cfg = cfg.with_overrides(num_samples=int(k), walk_length=int(l),
                                             seed=seed)
                m, _ = train_node_classifier(run_cfg, data,
                                             consistency_unlabeled=consistency_unlabeled)
                accs.append(m.test_accuracy)
            rows.append({"num_samples": int(k), "walk_length": int(l),
                         "accuracy": float(np.mean(accs))})
            if verbose:
                print(rows[-1])
    return rows


# ---------------------------------------------------------------------------
# sensitivity (inter-node Jacobian mass)
# ---------------------------------------------------------------------------

def measure_sensitivity(params, g, X, u, v, cfg, seed=0, num_samples=None):
    """Mean L1 mass of d psi(v) / d X_u over sampled walks, with the
    (A_hat^l)_{uv} reference computed densely.

    Returns (sensitivity, adjacency_power_entry). Unreachable or unvisited
    source nodes yield exactly 0.
    """
    X_t = T.Tensor(np.asarray(X, dtype=np.float64), requires_grad=True)
    k = num_samples or cfg.num_samples
    psi, _, _, _, _ = M.node_embeddings(params, g, X_t, [v], cfg, seed,
                                        num_samples=k)
    total = 0.0
    for j in range(psi.shape[1]):
        onehot = np.zeros((1, psi.shape[1]))
        onehot[0, j] = 1.0
        scalar = T.tsum(psi * T.Tensor(onehot))
        for node in T.tape(scalar):
            node.grad = None
        T.backward(scalar)
        if X_t.grad is not None:
            total += float(np.abs(X_t.grad[u]).sum())
    a_hat = g.dense_adjacency()
    deg = np.maximum(a_hat.sum(axis=1, keepdims=True), 1.0)
    power = np.linalg.matrix_power(a_hat / deg, cfg.walk_length)
    return total, float(power[u, v])


def gcn_sensitivity(params, g, X, u, v):
    """L1 mass of the GCN output Jacobian d out_v / d X_u."""
    a_hat = normalized_adjacency(g)
    X_t = T.Tensor(np.asarray(X, dtype=np.float64), requires_grad=True)
    out = gcn_forward(params, a_hat, X_t)
    total = 0.0
    for j in range(out.shape[1]):
        onehot = np.zeros(out.shape)
        onehot[v, j] = 1.0
        scalar = T.tsum(out * T.Tensor(onehot))
        for node in T.tape(scalar):
            node.grad = None
        T.backward(scalar)
        total += float(np.abs(X_t.grad[u]).sum())
    return total


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------

def timing_report(data, l_grid, k_grid, cfg=None, seed=0, repeats=5,
                  normalize_rows=True):
    """Median wall time of full-graph inference per walk length and per
    sample count, plus dense GCN forward times per depth."""
    cfg = cfg or M.TrainConfig(max_walk_length=max(max(l_grid), 1))
    X = row_normalize(data.features) if normalize_rows else data.features
    rng = np.random.default_rng(seed)
    params = M.init_params(rng, X.shape[1], int(data.labels.max()) + 1, cfg)
    all_nodes = np.arange(data.graph.num_nodes)
    a_hat = normalized_adjacency(data.graph)
    max_l = max(max(l_grid), 2)
    gcn_params = init_gcn(rng, [X.shape[1]] + [cfg.hidden_dim] * max_l)

    def time_rum(l, k):
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            with T.no_grad():
                M.node_embeddings(params, data.graph, X, all_nodes, cfg, seed,
                                  stream=3, walk_length=l, num_samples=k)
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    def time_gcn(depth):
        sub = {k: v for k, v in gcn_params.items()
               if int(k.split(".")[0][5:]) < depth}
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            with T.no_grad():
                gcn_forward(sub, a_hat, X)
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    length_rows = [{"walk_length": l, "num_samples": cfg.num_samples,
                    "rum_seconds": time_rum(l, cfg.num_samples),
                    "gcn_seconds": time_gcn(max(l, 1))} for l in l_grid]
    sample_rows = [{"walk_length": cfg.walk_length, "num_samples": k,
                    "rum_seconds": time_rum(cfg.walk_length, k)} for k in k_grid]
    return length_rows, sample_rows


def linear_fit_r2(x, y):
    """R^2 of an ordinary least squares line through (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
