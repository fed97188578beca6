"""Dense graph-convolution baseline for the comparison experiments.

Each layer computes SiLU(A_hat @ X @ W + b) with the symmetric-normalized,
self-loop-augmented adjacency. Dense matrices only: these experiments run on
desk-scale graphs where an (n, n) float64 array is cheap.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .optim import Adam


def normalized_adjacency(g, add_self_loops=True):
    """A_hat = D^{-1/2} (A + I) D^{-1/2} as a dense array."""
    a = g.dense_adjacency()
    if add_self_loops:
        a = a + np.eye(g.num_nodes)
    d = a.sum(axis=1)
    dinv = np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, 1e-12)), 0.0)
    return dinv[:, None] * a * dinv[None, :]


def init_gcn(rng, dims):
    """Weights for a stack mapping dims[0] -> ... -> dims[-1]."""
    params = {}
    for i in range(len(dims) - 1):
        bound = 1.0 / np.sqrt(dims[i])
        params[f"layer{i}.w"] = T.Tensor(
            rng.uniform(-bound, bound, size=(dims[i], dims[i + 1])), requires_grad=True)
        params[f"layer{i}.b"] = T.Tensor(np.zeros(dims[i + 1]), requires_grad=True)
    return params


def num_layers(params):
    return sum(1 for k in params if k.endswith(".w"))


def gcn_forward(params, a_hat, X, train=False, dropout_p=0.0, rng=None,
                return_hidden=False):
    """Forward through the stack; the last layer emits raw logits.

    `a_hat` may be a plain array (treated as a constant) or a Tensor.
    """
    if not isinstance(a_hat, T.Tensor):
        a_hat = T.Tensor(a_hat)
    h = X if isinstance(X, T.Tensor) else T.Tensor(np.asarray(X, dtype=np.float64))
    L = num_layers(params)
    hidden = []
    for i in range(L):
        h = T.dropout(h, dropout_p, train, rng)
        h = a_hat @ (h @ params[f"layer{i}.w"]) + params[f"layer{i}.b"]
        if i < L - 1:
            h = T.silu(h)
        hidden.append(h)
    return (h, hidden) if return_hidden else h


def gcn_forward_shared_adjacency(params, a_hat, X_batch, train=False,
                                 dropout_p=0.0, rng=None):
    """Forward for a batch of graphs that share one adjacency.

    X_batch has shape (B, m, F). Returns logits of shape (B, m, out_dim).
    The batch is kept node-major internally so the propagation step stays a
    single 2-D matmul against (m, m).
    """
    B, m, F = X_batch.shape
    a_hat_t = a_hat if isinstance(a_hat, T.Tensor) else T.Tensor(a_hat)
    h = T.Tensor(np.transpose(np.asarray(X_batch, dtype=np.float64),
                              (1, 0, 2)).reshape(m * B, F))
    L = num_layers(params)
    for i in range(L):
        h = T.dropout(h, dropout_p, train, rng)
        z = h @ params[f"layer{i}.w"]
        width = z.shape[1]
        z = T.reshape(a_hat_t @ T.reshape(z, (m, B * width)), (m * B, width))
        h = z + params[f"layer{i}.b"]
        if i < L - 1:
            h = T.silu(h)
    out = T.reshape(h, (m, B, h.shape[1]))
    return out


def _row_normalize(X):
    X = np.asarray(X, dtype=np.float64)
    s = X.sum(axis=1, keepdims=True)
    return X / np.maximum(s, 1e-12)


def train_gcn_node_classifier(data, hidden=32, layers=2, lr=1e-2, weight_decay=5e-4,
                              dropout_p=0.5, epochs=200, patience=50, seed=0,
                              normalize_rows=True):
    """Full-batch training on a node-classified dataset; returns
    (params, metrics dict). Model selection by best validation accuracy."""
    rng = np.random.default_rng(seed)
    drop_rng = np.random.default_rng(seed + 1)
    a_hat = normalized_adjacency(data.graph)
    X = _row_normalize(data.features) if normalize_rows else data.features
    dims = [data.features.shape[1]] + [hidden] * (layers - 1) + [data.num_classes]
    params = init_gcn(rng, dims)
    opt = Adam(params, lr=lr, weight_decay=weight_decay)
    y = data.labels
    train_idx = np.flatnonzero(data.train_mask)
    val_idx = np.flatnonzero(data.val_mask)
    test_idx = np.flatnonzero(data.test_mask)
    best = {"val": -1.0, "epoch": -1, "params": None}
    history = []
    since_best = 0
    for epoch in range(epochs):
        logits = gcn_forward(params, a_hat, X, train=True,
                             dropout_p=dropout_p, rng=drop_rng)
        loss = T.softmax_cross_entropy(T.gather_rows(logits, train_idx), y[train_idx])
        if not np.isfinite(loss.data):
            raise FloatingPointError(f"GCN training diverged at epoch {epoch}")
        opt.zero_grad()
        T.backward(loss)
        opt.step()
        with T.no_grad():
            eval_logits = gcn_forward(params, a_hat, X).data
        pred = eval_logits.argmax(axis=1)
        val_acc = float((pred[val_idx] == y[val_idx]).mean())
        history.append({"epoch": epoch, "loss": float(loss.data), "val_acc": val_acc})
        if val_acc > best["val"]:
            best = {"val": val_acc, "epoch": epoch,
                    "params": {k: v.data.copy() for k, v in params.items()}}
            since_best = 0
        else:
            since_best += 1
            if since_best > patience:
                break
    for k, v in params.items():
        v.data[:] = best["params"][k]
    with T.no_grad():
        pred = gcn_forward(params, a_hat, X).data.argmax(axis=1)
    test_acc = float((pred[test_idx] == y[test_idx]).mean())
    metrics = {"best_epoch": best["epoch"], "val_accuracy": best["val"],
               "test_accuracy": test_acc, "history": history}
    return params, metrics


def evaluate_gcn(params, graph, features, labels, mask, normalize_rows=True):
    """Accuracy of a trained stack on (possibly perturbed) graph structure."""
    a_hat = normalized_adjacency(graph)
    X = _row_normalize(features) if normalize_rows else features
    with T.no_grad():
        pred = gcn_forward(params, a_hat, X).data.argmax(axis=1)
    idx = np.flatnonzero(mask)
    return float((pred[idx] == labels[idx]).mean())
