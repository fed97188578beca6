"""Walk-sequence graph model: two GRU encoders over a walk's semantic and
anonymous-index trajectories, a merge network producing the walk embedding,
Monte-Carlo node/graph representations, and the training losses.

The semantic trajectory of a walk is the sequence of input-projected node
features; the topological trajectory is the one-hot-encoded anonymous index
sequence. A walk's embedding merges the final hidden states of both GRUs;
a node's representation averages the embeddings of k walks terminating at
that node; a graph's representation sums its node representations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import tensor as T
from .graphs import GraphError
from .walks import (anon_indices_batch, batch_walks, _enumerate_exact,
                    anonymous_experiment)


@dataclass
class TrainConfig:
    """Hyperparameters for walk-based training.

    walk_length, num_samples and the dims mirror the usual knobs: l, k,
    hidden width of the input projection (D_h), the two GRU states
    (D_x, D_u) and the merge output (D). Loss coefficients weight the
    self-supervised and consistency regularizers; temperature sharpens the
    consistency target.
    """

    walk_length: int = 8
    num_samples: int = 4
    hidden_dim: int = 32
    feat_state_dim: int = 32
    anon_state_dim: int = 32
    merge_dim: int = 32
    max_walk_length: int = 16
    lr: float = 1e-3
    weight_decay: float = 5e-4
    dropout: float = 0.1
    temperature: float = 0.5
    consistency_coef: float = 1.0
    self_sup_coef: float = 1.0
    epochs: int = 300
    patience: int = 50
    seed: int = 0

    def validate(self):
        if self.walk_length < 1 or self.num_samples < 1:
            raise ValueError("walk_length and num_samples must be >= 1")
        if not 0.0 < self.temperature <= 1.0:
            raise ValueError("temperature must lie in (0, 1]")
        if self.consistency_coef < 0 or self.self_sup_coef < 0:
            raise ValueError("loss coefficients must be >= 0")
        if self.walk_length > self.max_walk_length:
            raise ValueError("walk_length exceeds max_walk_length")
        return self

    def with_overrides(self, **kw):
        return replace(self, **kw).validate()


def _uniform_init(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return T.Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_gru(rng, input_dim, hidden_dim, prefix):
    """Gate weight matrices for input and hidden, plus biases (zeros)."""
    p = {}
    for gate in ("r", "z", "n"):
        p[f"{prefix}.W_i{gate}"] = _uniform_init(rng, input_dim, (input_dim, hidden_dim))
        p[f"{prefix}.W_h{gate}"] = _uniform_init(rng, hidden_dim, (hidden_dim, hidden_dim))
        p[f"{prefix}.b_{gate}"] = T.Tensor(np.zeros(hidden_dim), requires_grad=True)
    return p


def init_params(rng, in_dim, num_classes, cfg):
    """All learnable parameters, keyed by stable dotted names."""
    cfg.validate()
    width = cfg.max_walk_length + 1
    params = {
        "input_proj.w": _uniform_init(rng, in_dim, (in_dim, cfg.hidden_dim)),
        "input_proj.b": T.Tensor(np.zeros(cfg.hidden_dim), requires_grad=True),
    }
    params.update(init_gru(rng, cfg.hidden_dim, cfg.feat_state_dim, "gru_x"))
    params.update(init_gru(rng, width, cfg.anon_state_dim, "gru_u"))
    merged_in = cfg.feat_state_dim + cfg.anon_state_dim
    params["merge.w1"] = _uniform_init(rng, merged_in, (merged_in, cfg.merge_dim))
    params["merge.b1"] = T.Tensor(np.zeros(cfg.merge_dim), requires_grad=True)
    params["merge.w2"] = _uniform_init(rng, cfg.merge_dim, (cfg.merge_dim, cfg.merge_dim))
    params["merge.b2"] = T.Tensor(np.zeros(cfg.merge_dim), requires_grad=True)
    params["head.w"] = _uniform_init(rng, cfg.merge_dim, (cfg.merge_dim, num_classes))
    params["head.b"] = T.Tensor(np.zeros(num_classes), requires_grad=True)
    params["self_head.w"] = _uniform_init(rng, cfg.feat_state_dim,
                                          (cfg.feat_state_dim, cfg.hidden_dim))
    params["self_head.b"] = T.Tensor(np.zeros(cfg.hidden_dim), requires_grad=True)
    return params


def num_parameters(params):
    return sum(p.data.size for p in params.values())


def gru_forward(params, prefix, seq, h0=None):
    """Standard GRU recurrence over a list of (B, D_in) tensors.

    r = sigmoid(x W_ir + h W_hr + b_r); z likewise; the candidate applies the
    reset gate to the projected hidden state. Returns (final hidden, list of
    per-step hiddens). Empty sequences return h0 unchanged.
    """
    W_ir, W_iz, W_in = (params[f"{prefix}.W_i{g}"] for g in ("r", "z", "n"))
    W_hr, W_hz, W_hn = (params[f"{prefix}.W_h{g}"] for g in ("r", "z", "n"))
    b_r, b_z, b_n = (params[f"{prefix}.b_{g}"] for g in ("r", "z", "n"))
    if not seq:
        return h0, []
    if h0 is None:
        batch = seq[0].shape[0]
        h = T.Tensor(np.zeros((batch, W_hr.shape[0])))
    else:
        h = h0
    steps = []
    for x in seq:
        if x.shape[1] != W_ir.shape[0]:
            raise GraphError(f"GRU input dim {x.shape[1]} != {W_ir.shape[0]}")
        r = T.sigmoid(x @ W_ir + h @ W_hr + b_r)
        z = T.sigmoid(x @ W_iz + h @ W_hz + b_z)
        n = T.tanh(x @ W_in + r * (h @ W_hn) + b_n)
        one = T.Tensor(1.0)
        h = (one - z) * n + z * h
        steps.append(h)
    return h, steps


def encode_anon(indices, width):
    """One-hot tensors of the given width for an anonymous index sequence."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.max() >= width:
        raise GraphError(f"anonymous index {indices.max()} does not fit width {width}")
    flat = np.atleast_2d(indices)
    out = []
    for t in range(flat.shape[-1]):
        onehot = np.zeros((flat.shape[0], width))
        onehot[np.arange(flat.shape[0]), flat[:, t]] = 1.0
        out.append(T.Tensor(onehot))
    return out


def merge_embed(params, hx, hu, cfg, train=False, rng=None):
    """Two-layer SiLU feed-forward over the concatenated GRU states."""
    cat = T.concat([hx, hu], axis=-1)
    z = T.silu(cat @ params["merge.w1"] + params["merge.b1"])
    z = T.dropout(z, cfg.dropout, train, rng)
    return z @ params["merge.w2"] + params["merge.b2"]


def embed_walks(params, proj, walks, cfg, train=False, rng=None, switches=None):
    """Embeddings for a batch of same-length walks.

    `proj` is the (num_nodes, D_h) input-projected feature tensor, `walks`
    an integer array (B, L) of node ids in the order fed to the encoders.
    Returns (embeddings (B, D), per-step feature-GRU outputs, the projected
    per-step inputs).
    """
    walks = np.asarray(walks, dtype=np.int64)
    B, L = walks.shape
    if switches is not None and switches.zero_features:
        xs = [T.Tensor(np.zeros((B, cfg.hidden_dim))) for _ in range(L)]
    else:
        xs = [T.gather_rows(proj, walks[:, t]) for t in range(L)]
    width = cfg.max_walk_length + 1
    if switches is not None and switches.zero_anon:
        us = [T.Tensor(np.zeros((B, width))) for _ in range(L)]
    else:
        us = encode_anon(anon_indices_batch(walks), width)
    hx, hx_steps = gru_forward(params, "gru_x", xs)
    hu, _ = gru_forward(params, "gru_u", us)
    h = merge_embed(params, hx, hu, cfg, train=train, rng=rng)
    return h, hx_steps, xs


def walk_embedding(params, xs, anon, cfg, train=False, rng=None):
    """Embedding of a single walk given its projected feature sequence and
    anonymous indices. Convenience wrapper over the batched path."""
    if len(xs) != len(anon):
        raise GraphError("feature sequence and anonymous indices differ in length")
    us = encode_anon(np.asarray(anon)[None, :], cfg.max_walk_length + 1)
    hx, hx_steps = gru_forward(params, "gru_x", xs)
    hu, _ = gru_forward(params, "gru_u", us)
    h = merge_embed(params, hx, hu, cfg, train=train, rng=rng)
    return h, hx_steps


def project_features(params, X):
    if not isinstance(X, T.Tensor):
        X = T.Tensor(np.asarray(X))
    return X @ params["input_proj.w"] + params["input_proj.b"]


def node_embeddings(params, g, X, nodes, cfg, seed, stream=0, train=False,
                    rng=None, walk_length=None, num_samples=None, switches=None):
    """Mean walk embedding per node over k sampled terminating walks.

    Returns (psi (B, D) tensor, per-walk embeddings (B*k, D), walk array
    (B, k, l+1), per-step GRU outputs, projected step inputs).
    """
    l = cfg.walk_length if walk_length is None else walk_length
    k = cfg.num_samples if num_samples is None else num_samples
    nodes = np.asarray(nodes, dtype=np.int64)
    walks = batch_walks(g, nodes, l, k, seed, stream=stream, terminating=True)
    flat = walks.reshape(-1, walks.shape[-1])
    proj = project_features(params, X)
    h, hx_steps, xs = embed_walks(params, proj, flat, cfg, train=train, rng=rng,
                                  switches=switches)
    psi = T.tmean(T.reshape(h, (len(nodes), k, h.shape[1])), axis=1)
    return psi, h, walks, hx_steps, xs


def node_representation(params, g, X, v, cfg, seed=0, stream=0, train=False, rng=None):
    """psi(v): Monte-Carlo node representation from k terminating walks."""
    psi, _, _, _, _ = node_embeddings(params, g, X, [v], cfg, seed, stream,
                                      train=train, rng=rng)
    return psi


def graph_representation(params, g, X, cfg, seed=0, stream=0, train=False, rng=None):
    """Psi(G): sum of psi(v) over all nodes."""
    psi, _, _, _, _ = node_embeddings(params, g, X, np.arange(g.num_nodes), cfg,
                                      seed, stream, train=train, rng=rng)
    return T.tsum(psi, axis=0)


def exact_node_representation(params, g, X, v, cfg, cap=10 ** 6):
    """Expected walk embedding at v via exhaustive enumeration.

    Every l-step walk from v is reversed, embedded, and weighted by its exact
    probability; this is the zero-variance counterpart of the sampled path.
    """
    proj = project_features(params, X)
    total = None
    for walk, p in _enumerate_exact(g, v, cfg.walk_length, cap):
        rev = walk[::-1]
        xs = [T.gather_rows(proj, np.asarray([node])) for node in rev]
        h, _ = walk_embedding(params, xs, anonymous_experiment(rev), cfg)
        term = T.scale(h, float(p))
        total = term if total is None else total + term
    return total


def exact_graph_representation(params, g, X, cfg, cap=10 ** 6):
    rows = [exact_node_representation(params, g, X, v, cfg, cap)
            for v in range(g.num_nodes)]
    return T.tsum(T.concat(rows, axis=0), axis=0)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def sharpen(probs, temperature):
    """p^(1/T) renormalized along the last axis, as a tracked op."""
    powered = T.tpow(probs, 1.0 / temperature)
    denom = T.tsum(powered, axis=-1, keepdims=True)
    return powered * T.tpow(denom, -1.0)


def consistency_loss(probs, temperature):
    """Mean squared distance of per-sample predictions to the sharpened mean.

    `probs` is a (k, C) or (B, k, C) tensor of probability rows. The target
    sharp(mean over samples) participates in the gradient, so the whole loss
    stays a differentiable function of the parameters.
    """
    data = probs.data
    if data.ndim == 2:
        probs = T.reshape(probs, (1,) + probs.shape)
        data = probs.data
    if data.shape[1] < 2:
        raise GraphError("consistency needs at least 2 samples per node")
    if np.any(np.abs(data.sum(axis=-1) - 1.0) > 1e-6):
        raise GraphError("consistency rows must be normalized probabilities")
    target = sharpen(T.tmean(probs, axis=1, keepdims=True), temperature)
    diff = probs - target
    per_node = T.tsum(T.tmean(T.square(diff), axis=1), axis=-1)
    return T.tmean(per_node)


def self_supervised_loss(params, hx_steps, xs):
    """Predict each next projected feature from the feature-GRU output.

    Mean squared error between self_head(h_t) and the step-(t+1) input.
    Sequences shorter than 2 contribute zero.
    """
    if len(xs) < 2:
        return T.Tensor(0.0)
    preds = [hx_steps[t] @ params["self_head.w"] + params["self_head.b"]
             for t in range(len(xs) - 1)]
    return T.mse(T.concat(preds, axis=0), T.concat(list(xs[1:]), axis=0))


def total_loss(task_nll, l_self, l_cons, self_sup_coef, consistency_coef):
    """task NLL + lambda_self * L_self + lambda_cons * L_consistency."""
    out = task_nll
    if self_sup_coef:
        out = out + T.scale(l_self, self_sup_coef)
    if consistency_coef:
        out = out + T.scale(l_cons, consistency_coef)
    return out


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def node_class_probs(params, g, X, nodes, cfg, seed, stream=0, train=False,
                     rng=None, switches=None):
    """Per-sample and mixture class probabilities for a batch of nodes.

    Per-walk logits go through softmax first; the node-level prediction is
    the mean of the per-sample probability rows.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    k = cfg.num_samples
    _, h, walks, hx_steps, xs = node_embeddings(params, g, X, nodes, cfg, seed,
                                                stream, train=train, rng=rng,
                                                switches=switches)
    logits = h @ params["head.w"] + params["head.b"]
    per_sample = T.softmax(T.reshape(logits, (len(nodes), k, logits.shape[1])))
    mixture = T.tmean(per_sample, axis=1)
    return per_sample, mixture, hx_steps, xs


def predict_node_probs(params, g, X, nodes, cfg, seed, stream=0, switches=None):
    """Inference-time mixture probabilities as a plain array."""
    _, mixture, _, _ = node_class_probs(params, g, X, nodes, cfg, seed, stream,
                                        switches=switches)
    return mixture.data


# ---------------------------------------------------------------------------
# ablation switches
# ---------------------------------------------------------------------------

@dataclass
class SignalSwitches:
    """Zeroing switches for the two walk trajectories (ablation study)."""

    zero_features: bool = False
    zero_anon: bool = False
