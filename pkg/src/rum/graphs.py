"""CSR graph storage, text-format I/O, synthetic generators, and structural
measurements (degrees, Dirichlet energy, random edge perturbation).

Graphs are undirected and unweighted: the neighbor array stores both
directions of every edge, each node's neighbor list sorted ascending,
self-loops dropped on construction.
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Malformed graph input or violated structural precondition."""


def _open_text(path, mode="rt"):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode)
    return open(path, mode)


@dataclass(frozen=True)
class Graph:
    """Compressed sparse row adjacency of an undirected unweighted graph."""

    offsets: np.ndarray
    neighbors: np.ndarray
    undirected: bool = True

    @property
    def num_nodes(self):
        return len(self.offsets) - 1

    @property
    def num_edges(self):
        """Undirected edge count (each edge stored twice in CSR)."""
        return len(self.neighbors) // 2

    def degree(self, v):
        if not 0 <= v < self.num_nodes:
            raise GraphError(f"node id {v} out of range [0, {self.num_nodes})")
        return int(self.offsets[v + 1] - self.offsets[v])

    def degrees(self):
        return np.diff(self.offsets)

    def neighbors_of(self, v):
        if not 0 <= v < self.num_nodes:
            raise GraphError(f"node id {v} out of range [0, {self.num_nodes})")
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def has_edge(self, u, v):
        nbrs = self.neighbors_of(u)
        i = np.searchsorted(nbrs, v)
        return i < len(nbrs) and nbrs[i] == v

    def edge_pairs(self):
        """(u, v) arrays over each undirected edge counted once (u < v)."""
        u = np.repeat(np.arange(self.num_nodes), self.degrees())
        v = self.neighbors
        keep = u < v
        return u[keep], v[keep]

    def validate(self):
        n = self.num_nodes
        if self.offsets[0] != 0 or self.offsets[-1] != len(self.neighbors):
            raise GraphError("offsets must start at 0 and end at len(neighbors)")
        if np.any(np.diff(self.offsets) < 0):
            raise GraphError("offsets must be non-decreasing")
        if len(self.neighbors) and (self.neighbors.min() < 0 or self.neighbors.max() >= n):
            raise GraphError("neighbor id out of range")
        u = np.repeat(np.arange(n), self.degrees())
        if np.any(u == self.neighbors):
            raise GraphError("self-loop stored in CSR")
        if self.undirected:
            fwd = set(zip(u.tolist(), self.neighbors.tolist()))
            if any((b, a) not in fwd for a, b in fwd):
                raise GraphError("adjacency not symmetric")
        return self

    def permuted(self, perm):
        """Relabel nodes: new id of old node v is perm[v]."""
        perm = np.asarray(perm, dtype=np.int64)
        u, v = self.edge_pairs()
        return from_edges(self.num_nodes, zip(perm[u].tolist(), perm[v].tolist()))

    def dense_adjacency(self):
        a = np.zeros((self.num_nodes, self.num_nodes))
        u = np.repeat(np.arange(self.num_nodes), self.degrees())
        a[u, self.neighbors] = 1.0
        return a

    def write_edge_list(self, path):
        u, v = self.edge_pairs()
        with _open_text(path, "wt") as f:
            for a, b in zip(u.tolist(), v.tolist()):
                f.write(f"{a} {b}\n")


def from_edges(num_nodes, edges, symmetrize=True):
    """Build a CSR graph from (u, v) pairs.

    Both directions are inserted when symmetrize is set; duplicates and
    self-loops are dropped; neighbor lists come out sorted ascending.
    """
    pairs = set()
    for u, v in edges:
        if u == v:
            continue
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise GraphError(f"edge ({u}, {v}) outside node range [0, {num_nodes})")
        pairs.add((u, v))
        if symmetrize:
            pairs.add((v, u))
    if pairs:
        arr = np.array(sorted(pairs), dtype=np.int64)
        src, dst = arr[:, 0], arr[:, 1]
    else:
        src = dst = np.empty(0, dtype=np.int64)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(offsets, src + 1, 1)
    offsets = np.cumsum(offsets)
    return Graph(offsets=offsets, neighbors=dst, undirected=symmetrize)


def load_edge_list(path, symmetrize=True, num_nodes=None):
    """Read "u v" integer pairs, one per non-comment line."""
    edges = []
    max_id = -1
    with _open_text(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise GraphError(f"{path}:{lineno}: negative node id")
            edges.append((u, v))
            max_id = max(max_id, u, v)
    n = num_nodes if num_nodes is not None else max_id + 1
    return from_edges(n, edges, symmetrize=symmetrize)


# ---------------------------------------------------------------------------
# labeled datasets
# ---------------------------------------------------------------------------

@dataclass
class LabeledDataset:
    """A graph with node features, integer labels, and optional split masks.

    For node tasks, `labels` holds one class per node and the three masks
    select disjoint train/val/test subsets. For graph tasks, `labels` holds a
    single class for the whole graph and the masks are None.
    """

    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray | None = None
    val_mask: np.ndarray | None = None
    test_mask: np.ndarray | None = None

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1

    def validate(self):
        n = self.graph.num_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise GraphError(f"feature rows {self.features.shape} do not match {n} nodes")
        if not np.all(np.isfinite(self.features)):
            raise GraphError("non-finite feature values")
        if self.labels.ndim == 1 and len(self.labels) != n:
            raise GraphError("per-node labels must have one entry per node")
        masks = [m for m in (self.train_mask, self.val_mask, self.test_mask) if m is not None]
        for m in masks:
            if len(m) != n:
                raise GraphError("mask length does not match node count")
        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                if np.any(masks[i] & masks[j]):
                    raise GraphError("split masks overlap")
        return self


def load_features_tsv(path):
    rows = []
    with _open_text(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                rows.append([float(x) for x in line.split("\t")])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-numeric feature value") from None
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2:
        raise GraphError(f"{path}: ragged feature rows")
    return X


def load_int_column(path):
    vals = []
    with _open_text(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(int(line))
            except ValueError:
                raise GraphError(f"{path}:{lineno}: expected an integer") from None
    return np.asarray(vals, dtype=np.int64)


def load_mask(path):
    col = load_int_column(path)
    if np.any((col != 0) & (col != 1)):
        raise GraphError(f"{path}: mask entries must be 0 or 1")
    return col.astype(bool)


def load_features_labels_masks(graph, features_path, labels_path,
                               train_mask_path=None, val_mask_path=None,
                               test_mask_path=None):
    """Assemble a LabeledDataset from the text formats, checking dimensions."""
    X = load_features_tsv(features_path)
    y = load_int_column(labels_path)
    masks = {}
    for name, p in (("train_mask", train_mask_path), ("val_mask", val_mask_path),
                    ("test_mask", test_mask_path)):
        masks[name] = load_mask(p) if p is not None else None
    ds = LabeledDataset(graph=graph, features=X, labels=y, **masks)
    return ds.validate()


def load_graph_dataset_dir(index_path, feature_dim=1):
    """Per-graph edge lists plus an index file "graph_file<TAB>label".

    Paths in the index are resolved relative to the index file. Every graph
    gets constant all-ones features of the requested width.
    """
    base = Path(index_path).parent
    out = []
    with _open_text(index_path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise GraphError(f"{index_path}:{lineno}: expected 'file<TAB>label'")
            g = load_edge_list(base / parts[0])
            out.append(LabeledDataset(
                graph=g,
                features=np.ones((g.num_nodes, feature_dim)),
                labels=np.asarray(int(parts[1]), dtype=np.int64),
            ))
    return out


# ---------------------------------------------------------------------------
# structural measurements
# ---------------------------------------------------------------------------

def dirichlet_energy(X, g):
    """(1/N) * sum over each undirected edge {u, v} of ||X_u - X_v||^2."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != g.num_nodes:
        raise GraphError(f"feature rows {X.shape} do not match {g.num_nodes} nodes")
    u, v = g.edge_pairs()
    diff = X[u] - X[v]
    return float((diff * diff).sum() / g.num_nodes)


def connected_components(g):
    """Component id per node, via BFS."""
    n = g.num_nodes
    comp = np.full(n, -1, dtype=np.int64)
    cid = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[s] = cid
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for w in g.neighbors_of(u):
                    if comp[w] < 0:
                        comp[w] = cid
                        nxt.append(int(w))
            frontier = nxt
        cid += 1
    return comp


def is_connected(g):
    return g.num_nodes <= 1 or connected_components(g).max() == 0


def add_random_edges(g, fraction, seed):
    """A new graph with floor(fraction * |E|) uniformly sampled fake edges.

    Sampled from the complement graph without replacement; deterministic per
    seed. Raises when the complement cannot host that many new edges.
    """
    if not 0.0 <= fraction <= 1.0:
        raise GraphError(f"fraction must lie in [0, 1], got {fraction}")
    n = g.num_nodes
    want = int(fraction * g.num_edges)
    complement = n * (n - 1) // 2 - g.num_edges
    if want > complement:
        raise GraphError(f"complement graph has only {complement} free slots, need {want}")
    if want == 0:
        return g
    rng = np.random.default_rng(seed)
    existing = set(zip(*(arr.tolist() for arr in g.edge_pairs())))
    new = set()
    while len(new) < want:
        batch = rng.integers(0, n, size=(max(64, 2 * (want - len(new))), 2))
        for a, b in batch.tolist():
            if a == b:
                continue
            e = (min(a, b), max(a, b))
            if e in existing or e in new:
                continue
            new.add(e)
            if len(new) == want:
                break
    u, v = g.edge_pairs()
    all_edges = list(zip(u.tolist(), v.tolist())) + sorted(new)
    return from_edges(n, all_edges)


# ---------------------------------------------------------------------------
# synthetic generators
# ---------------------------------------------------------------------------

def gen_cycle(n):
    """Ring graph C_n as a dataset with all-ones features and zero labels."""
    if n < 3:
        raise GraphError(f"cycle needs at least 3 nodes, got {n}")
    g = from_edges(n, [(i, (i + 1) % n) for i in range(n)])
    return LabeledDataset(graph=g, features=np.ones((n, 1)),
                          labels=np.zeros(n, dtype=np.int64))


def csl_graph(n_nodes, skip):
    """Ring plus skip-links every `skip` positions; 4-regular."""
    if skip in (1, n_nodes - 1) or not 2 <= skip <= n_nodes - 2:
        raise GraphError(f"skip {skip} degenerate for ring of {n_nodes}")
    if math.gcd(skip, n_nodes) != 1:
        raise GraphError(f"skip {skip} shares a factor with {n_nodes}")
    edges = [(i, (i + 1) % n_nodes) for i in range(n_nodes)]
    edges += [(i, (i + skip) % n_nodes) for i in range(n_nodes)]
    return from_edges(n_nodes, edges)


CSL_DEFAULT_SKIPS = (2, 3, 4, 5, 6, 9, 11, 12, 13, 16)


def gen_csl(n_nodes=41, skip=2, skips=CSL_DEFAULT_SKIPS):
    """One circular-skip-link graph labeled by its skip's class index."""
    g = csl_graph(n_nodes, skip)
    label = skips.index(skip) if skip in skips else 0
    return LabeledDataset(graph=g, features=np.ones((n_nodes, 1)),
                          labels=np.asarray(label, dtype=np.int64))


def csl_corpus(n_nodes=41, skips=CSL_DEFAULT_SKIPS, copies_per_class=15, seed=0):
    """The usual benchmark corpus: per skip class, node-permuted ring copies.

    Every graph is 4-regular, so degree histograms are identical across
    classes and color refinement cannot separate them.
    """
    rng = np.random.default_rng(seed)
    out = []
    for label, skip in enumerate(skips):
        base = csl_graph(n_nodes, skip)
        for c in range(copies_per_class):
            g = base if c == 0 else base.permuted(rng.permutation(n_nodes))
            out.append(LabeledDataset(graph=g, features=np.ones((n_nodes, 1)),
                                      labels=np.asarray(label, dtype=np.int64)))
    return out


def tree_match_instance(depth, rng):
    """One neighborhood-matching tree: perfect binary tree whose root label is
    the key of the single flagged leaf.

    Leaves carry a one-hot key over 2**depth candidates plus a designation
    flag; the keys are a random permutation so each candidate appears once.
    """
    if depth < 1:
        raise GraphError("tree depth must be >= 1")
    n = 2 ** (depth + 1) - 1
    num_keys = 2 ** depth
    g = from_edges(n, [((i - 1) // 2, i) for i in range(1, n)])
    leaves = np.arange(n - num_keys, n)
    keys = rng.permutation(num_keys)
    designated = int(rng.integers(num_keys))
    X = np.zeros((n, num_keys + 1))
    X[leaves, keys] = 1.0
    X[leaves[designated], num_keys] = 1.0
    labels = np.zeros(n, dtype=np.int64)
    labels[0] = keys[designated]
    return LabeledDataset(graph=g, features=X, labels=labels)


def gen_tree_match(depth, seed):
    return tree_match_instance(depth, np.random.default_rng(seed))


def tree_match_corpus(depth, n_instances, seed):
    rng = np.random.default_rng(seed)
    return [tree_match_instance(depth, rng) for _ in range(n_instances)]
