"""Random-walk sampling, anonymous-index encoding, and exact enumeration oracles.

Each step of an unbiased walk moves to a uniformly random neighbor, so a
walk's probability is the product of inverse degrees along its steps. The
batched sampler derives every random draw from a counter-based hash keyed by
(seed, stream, start node, sample, step): sampling is order-independent
across nodes and trivially parallel, and a fixed seed reproduces walks
exactly regardless of batch composition.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .graphs import GraphError


class SamplingError(ValueError):
    """Walk requested from a node with no neighbors."""


class EnumerationCap(RuntimeError):
    """Exact walk enumeration exceeded its configured budget."""


# ---------------------------------------------------------------------------
# counter-based uniforms (splitmix64 finalizer over mixed-in key words)
# ---------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(h):
    h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return h ^ (h >> np.uint64(31))


def counter_uniforms(seed, stream, nodes, samples, steps):
    """Uniforms in [0, 1): shape (len(nodes), samples, steps).

    Pure function of (seed, stream, node id, sample index, step index).
    """
    mask = (1 << 64) - 1
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(int(seed) & mask) * _GOLDEN + np.uint64(int(stream) & mask))
        h = h + np.asarray(nodes, dtype=np.uint64)[:, None, None] * _GOLDEN
        h = _mix(h)
        h = h + np.arange(samples, dtype=np.uint64)[None, :, None] * _GOLDEN
        h = _mix(h)
        h = h + np.arange(steps, dtype=np.uint64)[None, None, :] * _GOLDEN
        h = _mix(h)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_walk(g, start, l, rng):
    """One l-step walk from `start` using the given numpy Generator."""
    if l < 1:
        raise GraphError(f"walk length must be >= 1, got {l}")
    if g.degree(start) == 0:
        raise SamplingError(f"node {start} is isolated; no walk exists")
    walk = [int(start)]
    cur = int(start)
    for _ in range(l):
        nbrs = g.neighbors_of(cur)
        if len(nbrs) == 0:
            raise SamplingError(f"walk reached isolated node {cur}")
        cur = int(nbrs[rng.integers(len(nbrs))])
        walk.append(cur)
    return tuple(walk)


def sample_terminating_walks(g, v, l, k, rng):
    """k walks that end at `v`: forward walks from v, reversed.

    The reversed order is the order fed to downstream sequence encoders, so
    the terminal node is the last element.
    """
    return [sample_walk(g, v, l, rng)[::-1] for _ in range(k)]


def batch_walks(g, starts, l, k, seed, stream=0, terminating=True):
    """Vectorized walks for a batch of start nodes: array (B, k, l+1).

    Walks are reversed when `terminating` so each row ends at its start node.
    Uses the counter-based uniforms, so the walk for (node, sample) does not
    depend on what else is in the batch. l = 0 returns just the start column.
    """
    starts = np.asarray(starts, dtype=np.int64)
    degs = g.degrees()
    if np.any(degs[starts] == 0):
        bad = starts[degs[starts] == 0][0]
        raise SamplingError(f"node {bad} is isolated; no walk exists")
    B = len(starts)
    walks = np.empty((B, k, l + 1), dtype=np.int64)
    walks[:, :, 0] = starts[:, None]
    if l > 0:
        u = counter_uniforms(seed, stream, starts, k, l)
        cur = np.broadcast_to(starts[:, None], (B, k)).copy()
        for t in range(l):
            d = degs[cur]
            idx = g.offsets[cur] + (u[:, :, t] * d).astype(np.int64)
            cur = g.neighbors[idx]
            walks[:, :, t + 1] = cur
    if terminating:
        walks = walks[:, :, ::-1]
    return np.ascontiguousarray(walks)


# ---------------------------------------------------------------------------
# anonymous experiment
# ---------------------------------------------------------------------------

def anonymous_experiment(walk):
    """Relabel a walk by first unique occurrence: dictionary pass, O(l)."""
    if len(walk) == 0:
        raise GraphError("empty walk")
    table = {}
    out = []
    for v in walk:
        if v not in table:
            table[v] = len(table)
        out.append(table[v])
    return tuple(out)


def anonymous_experiment_argmax(walk):
    """Equality-matrix formulation, O(l^2), canonicalized to match the
    dictionary pass bit-exactly.

    argmax over the equality matrix yields each position's first-occurrence
    position; ranking those positions by appearance gives compact indices.
    """
    w = np.asarray(walk)
    first_pos = (w[:, None] == w[None, :]).argmax(axis=-1)
    is_first = first_pos == np.arange(len(w))
    rank = np.cumsum(is_first) - 1
    return tuple(int(i) for i in rank[first_pos])


def anon_indices_batch(walks):
    """Vectorized anonymous indices for walks of shape (..., L)."""
    w = np.asarray(walks)
    first_pos = (w[..., :, None] == w[..., None, :]).argmax(axis=-1)
    is_first = first_pos == np.arange(w.shape[-1])
    rank = np.cumsum(is_first, axis=-1) - 1
    return np.take_along_axis(rank, first_pos, axis=-1)


def validate_anon(indices):
    """AnonWalk invariants: starts at 0, new indices grow by at most one."""
    if len(indices) == 0 or indices[0] != 0:
        return False
    top = 0
    for i in indices[1:]:
        if i < 0 or i > top + 1:
            return False
        top = max(top, i)
    return True


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------

def walk_probability(g, walk):
    """Product over steps of 1/degree(v_i); errors on non-adjacent pairs."""
    p = 1.0
    for a, b in zip(walk[:-1], walk[1:]):
        if not g.has_edge(a, b):
            raise GraphError(f"walk step ({a}, {b}) is not an edge")
        p /= g.degree(a)
    return p


def enumerate_walks(g, start, l, cap=10 ** 6):
    """All l-step walks from `start` with exact probabilities (as Fractions
    converted to float), summing to 1. Raises EnumerationCap beyond `cap`."""
    walks = []
    for w, p in _enumerate_exact(g, start, l, cap):
        walks.append((w, float(p)))
    return walks


def _enumerate_exact(g, start, l, cap=10 ** 6):
    if g.degree(start) == 0:
        raise SamplingError(f"node {start} is isolated; no walk exists")
    count = 0
    stack = [((int(start),), Fraction(1))]
    while stack:
        walk, p = stack.pop()
        if len(walk) == l + 1:
            count += 1
            if count > cap:
                raise EnumerationCap(f"more than {cap} walks of length {l} from node {start}")
            yield walk, p
            continue
        u = walk[-1]
        nbrs = g.neighbors_of(u)
        if len(nbrs) == 0:
            raise SamplingError(f"walk reached isolated node {u}")
        share = p / len(nbrs)
        for v in nbrs.tolist():
            stack.append((walk + (v,), share))


def anon_distribution(g, start, l, with_labels=False, labels=None, cap=10 ** 6):
    """Exact distribution of anonymous index sequences over l-step walks.

    Keys are anonymous tuples, optionally paired with the walk's label
    sequence; values are exact Fractions summing to 1. l = 0 gives {(0,): 1}.
    """
    if with_labels and labels is None:
        raise GraphError("with_labels requires a label array")
    if l == 0:
        key = ((0,), (int(labels[start]),)) if with_labels else (0,)
        return {key: Fraction(1)}
    dist = {}
    for walk, p in _enumerate_exact(g, start, l, cap):
        key = anonymous_experiment(walk)
        if with_labels:
            key = (key, tuple(int(labels[v]) for v in walk))
        dist[key] = dist.get(key, Fraction(0)) + p
    return dist


def distribution_to_float(dist):
    return {k: float(v) for k, v in dist.items()}
