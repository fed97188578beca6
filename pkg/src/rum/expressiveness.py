"""Executable expressiveness checks: 1-WL color refinement, exact
anonymous-walk-distribution graph discrimination, and the closed-form
cycle/path detectors expressible over anonymous indices.

Exact distribution comparisons use rational arithmetic throughout, so two
distributions are equal only when they are exactly equal, never merely
within a floating-point tolerance.
"""

from __future__ import annotations

import itertools
from collections import Counter

import numpy as np
from scipy import stats

from .graphs import Graph, GraphError, from_edges
from .walks import (EnumerationCap, anon_distribution, anon_indices_batch,
                    batch_walks)


# ---------------------------------------------------------------------------
# 1-WL color refinement
# ---------------------------------------------------------------------------

def _refine(adjacency, colors, max_iters):
    n = len(adjacency)
    for _ in range(max_iters):
        signatures = [
            (colors[v], tuple(sorted(colors[u] for u in adjacency[v])))
            for v in range(n)
        ]
        # canonical small ints by first appearance in node-id order
        table = {}
        fresh = []
        for sig in signatures:
            if sig not in table:
                table[sig] = len(table)
            fresh.append(table[sig])
        if fresh == colors:
            break
        colors = fresh
    return colors


def _adjacency_lists(g):
    return [g.neighbors_of(v).tolist() for v in range(g.num_nodes)]


def _initial_colors(labels, n):
    if labels is None:
        return [0] * n
    labels = list(labels)
    if len(labels) != n:
        raise GraphError("label count does not match node count")
    table = {}
    out = []
    for x in labels:
        if x not in table:
            table[x] = len(table)
        out.append(table[x])
    return out


def wl_refine(g, labels=None, max_iters=None):
    """Stable color histogram of iterated neighborhood refinement.

    Colors are canonical integers assigned by first appearance, refined until
    the partition stops changing (or max_iters rounds).
    """
    n = g.num_nodes
    iters = max_iters if max_iters is not None else max(n, 1)
    colors = _refine(_adjacency_lists(g), _initial_colors(labels, n), iters)
    return Counter(colors)


def wl_distinguish(g1, g2, labels1=None, labels2=None):
    """True iff refinement run jointly on both graphs separates their
    stable color histograms."""
    n1, n2 = g1.num_nodes, g2.num_nodes
    adjacency = _adjacency_lists(g1) + [[u + n1 for u in nbrs]
                                        for nbrs in _adjacency_lists(g2)]
    if (labels1 is None) != (labels2 is None):
        raise GraphError("provide labels for both graphs or neither")
    if labels1 is None:
        init = [0] * (n1 + n2)
    else:
        init = _initial_colors(list(labels1) + list(labels2), n1 + n2)
    colors = _refine(adjacency, init, max(n1 + n2, 1))
    return Counter(colors[:n1]) != Counter(colors[n1:])


# ---------------------------------------------------------------------------
# anonymous-distribution discrimination
# ---------------------------------------------------------------------------

def anon_signature(g, l, labels=None, cap=10 ** 6):
    """Multiset over start nodes of exact anonymous-walk distributions.

    Each per-node distribution is serialized to a sorted tuple of
    (key, Fraction) pairs; the multiset is the sorted tuple of those.
    """
    per_node = []
    for v in range(g.num_nodes):
        dist = anon_distribution(g, v, l, with_labels=labels is not None,
                                 labels=labels, cap=cap)
        per_node.append(tuple(sorted(dist.items())))
    return tuple(sorted(per_node))


def anon_distinguish(g1, g2, l, mode="exact", labels1=None, labels2=None,
                     n_samples=100_000, seed=0, cap=10 ** 6):
    """True iff the multisets of per-start anonymous-walk distributions differ.

    Exact mode compares rational-valued distributions for equality. The
    monte-carlo mode samples n walks per graph (spread evenly over start
    nodes) and applies a two-sample chi-square test at alpha = 0.001 on the
    pooled anonymous-pattern counts.
    """
    if (labels1 is None) != (labels2 is None):
        raise GraphError("provide labels for both graphs or neither")
    if mode == "exact":
        s1 = anon_signature(g1, l, labels1, cap)
        s2 = anon_signature(g2, l, labels2, cap)
        return s1 != s2
    if mode != "monte-carlo":
        raise GraphError(f"unknown mode {mode!r}")
    if g1.num_nodes != g2.num_nodes:
        return True
    c1 = _pooled_pattern_counts(g1, l, labels1, n_samples, seed)
    c2 = _pooled_pattern_counts(g2, l, labels2, n_samples, seed + 1)
    return _two_sample_chi_square(c1, c2, alpha=0.001)


def _pooled_pattern_counts(g, l, labels, n_samples, seed):
    n = g.num_nodes
    per_node = max(1, n_samples // n)
    walks = batch_walks(g, np.arange(n), l, per_node, seed, terminating=False)
    anon = anon_indices_batch(walks.reshape(-1, l + 1))
    counts = Counter()
    if labels is None:
        for row in anon:
            counts[tuple(int(x) for x in row)] += 1
    else:
        lab = np.asarray(labels)
        flat = walks.reshape(-1, l + 1)
        for arow, wrow in zip(anon, flat):
            key = (tuple(int(x) for x in arow), tuple(int(x) for x in lab[wrow]))
            counts[key] += 1
    return counts


def _two_sample_chi_square(c1, c2, alpha):
    keys = sorted(set(c1) | set(c2), key=repr)
    a = np.array([c1.get(k, 0) for k in keys], dtype=float)
    b = np.array([c2.get(k, 0) for k in keys], dtype=float)
    if len(keys) < 2:
        return False
    n1, n2 = a.sum(), b.sum()
    k1, k2 = np.sqrt(n2 / n1), np.sqrt(n1 / n2)
    tot = a + b
    statistic = float((((k1 * a - k2 * b) ** 2)[tot > 0] / tot[tot > 0]).sum())
    df = int((tot > 0).sum()) - 1
    if df < 1:
        return False
    return stats.chi2.sf(statistic, df) < alpha


def witness_pattern(g1, g2, l, labels1=None, labels2=None, cap=10 ** 6):
    """An anonymous pattern whose pooled probability differs between graphs,
    or None when the pooled mixtures agree."""
    from fractions import Fraction

    def pooled(g, labels):
        acc = {}
        for v in range(g.num_nodes):
            for key, p in anon_distribution(g, v, l, with_labels=labels is not None,
                                            labels=labels, cap=cap).items():
                acc[key] = acc.get(key, Fraction(0)) + p / g.num_nodes
        return acc

    p1, p2 = pooled(g1, labels1), pooled(g2, labels2)
    best, gap = None, Fraction(0)
    for key in set(p1) | set(p2):
        d = abs(p1.get(key, Fraction(0)) - p2.get(key, Fraction(0)))
        if d > gap:
            best, gap = key, d
    return best


# ---------------------------------------------------------------------------
# closed-form detectors over anonymous indices
# ---------------------------------------------------------------------------

def detect_cycle(g, k, mode="exact", n_samples=10_000, seed=0, cap=10 ** 6):
    """Whether some walk shows indices 0..k-1 all distinct, then index 0 at
    step k. Exact mode searches walks with pruning; monte-carlo samples."""
    if k < 3:
        raise GraphError(f"cycle length must be >= 3, got {k}")
    if mode == "exact":
        budget = [cap]
        for start in range(g.num_nodes):
            if g.degree(start) == 0:
                continue
            if _distinct_path_returns(g, start, start, k, {start}, budget):
                return True
        return False
    if mode != "monte-carlo":
        raise GraphError(f"unknown mode {mode!r}")
    starts = [v for v in range(g.num_nodes) if g.degree(v) > 0]
    walks = batch_walks(g, np.array(starts), k, max(1, n_samples // len(starts)),
                        seed, terminating=False)
    anon = anon_indices_batch(walks.reshape(-1, k + 1))
    want = np.arange(k)
    hits = (anon[:, :k] == want).all(axis=1) & (anon[:, k] == 0)
    return bool(hits.any())


def _distinct_path_returns(g, start, cur, remaining, visited, budget):
    # distinct simple path of `remaining` steps that closes back at `start`
    budget[0] -= 1
    if budget[0] < 0:
        raise EnumerationCap("cycle search budget exhausted")
    if remaining == 1:
        return g.has_edge(cur, start)
    for nxt in g.neighbors_of(cur).tolist():
        if nxt in visited:
            continue
        visited.add(nxt)
        if _distinct_path_returns(g, start, nxt, remaining - 1, visited, budget):
            visited.discard(nxt)
            return True
        visited.discard(nxt)
    return False


def has_cycle_bruteforce(g, k):
    """Independent oracle: try every k-subset and cyclic node order."""
    nodes = range(g.num_nodes)
    for subset in itertools.combinations(nodes, k):
        first = subset[0]
        for perm in itertools.permutations(subset[1:]):
            order = (first,) + perm
            if all(g.has_edge(order[i], order[(i + 1) % k]) for i in range(k)):
                return True
    return False


def longest_anon_path(g, l_max, mode="exact", n_samples=10_000, seed=0, cap=10 ** 6):
    """Longest observed walk whose anonymous indices are all distinct.

    This is the length (in edges) of the longest simple path found, which
    matches the diameter only on trees and paths; on graphs with long simple
    paths it exceeds the diameter (e.g. complete graphs). The quantity is
    reported exactly as defined, without correcting toward the diameter.
    """
    if l_max < 1:
        raise GraphError("l_max must be >= 1")
    if mode == "exact":
        budget = [cap]
        best = 0
        for start in range(g.num_nodes):
            best = max(best, _longest_simple_from(g, start, l_max, {start}, budget))
            if best == l_max:
                break
        return best
    if mode != "monte-carlo":
        raise GraphError(f"unknown mode {mode!r}")
    starts = [v for v in range(g.num_nodes) if g.degree(v) > 0]
    walks = batch_walks(g, np.array(starts), l_max,
                        max(1, n_samples // len(starts)), seed, terminating=False)
    anon = anon_indices_batch(walks.reshape(-1, l_max + 1))
    fresh = anon == np.arange(l_max + 1)
    prefix = np.cumprod(fresh, axis=1).sum(axis=1) - 1
    return int(prefix.max())


def _longest_simple_from(g, cur, remaining, visited, budget):
    budget[0] -= 1
    if budget[0] < 0:
        raise EnumerationCap("path search budget exhausted")
    if remaining == 0:
        return 0
    best = 0
    for nxt in g.neighbors_of(cur).tolist():
        if nxt in visited:
            continue
        visited.add(nxt)
        best = max(best, 1 + _longest_simple_from(g, nxt, remaining - 1, visited, budget))
        visited.discard(nxt)
        if best == remaining:
            break
    return best


# ---------------------------------------------------------------------------
# exhaustive small-graph corpus
# ---------------------------------------------------------------------------

def enumerate_connected_graphs(n):
    """All connected unlabeled graphs on n nodes, one per isomorphism class.

    Brute force over edge subsets with canonicalization by minimum adjacency
    bitmask over all node permutations; fine for n <= 6.
    """
    if n < 1:
        raise GraphError("need n >= 1")
    if n == 1:
        return [from_edges(1, [])]
    pairs = list(itertools.combinations(range(n), 2))
    pidx = {p: i for i, p in enumerate(pairs)}
    perms = list(itertools.permutations(range(n)))
    seen = set()
    out = []
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        g = from_edges(n, edges)
        if not _connected_mask(n, edges):
            continue
        canon = min(_permute_mask(mask, pairs, pidx, perm) for perm in perms)
        if canon in seen:
            continue
        seen.add(canon)
        out.append(from_edges(n, [pairs[i] for i in range(len(pairs))
                                  if canon >> i & 1]))
    return out


def _permute_mask(mask, pairs, pidx, perm):
    m = 0
    for i, (a, b) in enumerate(pairs):
        if mask >> i & 1:
            u, v = perm[a], perm[b]
            m |= 1 << pidx[(min(u, v), max(u, v))]
    return m


def _connected_mask(n, edges):
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n
