"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import random
from collections import deque

import numpy as np

from faith.embeddings import EmbeddingProvider
from faith.kg_store import EdgeRecord, KnowledgeGraph


class PinnedEmbedding(EmbeddingProvider):
    """Cosines fixed by a lookup table (symmetric); unknown pairs default to ``default``."""

    def __init__(self, table: dict[tuple[str, str], float], default: float = 0.0):
        self.table = {}
        for (a, b), c in table.items():
            self.table[(a, b)] = c
            self.table[(b, a)] = c
        self.default = default

    def cosine(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        return self.table.get((a, b), self.default)


def random_graph(
    rng: random.Random,
    n_nodes: int,
    n_edges: int,
    n_rels: int,
    alpha: float = 100.0,
    self_loops: bool = False,
) -> KnowledgeGraph:
    nodes = [f"N{i:03d}" for i in range(n_nodes)]
    rels = [f"rel{j:02d}" for j in range(n_rels)]
    pairs = n_nodes * n_nodes if self_loops else n_nodes * (n_nodes - 1)
    n_edges = min(n_edges, pairs * n_rels)
    edges = set()
    while len(edges) < n_edges:
        s, o = rng.choice(nodes), rng.choice(nodes)
        if s == o and not self_loops:
            continue
        edges.add(EdgeRecord(s, rng.choice(rels), o))
    labels = {n: f"label {n}" for n in nodes}
    return KnowledgeGraph.from_parts(labels, edges, alpha=alpha)


def graph_from_triples(triples, alpha=100.0, epsilon=1e-4, synonyms=()) -> KnowledgeGraph:
    labels = {}
    edges = []
    for s, r, o in triples:
        labels.setdefault(s, s)
        labels.setdefault(o, o)
        edges.append(EdgeRecord(s, r, o))
    return KnowledgeGraph.from_parts(labels, edges, synonyms, alpha=alpha, epsilon=epsilon)


# --- oracles ---------------------------------------------------------------


def bfs_distance(edges, a, b, hop_cap):
    """Plain single-source BFS over the undirected view of an edge list."""
    nbrs = {}
    for e in edges:
        nbrs.setdefault(e.subject, set()).add(e.object)
        nbrs.setdefault(e.object, set()).add(e.subject)
    dist = {a: 0}
    q = deque([a])
    while q:
        v = q.popleft()
        if dist[v] >= hop_cap:
            continue
        for w in sorted(nbrs.get(v, ())):
            if w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist.get(b)


def enumerate_paths(edges, a, b, length):
    """Every simple path of exactly ``length`` steps, as (nodes, relations, reversed)."""
    steps = {}
    for e in edges:
        steps.setdefault(e.subject, []).append((e.object, e.relation_label, False))
        if e.subject != e.object:
            steps.setdefault(e.object, []).append((e.subject, e.relation_label, True))
    out = []

    def dfs(nodes, rels, revs):
        if len(rels) == length:
            if nodes[-1] == b:
                out.append((tuple(nodes), tuple(rels), tuple(revs)))
            return
        for w, r, rev in steps.get(nodes[-1], ()):
            if w in nodes:
                continue
            dfs(nodes + [w], rels + [r], revs + [rev])

    dfs([a], [], [])
    return sorted(out)


def dense_pagerank(n, edges, damping=0.85, tol=1e-15, max_iter=10_000):
    """Dense column-stochastic matrix power iteration."""
    m = np.zeros((n, n))
    for s, o in edges:
        m[o, s] += 1.0
    col = m.sum(axis=0)
    for j in range(n):
        m[:, j] = m[:, j] / col[j] if col[j] else 1.0 / n
    google = damping * m + (1 - damping) / n
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = google @ x
        if np.abs(nxt - x).sum() < tol:
            return nxt
        x = nxt
    return x


def brute_force_cooccurrence(edges, rels):
    """Count over every unordered pair of distinct edges."""
    idx = {r: i for i, r in enumerate(rels)}
    c = np.zeros((len(rels), len(rels)))
    edges = list(edges)
    for i in range(len(edges)):
        for j in range(i + 1, len(edges)):
            e, f = edges[i], edges[j]
            if {e.subject, e.object} & {f.subject, f.object}:
                a, b = idx[e.relation_label], idx[f.relation_label]
                c[a, b] += 1
                if a != b:
                    c[b, a] += 1
    return c


def planted_claims(rng: random.Random, n_nodes: int = 50, n_true: int = 20, n_false: int = 20):
    """KG plus labelled claims where truth is planted in the edge labels.

    True claims restate an existing ``treats`` edge; false claims assert
    ``treats`` for a pair joined only by ``causes``. Background edges use
    unrelated labels.
    """
    nodes = [f"E{i:02d}" for i in range(n_nodes)]
    labels = {n: f"entity {n[1:]}" for n in nodes}
    pairs = rng.sample([(a, b) for a in nodes for b in nodes if a != b], n_true + n_false)
    edges = {EdgeRecord(a, "treats", b) for a, b in pairs[:n_true]}
    edges |= {EdgeRecord(a, "causes", b) for a, b in pairs[n_true:]}
    planted = {frozenset(p) for p in pairs}
    while len(edges) < 3 * n_nodes:
        a, b = rng.sample(nodes, 2)
        if frozenset((a, b)) not in planted:
            edges.add(EdgeRecord(a, rng.choice(["located_in", "part_of"]), b))
    rows = [
        {"id": f"c{i}", "subject": labels[a], "relation": "treats", "object": labels[b], "label": i < n_true}
        for i, (a, b) in enumerate(pairs)
    ]
    return KnowledgeGraph.from_parts(labels, edges), rows
