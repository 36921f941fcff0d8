"""Planted-truth knowledge graphs shared by the experiment scripts."""

from __future__ import annotations

import random
from dataclasses import dataclass

from faith.kg_store import EdgeRecord, KnowledgeGraph


@dataclass(frozen=True)
class PlantedConfig:
    n_nodes: int = 200
    n_true: int = 100
    n_false: int = 100
    background_per_node: int = 4
    sign_flip_share: float = 0.5
    alpha: float = 100.0
    seed: int = 0


EMBEDDINGS = {
    "treats": (1.0, 0.2, 0.0, 0.0),
    "contraindication": (-1.0, -0.2, 0.0, 0.0),
    "causes": (0.0, 0.0, 1.0, 0.0),
    "located_in": (0.0, 0.0, 0.0, 1.0),
    "part_of": (0.0, 0.1, 0.0, 0.9),
}


def planted_graph(cfg: PlantedConfig) -> tuple[KnowledgeGraph, list[dict]]:
    """True claims restate a ``treats`` edge; false ones contradict it.

    A ``sign_flip_share`` of false claims sit on a ``contraindication`` edge,
    the rest on an unrelated ``causes`` edge.
    """
    rng = random.Random(cfg.seed)
    nodes = [f"E{i:04d}" for i in range(cfg.n_nodes)]
    labels = {n: f"entity {n[1:]}" for n in nodes}
    n_claims = cfg.n_true + cfg.n_false
    pairs: list[tuple[str, str]] = []
    used: set[frozenset] = set()
    while len(pairs) < n_claims:
        a, b = rng.sample(nodes, 2)
        if frozenset((a, b)) not in used:
            used.add(frozenset((a, b)))
            pairs.append((a, b))
    n_flip = round(cfg.sign_flip_share * cfg.n_false)
    edges = set()
    for i, (a, b) in enumerate(pairs):
        if i < cfg.n_true:
            rel = "treats"
        else:
            rel = "contraindication" if i - cfg.n_true < n_flip else "causes"
        edges.add(EdgeRecord(a, rel, b))
    target = len(edges) + cfg.background_per_node * cfg.n_nodes
    while len(edges) < target:
        a, b = rng.sample(nodes, 2)
        if frozenset((a, b)) not in used:
            edges.add(EdgeRecord(a, rng.choice(["located_in", "part_of"]), b))
    rows = [
        {"id": f"c{i}", "subject": labels[a], "relation": "treats", "object": labels[b], "label": i < cfg.n_true}
        for i, (a, b) in enumerate(pairs)
    ]
    g = KnowledgeGraph.from_parts(labels, edges, embeddings=EMBEDDINGS, alpha=cfg.alpha)
    return g, rows
