"""Shortest evidence paths between claim endpoints and per-claim factuality scores."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from faith.embeddings import EmbeddingProvider, inverse_label
from faith.kg_store import KnowledgeGraph

DEFAULT_HOP_CAP = 4
DEFAULT_PATH_CAP = 64


@dataclass(frozen=True)
class EvidencePath:
    nodes: tuple[str, ...]
    relations: tuple[str, ...]
    reversed: tuple[bool, ...]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        if not len(self.relations) == len(self.reversed) == len(self.nodes) - 1:
            raise ValueError("path has mismatched node/relation counts")

    @property
    def length(self) -> int:
        return len(self.relations)

    @property
    def directions(self) -> tuple[str, ...]:
        return tuple("reversed" if r else "forward" for r in self.reversed)

    def step_labels(self) -> tuple[str, ...]:
        """Relation labels as read from the first node towards the last."""
        return tuple(
            inverse_label(r) if rev else r for r, rev in zip(self.relations, self.reversed)
        )

    def sort_key(self) -> tuple:
        return (self.nodes, self.relations, self.reversed)

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "relations": list(self.relations),
            "directions": list(self.directions),
        }


@dataclass(frozen=True)
class PathScoreBreakdown:
    path: EvidencePath
    predicate: str
    predicate_mapping: str
    mapping_low_confidence: bool
    step_cosines: tuple[float, ...]
    similarity: float
    intermediate_pagerank: tuple[float, ...]
    step_u: tuple[float, ...]
    bracket: float
    score: float

    def to_dict(self) -> dict:
        return {
            "predicate": self.predicate,
            "predicate_mapping": self.predicate_mapping,
            "mapping_low_confidence": self.mapping_low_confidence,
            "step_cosines": list(self.step_cosines),
            "similarity": self.similarity,
            "intermediate_pagerank": list(self.intermediate_pagerank),
            "step_u": list(self.step_u),
            "bracket": self.bracket,
            "score": self.score,
        }


@dataclass
class ClaimScore:
    """Outcome of scoring one resolved claim: the selected breakdown plus all candidates."""

    best: PathScoreBreakdown | None
    candidates: list[PathScoreBreakdown] = field(default_factory=list)

    @property
    def score(self) -> float:
        return self.best.score if self.best else 0.0

    @property
    def has_path(self) -> bool:
        return self.best is not None


# ---------------------------------------------------------------------------
# traversal
# ---------------------------------------------------------------------------


def shortest_paths(
    g: KnowledgeGraph,
    a: str,
    b: str,
    hop_cap: int = DEFAULT_HOP_CAP,
    path_cap: int = DEFAULT_PATH_CAP,
) -> list[EvidencePath]:
    """All minimum-length paths between ``a`` and ``b`` in the undirected view.

    Paths come out in lexicographic order of (node ids, relation labels,
    direction flags) and are truncated to ``path_cap``. Parallel edges yield
    distinct paths. Empty if no path of at most ``hop_cap`` steps exists.
    """
    if a == b:
        raise ValueError("endpoints must differ")
    idx = g.node_index
    src, dst = idx[a], idx[b]
    adj = g.undirected

    # bidirectional layered BFS; each expansion adds one hop to the candidate distance
    layers_a: list[list[int]] = [[src]]
    layers_b: list[list[int]] = [[dst]]
    dist_a = {src: 0}
    dist_b = {dst: 0}
    meet: list[int] = []
    while True:
        if len(layers_a) - 1 + len(layers_b) - 1 + 1 > hop_cap:
            return []
        grow_a = len(layers_a[-1]) <= len(layers_b[-1])
        frontier = layers_a[-1] if grow_a else layers_b[-1]
        seen, other = (dist_a, dist_b) if grow_a else (dist_b, dist_a)
        depth = len(layers_a) if grow_a else len(layers_b)
        nxt = []
        for v in frontier:
            for w, _, _ in adj[v]:
                if w not in seen:
                    seen[w] = depth
                    nxt.append(w)
        if not nxt:
            return []
        (layers_a if grow_a else layers_b).append(nxt)
        # disjoint visited sets until now, so any hit lies on the other side's last layer
        meet = [w for w in nxt if w in other]
        if meet:
            break

    da = len(layers_a) - 1
    db = len(layers_b) - 1
    d = da + db
    # on_path[i]: nodes at position i on some shortest path
    on_path: list[set[int]] = [set() for _ in range(d + 1)]
    on_path[da] = set(meet)
    for i in range(da, 0, -1):
        on_path[i - 1] = {
            u for u in layers_a[i - 1] if any(w in on_path[i] for w, _, _ in adj[u])
        }
    for j in range(db, 0, -1):
        pos = d - j
        on_path[pos + 1] = {
            u for u in layers_b[j - 1] if any(w in on_path[pos] for w, _, _ in adj[u])
        }

    ids = g.node_ids
    rels = g.relation_vocabulary
    out: list[EvidencePath] = []
    nodes = [src]

    def emit() -> bool:
        # every parallel-edge choice along this node sequence, ordered by (relations, flags)
        options = [
            [(r, rev) for w, r, rev in adj[v] if w == nxt]
            for v, nxt in zip(nodes, nodes[1:])
        ]
        combos = sorted(
            (tuple(r for r, _ in c), tuple(bool(rev) for _, rev in c))
            for c in itertools.product(*options)
        )
        node_ids = tuple(ids[n] for n in nodes)
        for rel_idx, flags in combos:
            out.append(EvidencePath(node_ids, tuple(rels[r] for r in rel_idx), flags))
            if len(out) >= path_cap:
                return True
        return False

    def walk(pos: int) -> bool:
        if pos == d:
            return emit()
        allowed = on_path[pos + 1]
        last = None
        for w, _, _ in adj[nodes[-1]]:
            if w in allowed and w != last:
                last = w
                nodes.append(w)
                done = walk(pos + 1)
                nodes.pop()
                if done:
                    return True
        return False

    walk(0)
    return out


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def relation_similarity(p: EvidencePath, predicate: str, emb: EmbeddingProvider) -> float:
    """Mean cosine between each step's relation label and the claim predicate."""
    cosines = [emb.cosine(label, predicate) for label in p.step_labels()]
    return sum(cosines) / len(cosines)


def map_predicate(
    predicate: str, g: KnowledgeGraph, emb: EmbeddingProvider
) -> tuple[str, bool]:
    """Nearest KG relation label to ``predicate`` and a low-confidence flag.

    Ties go to the lexicographically first label; if nothing has positive
    similarity the first label is returned flagged.
    """
    vocab = g.relation_vocabulary
    if not vocab:
        raise ValueError("graph has an empty relation vocabulary")
    if predicate in g.relation_index:
        return predicate, False
    best, best_cos = vocab[0], -math.inf
    for label in vocab:
        c = emb.cosine(predicate, label)
        if c > best_cos:
            best, best_cos = label, c
    if best_cos <= 0.0:
        return vocab[0], True
    return best, False


def score_path(
    p: EvidencePath,
    predicate: str,
    g: KnowledgeGraph,
    emb: EmbeddingProvider,
    mapped: tuple[str, bool] | None = None,
) -> PathScoreBreakdown:
    """Similarity divided by the centrality/co-occurrence penalty bracket.

    The bracket sums exp(alpha * PR) / u over intermediate nodes (paired with
    the relation entering them) plus 1 / u for the final relation. With
    u <= 1 every term is >= 1, so the score stays within [-1, 1].
    """
    target, low_conf = mapped if mapped is not None else map_predicate(predicate, g, emb)
    cosines = tuple(emb.cosine(label, predicate) for label in p.step_labels())
    sim = sum(cosines) / len(cosines)
    step_u = tuple(g.u(r, target) for r in p.relations)
    prs = tuple(g.pagerank[n] for n in p.nodes[1:-1])
    bracket = 0.0
    for pr, u in zip(prs, step_u[:-1]):
        bracket += math.exp(g.alpha * pr) / u
    bracket += 1.0 / step_u[-1]
    score = sim / bracket
    return PathScoreBreakdown(
        path=p,
        predicate=predicate,
        predicate_mapping=target,
        mapping_low_confidence=low_conf,
        step_cosines=cosines,
        similarity=sim,
        intermediate_pagerank=prs,
        step_u=step_u,
        bracket=bracket,
        score=score,
    )


def select_best(candidates: list[PathScoreBreakdown]) -> PathScoreBreakdown | None:
    """Largest |W|; ties prefer the higher W, then the lexicographically first path."""
    best = None
    for c in sorted(candidates, key=lambda c: c.path.sort_key()):
        if best is None or (abs(c.score), c.score) > (abs(best.score), best.score):
            best = c
    return best


def score_claim(
    subject_id: str,
    predicate: str,
    object_id: str,
    g: KnowledgeGraph,
    emb: EmbeddingProvider,
    hop_cap: int = DEFAULT_HOP_CAP,
    path_cap: int = DEFAULT_PATH_CAP,
) -> ClaimScore:
    paths = shortest_paths(g, subject_id, object_id, hop_cap, path_cap)
    if not paths:
        return ClaimScore(None, [])
    mapped = map_predicate(predicate, g, emb)
    candidates = [score_path(p, predicate, g, emb, mapped) for p in paths]
    return ClaimScore(select_best(candidates), candidates)
