"""Reference scorers: degree-based path scores (KL, KL-REL) and n-gram text metrics."""

from __future__ import annotations

import math
import re
from collections import Counter

from faith.embeddings import EmbeddingProvider
from faith.evidence import DEFAULT_HOP_CAP, DEFAULT_PATH_CAP, EvidencePath, relation_similarity, shortest_paths
from faith.kg_store import KnowledgeGraph


def path_truth_value(p: EvidencePath, g: KnowledgeGraph) -> float:
    """1 / (1 + sum of ln(total degree) over intermediate nodes)."""
    idx = g.node_index
    penalty = sum(math.log(g.degree[idx[n]]) for n in p.nodes[1:-1])
    return 1.0 / (1.0 + penalty)


def kl_score(
    subject_id: str,
    object_id: str,
    g: KnowledgeGraph,
    hop_cap: int = DEFAULT_HOP_CAP,
    path_cap: int = DEFAULT_PATH_CAP,
) -> float:
    paths = shortest_paths(g, subject_id, object_id, hop_cap, path_cap)
    return max((path_truth_value(p, g) for p in paths), default=0.0)


def kl_rel_score(
    subject_id: str,
    predicate: str,
    object_id: str,
    g: KnowledgeGraph,
    emb: EmbeddingProvider,
    hop_cap: int = DEFAULT_HOP_CAP,
    path_cap: int = DEFAULT_PATH_CAP,
) -> float:
    """KL path value times relation similarity, maximised by absolute value (ties: higher)."""
    paths = shortest_paths(g, subject_id, object_id, hop_cap, path_cap)
    values = [path_truth_value(p, g) * relation_similarity(p, predicate, emb) for p in paths]
    return max(values, key=lambda v: (abs(v), v), default=0.0)


_TOKEN = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN.split(text.lower()) if t]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: str, reference: str) -> float:
    """Sentence BLEU-4 with add-one smoothing on 2- to 4-gram precisions.

    Unigram precision is left unsmoothed, so texts with no shared token score 0.
    """
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return 0.0
    log_p = 0.0
    for n in range(1, 5):
        c_counts, r_counts = _ngrams(cand, n), _ngrams(ref, n)
        matched = sum(min(c, r_counts[g]) for g, c in c_counts.items())
        total = sum(c_counts.values())
        if n > 1:
            matched, total = matched + 1, total + 1
        if matched == 0:
            return 0.0
        log_p += math.log(matched / total) / 4
    bp = 1.0 if len(cand) > len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(log_p)


def lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(cand), lcs / len(ref)
    return 2 * p * r / (p + r)
