"""Knowledge graph storage: edge-list ingestion, indexing, derived statistics
(PageRank, relation co-occurrence) and a versioned on-disk index."""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from faith.normalize import normalize

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 100.0
DEFAULT_EPSILON = 1e-4
DEFAULT_DAMPING = 0.85
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
MALFORMED_LIMIT = 0.01

INDEX_MAGIC = b"FAITHIDX"
INDEX_VERSION = 1
_HEADER = struct.Struct(">8sI32sQ")


class GraphLoadError(Exception):
    """Raised when an edge list or synonym file cannot be ingested."""

    def __init__(self, message: str, bad_lines: list[int] | None = None):
        super().__init__(message)
        self.bad_lines = bad_lines or []


class IndexFormatError(Exception):
    """Raised for corrupt, truncated or incompatible index files."""


@dataclass(frozen=True)
class NodeRecord:
    node_id: str
    canonical_label: str
    alias_set: frozenset[str] = frozenset()


@dataclass(frozen=True, order=True)
class EdgeRecord:
    subject: str
    relation_label: str
    object: str

    @property
    def is_self_loop(self) -> bool:
        return self.subject == self.object


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    relation_count: int
    self_loop_count: int
    min_degree: int
    max_degree: int
    mean_degree: float


@dataclass
class EdgeList:
    """Raw ingestion result, before any index or statistic is built."""

    labels: dict[str, str] = field(default_factory=dict)
    edges: set[EdgeRecord] = field(default_factory=set)
    malformed: list[int] = field(default_factory=list)
    label_conflicts: list[int] = field(default_factory=list)

    def add(self, sid: str, slabel: str, rel: str, oid: str, olabel: str) -> None:
        for nid, label in ((sid, slabel), (oid, olabel)):
            self.labels.setdefault(nid, label)
        self.edges.add(EdgeRecord(sid, rel, oid))


def load_edge_list(path: str | Path, has_header: bool = False) -> EdgeList:
    """Read a 5-column TSV (subject_id, subject_label, relation, object_id, object_label).

    Duplicate lines collapse. Malformed rows are collected; more than 1% of
    them aborts with a :class:`GraphLoadError` listing the offending lines.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise GraphLoadError(f"cannot read edge list {path}: {exc}") from exc

    out = EdgeList()
    n_rows = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if has_header and lineno == 1:
            continue
        if not line.strip():
            continue
        n_rows += 1
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 5 or not all(parts):
            out.malformed.append(lineno)
            continue
        sid, slabel, rel, oid, olabel = parts
        for nid, label in ((sid, slabel), (oid, olabel)):
            if nid in out.labels and out.labels[nid] != label:
                out.label_conflicts.append(lineno)
        out.add(sid, slabel, rel, oid, olabel)

    if n_rows and len(out.malformed) > MALFORMED_LIMIT * n_rows:
        shown = ", ".join(map(str, out.malformed[:20]))
        raise GraphLoadError(
            f"{len(out.malformed)}/{n_rows} malformed lines in {path} (lines {shown})",
            out.malformed,
        )
    if out.malformed:
        log.warning("skipped %d malformed lines in %s", len(out.malformed), path)
    return out


def load_synonyms(path: str | Path) -> list[tuple[str, str]]:
    """Read ``alias \\t canonical_node_id`` rows."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise GraphLoadError(f"cannot read synonym file {path}: {exc}") from exc
    rows = []
    bad = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 2 or not all(parts):
            bad.append(lineno)
            continue
        rows.append((parts[0], parts[1]))
    if bad:
        raise GraphLoadError(f"malformed synonym rows in {path}", bad)
    return rows


def load_embedding_table(path: str | Path) -> dict[str, tuple[float, ...]]:
    """Read ``label \\t v1,v2,...`` rows; ragged dimensions are rejected."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise GraphLoadError(f"cannot read embedding file {path}: {exc}") from exc
    table: dict[str, tuple[float, ...]] = {}
    dim = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise GraphLoadError(f"{path}:{lineno}: expected 2 tab-separated fields", [lineno])
        try:
            vec = tuple(float(x) for x in parts[1].split(","))
        except ValueError as exc:
            raise GraphLoadError(f"{path}:{lineno}: bad vector ({exc})", [lineno]) from exc
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise GraphLoadError(
                f"{path}:{lineno}: ragged row, dimension {len(vec)} != {dim}", [lineno]
            )
        table[parts[0].strip()] = vec
    return table


# ---------------------------------------------------------------------------
# derived statistics
# ---------------------------------------------------------------------------


def pagerank_power(
    n: int,
    edges: Iterable[tuple[int, int]],
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[np.ndarray, bool]:
    """Power iteration over integer-indexed directed edges.

    Each edge carries unit weight, so parallel edges with different labels
    count separately. Dangling mass is spread uniformly.
    """
    if n == 0:
        raise ValueError("PageRank needs a non-empty graph")
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must lie in (0, 1), got {damping}")
    src, dst = [], []
    for s, o in edges:
        src.append(s)
        dst.append(o)
    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    out_deg = np.bincount(src_a, minlength=n).astype(float)
    dangling = out_deg == 0
    weight = np.zeros(len(src_a))
    if len(src_a):
        weight = 1.0 / out_deg[src_a]

    pr = np.full(n, 1.0 / n)
    converged = False
    for _ in range(max_iter):
        flow = np.bincount(dst_a, weights=pr[src_a] * weight, minlength=n)
        new = damping * (flow + pr[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        delta = np.abs(new - pr).sum()
        pr = new
        if delta < tol:
            converged = True
            break
    return pr, converged


def compute_pagerank(
    g: "KnowledgeGraph",
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> dict[str, float]:
    idx = g.node_index
    pr, converged = pagerank_power(
        len(g.node_ids),
        ((idx[e.subject], idx[e.object]) for e in g.edges),
        damping,
        tol,
        max_iter,
    )
    if not converged:
        log.warning("PageRank stopped at max_iter=%d before reaching tol=%g", max_iter, tol)
    return dict(zip(g.node_ids, pr.tolist()))


def cooccurrence_counts(edges: Iterable[EdgeRecord], relations: list[str]) -> np.ndarray:
    """c[r1, r2] = number of unordered edge pairs labelled (r1, r2) sharing an endpoint.

    Counted per endpoint, then corrected for pairs that share both endpoints
    so that each qualifying pair is counted once.
    """
    ridx = {r: i for i, r in enumerate(relations)}
    m = len(relations)
    counts = np.zeros((m, m), dtype=np.float64)
    incident: dict[str, Counter] = defaultdict(Counter)
    by_pair: dict[tuple[str, str], Counter] = defaultdict(Counter)
    for e in edges:
        r = ridx[e.relation_label]
        incident[e.subject][r] += 1
        if e.object != e.subject:
            incident[e.object][r] += 1
            by_pair[tuple(sorted((e.subject, e.object)))][r] += 1

    def add(counter: Counter, sign: float) -> None:
        items = sorted(counter.items())
        for a, (ra, na) in enumerate(items):
            counts[ra, ra] += sign * na * (na - 1) / 2
            for rb, nb in items[a + 1 :]:
                counts[ra, rb] += sign * na * nb
                counts[rb, ra] += sign * na * nb

    for counter in incident.values():
        add(counter, 1.0)
    for counter in by_pair.values():
        add(counter, -1.0)
    return counts


def cooccurrence_from_counts(counts: np.ndarray, floor: float) -> np.ndarray:
    """Row-cosine similarity of log1p counts, clipped into [floor, 1], diagonal 1."""
    if not 0.0 < floor < 1.0:
        raise ValueError(f"floor must lie in (0, 1), got {floor}")
    damped = np.log1p(counts)
    norms = np.linalg.norm(damped, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = damped / safe[:, None]
    u = unit @ unit.T
    u = np.clip(u, floor, 1.0)
    u = (u + u.T) / 2
    np.fill_diagonal(u, 1.0)
    return u


def compute_cooccurrence(g: "KnowledgeGraph", floor: float = DEFAULT_EPSILON) -> np.ndarray:
    rels = list(g.relation_vocabulary)
    return cooccurrence_from_counts(cooccurrence_counts(g.edges, rels), floor)


# ---------------------------------------------------------------------------
# the graph
# ---------------------------------------------------------------------------


class KnowledgeGraph:
    """Immutable directed labelled multigraph with lookup indices and derived statistics.

    Build with :meth:`build`; derived tables (PageRank, co-occurrence) are
    computed once there and never change afterwards.
    """

    def __init__(
        self,
        labels: Mapping[str, str],
        edges: Iterable[EdgeRecord],
        aliases: Mapping[str, str],
        pagerank: Mapping[str, float],
        cooccurrence: np.ndarray,
        alpha: float,
        epsilon: float,
        embeddings: Mapping[str, tuple[float, ...]] | None = None,
        pagerank_converged: bool = True,
    ):
        self.node_ids: tuple[str, ...] = tuple(sorted(labels))
        self.node_index = MappingProxyType({n: i for i, n in enumerate(self.node_ids)})
        self.labels = MappingProxyType(dict(labels))
        self.edges: tuple[EdgeRecord, ...] = tuple(sorted(set(edges)))
        self.relation_vocabulary: tuple[str, ...] = tuple(
            sorted({e.relation_label for e in self.edges})
        )
        self.relation_index = MappingProxyType(
            {r: i for i, r in enumerate(self.relation_vocabulary)}
        )
        self.aliases = MappingProxyType(dict(aliases))
        self.pagerank = MappingProxyType(dict(pagerank))
        self.pagerank_converged = pagerank_converged
        cooc = np.array(cooccurrence, dtype=np.float64)
        cooc.setflags(write=False)
        self.cooccurrence = cooc
        self.alpha = float(alpha)
        self.epsilon = float(epsilon)
        self.embeddings = MappingProxyType(dict(embeddings or {}))

        for e in self.edges:
            if e.subject not in self.node_index or e.object not in self.node_index:
                raise GraphLoadError(f"edge {e} references an unknown node")
        self._build_adjacency()
        self._build_label_index()

    # construction ---------------------------------------------------------

    @classmethod
    def build(
        cls,
        edge_list: EdgeList,
        synonyms: Iterable[tuple[str, str]] = (),
        embeddings: Mapping[str, tuple[float, ...]] | None = None,
        alpha: float = DEFAULT_ALPHA,
        epsilon: float = DEFAULT_EPSILON,
        damping: float = DEFAULT_DAMPING,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
    ) -> "KnowledgeGraph":
        return cls.from_parts(
            edge_list.labels,
            edge_list.edges,
            synonyms,
            embeddings,
            alpha,
            epsilon,
            damping,
            tol,
            max_iter,
        )

    @classmethod
    def from_parts(
        cls,
        labels: Mapping[str, str],
        edges: Iterable[EdgeRecord],
        synonyms: Iterable[tuple[str, str]] = (),
        embeddings: Mapping[str, tuple[float, ...]] | None = None,
        alpha: float = DEFAULT_ALPHA,
        epsilon: float = DEFAULT_EPSILON,
        damping: float = DEFAULT_DAMPING,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
    ) -> "KnowledgeGraph":
        edges = sorted(set(edges))
        for nid, label in labels.items():
            if not label:
                raise GraphLoadError(f"node {nid} has an empty label")
        aliases: dict[str, str] = {}
        for alias, nid in synonyms:
            if nid not in labels:
                log.warning("synonym %r points at unknown node %r; skipped", alias, nid)
                continue
            key = normalize(alias)
            if not key:
                continue
            if key in aliases and aliases[key] != nid:
                log.warning("alias %r already maps to %s; keeping it", alias, aliases[key])
                continue
            aliases[key] = nid

        shell = cls(labels, edges, aliases, {}, np.zeros((0, 0)), alpha, epsilon, embeddings)
        if shell.node_ids:
            idx = shell.node_index
            pr_arr, converged = pagerank_power(
                len(shell.node_ids),
                ((idx[e.subject], idx[e.object]) for e in shell.edges),
                damping,
                tol,
                max_iter,
            )
            if not converged:
                log.warning("PageRank did not converge within %d iterations", max_iter)
            pr = dict(zip(shell.node_ids, pr_arr.tolist()))
        else:
            pr, converged = {}, True
        cooc = compute_cooccurrence(shell, epsilon)
        return cls(labels, edges, aliases, pr, cooc, alpha, epsilon, embeddings, converged)

    def _build_adjacency(self) -> None:
        idx = self.node_index
        ridx = self.relation_index
        n = len(self.node_ids)
        out_adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        in_adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        # undirected view: (neighbour, relation, reversed) per incident edge
        und: list[list[tuple[int, int, int]]] = [[] for _ in range(n)]
        for e in self.edges:
            s, o, r = idx[e.subject], idx[e.object], ridx[e.relation_label]
            out_adj[s].append((r, o))
            in_adj[o].append((r, s))
            und[s].append((o, r, 0))
            if s != o:
                und[o].append((s, r, 1))
        # index order equals lexicographic id/label order, so tuple sort is the
        # deterministic traversal order
        self.out_adjacency = tuple(tuple(sorted(a)) for a in out_adj)
        self.in_adjacency = tuple(tuple(sorted(a)) for a in in_adj)
        self.undirected = tuple(tuple(sorted(a)) for a in und)
        self.degree = tuple(len(out_adj[i]) + len(in_adj[i]) for i in range(n))

    def _build_label_index(self) -> None:
        exact: dict[str, str] = {}
        normed: dict[str, str] = {}
        alias_sets: dict[str, set[str]] = defaultdict(set)
        for nid in self.node_ids:
            label = self.labels[nid]
            exact.setdefault(label, nid)
            key = normalize(label)
            normed.setdefault(key, nid)
            alias_sets[nid].add(key)
        for alias, nid in self.aliases.items():
            alias_sets[nid].add(alias)
        self.exact_labels = MappingProxyType(exact)
        self.normalized_labels = MappingProxyType(normed)
        self._alias_sets = {k: frozenset(v) for k, v in alias_sets.items()}

    # queries --------------------------------------------------------------

    def node(self, node_id: str) -> NodeRecord:
        return NodeRecord(node_id, self.labels[node_id], self._alias_sets.get(node_id, frozenset()))

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.node_index

    def __len__(self) -> int:
        return len(self.node_ids)

    def u(self, r1: str, r2: str) -> float:
        """Co-occurrence of two KG relation labels, floored at epsilon."""
        i = self.relation_index.get(r1)
        j = self.relation_index.get(r2)
        if i is None or j is None:
            return self.epsilon
        return min(1.0, max(self.epsilon, float(self.cooccurrence[i, j])))

    def stats(self) -> GraphStats:
        deg = self.degree or (0,)
        return GraphStats(
            node_count=len(self.node_ids),
            edge_count=len(self.edges),
            relation_count=len(self.relation_vocabulary),
            self_loop_count=sum(e.is_self_loop for e in self.edges),
            min_degree=min(deg),
            max_degree=max(deg),
            mean_degree=sum(deg) / max(len(self.node_ids), 1),
        )

    def with_edges(
        self, labels: Mapping[str, str], edges: Iterable[EdgeRecord]
    ) -> "KnowledgeGraph":
        """Rebuild over a new node/edge set, keeping aliases, embeddings and constants."""
        synonyms = [(a, n) for a, n in self.aliases.items() if n in labels]
        return KnowledgeGraph.from_parts(
            labels, edges, synonyms, self.embeddings, self.alpha, self.epsilon
        )

    # persistence ----------------------------------------------------------

    def to_payload(self) -> dict:
        return {
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "nodes": [[n, self.labels[n]] for n in self.node_ids],
            "edges": [[e.subject, e.relation_label, e.object] for e in self.edges],
            "aliases": sorted(self.aliases.items()),
            "embeddings": sorted([k, list(v)] for k, v in self.embeddings.items()),
            "pagerank": [self.pagerank[n] for n in self.node_ids],
            "pagerank_converged": self.pagerank_converged,
            "relations": list(self.relation_vocabulary),
            "cooccurrence": self.cooccurrence.tolist(),
        }

    @classmethod
    def from_payload(cls, p: dict) -> "KnowledgeGraph":
        labels = {n: label for n, label in p["nodes"]}
        edges = [EdgeRecord(*e) for e in p["edges"]]
        g = cls(
            labels,
            edges,
            dict(p["aliases"]),
            dict(zip(labels, p["pagerank"])),
            np.asarray(p["cooccurrence"], dtype=np.float64).reshape(
                len(p["relations"]), len(p["relations"])
            ),
            p["alpha"],
            p["epsilon"],
            {k: tuple(v) for k, v in p["embeddings"]},
            p["pagerank_converged"],
        )
        if list(g.relation_vocabulary) != p["relations"]:
            raise IndexFormatError("relation vocabulary does not match edge table")
        return g


def persist_index(g: KnowledgeGraph, path: str | Path) -> None:
    """Write a versioned, checksummed index. Identical graphs give identical bytes."""
    raw = json.dumps(g.to_payload(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = zlib.compress(raw, 6)
    digest = hashlib.sha256(payload).digest()
    header = _HEADER.pack(INDEX_MAGIC, INDEX_VERSION, digest, len(payload))
    Path(path).write_bytes(header + payload)


def load_index(path: str | Path) -> KnowledgeGraph:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IndexFormatError(f"cannot read index {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise IndexFormatError(f"{path}: truncated header")
    magic, version, digest, length = _HEADER.unpack_from(blob)
    if magic != INDEX_MAGIC:
        raise IndexFormatError(f"{path}: not an index file")
    if version != INDEX_VERSION:
        raise IndexFormatError(
            f"{path}: index format version {version}, this build reads {INDEX_VERSION}"
        )
    payload = blob[_HEADER.size :]
    if len(payload) != length:
        raise IndexFormatError(f"{path}: truncated payload ({len(payload)} of {length} bytes)")
    actual = hashlib.sha256(payload).digest()
    if actual != digest:
        raise IndexFormatError(
            f"{path}: content hash mismatch (stored {digest.hex()[:16]}, got {actual.hex()[:16]})"
        )
    try:
        data = json.loads(zlib.decompress(payload).decode("utf-8"))
        return KnowledgeGraph.from_payload(data)
    except (ValueError, KeyError, TypeError, zlib.error) as exc:
        raise IndexFormatError(f"{path}: corrupt payload ({exc})") from exc


def build_index(
    kg_path: str | Path,
    synonyms_path: str | Path | None = None,
    embeddings_path: str | Path | None = None,
    alpha: float = DEFAULT_ALPHA,
    epsilon: float = DEFAULT_EPSILON,
    has_header: bool = False,
) -> KnowledgeGraph:
    edge_list = load_edge_list(kg_path, has_header=has_header)
    synonyms = load_synonyms(synonyms_path) if synonyms_path else []
    embeddings = load_embedding_table(embeddings_path) if embeddings_path else None
    return KnowledgeGraph.build(edge_list, synonyms, embeddings, alpha, epsilon)
