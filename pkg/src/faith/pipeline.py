"""End-to-end scoring: text → triplets → resolved claims → verdicts → report."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from faith.config import ScoringConfig
from faith.embeddings import EmbeddingProvider, provider_for
from faith.evidence import score_claim
from faith.extractor import (
    ChatProvider,
    ClaimTriplet,
    ExtractionConfig,
    ExtractionError,
    extract,
    extract_rule_based,
)
from faith.kg_store import KnowledgeGraph
from faith.resolver import ExternalResolver, NullResolver, resolve, resolve_claim
from faith.scorer import ClaimVerdict, ResponseReport, aggregate

Extractor = Callable[[str, str], list[ClaimTriplet]]


def rule_extractor(g: KnowledgeGraph, patterns: dict[str, str] | None = None) -> Extractor:
    """Rule-based extractor whose entity phrases must resolve against ``g``."""

    def run(text: str, response_id: str) -> list[ClaimTriplet]:
        return extract_rule_based(
            text, patterns, lambda m: resolve(m, g).matched, response_id=response_id
        )

    return run


def llm_extractor(provider: ChatProvider, cfg: ExtractionConfig | None = None) -> Extractor:
    cfg = cfg or ExtractionConfig()

    def run(text: str, response_id: str) -> list[ClaimTriplet]:
        return extract(text, cfg, provider, response_id)

    return run


@dataclass
class Evaluator:
    graph: KnowledgeGraph
    config: ScoringConfig = field(default_factory=ScoringConfig)
    embeddings: EmbeddingProvider | None = None
    external: ExternalResolver = field(default_factory=NullResolver)

    def __post_init__(self):
        if self.embeddings is None:
            self.embeddings = provider_for(self.graph)

    def verdict(self, claim: ClaimTriplet) -> ClaimVerdict:
        res = resolve_claim(claim, self.graph, self.external, self.config.external_cutoff)
        resolution = {"subject": res.subject.to_dict(), "object": res.object.to_dict()}
        if not res.verifiable:
            return ClaimVerdict(claim, res.status, resolution=resolution)
        cs = score_claim(
            res.subject.node_id,
            claim.relation,
            res.object.node_id,
            self.graph,
            self.embeddings,
            self.config.hop_cap,
            self.config.path_cap,
        )
        return ClaimVerdict.from_claim_score(claim, cs, resolution)

    def score_claims(
        self, claims: Iterable[ClaimTriplet], response_id: str = "", model: str | None = None
    ) -> ResponseReport:
        verdicts = [self.verdict(c) for c in claims]
        return aggregate(verdicts, response_id, self.config.lowest_k, model)

    def score_text(
        self, text: str, extractor: Extractor, response_id: str = "", model: str | None = None
    ) -> ResponseReport:
        try:
            claims = extractor(text, response_id)
        except ExtractionError as exc:
            report = aggregate([], response_id, self.config.lowest_k, model)
            report.flags = ["extraction_failed", f"error: {exc}"]
            return report
        return self.score_claims(claims, response_id, model)
