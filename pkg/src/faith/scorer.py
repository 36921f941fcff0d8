"""Response-level aggregation of claim verdicts and explainable reports."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from faith.evidence import ClaimScore, EvidencePath, PathScoreBreakdown
from faith.extractor import ClaimTriplet

DEFAULT_LOWEST_K = 5
DEFAULT_TOP_N = 5

NUMERIC_STATUSES = ("scored", "no_path")
EXCLUDED_STATUSES = ("unverifiable", "degenerate", "extraction_failed")


@dataclass
class ClaimVerdict:
    claim: ClaimTriplet
    status: str
    score: float | None = None
    breakdown: PathScoreBreakdown | None = None
    candidates: list[PathScoreBreakdown] = field(default_factory=list)
    resolution: dict | None = None

    def __post_init__(self):
        if self.status == "scored":
            if self.breakdown is None or self.score != self.breakdown.score:
                raise ValueError("a scored verdict needs a breakdown whose score it carries")
        elif self.status == "no_path":
            self.score = 0.0
        else:
            self.score = None

    @classmethod
    def from_claim_score(
        cls, claim: ClaimTriplet, cs: ClaimScore, resolution: dict | None = None
    ) -> "ClaimVerdict":
        if cs.best is None:
            return cls(claim, "no_path", 0.0, resolution=resolution)
        return cls(claim, "scored", cs.best.score, cs.best, list(cs.candidates), resolution)

    @property
    def numeric(self) -> bool:
        return self.status in NUMERIC_STATUSES

    @property
    def evidence_path(self) -> EvidencePath | None:
        return self.breakdown.path if self.breakdown else None

    def rank_key(self) -> tuple:
        return (self.score, self.claim.text)

    def to_dict(self) -> dict:
        return {
            "subject": self.claim.subject,
            "relation": self.claim.relation,
            "object": self.claim.object,
            "span": list(self.claim.span) if self.claim.span else None,
            "status": self.status,
            "score": self.score,
            "path": self.evidence_path.to_dict() if self.evidence_path else None,
            "predicate_mapping": self.breakdown.predicate_mapping if self.breakdown else None,
            "breakdown": self.breakdown.to_dict() if self.breakdown else None,
            "candidates": [
                {"path": c.path.to_dict(), "score": c.score} for c in self.candidates
            ],
            "resolution": self.resolution,
        }


@dataclass
class ResponseReport:
    response_id: str
    aggregate_score: float | None
    verdicts: list[ClaimVerdict]
    n_scored: int
    n_no_path: int
    n_unverifiable: int
    lowest_k: list[ClaimVerdict]
    edge_type_histogram: dict[str, int]
    flags: list[str] = field(default_factory=list)
    model: str | None = None
    baselines: dict[str, float | None] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "response_id": self.response_id,
            "model": self.model,
            "aggregate_score": self.aggregate_score,
            "n_scored": self.n_scored,
            "n_no_path": self.n_no_path,
            "n_unverifiable": self.n_unverifiable,
            "no_path_in_mean": True,
            "flags": list(self.flags),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "lowest_k": [v.to_dict() for v in self.lowest_k],
            "edge_type_histogram": dict(self.edge_type_histogram),
            "baselines": dict(self.baselines),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent, ensure_ascii=False)


def rank_verdicts(verdicts: Iterable[ClaimVerdict]) -> list[ClaimVerdict]:
    """Numeric verdicts ascending by score (ties by claim text), then the rest by text."""
    verdicts = list(verdicts)
    numeric = sorted((v for v in verdicts if v.numeric), key=ClaimVerdict.rank_key)
    other = sorted((v for v in verdicts if not v.numeric), key=lambda v: (v.status, v.claim.text))
    return numeric + other


def lowest_claims(verdicts: Iterable[ClaimVerdict], k: int = DEFAULT_LOWEST_K) -> list[ClaimVerdict]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return sorted((v for v in verdicts if v.numeric), key=ClaimVerdict.rank_key)[:k]


def path_histogram(verdicts: Iterable[ClaimVerdict]) -> Counter:
    counts: Counter = Counter()
    for v in verdicts:
        if v.evidence_path is not None:
            counts.update(v.evidence_path.relations)
    return counts


def top_counts(counts: Counter, top_n: int) -> dict[str, int]:
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return dict(ranked[:top_n])


def aggregate(
    verdicts: Sequence[ClaimVerdict],
    response_id: str = "",
    k: int = DEFAULT_LOWEST_K,
    model: str | None = None,
) -> ResponseReport:
    """Plain mean over scored and no-path verdicts; everything else is excluded."""
    numeric = [v.score for v in verdicts if v.numeric]
    mean = sum(numeric) / len(numeric) if numeric else None
    flags = [] if numeric else ["unverifiable"]
    low = lowest_claims(verdicts, k)
    return ResponseReport(
        response_id=response_id,
        aggregate_score=mean,
        verdicts=rank_verdicts(verdicts),
        n_scored=sum(v.status == "scored" for v in verdicts),
        n_no_path=sum(v.status == "no_path" for v in verdicts),
        n_unverifiable=sum(v.status in ("unverifiable", "degenerate") for v in verdicts),
        lowest_k=low,
        edge_type_histogram=dict(sorted(path_histogram(low).items())),
        flags=flags,
        model=model,
    )


def error_typology(
    reports: Sequence[ResponseReport], k: int = DEFAULT_LOWEST_K, top_n: int = DEFAULT_TOP_N
) -> dict[str, int]:
    """Most frequent relation labels on the evidence paths of each report's lowest-k claims."""
    if not reports:
        raise ValueError("no reports given")
    counts: Counter = Counter()
    for r in reports:
        counts.update(path_histogram(lowest_claims(r.verdicts, k)))
    return top_counts(counts, top_n)


def typology_from_dicts(
    reports: Iterable[dict], k: int = DEFAULT_LOWEST_K, top_n: int = DEFAULT_TOP_N
) -> dict[str, int]:
    """Same as :func:`error_typology` over serialised report dicts."""
    counts: Counter = Counter()
    for r in reports:
        numeric = [v for v in r["verdicts"] if v["status"] in NUMERIC_STATUSES]
        numeric.sort(key=lambda v: (v["score"], f"{v['subject']} | {v['relation']} | {v['object']}"))
        for v in numeric[:k]:
            if v.get("path"):
                counts.update(v["path"]["relations"])
    return top_counts(counts, top_n)


def render_text(report: ResponseReport) -> str:
    agg = "n/a" if report.aggregate_score is None else f"{report.aggregate_score:+.4f}"
    lines = [
        f"response {report.response_id or '-'}: aggregate {agg} "
        f"({report.n_scored} scored, {report.n_no_path} no path, "
        f"{report.n_unverifiable} unverifiable)",
    ]
    if report.flags:
        lines.append(f"flags: {', '.join(report.flags)}")
    for v in report.verdicts:
        score = "   n/a " if v.score is None else f"{v.score:+.4f}"
        line = f"  {score}  {v.status:<13} {v.claim.text}"
        if v.evidence_path is not None:
            p = v.evidence_path
            hops = [p.nodes[0]]
            for rel, rev, node in zip(p.relations, p.reversed, p.nodes[1:]):
                hops.append(f"<-{rel}-" if rev else f"-{rel}->")
                hops.append(node)
            line += "   via " + " ".join(hops)
        lines.append(line)
    return "\n".join(lines)
