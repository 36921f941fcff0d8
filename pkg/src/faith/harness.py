"""Batch evaluation, summary statistics, reject-to-answer thresholding,
KG perturbation and labelled-claim benchmarking."""

from __future__ import annotations

import json
import logging
import math
import random
import statistics
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from faith import baselines
from faith.extractor import ClaimTriplet
from faith.kg_store import EdgeRecord, KnowledgeGraph
from faith.pipeline import Evaluator, Extractor
from faith.resolver import resolve_claim
from faith.scorer import ResponseReport

log = logging.getLogger(__name__)

BASELINE_NAMES = ("kl", "klrel", "bleu4", "rougel")
PERTURB_MODES = ("edge_delete", "node_delete", "edge_insert")


class HarnessError(Exception):
    pass


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise HarnessError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    return rows


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def coefficient_of_variation(scores: Sequence[float]) -> float | None:
    """Population s.d. over |mean|; ``None`` when the mean is zero."""
    if len(scores) < 2:
        raise ValueError("need at least two scores")
    mean = statistics.fmean(scores)
    if mean == 0:
        return None
    return statistics.pstdev(scores) / abs(mean)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Sample correlation; ``None`` when either series is constant."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length series of length >= 2")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0:
        return None
    return max(-1.0, min(1.0, float(dx @ dy) / denom))


def auc(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> float | None:
    """Probability a positive outranks a negative (ties count half)."""
    if not scores_pos or not scores_neg:
        return None
    pos = np.asarray(scores_pos, dtype=np.float64)
    neg = np.asarray(scores_neg, dtype=np.float64)
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * ties) / (len(pos) * len(neg)))


# ---------------------------------------------------------------------------
# reject-to-answer
# ---------------------------------------------------------------------------


def rta_threshold(scores: Sequence[float], q: float) -> float:
    """Empirical q-quantile with linear interpolation."""
    if not scores:
        raise ValueError("empty score distribution")
    if not 0.0 <= q <= 1.0:
        raise ValueError("percentile must lie in [0, 1]")
    return float(np.quantile(np.asarray(scores, dtype=np.float64), q, method="linear"))


def _aggregate_of(r) -> float | None:
    return r["aggregate_score"] if isinstance(r, dict) else r.aggregate_score


def apply_rta(reports: Sequence, threshold: float) -> tuple[list, list]:
    """Split into (kept, rejected); aggregates below threshold and nulls are rejected."""
    kept, rejected = [], []
    for r in reports:
        a = _aggregate_of(r)
        (kept if a is not None and a >= threshold else rejected).append(r)
    return kept, rejected


def rta(reports: Sequence, q: float) -> tuple[float, list, list]:
    scores = [a for a in map(_aggregate_of, reports) if a is not None]
    t = rta_threshold(scores, q)
    kept, rejected = apply_rta(reports, t)
    return t, kept, rejected


# ---------------------------------------------------------------------------
# perturbation
# ---------------------------------------------------------------------------


def perturb_kg(
    g: KnowledgeGraph, mode: str, fraction: float = 0.2, seed: int = 0
) -> KnowledgeGraph:
    """Random edge deletion, node deletion (with incident edges) or noisy edge insertion.

    Derived statistics are recomputed on the result. Inserted edges join
    two distinct random nodes with a random existing relation label.
    """
    if mode not in PERTURB_MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {PERTURB_MODES}")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    rng = random.Random(seed)
    labels = dict(g.labels)
    edges = list(g.edges)

    if mode == "edge_delete":
        drop = set(rng.sample(range(len(edges)), math.floor(fraction * len(edges))))
        edges = [e for i, e in enumerate(edges) if i not in drop]
    elif mode == "node_delete":
        gone = set(rng.sample(list(g.node_ids), math.floor(fraction * len(g.node_ids))))
        labels = {n: lbl for n, lbl in labels.items() if n not in gone}
        edges = [e for e in edges if e.subject not in gone and e.object not in gone]
    else:
        n_new = math.floor(fraction * len(edges))
        nodes, rels = list(g.node_ids), list(g.relation_vocabulary)
        if n_new and (len(nodes) < 2 or not rels):
            raise HarnessError("cannot insert edges without two nodes and a relation label")
        present = set(edges)
        capacity = len(nodes) * (len(nodes) - 1) * len(rels) - len(
            [e for e in present if not e.is_self_loop]
        )
        if n_new > capacity:
            raise HarnessError("graph too dense to insert that many distinct edges")
        added = 0
        while added < n_new:
            s, o = rng.sample(nodes, 2)
            e = EdgeRecord(s, rng.choice(rels), o)
            if e in present:
                continue
            present.add(e)
            edges.append(e)
            added += 1

    if not labels or not edges:
        raise HarnessError(f"{mode} at fraction {fraction} leaves an empty graph")
    return g.with_edges(labels, edges)


# ---------------------------------------------------------------------------
# batch scoring
# ---------------------------------------------------------------------------


@dataclass
class BatchResult:
    reports: list[ResponseReport]
    summary: list[dict] = field(default_factory=list)


def _claim_baselines(
    ev: Evaluator, claims: list[ClaimTriplet], names: Sequence[str]
) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    g = ev.graph
    resolved = []
    for c in claims:
        res = resolve_claim(c, g, ev.external, ev.config.external_cutoff)
        if res.verifiable:
            resolved.append((res.subject.node_id, c.relation, res.object.node_id))
    hop, cap = ev.config.hop_cap, ev.config.path_cap
    if "kl" in names:
        vals = [baselines.kl_score(s, o, g, hop, cap) for s, _, o in resolved]
        out["kl"] = statistics.fmean(vals) if vals else None
    if "klrel" in names:
        vals = [baselines.kl_rel_score(s, r, o, g, ev.embeddings, hop, cap) for s, r, o in resolved]
        out["klrel"] = statistics.fmean(vals) if vals else None
    return out


def batch_score(
    responses: Sequence[dict],
    evaluator: Evaluator,
    extractor: Extractor,
    references: dict[str, str] | None = None,
    baseline_names: Sequence[str] = (),
    jobs: int = 1,
) -> BatchResult:
    """One report per response, in input order. Per-response failures are flagged, not raised.

    Each response row needs ``id`` and ``text``; ``model`` is an optional tag
    used to group the summary.
    """
    unknown = set(baseline_names) - set(BASELINE_NAMES)
    if unknown:
        raise ValueError(f"unknown baselines: {sorted(unknown)}")
    references = references or {}

    def one(row: dict) -> ResponseReport:
        rid = str(row.get("id", ""))
        model = row.get("model")
        text = row.get("text")
        if not isinstance(text, str) or not text.strip():
            report = evaluator.score_claims([], rid, model)
            report.flags = ["extraction_failed", "error: missing text"]
            return report
        claims_holder: list[ClaimTriplet] = []

        def capture(t: str, r: str) -> list[ClaimTriplet]:
            claims_holder.extend(extractor(t, r))
            return claims_holder

        report = evaluator.score_text(text, capture, rid, model)
        bl: dict[str, float | None] = {}
        if {"kl", "klrel"} & set(baseline_names):
            bl.update(_claim_baselines(evaluator, claims_holder, baseline_names))
        ref = references.get(rid)
        if "bleu4" in baseline_names:
            bl["bleu4"] = baselines.bleu4(text, ref) if ref else None
        if "rougel" in baseline_names:
            bl["rougel"] = baselines.rouge_l(text, ref) if ref else None
        report.baselines = bl
        return report

    if jobs > 1 and len(responses) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(one, responses))
    else:
        reports = [one(r) for r in responses]
    return BatchResult(reports, summarize(reports, baseline_names))


def summarize(reports: Sequence[ResponseReport], baseline_names: Sequence[str] = ()) -> list[dict]:
    """Mean and s.d. of aggregate scores per model tag (untagged rows under ``""``)."""
    groups: dict[str, list[ResponseReport]] = defaultdict(list)
    for r in reports:
        groups[r.model or ""].append(r)
    rows = []
    for model in sorted(groups):
        rs = groups[model]
        vals = [r.aggregate_score for r in rs if r.aggregate_score is not None]
        row = {
            "model": model,
            "n_responses": len(rs),
            "n_with_score": len(vals),
            "n_failed": sum("extraction_failed" in r.flags for r in rs),
            "mean": statistics.fmean(vals) if vals else None,
            "sd": statistics.stdev(vals) if len(vals) > 1 else None,
        }
        for name in baseline_names:
            bvals = [r.baselines.get(name) for r in rs]
            bvals = [b for b in bvals if b is not None]
            row[f"{name}_mean"] = statistics.fmean(bvals) if bvals else None
        rows.append(row)
    return rows


def write_batch(result: BatchResult, out_dir: str | Path) -> None:
    """reports.jsonl, summary.json and summary.tsv; byte-identical for identical input."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "reports.jsonl", (r.to_dict() for r in result.reports))
    (out / "summary.json").write_text(
        json.dumps(result.summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    cols = list(result.summary[0]) if result.summary else ["model", "n_responses", "mean", "sd"]
    lines = ["\t".join(cols)]
    for row in result.summary:
        lines.append("\t".join("" if row[c] is None else str(row[c]) for c in cols))
    (out / "summary.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_reports(path: str | Path) -> list[dict]:
    p = Path(path)
    return read_jsonl(p / "reports.jsonl" if p.is_dir() else p)


# ---------------------------------------------------------------------------
# labelled-claim benchmark
# ---------------------------------------------------------------------------


@dataclass
class MFVResult:
    auc: float | None
    mean_true: float | None
    mean_false: float | None
    scores: list[dict]
    unverifiable: list[dict]

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "mean_true": self.mean_true,
            "mean_false": self.mean_false,
            "n_scored": len(self.scores),
            "n_unverifiable": len(self.unverifiable),
            "scores": self.scores,
            "unverifiable": self.unverifiable,
        }


def mfv_benchmark(rows: Sequence[dict], evaluator: Evaluator) -> MFVResult:
    """Score standalone labelled claims; AUC over the verifiable ones."""
    scored, unverifiable = [], []
    for i, row in enumerate(rows):
        claim = ClaimTriplet(row["subject"], row["relation"], row["object"], None, str(row.get("id", i)))
        label = bool(row["label"])
        v = evaluator.verdict(claim)
        entry = {
            "id": claim.source_response_id,
            "subject": claim.subject,
            "relation": claim.relation,
            "object": claim.object,
            "label": label,
            "status": v.status,
            "score": v.score,
        }
        (scored if v.numeric else unverifiable).append(entry)
    if not scored:
        raise HarnessError("every claim is unverifiable against this graph")
    pos = [e["score"] for e in scored if e["label"]]
    neg = [e["score"] for e in scored if not e["label"]]
    return MFVResult(
        auc=auc(pos, neg),
        mean_true=statistics.fmean(pos) if pos else None,
        mean_false=statistics.fmean(neg) if neg else None,
        scores=scored,
        unverifiable=unverifiable,
    )
