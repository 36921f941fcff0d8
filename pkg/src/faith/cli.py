"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from faith.config import ScoringConfig
from faith.extractor import (
    STRATEGIES,
    ExtractionConfig,
    HttpChatProvider,
    MockChatProvider,
    PhaseScriptedProvider,
    ProviderError,
)
from faith.harness import (
    BASELINE_NAMES,
    PERTURB_MODES,
    HarnessError,
    batch_score,
    mfv_benchmark,
    perturb_kg,
    read_jsonl,
    read_reports,
    rta,
    write_batch,
    write_jsonl,
)
from faith.kg_store import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILON,
    GraphLoadError,
    IndexFormatError,
    build_index,
    load_index,
    persist_index,
)
from faith.pipeline import Evaluator, llm_extractor, rule_extractor
from faith.resolver import HttpResolver
from faith.scorer import DEFAULT_LOWEST_K, DEFAULT_TOP_N, render_text, typology_from_dicts

log = logging.getLogger("faith")

EXIT_USAGE, EXIT_DATA, EXIT_PROVIDER = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_scoring_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hop-cap", type=int, default=4, help="maximum evidence path length")
    p.add_argument("--path-cap", type=int, default=64, help="maximum shortest paths scored per claim")
    p.add_argument("--lowest-k", type=int, default=DEFAULT_LOWEST_K, help="claims listed as lowest-scoring")


def _add_extractor_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--extractor",
        choices=("rules", "llm", "mock"),
        default="rules",
        help="claim extractor; llm reads FAITH_LLM_ENDPOINT / FAITH_LLM_API_KEY",
    )
    p.add_argument("--strategy", choices=STRATEGIES, default="full", help="LLM prompting strategy")
    p.add_argument("--rounds", type=int, default=3, help="prompting rounds for multi-round strategies")
    p.add_argument("--model", default="default", help="model name sent to the chat endpoint")
    p.add_argument(
        "--mock-script",
        type=Path,
        help="JSON for --extractor mock: an object of phase -> reply, or a list of replies",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faith", description=__doc__.splitlines()[0],
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("build-index", help="ingest an edge list into an index file", formatter_class=fmt)
    p.add_argument("--kg", type=Path, required=True, help="5-column edge-list TSV")
    p.add_argument("--synonyms", type=Path, help="alias TSV: alias <tab> node_id")
    p.add_argument("--embeddings", type=Path, help="relation embedding TSV: label <tab> v1,v2,...")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="PageRank scaling constant")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="co-occurrence floor")
    p.add_argument("--has-header", action="store_true", help="skip the first line of the edge list")
    p.add_argument("--out", type=Path, required=True, help="index file to write")

    p = sub.add_parser("score", help="score one response text", formatter_class=fmt)
    p.add_argument("--index", type=Path, required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text", type=Path, help="file holding the response text")
    src.add_argument("--stdin", action="store_true", help="read the response text from stdin")
    _add_extractor_flags(p)
    _add_scoring_flags(p)
    p.add_argument("--out", type=Path, help="report JSON to write")

    p = sub.add_parser("batch", help="score a JSONL file of responses", formatter_class=fmt)
    p.add_argument("--index", type=Path, required=True)
    p.add_argument("--responses", type=Path, required=True, help='JSONL rows {"id", "text", "model"?}')
    p.add_argument("--references", type=Path, help='JSONL rows {"id", "reference"}')
    p.add_argument("--baselines", default="", help=f"comma list from {','.join(BASELINE_NAMES)}")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel responses")
    p.add_argument("--seed", type=int, default=0, help="recorded for reproducibility; scoring is deterministic")
    _add_extractor_flags(p)
    _add_scoring_flags(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("mfv", help="benchmark on labelled standalone claims", formatter_class=fmt)
    p.add_argument("--index", type=Path, required=True)
    p.add_argument("--claims", type=Path, required=True,
                   help='JSONL rows {"subject", "relation", "object", "label"}')
    _add_scoring_flags(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("perturb", help="write a randomly perturbed copy of an index", formatter_class=fmt)
    p.add_argument("--index", type=Path, required=True)
    p.add_argument("--mode", choices=PERTURB_MODES, required=True)
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("rta", help="reject-to-answer split of batch reports", formatter_class=fmt)
    p.add_argument("--reports", type=Path, required=True, help="batch output dir or reports.jsonl")
    p.add_argument("--percentile", type=float, required=True, help="quantile in [0, 1]")
    p.add_argument("--out", required=True, help="kept.jsonl,rejected.jsonl")

    p = sub.add_parser("typology", help="relation labels behind the lowest-scoring claims", formatter_class=fmt)
    p.add_argument("--reports", type=Path, required=True, help="batch output dir or reports.jsonl")
    p.add_argument("--k", type=int, default=DEFAULT_LOWEST_K)
    p.add_argument("--top", type=int, default=DEFAULT_TOP_N)
    return parser


def _scoring_config(args) -> ScoringConfig:
    try:
        return ScoringConfig(args.hop_cap, args.path_cap, args.lowest_k)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _extractor(args, graph):
    if args.extractor == "rules":
        return rule_extractor(graph)
    if args.extractor == "mock":
        if not args.mock_script:
            raise UsageError("--extractor mock needs --mock-script")
        try:
            script = json.loads(args.mock_script.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise GraphLoadError(f"cannot read mock script: {exc}") from exc
        provider = PhaseScriptedProvider(script) if isinstance(script, dict) else MockChatProvider(script)
    else:
        provider = HttpChatProvider.from_env(model=args.model)
    try:
        cfg = ExtractionConfig(strategy=args.strategy, rounds=args.rounds)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return llm_extractor(provider, cfg)


def _evaluator(args) -> Evaluator:
    graph = load_index(args.index)
    return Evaluator(graph, _scoring_config(args), external=HttpResolver.from_env())


def cmd_build_index(args) -> int:
    g = build_index(args.kg, args.synonyms, args.embeddings, args.alpha, args.epsilon, args.has_header)
    persist_index(g, args.out)
    s = g.stats()
    print(f"{s.node_count} nodes, {s.edge_count} edges, {s.relation_count} relations -> {args.out}")
    return 0


def cmd_score(args) -> int:
    ev = _evaluator(args)
    if args.stdin:
        text = sys.stdin.read()
    else:
        try:
            text = args.text.read_text(encoding="utf-8")
        except OSError as exc:
            raise GraphLoadError(f"cannot read {args.text}: {exc}") from exc
    report = ev.score_text(text, _extractor(args, ev.graph), response_id=args.text.stem if args.text else "stdin")
    if "extraction_failed" in report.flags and args.extractor == "llm":
        raise ProviderError("; ".join(report.flags[1:]))
    if args.out:
        args.out.write_text(report.to_json() + "\n", encoding="utf-8")
    print(render_text(report))
    return 0


def cmd_batch(args) -> int:
    names = [b for b in args.baselines.split(",") if b]
    unknown = set(names) - set(BASELINE_NAMES)
    if unknown:
        raise UsageError(f"unknown baselines {sorted(unknown)}")
    ev = _evaluator(args)
    rows = read_jsonl(args.responses)
    refs = {}
    if args.references:
        refs = {str(r["id"]): r["reference"] for r in read_jsonl(args.references)}
    result = batch_score(rows, ev, _extractor(args, ev.graph), refs, names, max(args.jobs, 1))
    write_batch(result, args.out)
    for row in result.summary:
        mean = "n/a" if row["mean"] is None else f"{row['mean']:+.4f}"
        print(f"{row['model'] or '-'}\tn={row['n_responses']}\tmean={mean}")
    return 0


def cmd_mfv(args) -> int:
    ev = _evaluator(args)
    result = mfv_benchmark(read_jsonl(args.claims), ev)
    args.out.write_text(json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    auc = "undefined" if result.auc is None else f"{result.auc:.4f}"
    print(f"AUC {auc}; mean true {result.mean_true}; mean false {result.mean_false}")
    return 0


def cmd_perturb(args) -> int:
    g = load_index(args.index)
    try:
        g2 = perturb_kg(g, args.mode, args.fraction, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    persist_index(g2, args.out)
    print(f"{args.mode}: {len(g)} -> {len(g2)} nodes, {len(g.edges)} -> {len(g2.edges)} edges")
    return 0


def cmd_rta(args) -> int:
    outs = args.out.split(",")
    if len(outs) != 2:
        raise UsageError("--out takes two comma-separated paths: kept,rejected")
    reports = read_reports(args.reports)
    try:
        threshold, kept, rejected = rta(reports, args.percentile)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_jsonl(outs[0], kept)
    write_jsonl(outs[1], rejected)
    print(f"threshold {threshold:.6g}: kept {len(kept)}, rejected {len(rejected)}")
    return 0


def cmd_typology(args) -> int:
    hist = typology_from_dicts(read_reports(args.reports), args.k, args.top)
    for label, count in hist.items():
        print(f"{label}\t{count}")
    return 0


COMMANDS = {
    "build-index": cmd_build_index,
    "score": cmd_score,
    "batch": cmd_batch,
    "mfv": cmd_mfv,
    "perturb": cmd_perturb,
    "rta": cmd_rta,
    "typology": cmd_typology,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"faith: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProviderError as exc:
        print(f"faith: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (GraphLoadError, IndexFormatError, HarnessError, OSError, KeyError, ValueError) as exc:
        print(f"faith: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
