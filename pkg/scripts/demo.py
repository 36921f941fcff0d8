"""Score the bundled demo response end to end and print the explainable report."""

from __future__ import annotations

import argparse
from pathlib import Path

from faith.kg_store import build_index
from faith.pipeline import Evaluator, rule_extractor
from faith.scorer import render_text

FIX = Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--text", type=Path, default=FIX / "demo_response.txt")
    ap.add_argument("--json", action="store_true", help="print the full JSON report instead")
    args = ap.parse_args()

    g = build_index(FIX / "demo_kg.tsv", FIX / "demo_synonyms.tsv", FIX / "demo_embeddings.tsv")
    ev = Evaluator(g)
    report = ev.score_text(args.text.read_text(encoding="utf-8"), rule_extractor(g), args.text.stem)
    print(report.to_json() if args.json else render_text(report))


if __name__ == "__main__":
    main()
