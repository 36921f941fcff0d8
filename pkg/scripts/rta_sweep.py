"""Reject-to-answer sweep: accuracy of kept responses as the percentile rises.

Responses are bags of planted claims; a response is correct when most of
its claims are true.

    python3 scripts/rta_sweep.py --responses 500
"""

from __future__ import annotations

import argparse
import random
import statistics
from dataclasses import dataclass

from faith.extractor import ClaimTriplet
from faith.harness import rta
from faith.pipeline import Evaluator

from synthetic import PlantedConfig, planted_graph


@dataclass(frozen=True)
class SweepConfig:
    responses: int = 500
    claims_per_response: int = 5
    seed: int = 1
    graph: PlantedConfig = PlantedConfig()


def run(cfg: SweepConfig) -> list[tuple[int, float, float, int]]:
    g, rows = planted_graph(cfg.graph)
    ev = Evaluator(g)
    pos = [r for r in rows if r["label"]]
    neg = [r for r in rows if not r["label"]]
    rng = random.Random(cfg.seed)
    k = cfg.claims_per_response
    reports, correct = [], {}
    for i in range(cfg.responses):
        n_true = rng.randint(0, k)
        picked = rng.sample(pos, n_true) + rng.sample(neg, k - n_true)
        claims = [ClaimTriplet(r["subject"], r["relation"], r["object"]) for r in picked]
        rep = ev.score_claims(claims, f"resp{i}")
        reports.append(rep)
        correct[rep.response_id] = 2 * n_true > k
    table = []
    for q in range(0, 55, 5):
        t, kept, _ = rta(reports, q / 100)
        acc = statistics.fmean(correct[r.response_id] for r in kept)
        table.append((q, t, acc, len(kept)))
    return table


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--responses", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    print("q%\tthreshold\tkept_acc\tn_kept")
    for q, t, acc, n in run(SweepConfig(args.responses, seed=args.seed)):
        print(f"{q}\t{t:+.4f}\t{acc:.4f}\t{n}")


if __name__ == "__main__":
    main()
