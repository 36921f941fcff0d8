import json
import math
import random
import statistics

import pytest
from hypothesis import given, settings, strategies as st

from faith.extractor import ClaimTriplet, ExtractionError
from faith.harness import (
    HarnessError,
    apply_rta,
    auc,
    batch_score,
    coefficient_of_variation,
    mfv_benchmark,
    pearson,
    perturb_kg,
    read_jsonl,
    read_reports,
    rta,
    rta_threshold,
    write_batch,
)
from faith.pipeline import Evaluator, rule_extractor
from faith.resolver import resolve_claim

from helpers import graph_from_triples, planted_claims, random_graph

# --- statistics ------------------------------------------------------------


def test_cv_closed_form():
    assert coefficient_of_variation([1.0, 3.0]) == pytest.approx(0.5)
    assert coefficient_of_variation([0.4, 0.4, 0.4]) == 0.0
    assert coefficient_of_variation([-1.0, 1.0]) is None
    with pytest.raises(ValueError):
        coefficient_of_variation([1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3), min_size=2, max_size=20))
def test_cv_matches_oracle(xs):
    mean = sum(xs) / len(xs)
    if abs(mean) < 1e-6:
        return
    sd = math.sqrt(sum((x - mean) ** 2 for x in xs) / len(xs))
    assert coefficient_of_variation(xs) == pytest.approx(sd / abs(mean), rel=1e-9, abs=1e-12)


def test_pearson():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson([1, 1, 1], [1, 2, 3]) is None
    xs, ys = [0.1, 0.5, 0.2, 0.9], [1.0, 0.3, 0.7, 0.2]
    assert pearson(xs, ys) == pytest.approx(statistics.correlation(xs, ys))


def test_auc():
    assert auc([0.9, 0.8], [0.1, 0.2]) == 1.0
    assert auc([0.5], [0.5]) == 0.5
    assert auc([0.1], [0.9]) == 0.0
    assert auc([], [1.0]) is None


# --- reject-to-answer ------------------------------------------------------


def test_rta_threshold_median():
    assert rta_threshold([0, 1, 2, 3], 0.5) == 1.5
    with pytest.raises(ValueError):
        rta_threshold([1, 2], 1.5)


def test_rta_partition_rules():
    reports = [{"id": i, "aggregate_score": s} for i, s in enumerate([0.0, 1.0, 2.0, 3.0, None])]
    t, kept, rejected = rta(reports, 0.5)
    assert t == 1.5
    assert [r["id"] for r in kept] == [2, 3]
    assert [r["id"] for r in rejected] == [0, 1, 4]
    # a score equal to the threshold is kept
    kept, rejected = apply_rta(reports, 1.0)
    assert [r["id"] for r in kept] == [1, 2, 3]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=30), st.floats(0, 1), st.floats(0, 1))
def test_rta_kept_mean_monotone(scores, q1, q2):
    lo, hi = sorted((q1, q2))
    reports = [{"aggregate_score": s} for s in scores]
    _, k_lo, r_lo = rta(reports, lo)
    _, k_hi, r_hi = rta(reports, hi)
    assert len(k_lo) + len(r_lo) == len(scores)
    assert len(k_hi) <= len(k_lo)
    if k_hi:
        mean = lambda rs: sum(r["aggregate_score"] for r in rs) / len(rs)
        assert mean(k_hi) >= mean(k_lo) - 1e-12


# --- perturbation ----------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_perturb_cardinalities(seed):
    g = random_graph(random.Random(seed), 100, 400, 8)
    m, n = len(g.edges), len(g.node_ids)

    ed = perturb_kg(g, "edge_delete", 0.2, seed)
    assert len(ed.edges) == m - math.floor(0.2 * m)
    assert set(ed.edges) <= set(g.edges)

    nd = perturb_kg(g, "node_delete", 0.2, seed)
    assert len(nd.node_ids) == n - math.floor(0.2 * n)
    assert all(e.subject in nd.labels and e.object in nd.labels for e in nd.edges)

    ei = perturb_kg(g, "edge_insert", 0.2, seed)
    assert len(ei.edges) == m + math.floor(0.2 * m)
    assert set(g.edges) <= set(ei.edges)
    assert {e.relation_label for e in ei.edges} == set(g.relation_vocabulary)


def test_perturb_deterministic_and_recomputed():
    g = random_graph(random.Random(2), 60, 200, 5)
    a = perturb_kg(g, "edge_delete", 0.3, seed=7)
    b = perturb_kg(g, "edge_delete", 0.3, seed=7)
    assert a.edges == b.edges and dict(a.pagerank) == dict(b.pagerank)
    assert perturb_kg(g, "edge_delete", 0.3, seed=8).edges != a.edges
    assert abs(sum(a.pagerank.values()) - 1.0) < 1e-6
    assert a.pagerank != g.pagerank


def test_perturb_rejects_bad_arguments():
    g = random_graph(random.Random(2), 10, 20, 2)
    with pytest.raises(ValueError):
        perturb_kg(g, "shuffle")
    with pytest.raises(ValueError):
        perturb_kg(g, "edge_delete", 1.0)
    tiny = graph_from_triples([("A", "r", "B")])
    with pytest.raises(HarnessError):
        perturb_kg(tiny, "node_delete", 0.5)


def test_node_delete_never_adds_verifiable_claims():
    rng = random.Random(9)
    g = random_graph(rng, 80, 250, 4)
    claims = [ClaimTriplet(f"label {a}", "rel00", f"label {b}") for a, b in (rng.sample(list(g.node_ids), 2) for _ in range(60))]
    before = sum(resolve_claim(c, g).verifiable for c in claims)
    after = sum(resolve_claim(c, perturb_kg(g, "node_delete", 0.2, 1)).verifiable for c in claims)
    assert after <= before


# --- batch -----------------------------------------------------------------


def demo_evaluator():
    g = graph_from_triples([
        ("Aspirin", "treats", "Pain"),
        ("Aspirin", "causes", "Bleeding"),
        ("Pain", "isa", "Symptom"),
        ("Fever", "isa", "Symptom"),
    ])
    return Evaluator(g)


ROWS = [
    {"id": "a", "model": "m1", "text": "Aspirin treats pain."},
    {"id": "b", "model": "m1", "text": "Aspirin treats bleeding. Aspirin treats fever."},
    {"id": "c", "model": "m2", "text": "Aspirin causes bleeding."},
]


def test_batch_one_report_per_response_in_order(tmp_path):
    ev = demo_evaluator()
    res = batch_score(ROWS, ev, rule_extractor(ev.graph), jobs=3)
    assert [r.response_id for r in res.reports] == ["a", "b", "c"]
    assert res.reports[0].aggregate_score == pytest.approx(1.0)
    assert [row["model"] for row in res.summary] == ["m1", "m2"]
    write_batch(res, tmp_path)
    assert len(read_reports(tmp_path)) == 3
    assert json.loads((tmp_path / "summary.json").read_text())[0]["n_responses"] == 2
    assert (tmp_path / "summary.tsv").read_text().startswith("model\t")


def test_batch_flags_failures_without_aborting():
    ev = demo_evaluator()
    rules = rule_extractor(ev.graph)

    def flaky(text, rid):
        if rid == "b":
            raise ExtractionError("provider timed out")
        return rules(text, rid)

    rows = ROWS + [{"id": "d", "model": "m2"}]
    res = batch_score(rows, ev, flaky)
    flags = {r.response_id: r.flags for r in res.reports}
    assert flags["b"][0] == "extraction_failed" and flags["d"][0] == "extraction_failed"
    assert flags["a"] == [] and flags["c"] == []
    assert res.reports[1].aggregate_score is None
    assert {row["model"]: row["n_failed"] for row in res.summary} == {"m1": 1, "m2": 1}


def test_batch_baselines():
    ev = demo_evaluator()
    refs = {"a": "Aspirin treats pain.", "c": "Aspirin is a drug."}
    res = batch_score(ROWS, ev, rule_extractor(ev.graph), refs, ["kl", "klrel", "bleu4", "rougel"])
    a = res.reports[0].baselines
    assert a["kl"] == 1.0 and a["klrel"] == pytest.approx(1.0)
    assert a["bleu4"] == pytest.approx(1.0) and a["rougel"] == pytest.approx(1.0)
    assert res.reports[1].baselines["bleu4"] is None
    with pytest.raises(ValueError):
        batch_score(ROWS, ev, rule_extractor(ev.graph), baseline_names=["meteor"])


def test_batch_parallel_equals_serial(tmp_path):
    ev = demo_evaluator()
    write_batch(batch_score(ROWS * 4, ev, rule_extractor(ev.graph), jobs=1), tmp_path / "s")
    write_batch(batch_score(ROWS * 4, ev, rule_extractor(ev.graph), jobs=4), tmp_path / "p")
    for name in ("reports.jsonl", "summary.json", "summary.tsv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_read_jsonl_reports_bad_line(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"a": 1}\n{oops\n')
    with pytest.raises(HarnessError, match=":2:"):
        read_jsonl(p)


# --- labelled benchmark ----------------------------------------------------


def test_mfv_planted_truth_separates():
    g, rows = planted_claims(random.Random(0))
    res = mfv_benchmark(rows, Evaluator(g))
    assert res.auc == 1.0
    assert res.mean_true > res.mean_false


def test_mfv_shuffled_labels_near_chance():
    aucs = []
    for seed in range(20):
        rng = random.Random(seed)
        g, rows = planted_claims(rng)
        labels = [r["label"] for r in rows]
        rng.shuffle(labels)
        rows = [dict(r, label=lab) for r, lab in zip(rows, labels)]
        aucs.append(mfv_benchmark(rows, Evaluator(g)).auc)
    assert abs(statistics.fmean(aucs) - 0.5) <= 0.15


def test_mfv_single_class_and_unverifiable():
    g, rows = planted_claims(random.Random(1))
    res = mfv_benchmark([r for r in rows if r["label"]], Evaluator(g))
    assert res.auc is None
    with pytest.raises(HarnessError):
        mfv_benchmark([{"subject": "zz", "relation": "treats", "object": "yy", "label": True}], Evaluator(g))
    mixed = rows + [{"subject": "zz", "relation": "treats", "object": "yy", "label": True}]
    assert len(mfv_benchmark(mixed, Evaluator(g)).unverifiable) == 1
