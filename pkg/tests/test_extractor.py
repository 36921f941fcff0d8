import pytest
from hypothesis import given, settings, strategies as st

from faith.extractor import (
    ClaimTriplet,
    ExtractionConfig,
    ExtractionError,
    HttpChatProvider,
    MockChatProvider,
    PhaseScriptedProvider,
    ProviderError,
    extract,
    extract_rule_based,
    parse_entities,
    parse_triplets,
    phase_of,
)

TEXT = "Aspirin treats pain. Aspirin causes bleeding. Bleeding is a sign of ulcers."


def rounds_provider(entity_replies, relation_replies, critical=None):
    """Answers round ``i`` with the ``i``-th reply of each list."""
    state = {"ent": 0, "rel": 0}

    def answer(messages):
        phase = phase_of(messages)
        if phase == "entities":
            state["ent"] += 1
            return entity_replies[min(state["ent"], len(entity_replies)) - 1]
        if phase == "relations":
            state["rel"] += 1
            return relation_replies[min(state["rel"], len(relation_replies)) - 1]
        return critical

    return MockChatProvider(answer)


def test_config_rejects_unknown_strategy():
    with pytest.raises(ValueError):
        ExtractionConfig(strategy="fancy")
    with pytest.raises(ValueError):
        ExtractionConfig(rounds=0)


def test_base_is_one_round_two_calls():
    p = PhaseScriptedProvider({"entities": "Aspirin\npain", "relations": "Aspirin | treats | pain"})
    out = extract(TEXT, ExtractionConfig("base", rounds=5), p)
    assert [t.key for t in out] == [("aspirin", "treats", "pain")]
    assert len(p.calls) == 2


def test_relation_phase_sees_entity_history():
    p = PhaseScriptedProvider({"entities": "Aspirin\npain", "relations": "Aspirin | treats | pain"})
    extract(TEXT, ExtractionConfig("base"), p)
    second = p.calls[1]
    assert [m["role"] for m in second] == ["system", "user", "assistant", "user"]
    assert second[2]["content"] == "Aspirin\npain"


def test_fixed_reply_dedup_independent_of_rounds():
    script = {"entities": "Aspirin\npain", "relations": "Aspirin | treats | pain\naspirin | treats | Pain"}
    outs = [extract(TEXT, ExtractionConfig("base+multi", rounds=r), PhaseScriptedProvider(script)) for r in (1, 2, 5)]
    assert all(len(o) == 1 for o in outs)


def test_multi_round_union():
    p = rounds_provider(
        ["Aspirin\npain", "Aspirin\nbleeding", "bleeding\nulcers"],
        ["Aspirin | treats | pain", "Aspirin | causes | bleeding", "Bleeding | has_symptom | ulcers"],
    )
    out = extract(TEXT, ExtractionConfig("base+multi", rounds=3), p)
    assert [t.relation for t in out] == ["treats", "causes", "has_symptom"]
    # later rounds are shown the claims found so far
    later = [c[-1]["content"] for c in p.calls if phase_of(c) == "entities"][2]
    assert "Aspirin | causes | bleeding" in later


def test_critical_pass_only_removes():
    p = rounds_provider(
        ["Aspirin\npain\nbleeding"],
        ["Aspirin | treats | pain\nAspirin | causes | bleeding"],
        critical="Aspirin | treats | pain\nAspirin | cures | cancer",
    )
    out = extract(TEXT, ExtractionConfig("base+critical"), p)
    assert [t.key for t in out] == [("aspirin", "treats", "pain")]


def test_full_strategy_runs_all_rounds_and_critical():
    p = PhaseScriptedProvider({"entities": "Aspirin\npain", "relations": "Aspirin | treats | pain"})
    extract(TEXT, ExtractionConfig("full", rounds=3), p)
    phases = [phase_of(c) for c in p.calls]
    assert phases == ["entities", "relations"] * 3 + ["critical"]


def test_empty_replies_mean_no_claims():
    for empty in ("[]", "none", ""):
        p = PhaseScriptedProvider({"entities": "Aspirin", "relations": empty})
        assert extract(TEXT, ExtractionConfig("base"), p) == []


def test_unparseable_round_is_discarded():
    p = rounds_provider(["Aspirin\npain", "Aspirin\npain"], ["free prose, no claims here", "Aspirin | treats | pain"])
    out = extract(TEXT, ExtractionConfig("base+multi", rounds=2), p)
    assert len(out) == 1


def test_provider_failure_becomes_extraction_error():
    p = MockChatProvider([ProviderError("boom")])
    with pytest.raises(ExtractionError):
        extract(TEXT, ExtractionConfig("base"), p)


def test_empty_text_rejected():
    with pytest.raises(ExtractionError):
        extract("   ", ExtractionConfig(), PhaseScriptedProvider({}))


def test_spans_and_provenance():
    p = PhaseScriptedProvider({"entities": "Aspirin\npain", "relations": "Aspirin | treats | pain"})
    (t,) = extract(TEXT, ExtractionConfig("base"), p, response_id="r9")
    assert TEXT[t.span[0] : t.span[1]] == "Aspirin treats pain"
    assert t.source_response_id == "r9"


def test_parsers():
    assert parse_entities("- Aspirin\n2. pain\n") == ["Aspirin", "pain"]
    assert parse_entities("[]") == []
    assert parse_triplets("1) a | r | b\nnoise\nc | r2 | d") == [("a", "r", "b"), ("c", "r2", "d")]
    assert parse_triplets("no pipes at all") is None
    assert parse_triplets("a | | b") is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcde"), st.sampled_from(["treats", "causes"]), st.sampled_from("vwxyz")),
                min_size=1, max_size=8),
       st.integers(1, 4))
def test_base_subset_of_multi(claims, rounds):
    reply = "\n".join(" | ".join(c) for c in claims)
    script = {"entities": "a\nb", "relations": reply}
    base = {t.key for t in extract("abcde vwxyz", ExtractionConfig("base"), PhaseScriptedProvider(script))}
    multi = {t.key for t in extract("abcde vwxyz", ExtractionConfig("base+multi", rounds=rounds), PhaseScriptedProvider(script))}
    assert base <= multi


# --- HTTP provider ---------------------------------------------------------


def test_http_provider_wire_contract(json_server):
    url, seen = json_server(lambda body: (200, {"content": "Aspirin\npain"}))
    prov = HttpChatProvider(url, api_key="k3y", model="m1")
    assert prov.complete([{"role": "user", "content": "hi"}]) == "Aspirin\npain"
    body = seen[0]["body"]
    assert body == {"model": "m1", "messages": [{"role": "user", "content": "hi"}], "temperature": 0}
    assert seen[0]["headers"]["Authorization"] == "Bearer k3y"


def test_http_provider_retries_then_fails(json_server):
    url, seen = json_server(lambda body: (500, {"error": "overloaded"}))
    prov = HttpChatProvider(url, backoff=0.0)
    with pytest.raises(ProviderError):
        prov.complete([{"role": "user", "content": "hi"}])
    assert len(seen) == 3
    with pytest.raises(ExtractionError):
        extract(TEXT, ExtractionConfig("base"), prov)


def test_http_provider_recovers_after_transient_error(json_server):
    replies = iter([(503, {}), (200, {"content": "[]"})])
    url, seen = json_server(lambda body: next(replies))
    assert HttpChatProvider(url, backoff=0.0).complete([{"role": "user", "content": "x"}]) == "[]"
    assert len(seen) == 2


def test_http_provider_from_env(monkeypatch):
    monkeypatch.delenv("FAITH_LLM_ENDPOINT", raising=False)
    with pytest.raises(ProviderError):
        HttpChatProvider.from_env()


# --- rule-based ------------------------------------------------------------


def test_rule_based_symptom_sentence():
    (t,) = extract_rule_based("Dry cough is a symptom of bronchiectasis.")
    assert (t.subject, t.relation, t.object) == ("dry cough", "has_symptom", "bronchiectasis")
    assert t.span == (0, 40)


def test_rule_based_multiple_sentences():
    out = extract_rule_based("Aspirin treats fever. Metformin treats type 2 diabetes. The sky is blue.")
    assert [t.key for t in out] == [("aspirin", "treats", "fever"), ("metformin", "treats", "type 2 diabetes")]


def test_rule_based_uses_entity_validator():
    known = {"aspirin", "headache"}
    out = extract_rule_based("In adults aspirin treats headache quickly.", is_entity=lambda s: s in known)
    assert [t.key for t in out] == [("aspirin", "treats", "headache")]


def test_rule_based_custom_patterns():
    out = extract_rule_based("Ibuprofen relieves pain.", patterns={"relieves": "treats"})
    assert out[0].key == ("ibuprofen", "treats", "pain")


def test_triplet_key_normalizes():
    assert ClaimTriplet(" Aspirin ", "Treats", "PAIN.").key == ClaimTriplet("aspirin", "treats", "pain").key
