"""Claim triplet extraction: LLM multi-phase prompting and a rule-based fallback."""

from __future__ import annotations

import json
import logging
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Protocol, Sequence

from faith.normalize import normalize

log = logging.getLogger(__name__)

STRATEGIES = ("base", "base+critical", "base+multi", "full")


class ProviderError(Exception):
    """The chat provider failed after all retries."""


class ExtractionError(Exception):
    """Extraction for one response could not be completed."""


@dataclass(frozen=True)
class ClaimTriplet:
    subject: str
    relation: str
    object: str
    span: tuple[int, int] | None = None
    source_response_id: str | None = None

    def __post_init__(self):
        if not (self.subject.strip() and self.relation.strip() and self.object.strip()):
            raise ValueError(f"empty triplet field in {self!r}")
        if self.span is not None and not 0 <= self.span[0] <= self.span[1]:
            raise ValueError(f"bad span {self.span}")

    @property
    def key(self) -> tuple[str, str, str]:
        return (normalize(self.subject), normalize(self.relation), normalize(self.object))

    @property
    def text(self) -> str:
        return f"{self.subject} | {self.relation} | {self.object}"


def load_icl_examples() -> list[dict]:
    raw = resources.files("faith").joinpath("data/icl_examples.json").read_text("utf-8")
    return json.loads(raw)


def load_template(name: str) -> str:
    return resources.files("faith").joinpath(f"prompts/{name}.txt").read_text("utf-8")


def render(template: str, **values: str) -> str:
    for key, value in values.items():
        template = template.replace("{{" + key + "}}", value)
    return template


@dataclass
class ExtractionConfig:
    strategy: str = "full"
    rounds: int = 3
    icl_examples: list[dict] = field(default_factory=load_icl_examples)
    temperature: float = 0.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")

    @property
    def multi(self) -> bool:
        return self.strategy in ("base+multi", "full")

    @property
    def critical(self) -> bool:
        return self.strategy in ("base+critical", "full")

    @property
    def effective_rounds(self) -> int:
        return self.rounds if self.multi else 1


# ---------------------------------------------------------------------------
# chat providers
# ---------------------------------------------------------------------------

Message = dict[str, str]


class ChatProvider(Protocol):
    def complete(self, messages: Sequence[Message]) -> str: ...


class MockChatProvider:
    """Scripted provider for tests and offline runs.

    ``replies`` is either a queue consumed in order (an ``Exception`` instance
    in the queue is raised instead of returned) or a callable that maps the
    message list to a reply.
    """

    def __init__(self, replies: Iterable[str | Exception] | Callable[[Sequence[Message]], str]):
        if callable(replies):
            self._fn = replies
            self._queue = None
        else:
            self._fn = None
            self._queue = list(replies)
        self.calls: list[list[Message]] = []

    def complete(self, messages: Sequence[Message]) -> str:
        self.calls.append([dict(m) for m in messages])
        if self._fn is not None:
            return self._fn(messages)
        if not self._queue:
            raise ProviderError("mock provider has no replies left")
        reply = self._queue.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


def phase_of(messages: Sequence[Message]) -> str:
    """Which prompting phase a message list belongs to: entities, relations or critical."""
    head = messages[-1]["content"].lstrip().splitlines()[0] if messages else ""
    return {
        "TASK: ENTITIES": "entities",
        "TASK: RELATIONS": "relations",
        "TASK: CRITICAL REVIEW": "critical",
    }.get(head.strip(), "unknown")


class PhaseScriptedProvider(MockChatProvider):
    """Mock that answers by phase name, so replies do not depend on call order.


    A script without a ``critical`` entry keeps every claim in that pass.
    """

    def __init__(self, script: dict[str, str]):
        def answer(messages: Sequence[Message]) -> str:
            phase = phase_of(messages)
            if phase == "critical" and phase not in script:
                content = messages[-1]["content"]
                return content.split("Claims:\n", 1)[1].split("\n\nText:", 1)[0]
            return script.get(phase, "[]")

        super().__init__(answer)


class HttpChatProvider:
    """POSTs ``{"model", "messages", "temperature"}`` and reads ``{"content"}`` back."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        model: str = "default",
        timeout: float = 60.0,
        attempts: int = 3,
        backoff: float = 1.0,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff

    @classmethod
    def from_env(cls, **kwargs) -> "HttpChatProvider":
        endpoint = os.environ.get("FAITH_LLM_ENDPOINT")
        if not endpoint:
            raise ProviderError("FAITH_LLM_ENDPOINT is not set")
        return cls(endpoint, os.environ.get("FAITH_LLM_API_KEY"), **kwargs)

    def complete(self, messages: Sequence[Message]) -> str:
        body = json.dumps(
            {"model": self.model, "messages": list(messages), "temperature": 0}
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
                content = payload["content"]
                if not isinstance(content, str):
                    raise TypeError("content is not a string")
                return content
            except (urllib.error.URLError, OSError, ValueError, KeyError, TypeError) as exc:
                last = exc
                log.warning("chat request attempt %d/%d failed: %s", attempt + 1, self.attempts, exc)
        raise ProviderError(f"chat provider failed after {self.attempts} attempts: {last}")


# ---------------------------------------------------------------------------
# LLM extraction
# ---------------------------------------------------------------------------

_EMPTY_REPLIES = {"", "[]", "none", "n/a"}
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


def parse_entities(reply: str) -> list[str] | None:
    """Entity names, one per line. ``None`` when the reply is unusable."""
    if reply.strip().lower() in _EMPTY_REPLIES:
        return []
    out = []
    for line in reply.splitlines():
        item = _BULLET.sub("", line).strip().strip('"').strip()
        if item and "|" not in item and len(item) < 200:
            out.append(item)
    return out or None


def parse_triplets(reply: str) -> list[tuple[str, str, str]] | None:
    """``subject | relation | object`` lines; other lines are ignored.

    Returns ``None`` when the reply is neither an explicit empty answer nor
    contains any conforming line.
    """
    if reply.strip().lower() in _EMPTY_REPLIES:
        return []
    out = []
    for line in reply.splitlines():
        parts = [p.strip().strip('"').strip() for p in _BULLET.sub("", line).split("|")]
        if len(parts) == 3 and all(parts):
            out.append((parts[0], parts[1], parts[2]))
    return out or None


def locate_span(text: str, subject: str, obj: str) -> tuple[int, int] | None:
    low = text.lower()
    i, j = low.find(subject.lower()), low.find(obj.lower())
    if i < 0 or j < 0:
        return None
    return (min(i, j), max(i + len(subject), j + len(obj)))


def _format_examples(examples: list[dict]) -> str:
    blocks = []
    for ex in examples:
        lines = "\n".join(" | ".join(c) for c in ex["claims"])
        blocks.append(f"Text: {ex['text']}\nClaims:\n{lines}")
    return "\n\n".join(blocks)


def _format_claims(triplets: Iterable[ClaimTriplet]) -> str:
    return "\n".join(t.text for t in triplets) or "[]"


def dedupe(triplets: Iterable[ClaimTriplet]) -> list[ClaimTriplet]:
    seen = set()
    out = []
    for t in triplets:
        if t.key not in seen:
            seen.add(t.key)
            out.append(t)
    return out


def extract(
    text: str,
    cfg: ExtractionConfig,
    provider: ChatProvider,
    response_id: str | None = None,
) -> list[ClaimTriplet]:
    """Entities first, then relations among them; optional extra rounds and a veto pass.

    Rounds are unioned; the critical pass can only remove triplets. Raises
    :class:`ExtractionError` if the provider fails.
    """
    if not text.strip():
        raise ExtractionError("empty response text")
    system = {
        "role": "system",
        "content": render(load_template("system"), examples=_format_examples(cfg.icl_examples)),
    }
    found: list[ClaimTriplet] = []

    def make(s: str, r: str, o: str) -> ClaimTriplet:
        return ClaimTriplet(s, r, o, locate_span(text, s, o), response_id)

    try:
        for rnd in range(cfg.effective_rounds):
            if rnd == 0:
                prompt = render(load_template("entities"), text=text)
            else:
                prompt = render(load_template("entities_more"), text=text, claims=_format_claims(found))
            history = [system, {"role": "user", "content": prompt}]
            reply = provider.complete(history)
            entities = parse_entities(reply)
            if entities is None:
                log.warning("round %d: unparseable entity reply discarded", rnd + 1)
                continue
            if not entities:
                continue
            history.append({"role": "assistant", "content": reply})
            history.append(
                {
                    "role": "user",
                    "content": render(
                        load_template("relations"), text=text, entities="\n".join(entities)
                    ),
                }
            )
            triples = parse_triplets(provider.complete(history))
            if triples is None:
                log.warning("round %d: unparseable relation reply discarded", rnd + 1)
                continue
            found = dedupe(found + [make(*t) for t in triples])

        if cfg.critical and found:
            prompt = render(load_template("critical"), text=text, claims=_format_claims(found))
            kept = parse_triplets(provider.complete([system, {"role": "user", "content": prompt}]))
            if kept is None:
                log.warning("critical review reply unparseable; keeping all claims")
            else:
                keep = {ClaimTriplet(*t).key for t in kept}
                found = [t for t in found if t.key in keep]
    except ProviderError as exc:
        raise ExtractionError(str(exc)) from exc
    return found


# ---------------------------------------------------------------------------
# rule-based extraction
# ---------------------------------------------------------------------------

DEFAULT_PATTERNS: dict[str, str] = {
    "is a symptom of": "has_symptom",
    "is a common symptom of": "has_symptom",
    "is a sign of": "has_symptom",
    "is used to treat": "treats",
    "is indicated for": "indication",
    "is contraindicated in": "contraindication",
    "is a risk factor for": "risk_factor_for",
    "is associated with": "associated_with",
    "is a type of": "isa",
    "is a complication of": "complication_of",
    "can cause": "causes",
    "may cause": "causes",
    "leads to": "causes",
    "causes": "causes",
    "treats": "treats",
    "prevents": "prevents",
}

_SENTENCE = re.compile(r"[^.!?;]+")
_DETERMINER = re.compile(r"^(?:a|an|the|some|many)\s+", re.IGNORECASE)


def _phrase_candidates(words: list[tuple[int, int]], text: str, from_right: bool):
    """Sub-phrases adjacent to the connective, longest first."""
    n = len(words)
    for size in range(n, 0, -1):
        chunk = words[n - size :] if from_right else words[:size]
        start, end = chunk[0][0], chunk[-1][1]
        yield start, end, text[start:end]


def _clean(phrase: str) -> str:
    phrase = phrase.strip().strip(",:").strip()
    while True:
        stripped = _DETERMINER.sub("", phrase)
        if stripped == phrase:
            return phrase
        phrase = stripped


def extract_rule_based(
    text: str,
    patterns: dict[str, str] | None = None,
    is_entity: Callable[[str], bool] | None = None,
    response_id: str | None = None,
) -> list[ClaimTriplet]:
    """Scan each sentence for ``<entity> <connective> <entity>``.

    When ``is_entity`` is given, each side is shrunk towards the connective
    to the longest phrase that validates. Sides with no valid sub-phrase are
    kept whole so the claim can still be reported as unverifiable.
    """
    patterns = DEFAULT_PATTERNS if patterns is None else patterns
    if not text.strip() or not patterns:
        return []
    connectives = sorted(patterns, key=lambda c: (-len(c), c))
    conn_re = re.compile(
        r"\b(" + "|".join(re.escape(c) for c in connectives) + r")\b", re.IGNORECASE
    )
    lookup = {k.lower(): v for k, v in patterns.items()}
    out: list[ClaimTriplet] = []
    for sent in _SENTENCE.finditer(text):
        s0 = sent.start()
        sentence = sent.group()
        for m in conn_re.finditer(sentence):
            relation = lookup[m.group(1).lower()]
            left = [(w.start() + s0, w.end() + s0) for w in re.finditer(r"\S+", sentence[: m.start()])]
            right = [
                (w.start() + s0 + m.end(), w.end() + s0 + m.end())
                for w in re.finditer(r"\S+", sentence[m.end() :])
            ]
            # stop each side at clause boundaries
            left = _trim_clause(left, text, from_right=True)
            right = _trim_clause(right, text, from_right=False)
            if not left or not right:
                continue
            subj = _pick(left, text, True, is_entity)
            obj = _pick(right, text, False, is_entity)
            if subj is None or obj is None:
                continue
            out.append(
                ClaimTriplet(
                    subj[2].lower(), relation, obj[2].lower(), (subj[0], obj[1]), response_id
                )
            )
    return dedupe(out)


def _trim_clause(words: list[tuple[int, int]], text: str, from_right: bool):
    boundary = {",", "and", "but", "which", "that", "while", "whereas"}
    seq = list(reversed(words)) if from_right else list(words)
    kept = []
    for start, end in seq:
        token = text[start:end]
        if kept and (token.lower().strip(",") in boundary or (from_right and token.endswith(","))):
            break
        kept.append((start, end))
        if not from_right and token.endswith(","):
            break
    return list(reversed(kept)) if from_right else kept


def _pick(words, text, from_right, is_entity):
    """Longest sub-phrase that validates; the whole side if none does."""
    whole = None
    for start, end, phrase in _phrase_candidates(words, text, from_right):
        cleaned = _clean(phrase.rstrip(",.;:"))
        if not cleaned:
            continue
        offset = phrase.find(cleaned)
        found = (start + offset, start + offset + len(cleaned), cleaned)
        if whole is None:
            whole = found
        if is_entity is None or is_entity(cleaned):
            return found
    return whole
