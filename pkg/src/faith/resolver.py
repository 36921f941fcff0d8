"""Map mention strings onto graph nodes.

Cascade: exact label, normalised label, alias table, then an optional
external resolver. The first hit wins; a miss is a value, never an error.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import urllib.request
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

from faith.kg_store import KnowledgeGraph
from faith.normalize import normalize

if TYPE_CHECKING:
    from faith.extractor import ClaimTriplet

log = logging.getLogger(__name__)

DEFAULT_EXTERNAL_CUTOFF = 0.9


@dataclass(frozen=True)
class ResolutionResult:
    mention: str
    status: str  # "matched" | "unmatched"
    node_id: str | None = None
    method: str | None = None  # exact | normalized | alias | external
    confidence: float = 0.0

    @property
    def matched(self) -> bool:
        return self.status == "matched"

    def to_dict(self) -> dict:
        return {
            "mention": self.mention,
            "status": self.status,
            "node_id": self.node_id,
            "method": self.method,
            "confidence": self.confidence,
        }


class ExternalResolver(Protocol):
    def candidates(self, mention: str) -> list[tuple[str, float]]: ...


class NullResolver:
    """Always empty; keeps the pipeline fully offline."""

    def candidates(self, mention: str) -> list[tuple[str, float]]:
        return []


class HttpResolver:
    """POST ``{"mention"}`` → ``{"candidates": [{"id", "confidence"}]}``.

    Failures degrade to no candidates. ``max_in_flight`` caps concurrent requests.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0, max_in_flight: int = 8):
        self.endpoint = endpoint
        self.timeout = timeout
        self._gate = threading.BoundedSemaphore(max_in_flight)

    @classmethod
    def from_env(cls, **kwargs) -> "HttpResolver | NullResolver":
        endpoint = os.environ.get("FAITH_RESOLVER_ENDPOINT")
        return cls(endpoint, **kwargs) if endpoint else NullResolver()

    def candidates(self, mention: str) -> list[tuple[str, float]]:
        body = json.dumps({"mention": mention}).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
        )
        try:
            with self._gate, urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
            return [(str(c["id"]), float(c["confidence"])) for c in payload["candidates"]]
        except Exception as exc:  # any provider failure means "no candidates"
            log.warning("external resolver failed for %r: %s", mention, exc)
            return []


def resolve(
    mention: str,
    g: KnowledgeGraph,
    external: ExternalResolver | None = None,
    cutoff: float = DEFAULT_EXTERNAL_CUTOFF,
) -> ResolutionResult:
    nid = g.exact_labels.get(mention)
    if nid is not None:
        return ResolutionResult(mention, "matched", nid, "exact", 1.0)
    key = normalize(mention)
    if key:
        nid = g.normalized_labels.get(key)
        if nid is not None:
            return ResolutionResult(mention, "matched", nid, "normalized", 1.0)
        nid = g.aliases.get(key)
        if nid is not None:
            return ResolutionResult(mention, "matched", nid, "alias", 1.0)
    if external is not None:
        try:
            cands = external.candidates(mention)
        except Exception as exc:
            log.warning("external resolver raised for %r: %s", mention, exc)
            cands = []
        usable = sorted(
            ((c, nid) for nid, c in cands if nid in g and c >= cutoff),
            key=lambda x: (-x[0], x[1]),
        )
        if usable:
            conf, nid = usable[0]
            return ResolutionResult(mention, "matched", nid, "external", min(conf, 1.0))
    return ResolutionResult(mention, "unmatched")


@dataclass(frozen=True)
class ClaimResolution:
    subject: ResolutionResult
    object: ResolutionResult

    @property
    def status(self) -> str:
        """``verifiable``, ``unverifiable`` or ``degenerate``."""
        if not (self.subject.matched and self.object.matched):
            return "unverifiable"
        if self.subject.node_id == self.object.node_id:
            return "degenerate"
        return "verifiable"

    @property
    def verifiable(self) -> bool:
        return self.status == "verifiable"


def resolve_claim(
    t: "ClaimTriplet",
    g: KnowledgeGraph,
    external: ExternalResolver | None = None,
    cutoff: float = DEFAULT_EXTERNAL_CUTOFF,
) -> ClaimResolution:
    return ClaimResolution(
        resolve(t.subject, g, external, cutoff), resolve(t.object, g, external, cutoff)
    )
