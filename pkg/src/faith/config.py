"""Run-time configuration."""

from __future__ import annotations

from dataclasses import dataclass

from faith.evidence import DEFAULT_HOP_CAP, DEFAULT_PATH_CAP
from faith.resolver import DEFAULT_EXTERNAL_CUTOFF
from faith.scorer import DEFAULT_LOWEST_K


@dataclass(frozen=True)
class ScoringConfig:
    hop_cap: int = DEFAULT_HOP_CAP
    path_cap: int = DEFAULT_PATH_CAP
    lowest_k: int = DEFAULT_LOWEST_K
    external_cutoff: float = DEFAULT_EXTERNAL_CUTOFF

    def __post_init__(self):
        if self.hop_cap < 1 or self.path_cap < 1 or self.lowest_k < 1:
            raise ValueError("hop_cap, path_cap and lowest_k must be >= 1")
        if not 0.0 <= self.external_cutoff <= 1.0:
            raise ValueError("external_cutoff must lie in [0, 1]")
