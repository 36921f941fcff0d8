"""String normalisation shared by entity resolution and claim deduplication."""

import re
import unicodedata

_WS = re.compile(r"\s+")
_TRAILING_PUNCT = re.compile(r"[\s\.,;:!?\"'\)\]\}]+$")


def normalize(text: str) -> str:
    """NFKC, case-fold, trim, collapse whitespace, strip trailing punctuation.

    Iterates to a fixed point so the result is idempotent even when case
    folding produces characters that NFKC rewrites again.
    """
    prev = None
    s = text
    while s != prev:
        prev = s
        s = unicodedata.normalize("NFKC", s).casefold()
        s = _WS.sub(" ", s).strip()
        s = _TRAILING_PUNCT.sub("", s)
    return s
