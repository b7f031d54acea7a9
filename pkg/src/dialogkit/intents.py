"""Token-overlap intent scoring and risk phrase detection.

Stand-in for an external NLU service, with the same seam: anything that
can score free text against named intents can replace :func:`match_intent`.
Scoring divides shared tokens by phrase tokens so a short canonical
phrase ("yes") still matches inside a longer utterance ("yes please").

The shipped demo risk lexicon is placeholder content and is NOT
clinically validated; see the README warning before any real use.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

__all__ = [
    "IntentDef",
    "RiskLexicon",
    "IntentMatch",
    "normalize",
    "match_intent",
    "detect_risk",
    "DEFAULT_THRESHOLD",
]

DEFAULT_THRESHOLD = 0.75


@dataclass(frozen=True)
class IntentDef:
    name: str
    phrases: tuple[str, ...]

    def __post_init__(self):
        if not self.phrases:
            raise ValueError(f"intent '{self.name}' has no example phrases")


@dataclass(frozen=True)
class IntentMatch:
    intent: str
    score: float


@dataclass
class RiskLexicon:
    """Risk phrases held pre-normalized as token tuples."""

    phrases: list[tuple[str, ...]] = field(default_factory=list)

    @classmethod
    def from_phrases(cls, phrases: list[str]) -> "RiskLexicon":
        normalized = [tuple(normalize(p)) for p in phrases]
        return cls([p for p in normalized if p])


def normalize(text: str) -> list[str]:
    """Case-fold, strip punctuation, split on whitespace, drop empties."""
    folded = text.casefold()
    stripped = "".join(
        c for c in folded if not unicodedata.category(c).startswith("P")
    )
    return [tok for tok in stripped.split() if tok]


def _score(input_tokens: set[str], phrase_tokens: set[str]) -> float:
    if not phrase_tokens:
        return 0.0
    shared = len(input_tokens & phrase_tokens)
    if shared == 0:
        return 0.0
    return shared / len(phrase_tokens)


def match_intent(
    text: str,
    catalog: list[IntentDef],
    threshold: float = DEFAULT_THRESHOLD,
) -> IntentMatch | None:
    """Best intent for ``text``, or None if nothing reaches ``threshold``.

    An intent's score is the max over its phrases of
    shared-tokens / phrase-tokens (at least one token must be shared).
    Ties break toward the intent declared first in the catalog.
    """
    input_tokens = set(normalize(text))
    best: IntentMatch | None = None
    for intent in catalog:
        score = max(
            _score(input_tokens, set(normalize(phrase))) for phrase in intent.phrases
        )
        if score >= threshold and (best is None or score > best.score):
            best = IntentMatch(intent.name, score)
    return best


def detect_risk(text: str, lexicon: RiskLexicon) -> bool:
    """True iff a lexicon phrase occurs as a contiguous token run in ``text``."""
    tokens = normalize(text)
    for phrase in lexicon.phrases:
        k = len(phrase)
        if k == 0 or k > len(tokens):
            continue
        for start in range(len(tokens) - k + 1):
            if tuple(tokens[start : start + k]) == phrase:
                return True
    return False
