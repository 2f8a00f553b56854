"""Word-level tokenization shared by the question-processing pipeline.

Questions are tokenized into words (decimal numbers count as one word);
punctuation is kept in the raw string but never enters the token list, so
span labels index words only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"\d+\.\d+|\w+")


@dataclass(frozen=True)
class Word:
    """A question token with its character offsets in the source string."""

    text: str
    start: int  # inclusive
    end: int  # exclusive


def tokenize(text: str) -> list[Word]:
    return [Word(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def words(text: str) -> list[str]:
    return [w.text for w in tokenize(text)]


def detokenize(tokens: list[str]) -> str:
    """Join word tokens with single spaces (used for correction splices)."""
    return " ".join(tokens)


def stem(token: str) -> str:
    """Crude singularizer for field-name linking: countries -> country."""
    t = token.lower()
    if len(t) > 3 and t.endswith("ies"):
        return t[:-3] + "y"
    if len(t) > 3 and t.endswith("es") and not t.endswith("ses"):
        return t[:-2]
    if len(t) > 2 and t.endswith("s") and not t.endswith("ss"):
        return t[:-1]
    return t


def token_match(a: str, b: str) -> bool:
    """True if two words refer to the same name: equal after stemming, or
    one is a prefix of the other with at least 4 shared characters."""
    a, b = a.lower(), b.lower()
    if a == b or stem(a) == stem(b):
        return True
    shorter, longer = (a, b) if len(a) <= len(b) else (b, a)
    return len(shorter) >= 4 and longer.startswith(shorter)
