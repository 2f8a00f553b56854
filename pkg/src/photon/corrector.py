"""Database-aware replacement proposals for a detected confusion span.

The span is collapsed to a single [MASK] slot and every table/column display
name from the current schema is scored against the masked context. The
reference scorer is embedding-similarity based (cosine against the mean
context vector with a light length penalty); the interface admits a real
masked-LM scorer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .confusion import SpanLabel
from .encoding import HashingEmbedder, MARK_MASK
from .schema import DatabaseSchema
from .textutil import words


class CorrectionError(Exception):
    pass


class InvalidSpan(CorrectionError):
    pass


class NoMask(CorrectionError):
    pass


class EmptyCandidates(CorrectionError):
    pass


@dataclass(frozen=True)
class CorrectionCandidate:
    surface: str
    score: float
    source: str  # "table" | "column"


def candidate_list(schema: DatabaseSchema) -> list[CorrectionCandidate]:
    """Every table and field display name, deduplicated, in schema order."""
    out: list[CorrectionCandidate] = []
    seen: set[str] = set()
    for t in schema.tables:
        if t.display_name not in seen:
            seen.add(t.display_name)
            out.append(CorrectionCandidate(t.display_name, 0.0, "table"))
    for f in schema.fields:
        if f.display_name not in seen:
            seen.add(f.display_name)
            out.append(CorrectionCandidate(f.display_name, 0.0, "column"))
    return out


def mask_span(question_tokens: Sequence[str], span: SpanLabel) -> list[str]:
    """Replace the span's tokens (1-based positions) with one [MASK] slot."""
    if span.start < 1 or span.end > len(question_tokens):
        raise InvalidSpan(f"span {span} outside question of "
                          f"{len(question_tokens)} tokens")
    toks = list(question_tokens)
    return toks[:span.start - 1] + [MARK_MASK] + toks[span.end:]


MaskFillScorer = Callable[[list[str], str], float]


class EmbeddingSimilarityScorer:
    """Reference mask-fill scorer: cosine similarity between the candidate's
    mean token vector and the mean context vector, minus a small per-token
    length penalty."""

    def __init__(self, embedder: Optional[HashingEmbedder] = None,
                 length_penalty: float = 0.01):
        self.embedder = embedder or HashingEmbedder(dim=256, seed=7)
        self.length_penalty = length_penalty

    def __call__(self, masked_tokens: list[str], candidate: str) -> float:
        context = [t for t in masked_tokens if t != MARK_MASK]
        cand_tokens = words(candidate)
        if not cand_tokens:
            return -1.0
        cand = np.mean([self.embedder.token_vector(t) for t in cand_tokens], axis=0)
        if context:
            ctx = np.mean([self.embedder.token_vector(t) for t in context], axis=0)
            denom = np.linalg.norm(cand) * np.linalg.norm(ctx)
            cosine = float(cand @ ctx / denom) if denom > 0 else 0.0
        else:
            cosine = 0.0
        return cosine - self.length_penalty * (len(cand_tokens) - 1)


def score_candidates(masked_tokens: Sequence[str],
                     candidates: Sequence[CorrectionCandidate],
                     scorer: MaskFillScorer) -> list[CorrectionCandidate]:
    """All candidates rescored and sorted descending; ties in lexical order."""
    masked_tokens = list(masked_tokens)
    if masked_tokens.count(MARK_MASK) != 1:
        raise NoMask("expected exactly one [MASK] position")
    if not candidates:
        raise EmptyCandidates("no candidates to score")
    scored = [replace(c, score=float(scorer(masked_tokens, c.surface)))
              for c in candidates]
    scored.sort(key=lambda c: (-c.score, c.surface))
    return scored


def apply_correction(question_tokens: Sequence[str], span: SpanLabel,
                     chosen: CorrectionCandidate) -> str:
    """Splice the chosen candidate over the span; everything else verbatim."""
    if span.start < 1 or span.end > len(question_tokens):
        raise InvalidSpan(f"span {span} outside question of "
                          f"{len(question_tokens)} tokens")
    toks = list(question_tokens)
    out = toks[:span.start - 1] + words(chosen.surface) + toks[span.end:]
    return " ".join(out)
