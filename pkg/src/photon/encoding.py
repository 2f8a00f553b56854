"""Question+schema serialization, picklist matching, metadata fusion, and the
pluggable embedding provider.

The input layout is [CLS] q1..qn [SEP] ([T] table ([C] column ([V] value)?)+)+ [SEP];
fields whose picklist matched the question carry the matched value after a
[V] marker. The reference embedding provider is a deterministic seeded
hash projection of character trigrams with neighbor mixing, so every
downstream computation is testable without pretrained weights.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from . import _kernels
from .schema import DatabaseSchema, FieldType
from .textutil import words

MARK_CLS = "[CLS]"
MARK_SEP = "[SEP]"
MARK_TABLE = "[T]"
MARK_COLUMN = "[C]"
MARK_VALUE = "[V]"
MARK_MASK = "[MASK]"


class TokenKind(Enum):
    CLS = "CLS"
    SEP = "SEP"
    T_MARK = "T_MARK"
    C_MARK = "C_MARK"
    V_MARK = "V_MARK"
    WORD = "WORD"


@dataclass(frozen=True)
class EncToken:
    kind: TokenKind
    text: str


@dataclass
class InputEncoding:
    tokens: list[EncToken]
    question_span: range  # token indices of the question words
    table_marker_positions: dict[str, int]
    field_marker_positions: dict[str, int]
    value_attachments: dict[str, str]

    @property
    def question_tokens(self) -> list[str]:
        return [self.tokens[i].text for i in self.question_span]


class ShapeMismatch(Exception):
    pass


# ---------------------------------------------------------------------------
# Picklist matching


def match_score(question: str, value: str) -> float:
    """Longest common contiguous character sequence between the question and
    the value, case-insensitive, normalized by the value's length."""
    if not value:
        return 0.0
    a = _kernels.codepoints(question.lower())
    b = _kernels.codepoints(value.lower())
    return _kernels.lcs_len(a, b) / len(b)


def match_picklists(question: str, schema: DatabaseSchema, theta: float = 0.85,
                    cap: int = 8) -> dict[str, str]:
    """Per field, the best-scoring picklist value with score >= theta; at most
    ``cap`` fields keep an attachment (highest scores first)."""
    scored: list[tuple[float, int, str, str]] = []
    for order, f in enumerate(schema.fields):
        if not f.picklist:
            continue
        best_value, best = None, -1.0
        for value in f.picklist:
            s = match_score(question, value)
            if s > best:
                best, best_value = s, value
        if best_value is not None and best >= theta:
            scored.append((best, order, f.field_id, best_value))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return {fid: value for _, _, fid, value in scored[:cap]}


# ---------------------------------------------------------------------------
# Serialization


def serialize(question_tokens: list[str], schema: DatabaseSchema,
              matches: Mapping[str, str] | None = None) -> InputEncoding:
    matches = matches or {}
    tokens: list[EncToken] = [EncToken(TokenKind.CLS, MARK_CLS)]
    for w in question_tokens:
        tokens.append(EncToken(TokenKind.WORD, w))
    question_span = range(1, 1 + len(question_tokens))
    tokens.append(EncToken(TokenKind.SEP, MARK_SEP))
    table_pos: dict[str, int] = {}
    field_pos: dict[str, int] = {}
    for t in schema.tables:
        table_pos[t.table_id] = len(tokens)
        tokens.append(EncToken(TokenKind.T_MARK, MARK_TABLE))
        for w in t.display_tokens:
            tokens.append(EncToken(TokenKind.WORD, w))
        for f in schema.fields_of(t.table_id):
            field_pos[f.field_id] = len(tokens)
            tokens.append(EncToken(TokenKind.C_MARK, MARK_COLUMN))
            for w in f.display_tokens:
                tokens.append(EncToken(TokenKind.WORD, w))
            if f.field_id in matches:
                tokens.append(EncToken(TokenKind.V_MARK, MARK_VALUE))
                for w in words(matches[f.field_id]):
                    tokens.append(EncToken(TokenKind.WORD, w))
    tokens.append(EncToken(TokenKind.SEP, MARK_SEP))
    return InputEncoding(tokens=tokens, question_span=question_span,
                         table_marker_positions=table_pos,
                         field_marker_positions=field_pos,
                         value_attachments=dict(matches))


def encode_question(question: str, schema: DatabaseSchema,
                    theta: float = 0.85, cap: int = 8) -> InputEncoding:
    return serialize(words(question), schema,
                     match_picklists(question, schema, theta, cap))


# ---------------------------------------------------------------------------
# Embedding provider


@dataclass
class EmbeddingOutput:
    h_input: np.ndarray  # (len(tokens), d)
    h_q: np.ndarray  # (|Q|, d)


class HashingEmbedder:
    """Deterministic training-free embedding: seeded hash projection of
    character trigrams, followed by one neighbor-mixing pass over the whole
    sequence and a second pass over the question portion."""

    def __init__(self, dim: int = 512, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._key = f"photon-embed-{seed}".encode()
        self._cache: dict[str, np.ndarray] = {}

    def token_vector(self, text: str) -> np.ndarray:
        v = self._cache.get(text)
        if v is not None:
            return v
        v = np.zeros(self.dim)
        padded = f"^{text.lower()}$"
        grams = [padded] if len(padded) <= 3 else [
            padded[i:i + 3] for i in range(len(padded) - 2)]
        for g in grams:
            h = hashlib.blake2b(g.encode(), key=self._key, digest_size=8).digest()
            idx = int.from_bytes(h[:4], "little") % self.dim
            sign = 1.0 if h[4] % 2 == 0 else -1.0
            v[idx] += sign
        norm = np.linalg.norm(v)
        if norm > 0:
            v = v / norm
        self._cache[text] = v
        return v

    @staticmethod
    def _mix(base: np.ndarray) -> np.ndarray:
        mixed = 0.6 * base
        mixed[1:] += 0.2 * base[:-1]
        mixed[:-1] += 0.2 * base[1:]
        norms = np.linalg.norm(mixed, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return mixed / norms

    def __call__(self, encoding: InputEncoding) -> EmbeddingOutput:
        base = np.stack([self.token_vector(t.text) for t in encoding.tokens])
        h_input = self._mix(base)
        qs = encoding.question_span
        if len(qs) > 0:
            h_q = self._mix(h_input[qs.start:qs.stop])
        else:
            h_q = np.zeros((0, self.dim))
        return EmbeddingOutput(h_input=h_input, h_q=h_q)


Embedder = Callable[[InputEncoding], EmbeddingOutput]


# ---------------------------------------------------------------------------
# Metadata feature fusion


@dataclass
class MetaFeatures:
    f_pri: np.ndarray  # (2, d)
    f_for: np.ndarray  # (2, d)
    f_type: np.ndarray  # (len(FieldType), d)
    field_indices: dict[str, tuple[int, int, int]]  # field_id -> (i, j, k)

    @classmethod
    def build(cls, schema: DatabaseSchema, dim: int, seed: int = 0) -> "MetaFeatures":
        rng = np.random.default_rng(seed)
        type_order = {t: k for k, t in enumerate(FieldType)}
        indices = {}
        for f in schema.fields:
            indices[f.field_id] = (int(f.is_primary),
                                   int(schema.in_foreign_pair(f.field_id)),
                                   type_order[f.field_type])
        scale = 1.0 / np.sqrt(dim)
        return cls(f_pri=rng.normal(0, scale, (2, dim)),
                   f_for=rng.normal(0, scale, (2, dim)),
                   f_type=rng.normal(0, scale, (len(FieldType), dim)),
                   field_indices=indices)


@dataclass
class FusionParams:
    w: np.ndarray  # (d_out, 4 * d)
    b: np.ndarray  # (d_out,)

    @classmethod
    def init(cls, dim: int, d_out: int | None = None, seed: int = 0) -> "FusionParams":
        d_out = d_out or dim
        rng = np.random.default_rng(seed)
        return cls(w=rng.normal(0, 1.0 / np.sqrt(4 * dim), (d_out, 4 * dim)),
                   b=np.zeros(d_out))


def fuse_metadata(embeddings: EmbeddingOutput, features: MetaFeatures,
                  params: FusionParams,
                  encoding: InputEncoding) -> dict[str, np.ndarray]:
    """Fused component vectors: for field markers the embedding is
    concatenated with the primary-key / foreign-key / type feature vectors;
    table markers use zero placeholders for the three feature slots. The
    projection is ReLU(W [h; f_pri; f_for; f_type] + b)."""
    h = embeddings.h_input
    d = h.shape[1]
    if params.w.shape[1] != 4 * d:
        raise ShapeMismatch(
            f"fusion weight expects {params.w.shape[1] // 4} dims, embeddings have {d}")
    out: dict[str, np.ndarray] = {}
    zero = np.zeros(d)
    for fid, pos in encoding.field_marker_positions.items():
        i, j, k = features.field_indices[fid]
        x = np.concatenate([h[pos], features.f_pri[i], features.f_for[j],
                            features.f_type[k]])
        out[fid] = np.maximum(params.w @ x + params.b, 0.0)
    for tid, pos in encoding.table_marker_positions.items():
        x = np.concatenate([h[pos], zero, zero, zero])
        out[tid] = np.maximum(params.w @ x + params.b, 0.0)
    return out
