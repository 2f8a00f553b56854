"""Pointer-generator action space, beam-search decoding, and the
action-sequence <-> SQL assembly used by the translation pipeline.

An action either generates a token from the 80-entry reserved vocabulary
(70 SQL keywords and reserved tokens plus the ten digits), copies a question
token, or copies a schema component (table or field). Scorers are pluggable;
the shipped ones are an oracle scorer for tests/demos and a deterministic
feature scorer that exercises the full pipeline without training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .checker import filter_beam
from .encoding import (Embedder, EmbeddingOutput, HashingEmbedder,
                       InputEncoding, MetaFeatures, FusionParams,
                       encode_question, fuse_metadata)
from .schema import DatabaseSchema
from .sqlast import (AGGREGATES, And, ColumnRef, Expr, Literal, Or, Predicate,
                     SqlQuery, format_literal, quote_string, join_tokens)
from .textutil import words

_GRAMMAR_KEYWORDS = (
    "SELECT", "DISTINCT", "COUNT", "SUM", "AVG", "MIN", "MAX", "FROM", "JOIN",
    "ON", "WHERE", "AND", "OR", "NOT", "IN", "LIKE", "BETWEEN", "GROUP", "BY",
    "HAVING", "ORDER", "ASC", "DESC", "LIMIT", "INTERSECT", "UNION", "EXCEPT",
)
_GRAMMAR_SYMBOLS = ("=", "!=", "<", "<=", ">", ">=", "(", ")", ",", "*", ".", "'")
EOS = "<EOS>"
# SQL reserved words beyond the subset grammar, filling the vocabulary to 70.
_RESERVED_PAD = (
    "AS", "IS", "NULL", "EXISTS", "ALL", "ANY", "SOME", "CASE", "WHEN", "THEN",
    "ELSE", "END", "CAST", "INNER", "OUTER", "LEFT", "RIGHT", "FULL", "CROSS",
    "NATURAL", "USING", "VALUES", "INSERT", "UPDATE", "DELETE", "CREATE",
    "TABLE", "INDEX", "VIEW", "SET",
)
_DIGITS = tuple(str(d) for d in range(10))


@dataclass(frozen=True)
class ReservedVocabulary:
    tokens: tuple[str, ...]

    def index(self, token: str) -> int:
        return self.tokens.index(token)

    def __len__(self) -> int:
        return len(self.tokens)


def reserved_vocab() -> ReservedVocabulary:
    tokens = _GRAMMAR_KEYWORDS + _GRAMMAR_SYMBOLS + (EOS,) + _RESERVED_PAD + _DIGITS
    assert len(tokens) == 80, len(tokens)
    return ReservedVocabulary(tokens)


VOCAB = reserved_vocab()
EOS_INDEX = VOCAB.index(EOS)
_QUOTE_INDEX = VOCAB.index("'")
_DOT_INDEX = VOCAB.index(".")
_DIGIT_INDICES = {VOCAB.index(d) for d in _DIGITS}
_GEN_INDEX = {t: i for i, t in enumerate(VOCAB.tokens)}


@dataclass(frozen=True)
class Action:
    kind: str  # "gen" | "copy_q" | "copy_s"
    ref: int | str  # reserved index | encoding token position | component id


def generate(token: str) -> Action:
    return Action("gen", _GEN_INDEX[token])


EOS_ACTION = Action("gen", EOS_INDEX)


class MalformedActionSequence(Exception):
    pass


class UncopyableLiteral(Exception):
    pass


def legal_actions(encoding: InputEncoding) -> list[Action]:
    """Canonically ordered action list: reserved tokens, question copies,
    then schema component copies (tables before their fields)."""
    actions = [Action("gen", i) for i in range(len(VOCAB))]
    actions += [Action("copy_q", p) for p in encoding.question_span]
    actions += [Action("copy_s", cid) for cid in encoding.table_marker_positions]
    actions += [Action("copy_s", cid) for cid in encoding.field_marker_positions]
    return actions


@dataclass
class DecodeContext:
    encoding: InputEncoding
    actions: list[Action]
    embeddings: Optional[EmbeddingOutput] = None
    components: Optional[dict[str, np.ndarray]] = None

    def __post_init__(self) -> None:
        self.action_index = {a: i for i, a in enumerate(self.actions)}


class ScorerInterface(Protocol):
    def next_action_distribution(self, prefix: tuple[Action, ...],
                                 ctx: DecodeContext) -> np.ndarray:
        """Probabilities over ctx.actions; illegal actions get 0."""


# ---------------------------------------------------------------------------
# Action sequence -> SQL text


def actions_to_sql(actions: Sequence[Action], encoding: InputEncoding,
                   schema: DatabaseSchema) -> str:
    if not actions or actions[-1] != EOS_ACTION:
        raise MalformedActionSequence("action sequence must end with EOS")
    if any(a == EOS_ACTION for a in actions[:-1]):
        raise MalformedActionSequence("EOS before the end of the sequence")
    raw: list[tuple[str, bool, bool]] = []  # (text, gen_digit, gen_dot)
    in_quote = False
    buf: list[str] = []
    for a in actions[:-1]:
        if a.kind == "gen":
            if a.ref == _QUOTE_INDEX:
                if in_quote:
                    raw.append((quote_string(" ".join(buf)), False, False))
                    buf, in_quote = [], False
                else:
                    in_quote = True
                continue
            text = VOCAB.tokens[a.ref]
            gen_digit = a.ref in _DIGIT_INDICES
            gen_dot = a.ref == _DOT_INDEX
        elif a.kind == "copy_q":
            if a.ref not in encoding.question_span:
                raise MalformedActionSequence(f"question position {a.ref} out of range")
            text, gen_digit, gen_dot = encoding.tokens[a.ref].text, False, False
        elif a.kind == "copy_s":
            cid = a.ref
            if cid in encoding.table_marker_positions:
                text = schema.table(cid).canonical_name
            elif cid in encoding.field_marker_positions:
                text = cid  # field ids are already table.column
            else:
                raise MalformedActionSequence(f"unknown schema component {cid!r}")
            gen_digit = gen_dot = False
        else:
            raise MalformedActionSequence(f"unknown action kind {a.kind!r}")
        if in_quote:
            buf.append(text)
            continue
        raw.append((text, gen_digit, gen_dot))
    if in_quote:
        raise MalformedActionSequence("unterminated string literal")

    merged: list[tuple[str, bool]] = []  # (text, numeric_run)
    i = 0
    while i < len(raw):
        text, gen_digit, gen_dot = raw[i]
        if gen_dot and merged and i + 1 < len(raw):
            nxt = raw[i + 1]
            merged[-1] = (merged[-1][0] + "." + nxt[0], merged[-1][1] and nxt[1])
            i += 2
            continue
        if gen_digit and merged and merged[-1][1]:
            merged[-1] = (merged[-1][0] + text, True)
            i += 1
            continue
        merged.append((text, gen_digit))
        i += 1
    return join_tokens([t for t, _ in merged])


# ---------------------------------------------------------------------------
# SQL -> action sequence (round-trip and demo oracle)


def _resolve(ref: ColumnRef, from_tables: Sequence[str],
             schema: DatabaseSchema) -> str:
    if ref.table is not None:
        return f"{ref.table.lower()}.{ref.column.lower()}"
    for t in from_tables:
        if schema.field_in_table(t, ref.column) is not None:
            return f"{t}.{ref.column.lower()}"
    raise ValueError(f"cannot resolve {ref.column} in {list(from_tables)}")


def _tagged_tokens(q: SqlQuery, schema: DatabaseSchema) -> list[tuple]:
    """Canonical token stream tagged for action emission."""
    ft = [t.lower() for t in q.from_tables]
    out: list[tuple] = [("kw", "SELECT")]
    if q.distinct:
        out.append(("kw", "DISTINCT"))
    for i, item in enumerate(q.select_items):
        if i:
            out.append(("kw", ","))
        out += _expr_tags(item, ft, schema)
    out.append(("kw", "FROM"))
    out.append(("table", ft[0]))
    for i, join in enumerate(q.joins):
        out += [("kw", "JOIN"), ("table", ft[i + 1]), ("kw", "ON")]
        out += _ref_tags(join.left, ft, schema)
        out.append(("kw", "="))
        out += _ref_tags(join.right, ft, schema)
    if q.where is not None:
        out.append(("kw", "WHERE"))
        out += _cond_tags(q.where, ft, schema)
    if q.group_by:
        out += [("kw", "GROUP"), ("kw", "BY")]
        for i, ref in enumerate(q.group_by):
            if i:
                out.append(("kw", ","))
            out += _ref_tags(ref, ft, schema)
    if q.having is not None:
        out.append(("kw", "HAVING"))
        out += _cond_tags(q.having, ft, schema)
    if q.order_by:
        out += [("kw", "ORDER"), ("kw", "BY")]
        for i, key in enumerate(q.order_by):
            if i:
                out.append(("kw", ","))
            out += _expr_tags(key.expr, ft, schema)
            if key.descending:
                out.append(("kw", "DESC"))
    if q.limit is not None:
        out += [("kw", "LIMIT"), ("num", str(q.limit))]
    if q.set_op is not None:
        out.append(("kw", q.set_op))
        out += _tagged_tokens(q.set_rhs, schema)
    return out


def _ref_tags(ref: ColumnRef, ft, schema) -> list[tuple]:
    if ref.is_star:
        if ref.table is not None:
            return [("table", ref.table.lower()), ("kw", "."), ("kw", "*")]
        return [("kw", "*")]
    return [("field", _resolve(ref, ft, schema))]


def _expr_tags(e: Expr, ft, schema) -> list[tuple]:
    if e.aggregate:
        return [("kw", e.aggregate), ("kw", "(")] + _ref_tags(e.ref, ft, schema) + [("kw", ")")]
    return _ref_tags(e.ref, ft, schema)


def _cond_tags(cond, ft, schema) -> list[tuple]:
    if isinstance(cond, Predicate):
        out = _expr_tags(cond.lhs, ft, schema)
        if cond.op == "BETWEEN":
            lo, hi = cond.operand
            out += [("kw", "BETWEEN"), ("lit", lo), ("kw", "AND"), ("lit", hi)]
        elif cond.op in ("IN", "NOT IN"):
            out += [("kw", w) for w in cond.op.split()]
            out += [("kw", "(")] + _tagged_tokens(cond.operand, schema) + [("kw", ")")]
        else:
            out.append(("kw", cond.op))
            if isinstance(cond.operand, SqlQuery):
                out += [("kw", "(")] + _tagged_tokens(cond.operand, schema) + [("kw", ")")]
            else:
                out.append(("lit", cond.operand))
        return out
    word = "AND" if isinstance(cond, And) else "OR"
    out = []
    for i, child in enumerate(cond.children):
        if i:
            out.append(("kw", word))
        nested = isinstance(child, (And, Or))
        if nested:
            out.append(("kw", "("))
        out += _cond_tags(child, ft, schema)
        if nested:
            out.append(("kw", ")"))
    return out


def _find_subsequence(needle: list[str], haystack: list[str]) -> Optional[int]:
    n = len(needle)
    for i in range(len(haystack) - n + 1):
        if [h.lower() for h in haystack[i:i + n]] == needle:
            return i
    return None


def sql_to_actions(gold: SqlQuery, encoding: InputEncoding,
                   schema: DatabaseSchema) -> list[Action]:
    """Action sequence reproducing the query, preferring schema copies, then
    question copies, then generation; literals must be copyable from the
    question or consist of digits."""
    qtokens = encoding.question_tokens
    qstart = encoding.question_span.start
    actions: list[Action] = []
    for tag in _tagged_tokens(gold, schema):
        kind = tag[0]
        if kind == "kw":
            actions.append(generate(tag[1]))
        elif kind == "table":
            if tag[1] not in encoding.table_marker_positions:
                raise ValueError(f"table {tag[1]} not in encoding")
            actions.append(Action("copy_s", tag[1]))
        elif kind == "field":
            if tag[1] not in encoding.field_marker_positions:
                raise ValueError(f"field {tag[1]} not in encoding")
            actions.append(Action("copy_s", tag[1]))
        elif kind == "num":
            actions += _number_actions(tag[1], qtokens, qstart)
        elif kind == "lit":
            lit: Literal = tag[1]
            if lit.is_string:
                if " ".join(words(lit.value)) != lit.value:
                    raise UncopyableLiteral(
                        f"string {lit.value!r} is not a plain word sequence")
                toks = [w.lower() for w in words(lit.value)]
                pos = _find_subsequence(toks, qtokens)
                if pos is None:
                    raise UncopyableLiteral(f"string {lit.value!r} absent from question")
                actions.append(generate("'"))
                actions += [Action("copy_q", qstart + pos + k)
                            for k in range(len(toks))]
                actions.append(generate("'"))
            else:
                actions += _number_actions(format_literal(lit), qtokens, qstart)
        else:
            raise ValueError(f"unknown tag {kind!r}")
    actions.append(EOS_ACTION)
    return actions


def _number_actions(text: str, qtokens: list[str], qstart: int) -> list[Action]:
    if text in qtokens:
        return [Action("copy_q", qstart + qtokens.index(text))]
    if all(c.isdigit() or c == "." for c in text):
        return [generate(c) for c in text]
    raise UncopyableLiteral(f"number {text!r} absent from question")


# ---------------------------------------------------------------------------
# Beam search


@dataclass(frozen=True)
class Decoded:
    actions: tuple[Action, ...]
    score: float  # total log-probability


def _seq_key(ctx: DecodeContext, actions: tuple[Action, ...]) -> tuple:
    return tuple(ctx.action_index[a] for a in actions)


def beam_decode(scorer: ScorerInterface, encoding: InputEncoding,
                beam_width: int = 128, max_len: int = 200,
                embeddings: Optional[EmbeddingOutput] = None,
                components: Optional[dict[str, np.ndarray]] = None
                ) -> list[Decoded]:
    """Length-bounded beam search; deterministic given the scorer (ties break
    on canonical action indices); results sorted by total log-probability."""
    ctx = DecodeContext(encoding, legal_actions(encoding), embeddings, components)
    live: list[tuple[float, tuple[Action, ...]]] = [(0.0, ())]
    finished: list[tuple[float, tuple[Action, ...]]] = []
    for _ in range(max_len):
        if not live:
            break
        candidates: list[tuple[float, tuple[Action, ...], int]] = []
        for lp, prefix in live:
            probs = scorer.next_action_distribution(prefix, ctx)
            for ai in np.nonzero(probs > 0)[0]:
                candidates.append((lp + math.log(probs[ai]), prefix, int(ai)))
        candidates.sort(key=lambda c: (-c[0], _seq_key(ctx, c[1]), c[2]))
        live = []
        for score, prefix, ai in candidates[:beam_width]:
            action = ctx.actions[ai]
            seq = prefix + (action,)
            if action == EOS_ACTION:
                finished.append((score, seq))
            else:
                live.append((score, seq))
    finished.sort(key=lambda c: (-c[0], _seq_key(ctx, c[1])))
    return [Decoded(actions=seq, score=score)
            for score, seq in finished[:beam_width]]


# ---------------------------------------------------------------------------
# Scorers


class OracleScorer:
    """Distributes probability over a fixed set of weighted action paths;
    prefixes outside every path terminate immediately."""

    def __init__(self, paths: Sequence[tuple[Sequence[Action], float]]):
        self.paths = [(tuple(p), float(w)) for p, w in paths]

    def next_action_distribution(self, prefix, ctx: DecodeContext) -> np.ndarray:
        probs = np.zeros(len(ctx.actions))
        total = 0.0
        for path, w in self.paths:
            if len(path) > len(prefix) and path[:len(prefix)] == prefix:
                probs[ctx.action_index[path[len(prefix)]]] += w
                total += w
        if total == 0.0:
            probs[ctx.action_index[EOS_ACTION]] = 1.0
            return probs
        return probs / total


class FeatureScorer:
    """Deterministic training-free scorer: softmax of dot products between a
    decoder-state proxy (mean of consumed action features) and per-action
    feature vectors, with a length-dependent EOS bias so decoding halts."""

    def __init__(self, embedder: Optional[HashingEmbedder] = None,
                 temperature: float = 1.0, eos_gain: float = 0.15):
        self.embedder = embedder or HashingEmbedder(dim=64, seed=13)
        self.temperature = temperature
        self.eos_gain = eos_gain
        self._features: dict[int, np.ndarray] = {}

    def _action_features(self, ctx: DecodeContext) -> np.ndarray:
        key = id(ctx.encoding)
        feats = self._features.get(key)
        if feats is not None:
            return feats
        dim = self.embedder.dim
        rows = []
        for a in ctx.actions:
            if a.kind == "gen":
                rows.append(self.embedder.token_vector(VOCAB.tokens[a.ref]))
            elif a.kind == "copy_q":
                if ctx.embeddings is not None and ctx.embeddings.h_input.shape[1] == dim:
                    rows.append(ctx.embeddings.h_input[a.ref])
                else:
                    rows.append(self.embedder.token_vector(
                        ctx.encoding.tokens[a.ref].text))
            else:
                comp = None
                if ctx.components is not None:
                    comp = ctx.components.get(a.ref)
                if comp is not None and len(comp) == dim:
                    norm = np.linalg.norm(comp)
                    rows.append(comp / norm if norm > 0 else comp)
                else:
                    rows.append(self.embedder.token_vector(str(a.ref)))
        feats = np.stack(rows)
        self._features[key] = feats
        return feats

    def next_action_distribution(self, prefix, ctx: DecodeContext) -> np.ndarray:
        feats = self._action_features(ctx)
        if prefix:
            idx = [ctx.action_index[a] for a in prefix]
            state = feats[idx].mean(axis=0)
        else:
            state = self.embedder.token_vector("<START>")
        logits = feats @ state / self.temperature
        logits[ctx.action_index[EOS_ACTION]] += self.eos_gain * len(prefix)
        z = logits - logits.max()
        ez = np.exp(z)
        return ez / ez.sum()


# ---------------------------------------------------------------------------
# End-to-end translation


def translate(question: str, schema: DatabaseSchema, *,
              embedder: Embedder, scorer: ScorerInterface,
              theta: float = 0.85, beam_width: int = 128, max_len: int = 200,
              scope_select_only: bool = False,
              meta: Optional[MetaFeatures] = None,
              fusion: Optional[FusionParams] = None) -> Optional[SqlQuery]:
    """Question -> first statically valid SQL candidate from the beam, or
    None when every candidate fails the static check."""
    encoding = encode_question(question, schema, theta)
    embeddings = embedder(encoding)
    components = None
    if meta is not None and fusion is not None:
        components = fuse_metadata(embeddings, meta, fusion, encoding)
    decoded = beam_decode(scorer, encoding, beam_width=beam_width,
                          max_len=max_len, embeddings=embeddings,
                          components=components)
    texts = []
    for cand in decoded:
        try:
            texts.append(actions_to_sql(cand.actions, encoding, schema))
        except MalformedActionSequence:
            continue
    hit = filter_beam(texts, schema, scope_select_only=scope_select_only)
    if hit is None:
        return None
    return hit[0]
