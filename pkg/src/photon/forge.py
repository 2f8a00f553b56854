"""Synthesis of untranslatable questions from translatable text-to-SQL
examples: span linking, question-side Swap/Drop and schema-side Drop
transforms, a pluggable paraphraser, and adversarial filtering against a
bag-of-words stylistic classifier.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .confusion import SpanLabel, normalize_label
from .schema import DatabaseSchema, load_schema
from .sqlast import Predicate, SqlQuery, iter_subqueries
from .sqlparser import parse_sql
from .textutil import token_match, tokenize, words


class ForgeError(Exception):
    pass


class NoLinkedSpan(ForgeError):
    pass


class NoDistractorAvailable(ForgeError):
    pass


class NotDroppable(ForgeError):
    pass


class GeneratorExhausted(ForgeError):
    pass


# Articles/prepositions removed together with a dropped span when adjacent.
_DROP_FILLER = {"of", "for", "with", "the", "a", "an", "in", "on", "by"}

ORIGINS = ("original", "swap_question", "drop_question", "drop_schema")


@dataclass
class SourceExample:
    db_id: str
    question: str
    sql: SqlQuery


@dataclass
class UtranExample:
    question: str
    db_id: str
    origin: str
    label: SpanLabel
    source_question: str
    dropped_or_swapped: str = ""
    modified_schema: Optional[DatabaseSchema] = None

    @property
    def tokens(self) -> list[str]:
        return words(self.question)

    @property
    def translatable(self) -> bool:
        return self.origin == "original"

    def record(self) -> dict:
        return {
            "question": self.question,
            "db_id": self.db_id,
            "label": {"start": self.label.start, "end": self.label.end},
            "origin": self.origin,
            "source_question": self.source_question,
        }


def original_example(source: SourceExample) -> UtranExample:
    return UtranExample(question=source.question, db_id=source.db_id,
                        origin="original", label=SpanLabel(0, 0),
                        source_question=source.question)


# ---------------------------------------------------------------------------
# Span linking


@dataclass(frozen=True)
class LinkedSpan:
    start: int  # question token index, 0-based inclusive
    end: int
    target_id: str  # field_id, or table_id for star references
    target_kind: str  # "field" | "table"


def _link_targets(sql: SqlQuery, schema: DatabaseSchema) -> list[tuple[str, str]]:
    """Fields referenced by SELECT items and WHERE predicates (star items
    fall back to their table), deduplicated in appearance order."""
    out: list[tuple[str, str]] = []
    seen = set()

    def add(kind: str, tid: str) -> None:
        if tid and (kind, tid) not in seen:
            seen.add((kind, tid))
            out.append((kind, tid))

    def add_ref(ref, from_tables) -> None:
        if ref.is_star:
            add("table", ref.table.lower() if ref.table else
                (from_tables[0] if from_tables else ""))
            return
        if ref.table is not None:
            fid = f"{ref.table.lower()}.{ref.column.lower()}"
            if schema.field(fid) is not None:
                add("field", fid)
            return
        for t in from_tables:
            f = schema.field_in_table(t, ref.column)
            if f is not None:
                add("field", f.field_id)
                return

    for q in iter_subqueries(sql):
        ft = [t.lower() for t in q.from_tables]
        for item in q.select_items:
            add_ref(item.ref, ft)
        stack = [q.where]
        while stack:
            cond = stack.pop()
            if cond is None:
                continue
            if isinstance(cond, Predicate):
                add_ref(cond.lhs.ref, ft)
            else:
                stack.extend(cond.children)
    return out


def _display_tokens(schema: DatabaseSchema, kind: str, tid: str) -> tuple[str, ...]:
    obj = schema.field(tid) if kind == "field" else schema.table(tid)
    return obj.display_tokens if obj is not None else ()


def link_field_spans(question: str, sql: SqlQuery,
                     schema: DatabaseSchema) -> list[LinkedSpan]:
    """Non-overlapping question spans referring to SELECT/WHERE fields via
    string matching; overlaps resolved longest-first, one span per target."""
    qtokens = [w.lower() for w in words(question)]
    candidates: list[tuple[int, int, int, str, str]] = []  # (-len, start, order, ...)
    for order, (kind, tid) in enumerate(_link_targets(sql, schema)):
        display = _display_tokens(schema, kind, tid)
        if not display:
            continue
        windows: list[tuple[int, int]] = []
        n = len(display)
        for i in range(len(qtokens) - n + 1):
            if all(token_match(qtokens[i + k], display[k]) for k in range(n)):
                windows.append((i, i + n - 1))
        if not windows and n > 1:
            head = display[-1]
            for i, tok in enumerate(qtokens):
                if token_match(tok, head):
                    windows.append((i, i))
        for s, e in windows:
            candidates.append((-(e - s + 1), s, order, kind, tid))
    candidates.sort()
    taken: list[LinkedSpan] = []
    used_positions: set[int] = set()
    used_targets: set[str] = set()
    for neg_len, s, order, kind, tid in candidates:
        e = s - neg_len - 1
        if tid in used_targets:
            continue
        if any(p in used_positions for p in range(s, e + 1)):
            continue
        used_targets.add(tid)
        used_positions.update(range(s, e + 1))
        taken.append(LinkedSpan(start=s, end=e, target_id=tid, target_kind=kind))
    taken.sort(key=lambda sp: sp.start)
    return taken


# ---------------------------------------------------------------------------
# Transforms


def _cleanup(text: str) -> str:
    text = re.sub(r"\s+", " ", text).strip()
    return re.sub(r"\s+([?!.,;:])", r"\1", text)


def _splice(question: str, start_tok: int, end_tok: int,
            replacement: str, drop_filler: bool) -> tuple[str, int]:
    """Replace the token range [start_tok, end_tok] in the raw string; returns
    the new string and the token index where the replacement begins."""
    toks = tokenize(question)
    begin = toks[start_tok].start
    new_start_tok = start_tok
    if drop_filler and start_tok > 0 and toks[start_tok - 1].text.lower() in _DROP_FILLER:
        begin = toks[start_tok - 1].start
        new_start_tok = start_tok - 1
    end = toks[end_tok].end
    out = _cleanup(question[:begin] + replacement + " " + question[end:].lstrip())
    return out, new_start_tok


def drop_question(example: SourceExample, schema: DatabaseSchema,
                  rng: Optional[random.Random] = None) -> UtranExample:
    """Remove one linked span (plus an adjacent leading article/preposition);
    the result carries the whole-question label."""
    spans = link_field_spans(example.question, example.sql, schema)
    if not spans:
        raise NoLinkedSpan(example.question)
    span = rng.choice(spans) if rng is not None else spans[0]
    new_q, _ = _splice(example.question, span.start, span.end, "", drop_filler=True)
    label = normalize_label(False, None, max(len(words(new_q)), 1))
    return UtranExample(question=new_q, db_id=example.db_id,
                        origin="drop_question", label=label,
                        source_question=example.question,
                        dropped_or_swapped=f"dropped {span.target_id}")


def _distractor_names(pool: Sequence[DatabaseSchema],
                      current: DatabaseSchema) -> list[str]:
    present = {t.display_name for t in current.tables}
    present |= {f.display_name for f in current.fields}
    names: list[str] = []
    seen = set()
    for sch in pool:
        if sch.db_id == current.db_id:
            continue
        for f in sch.fields:
            name = f.display_name
            if name not in present and name not in seen:
                seen.add(name)
                names.append(name)
    return names


def swap_question(example: SourceExample, schema: DatabaseSchema,
                  pool: Sequence[DatabaseSchema],
                  rng: Optional[random.Random] = None) -> UtranExample:
    """Replace one linked span with a field name from another schema that is
    absent from the current one; the inserted tokens are the confusion span."""
    spans = link_field_spans(example.question, example.sql, schema)
    if not spans:
        raise NoLinkedSpan(example.question)
    names = _distractor_names(pool, schema)
    if not names:
        raise NoDistractorAvailable(example.db_id)
    span = rng.choice(spans) if rng is not None else spans[0]
    distractor = rng.choice(names) if rng is not None else names[0]
    new_q, at = _splice(example.question, span.start, span.end, distractor,
                        drop_filler=False)
    k = len(words(distractor))
    label = normalize_label(False, (at, at + k - 1), len(words(new_q)))
    return UtranExample(question=new_q, db_id=example.db_id,
                        origin="swap_question", label=label,
                        source_question=example.question,
                        dropped_or_swapped=f"{span.target_id} -> {distractor}")


def drop_schema(example: SourceExample, schema: DatabaseSchema,
                rng: Optional[random.Random] = None) -> UtranExample:
    """Remove a linked field from a schema copy; the question span referring
    to the now-missing field becomes the confusion span."""
    spans = link_field_spans(example.question, example.sql, schema)
    if not spans:
        raise NoLinkedSpan(example.question)
    droppable = []
    for span in spans:
        if span.target_kind != "field":
            continue
        f = schema.field(span.target_id)
        table = schema.table(f.table_id)
        if len(table.field_ids) <= 1 or schema.in_foreign_pair(f.field_id):
            continue
        droppable.append(span)
    if not droppable:
        raise NotDroppable(example.question)
    span = rng.choice(droppable) if rng is not None else droppable[0]
    doc = schema.to_document()
    target = schema.field(span.target_id)
    for t in doc["tables"]:
        if t["name"] == target.table_id:
            t["columns"] = [c for c in t["columns"]
                            if c["name"] != target.canonical_name]
    reduced = load_schema(doc)
    label = normalize_label(False, (span.start, span.end),
                            len(words(example.question)))
    return UtranExample(question=example.question, db_id=example.db_id,
                        origin="drop_schema", label=label,
                        source_question=example.question,
                        dropped_or_swapped=f"dropped field {span.target_id}",
                        modified_schema=reduced)


# ---------------------------------------------------------------------------
# Paraphrasing (identity by default; accepts any aligned rewriter)


Paraphraser = Callable[[str], str]


def paraphrase(question: str, span: Optional[tuple[int, int]],
               provider: Optional[Paraphraser] = None
               ) -> tuple[str, Optional[tuple[int, int]]]:
    """Rewrite the question; the span (0-based token range) is remapped via
    token alignment, then by string re-linking, else dropped (None)."""
    new_q = provider(question) if provider is not None else question
    if span is None:
        return new_q, None
    old = [w.lower() for w in words(question)]
    new = [w.lower() for w in words(new_q)]
    if new == old:
        return new_q, span
    s, e = span
    needle = old[s:e + 1]
    n = len(needle)
    for i in range(len(new) - n + 1):
        if new[i:i + n] == needle:
            return new_q, (i, i + n - 1)
    return new_q, None


def apply_paraphrase(example: UtranExample,
                     provider: Optional[Paraphraser]) -> UtranExample:
    if provider is None:
        return example
    if example.origin in ("original", "drop_question"):
        new_q = provider(example.question)
        qlen = max(len(words(new_q)), 1)
        label = (SpanLabel(0, 0) if example.origin == "original"
                 else normalize_label(False, None, qlen))
        return UtranExample(question=new_q, db_id=example.db_id,
                            origin=example.origin, label=label,
                            source_question=example.source_question,
                            dropped_or_swapped=example.dropped_or_swapped,
                            modified_schema=example.modified_schema)
    span = (example.label.start - 1, example.label.end - 1)
    new_q, new_span = paraphrase(example.question, span, provider)
    qlen = max(len(words(new_q)), 1)
    label = normalize_label(False, new_span, qlen)
    return UtranExample(question=new_q, db_id=example.db_id,
                        origin=example.origin, label=label,
                        source_question=example.source_question,
                        dropped_or_swapped=example.dropped_or_swapped,
                        modified_schema=example.modified_schema)


# ---------------------------------------------------------------------------
# Adversarial filtering


class BagOfWordsClassifier:
    """Unigram bag-of-words with a logistic link, fitted by batch gradient
    descent; the trivial stylistic classifier the filter plays against."""

    def __init__(self, lr: float = 0.5, epochs: int = 300):
        self.lr = lr
        self.epochs = epochs
        self.vocab: dict[str, int] = {}
        self.w: Optional[np.ndarray] = None

    def _features(self, text: str) -> np.ndarray:
        x = np.zeros(len(self.vocab) + 1)
        x[-1] = 1.0  # bias
        for tok in set(w.lower() for w in words(text)):
            idx = self.vocab.get(tok)
            if idx is not None:
                x[idx] = 1.0
        return x

    def fit(self, texts: Sequence[str], labels: Sequence[int]) -> None:
        self.vocab = {}
        for text in texts:
            for tok in set(w.lower() for w in words(text)):
                if tok not in self.vocab:
                    self.vocab[tok] = len(self.vocab)
        X = np.stack([self._features(t) for t in texts])
        y = np.asarray(labels, dtype=float)
        self.w = np.zeros(X.shape[1])
        for _ in range(self.epochs):
            p = 1.0 / (1.0 + np.exp(-(X @ self.w)))
            self.w -= self.lr * (X.T @ (p - y)) / len(y)

    def predict_proba(self, text: str) -> float:
        """P(untranslatable)."""
        if self.w is None:
            return 0.5
        return float(1.0 / (1.0 + np.exp(-(self._features(text) @ self.w))))

    def accuracy(self, examples: Sequence[UtranExample]) -> float:
        if not examples:
            return 0.0
        hits = sum(1 for ex in examples
                   if (self.predict_proba(ex.question) > 0.5) != ex.translatable)
        return hits / len(examples)


def adversarial_filter(pool: Sequence[UtranExample], rounds: int, tau: float,
                       regenerate: Callable[[int], list[UtranExample]],
                       classifier_factory: Callable[[], BagOfWordsClassifier]
                       = BagOfWordsClassifier) -> list[UtranExample]:
    """Iteratively discard untranslatable examples that a freshly trained
    stylistic classifier gets right with confidence > tau, replacing them
    with newly generated ones."""
    tran = [ex for ex in pool if ex.translatable]
    untran = [ex for ex in pool if not ex.translatable]
    for _ in range(rounds):
        clf = classifier_factory()
        texts = [ex.question for ex in untran + tran]
        labels = [1] * len(untran) + [0] * len(tran)
        clf.fit(texts, labels)
        keep, easy = [], 0
        for ex in untran:
            if clf.predict_proba(ex.question) > tau:
                easy += 1
            else:
                keep.append(ex)
        if easy:
            fresh = regenerate(easy)
            if len(fresh) < easy:
                raise GeneratorExhausted(
                    f"needed {easy} replacements, generator produced {len(fresh)}")
            keep.extend(fresh[:easy])
        untran = keep
    return tran + untran


# ---------------------------------------------------------------------------
# Pipeline


class Forge:
    """Deterministic dataset builder over a pool of source examples."""

    def __init__(self, sources: Sequence[SourceExample],
                 schemas: dict[str, DatabaseSchema], seed: int = 0,
                 paraphraser: Optional[Paraphraser] = None):
        self.sources = [s for s in sources if s.db_id in schemas]
        self.schemas = schemas
        self.rng = random.Random(seed)
        self.paraphraser = paraphraser
        self.pool = list(schemas.values())

    def originals(self) -> list[UtranExample]:
        out = [original_example(s) for s in self.sources]
        if self.paraphraser is not None:
            out = [apply_paraphrase(ex, self.paraphraser) for ex in out]
        return out

    def generate(self, n: int,
                 transforms: tuple[str, ...] = ("swap_question",
                                                "drop_question",
                                                "drop_schema")) -> list[UtranExample]:
        out: list[UtranExample] = []
        attempts = 0
        max_attempts = max(50, n * 60)
        while len(out) < n and attempts < max_attempts:
            attempts += 1
            source = self.rng.choice(self.sources)
            schema = self.schemas[source.db_id]
            name = self.rng.choice(transforms)
            try:
                if name == "swap_question":
                    ex = swap_question(source, schema, self.pool, self.rng)
                elif name == "drop_question":
                    ex = drop_question(source, schema, self.rng)
                else:
                    ex = drop_schema(source, schema, self.rng)
            except ForgeError:
                continue
            if ex.origin != "drop_schema" and ex.question == source.question:
                continue
            ex = apply_paraphrase(ex, self.paraphraser)
            out.append(ex)
        if len(out) < n:
            raise GeneratorExhausted(f"generated {len(out)} of {n} examples")
        return out

    def build(self, ratio: float = 0.35, rounds: int = 3,
              tau: float = 0.9) -> list[UtranExample]:
        """Mixed pool with the requested untranslatable fraction, refined by
        adversarial filtering."""
        tran = self.originals()
        n_untran = round(len(tran) * ratio / (1.0 - ratio))
        untran = self.generate(n_untran)
        return adversarial_filter(tran + untran, rounds=rounds, tau=tau,
                                  regenerate=self.generate)


def emit_dataset(examples: Sequence[UtranExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.record(), ensure_ascii=False) + "\n")


def load_dataset(path) -> list[UtranExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(UtranExample(
                question=rec["question"], db_id=rec["db_id"],
                origin=rec["origin"],
                label=SpanLabel(rec["label"]["start"], rec["label"]["end"]),
                source_question=rec["source_question"]))
    return out


def load_spider_examples(records: Sequence[dict]) -> list[SourceExample]:
    """Records with db_id/question and a query under "query" or "sql"."""
    out = []
    for rec in records:
        text = rec.get("query") or rec.get("sql") or ""
        try:
            sql = parse_sql(text)
        except Exception:
            continue
        out.append(SourceExample(db_id=rec["db_id"], question=rec["question"],
                                 sql=sql))
    return out
