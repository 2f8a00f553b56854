"""Wiring of the pipeline components around one loaded database.

An Engine owns the immutable schema/database plus the embedder, span-head
parameters, decode scorer and thresholds, and exposes the handles the
dialogue layer calls. Databases that ship a demo_queries.json get an
oracle-lookup scorer over those pairs and a span head trained at load time
from forge transforms, so the full pipeline runs without pretrained weights.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import confusion, corrector, decoder
from .checker import Violation, check
from .confusion import SpanHeadParams, SpanLabel
from .corrector import CorrectionCandidate, EmbeddingSimilarityScorer
from .encoding import HashingEmbedder
from .executor import Database, ResultSet, execute, load_database
from .forge import Forge, ForgeError, SourceExample, original_example
from .schema import DatabaseSchema, load_schema
from .sqlast import SqlQuery
from .sqlparser import parse_sql


@dataclass
class EngineConfig:
    theta: float = 0.85  # picklist match threshold
    beam_width: int = 128
    max_rounds: int = 3
    picklist_attach_cap: int = 8
    picklist_cap: int = 1000
    embed_dim: int = 512
    seed: int = 0
    max_decode_len: int = 200
    scope_select_only: bool = False
    train_steps: int = 300


class Engine:
    def __init__(self, db: Database, config: Optional[EngineConfig] = None,
                 embedder: Optional[HashingEmbedder] = None,
                 span_params: Optional[SpanHeadParams] = None,
                 scorer: Optional[decoder.ScorerInterface] = None,
                 mask_scorer=None):
        self.db = db
        self.schema = db.schema
        self.config = config or EngineConfig()
        self.embedder = embedder or HashingEmbedder(dim=self.config.embed_dim,
                                                    seed=self.config.seed)
        self.span_params = span_params or SpanHeadParams.zeros(self.embedder.dim)
        self.scorer = scorer or decoder.FeatureScorer(self.embedder)
        self.mask_scorer = mask_scorer or EmbeddingSimilarityScorer(self.embedder)
        self.executions = 0

    @property
    def max_rounds(self) -> int:
        return self.config.max_rounds

    # -- dialogue handles

    def classify(self, question: str) -> SpanLabel:
        return confusion.classify(question, self.schema, self.embedder,
                                  self.span_params, theta=self.config.theta)

    def translate(self, question: str) -> Optional[SqlQuery]:
        return decoder.translate(
            question, self.schema, embedder=self.embedder, scorer=self.scorer,
            theta=self.config.theta, beam_width=self.config.beam_width,
            max_len=self.config.max_decode_len,
            scope_select_only=self.config.scope_select_only)

    def check(self, query) -> list[Violation]:
        return check(query, self.schema,
                     scope_select_only=self.config.scope_select_only)

    def execute(self, ast: SqlQuery) -> ResultSet:
        self.executions += 1
        return execute(ast, self.db)

    def correction_candidates(self, question_tokens: list[str],
                              span: SpanLabel) -> list[CorrectionCandidate]:
        masked = corrector.mask_span(question_tokens, span)
        return corrector.score_candidates(masked,
                                          corrector.candidate_list(self.schema),
                                          self.mask_scorer)


class QuestionLookupScorer:
    """Demo decode scorer: follows the memorized action path of the question
    being decoded (matched on its token sequence); unknown questions or
    diverging prefixes terminate immediately."""

    def __init__(self, paths: dict[tuple[str, ...], tuple]):
        self.paths = paths

    def next_action_distribution(self, prefix, ctx: decoder.DecodeContext):
        import numpy as np

        probs = np.zeros(len(ctx.actions))
        key = tuple(t.lower() for t in ctx.encoding.question_tokens)
        path = self.paths.get(key)
        if (path is None or len(path) <= len(prefix)
                or path[:len(prefix)] != tuple(prefix)):
            probs[ctx.action_index[decoder.EOS_ACTION]] = 1.0
            return probs
        probs[ctx.action_index[path[len(prefix)]]] = 1.0
        return probs


def _demo_training_pairs(demo: list[dict], schema: DatabaseSchema,
                         pool: list[DatabaseSchema],
                         config: EngineConfig) -> tuple[list, QuestionLookupScorer]:
    """Span-head training data and a lookup scorer from demo question/SQL
    pairs: originals are translatable, forge transforms supply untranslatable
    examples with spans."""
    from .encoding import encode_question
    from .textutil import words

    sources = []
    paths: dict[tuple[str, ...], tuple] = {}
    embed_theta = config.theta
    for rec in demo:
        sql = parse_sql(rec["sql"])
        sources.append(SourceExample(db_id=schema.db_id,
                                     question=rec["question"], sql=sql))
    forge = Forge(sources, {s.db_id: s for s in pool} | {schema.db_id: schema},
                  seed=config.seed)
    # swaps only: precise out-of-vocabulary spans train a clean detector
    examples = [original_example(s) for s in sources] * 2
    want = max(3 * len(sources), 8)
    try:
        examples += forge.generate(want, transforms=("swap_question",))
    except ForgeError:
        pass
    dataset = []
    for ex in examples:
        encoding = encode_question(ex.question, schema, embed_theta)
        qlen = len(encoding.question_span)
        if ex.label.end > qlen:
            continue
        dataset.append((encoding, ex.label))
    for s in sources:
        encoding = encode_question(s.question, schema, embed_theta)
        try:
            actions = decoder.sql_to_actions(s.sql, encoding, schema)
        except Exception:
            continue
        paths[tuple(w.lower() for w in words(s.question))] = tuple(actions)
    return dataset, QuestionLookupScorer(paths)


def load_engine(db_dir: str | Path, config: Optional[EngineConfig] = None,
                distractor_schemas: Optional[list[DatabaseSchema]] = None,
                extra_confidential: tuple[str, ...] = ()) -> Engine:
    """Build an engine from a database directory (schema.json + CSVs,
    optionally demo_queries.json)."""
    db_dir = Path(db_dir)
    config = config or EngineConfig()
    schema = load_schema((db_dir / "schema.json").read_text(encoding="utf-8"),
                         extra_confidential=extra_confidential)
    db = load_database(schema, db_dir)
    from .schema import load_picklists
    schema = load_picklists(schema, {t.table_id: db.tables[t.table_id]
                                     for t in schema.tables},
                            cap=config.picklist_cap)
    db = Database(schema=schema, tables=db.tables)

    embedder = HashingEmbedder(dim=config.embed_dim, seed=config.seed)
    span_params = None
    scorer = None
    demo_path = db_dir / "demo_queries.json"
    if demo_path.exists():
        demo = json.loads(demo_path.read_text(encoding="utf-8"))
        dataset, scorer = _demo_training_pairs(
            demo, schema, distractor_schemas or [], config)
        if dataset:
            span_params = confusion.train_span_head(
                dataset, embedder, lr=0.1, steps=config.train_steps)
    return Engine(db, config, embedder=embedder, span_params=span_params,
                  scorer=scorer)
