"""Evaluation metrics: translatability accuracy, span accuracy/F1 (scored the
reading-comprehension way over token positions), and SQL exact set match."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .confusion import SpanLabel
from .sqlast import exact_set_match
from .sqlparser import SqlSyntaxError, parse_sql


class LengthMismatch(Exception):
    pass


@dataclass
class EvalReport:
    translatability_accuracy: Optional[float] = None
    span_accuracy: Optional[float] = None
    span_f1: Optional[float] = None
    em_accuracy: Optional[float] = None
    counts: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        rows = []
        if self.translatability_accuracy is not None:
            rows.append(("Tran Acc", self.translatability_accuracy))
        if self.span_accuracy is not None:
            rows.append(("Span Acc", self.span_accuracy))
        if self.span_f1 is not None:
            rows.append(("Span F1", self.span_f1))
        if self.em_accuracy is not None:
            rows.append(("EM Acc", self.em_accuracy))
        out = [f"{name:<24}{value:>8.1f}" for name, value in rows]
        for key, value in self.counts.items():
            out.append(f"{key:<24}{value:>8}")
        return out


def _require_aligned(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} predictions vs {len(b)} golds")


def eval_translatability(predictions: Sequence[SpanLabel],
                         golds: Sequence[SpanLabel]) -> float:
    """Percent of examples whose translatable/untranslatable bit matches."""
    _require_aligned(predictions, golds)
    if not golds:
        return 0.0
    hits = sum(1 for p, g in zip(predictions, golds)
               if p.translatable == g.translatable)
    return 100.0 * hits / len(golds)


def span_f1_single(pred: SpanLabel, gold: SpanLabel) -> float:
    """Token-overlap F1 of one example; empty spans score 1 iff both empty."""
    p, g = pred.token_positions(), gold.token_positions()
    if not p or not g:
        return 1.0 if p == g else 0.0
    overlap = len(p & g)
    if overlap == 0:
        return 0.0
    precision = overlap / len(p)
    recall = overlap / len(g)
    return 2 * precision * recall / (precision + recall)


def eval_span(predictions: Sequence[SpanLabel],
              golds: Sequence[SpanLabel],
              untranslatable_only: bool = False) -> tuple[float, float]:
    """(exact span accuracy, mean token F1), both in percent."""
    _require_aligned(predictions, golds)
    pairs = [(p, g) for p, g in zip(predictions, golds)
             if not untranslatable_only or not g.translatable]
    if not pairs:
        return 0.0, 0.0
    acc = 100.0 * sum(1 for p, g in pairs if p == g) / len(pairs)
    f1 = 100.0 * sum(span_f1_single(p, g) for p, g in pairs) / len(pairs)
    return acc, f1


def eval_em(predicted_sqls: Sequence[str], gold_sqls: Sequence[str],
            with_values: bool = False) -> tuple[float, int]:
    """(mean exact-set-match percent, parse-failure count); unparsable
    predictions count as non-matches."""
    _require_aligned(predicted_sqls, gold_sqls)
    if not gold_sqls:
        return 0.0, 0
    hits = 0
    failures = 0
    for pred, gold in zip(predicted_sqls, gold_sqls):
        gold_ast = parse_sql(gold)
        try:
            pred_ast = parse_sql(pred)
        except SqlSyntaxError:
            failures += 1
            continue
        if exact_set_match(pred_ast, gold_ast, with_values=with_values):
            hits += 1
    return 100.0 * hits / len(gold_sqls), failures


# ---------------------------------------------------------------------------
# File-level entry points (JSON-lines in, report out)


def _load_labels(path) -> list[SpanLabel]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            label = rec.get("label", rec)
            out.append(SpanLabel(int(label["start"]), int(label["end"])))
    return out


def _load_sqls(path) -> list[str]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(rec.get("sql") or rec.get("query") or "")
    return out


def evaluate_files(task: str, pred_path, gold_path,
                   with_values: bool = False) -> EvalReport:
    report = EvalReport()
    if task == "tran":
        preds, golds = _load_labels(pred_path), _load_labels(gold_path)
        report.translatability_accuracy = eval_translatability(preds, golds)
        report.counts["examples"] = len(golds)
    elif task == "span":
        preds, golds = _load_labels(pred_path), _load_labels(gold_path)
        acc, f1 = eval_span(preds, golds)
        acc_u, f1_u = eval_span(preds, golds, untranslatable_only=True)
        report.span_accuracy = acc
        report.span_f1 = f1
        report.counts["examples"] = len(golds)
        report.counts["untran acc"] = f"{acc_u:.1f}"
        report.counts["untran f1"] = f"{f1_u:.1f}"
    elif task == "em":
        preds, golds = _load_sqls(pred_path), _load_sqls(gold_path)
        em, failures = eval_em(preds, golds, with_values=with_values)
        report.em_accuracy = em
        report.counts["examples"] = len(golds)
        report.counts["parse failures"] = failures
    else:
        raise ValueError(f"unknown eval task {task!r}")
    return report
