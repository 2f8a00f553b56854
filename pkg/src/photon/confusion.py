"""Translatability labels, confusion-span scoring and prediction, span-head
training, and the correction-vs-rephrase strategy.

Positions index [CLS] (0) followed by the question words (1..|Q|). A label
of (0, 0) means translatable; an untranslatable question without an
identifiable span carries the whole-question label (1, |Q|).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .encoding import (Embedder, EmbeddingOutput, InputEncoding, ShapeMismatch,
                       encode_question)
from .schema import DatabaseSchema


class SpanLabelError(Exception):
    pass


class OutOfBounds(SpanLabelError):
    pass


class InvalidForTranslatable(SpanLabelError):
    pass


class NonFiniteLoss(Exception):
    pass


@dataclass(frozen=True)
class SpanLabel:
    start: int
    end: int

    @property
    def translatable(self) -> bool:
        return self.start == 0 and self.end == 0

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def token_positions(self) -> set[int]:
        if self.translatable:
            return set()
        return set(range(self.start, self.end + 1))


def normalize_label(translatable: bool, span: Optional[tuple[int, int]],
                    question_len: int) -> SpanLabel:
    """Map a raw annotation to the normalized label space: translatable ->
    (0,0); untranslatable with 0-based question span (s,t) -> (s+1, t+1);
    untranslatable without a span -> (1, |Q|)."""
    if translatable:
        return SpanLabel(0, 0)
    if question_len < 1:
        raise OutOfBounds("untranslatable label requires a non-empty question")
    if span is None:
        return SpanLabel(1, question_len)
    s, t = span
    if not (0 <= s <= t <= question_len - 1):
        raise OutOfBounds(f"span {span} out of bounds for |Q|={question_len}")
    return SpanLabel(s + 1, t + 1)


@dataclass
class SpanHeadParams:
    s: np.ndarray  # start vector (d,)
    e: np.ndarray  # end vector (d,)

    @classmethod
    def zeros(cls, dim: int) -> "SpanHeadParams":
        return cls(s=np.zeros(dim), e=np.zeros(dim))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.s)}\n")
            fh.write(" ".join(repr(float(x)) for x in self.s) + "\n")
            fh.write(" ".join(repr(float(x)) for x in self.e) + "\n")

    @classmethod
    def load(cls, path) -> "SpanHeadParams":
        with open(path, encoding="utf-8") as fh:
            dim = int(fh.readline())
            s = np.array([float(x) for x in fh.readline().split()])
            e = np.array([float(x) for x in fh.readline().split()])
        if len(s) != dim or len(e) != dim:
            raise ShapeMismatch("span parameter file is inconsistent")
        return cls(s=s, e=e)


@dataclass
class SpanDistribution:
    p_start: np.ndarray
    p_end: np.ndarray


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    ez = np.exp(z)
    return ez / ez.sum()


def score_spans(h: np.ndarray, params: SpanHeadParams) -> SpanDistribution:
    """Softmax of the start/end dot products over [CLS] + question words."""
    if h.ndim != 2 or h.shape[1] != len(params.s):
        raise ShapeMismatch(
            f"embeddings {h.shape} do not match span head dim {len(params.s)}")
    return SpanDistribution(p_start=_softmax(h @ params.s),
                            p_end=_softmax(h @ params.e))


def predict_span(h: np.ndarray, params: SpanHeadParams) -> SpanLabel:
    """Argmax of start[i] + end[j] over j >= i; ties prefer smaller i, then j."""
    if h.ndim != 2 or h.shape[1] != len(params.s):
        raise ShapeMismatch(
            f"embeddings {h.shape} do not match span head dim {len(params.s)}")
    i, j = _kernels.best_span(h @ params.s, h @ params.e)
    return SpanLabel(i, j)


def question_states(encoding: InputEncoding,
                    embeddings: EmbeddingOutput) -> np.ndarray:
    """Rows of h_input for [CLS] plus the question words."""
    qs = encoding.question_span
    idx = [0] + list(range(qs.start, qs.stop))
    return embeddings.h_input[idx]


def classify(question: str, schema: DatabaseSchema, embedder: Embedder,
             params: SpanHeadParams, theta: float = 0.85) -> SpanLabel:
    """Predicted label for a question; start == 0 means translatable."""
    encoding = encode_question(question, schema, theta)
    h = question_states(encoding, embedder(encoding))
    label = predict_span(h, params)
    if label.start == 0:
        return SpanLabel(0, 0)
    return label


def span_objective(params: SpanHeadParams,
                   instances: Sequence[tuple[np.ndarray, SpanLabel]]
                   ) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean log-likelihood of the gold start/end indices and its analytic
    gradient with respect to (s, e)."""
    total = 0.0
    grad_s = np.zeros_like(params.s)
    grad_e = np.zeros_like(params.e)
    n = len(instances)
    for h, label in instances:
        ps = _softmax(h @ params.s)
        pe = _softmax(h @ params.e)
        total += np.log(ps[label.start]) + np.log(pe[label.end])
        grad_s += h[label.start] - h.T @ ps
        grad_e += h[label.end] - h.T @ pe
    return total / n, grad_s / n, grad_e / n


def train_span_head(dataset: Sequence[tuple[InputEncoding, SpanLabel]],
                    embedder: Embedder, lr: float = 0.1,
                    steps: int = 500) -> SpanHeadParams:
    """Full-batch gradient ascent on the summed start/end log-likelihood."""
    if not dataset:
        raise ValueError("empty training set")
    instances = []
    for encoding, label in dataset:
        h = question_states(encoding, embedder(encoding))
        if not (0 <= label.start < len(h) and 0 <= label.end < len(h)):
            raise OutOfBounds(f"label {label} outside encoded question")
        instances.append((h, label))
    dim = instances[0][0].shape[1]
    params = SpanHeadParams.zeros(dim)
    for _ in range(steps):
        loss, gs, ge = span_objective(params, instances)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"objective became {loss}")
        params.s += lr * gs
        params.e += lr * ge
    return params


class Strategy(Enum):
    CONFIRM_CORRECTION = "CONFIRM_CORRECTION"
    NEED_REPHRASE = "NEED_REPHRASE"

MAX_CORRECTABLE_SPAN = 5


def response_strategy(label: SpanLabel, question_len: int) -> Strategy:
    """Offer a correction when the confusion span has 5 or fewer tokens,
    otherwise ask the user to rephrase."""
    if label.translatable:
        raise InvalidForTranslatable("translatable labels need no strategy")
    if label.start < 1 or label.end > question_len:
        raise OutOfBounds(f"label {label} outside question of length {question_len}")
    if label.length <= MAX_CORRECTABLE_SPAN:
        return Strategy.CONFIRM_CORRECTION
    return Strategy.NEED_REPHRASE
