"""Per-session interaction state machine.

End states (CONFIRM_RESULT, CONFIRM_CORRECTION, NEED_REPHRASE, INVALID_QUERY)
auto-reset on the next user message; while a correction is pending, "yes"
applies the suggested replacement and re-enters the pipeline, "no" advances
to the next candidate until max_rounds, and anything else is treated as a
fresh query. Questions classified untranslatable never reach the executor.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .confusion import SpanLabel, Strategy, response_strategy
from .corrector import CorrectionCandidate, apply_correction
from .executor import ExecutorError, ResultSet
from .sqlparser import SqlSyntaxError, parse_sql
from .textutil import words


class DialogueError(Exception):
    pass


class UnknownSession(DialogueError):
    pass


class NoDatabaseSelected(DialogueError):
    pass


class MissingSlot(DialogueError):
    pass


class SessionState(Enum):
    INIT = "INIT"
    CONFIRM_RESULT = "CONFIRM_RESULT"
    CONFIRM_CORRECTION = "CONFIRM_CORRECTION"
    NEED_REPHRASE = "NEED_REPHRASE"
    INVALID_QUERY = "INVALID_QUERY"


AFFIRMATIVE = {"yes", "y", "yeah", "correct", "ok"}
NEGATIVE = {"no", "n", "nope"}

TEMPLATES = {
    SessionState.CONFIRM_RESULT: "Here is the result of: {sql}",
    SessionState.CONFIRM_CORRECTION: "Did you mean: {corrected}? (yes/no)",
    SessionState.NEED_REPHRASE:
        "I could not map that to a database query. Could you rephrase?",
    SessionState.INVALID_QUERY:
        "The generated query could not be executed on this database.",
}


def render_template(state: SessionState, slots: Optional[dict] = None) -> str:
    template = TEMPLATES.get(state)
    if template is None:
        raise MissingSlot(f"no response template for state {state}")
    try:
        return template.format(**(slots or {}))
    except KeyError as exc:
        raise MissingSlot(f"missing template slot {exc} for {state.value}") from exc


@dataclass
class Turn:
    speaker: str  # "user" | "system"
    text: str
    timestamp: float
    state: Optional[str] = None


@dataclass
class PendingCorrection:
    question: str
    tokens: list[str]
    span: SpanLabel
    candidates: list[CorrectionCandidate]
    chosen: int = 0

    def corrected(self) -> str:
        return apply_correction(self.tokens, self.span,
                                self.candidates[self.chosen])


@dataclass
class DialogueSession:
    session_id: str
    db_id: str
    state: SessionState = SessionState.INIT
    pending_correction: Optional[PendingCorrection] = None
    correction_rounds: int = 0
    history: list[Turn] = field(default_factory=list)


@dataclass
class Response:
    state: SessionState
    text: str
    result: Optional[ResultSet] = None
    suggestion: Optional[list[CorrectionCandidate]] = None
    corrected_question: Optional[str] = None
    span: Optional[SpanLabel] = None
    question_tokens: Optional[list[str]] = None


def detect_sql_input(text: str) -> bool:
    """Dual query mode: well-formed SQL is executed directly."""
    try:
        parse_sql(text)
        return True
    except SqlSyntaxError:
        return False


def handle_message(session: DialogueSession, text: str, engine) -> Response:
    """Advance the session state machine by one user message.

    ``engine`` provides classify/translate/check/execute/correction
    candidates and the max_rounds setting (see photon.engine.Engine).
    """
    if session is None:
        raise UnknownSession("no such session")
    if not session.db_id:
        raise NoDatabaseSelected(f"session {session.session_id} has no database")
    session.history.append(Turn("user", text, time.time()))

    pending = session.pending_correction
    if session.state is SessionState.CONFIRM_CORRECTION and pending is not None:
        token = text.strip().lower().rstrip("!.?")
        if token in AFFIRMATIVE:
            corrected = pending.corrected()
            session.pending_correction = None
            response = _process_question(corrected, session, engine)
        elif token in NEGATIVE:
            session.correction_rounds += 1
            if (session.correction_rounds < engine.max_rounds
                    and pending.chosen + 1 < len(pending.candidates)):
                pending.chosen += 1
                response = _correction_response(pending, session)
            else:
                session.pending_correction = None
                response = Response(SessionState.NEED_REPHRASE,
                                    render_template(SessionState.NEED_REPHRASE))
        else:
            session.pending_correction = None
            session.correction_rounds = 0
            response = _process_fresh(text, session, engine)
    else:
        session.pending_correction = None
        session.correction_rounds = 0
        response = _process_fresh(text, session, engine)

    session.state = response.state
    session.history.append(
        Turn("system", response.text, time.time(), state=response.state.value))
    return response


def _invalid() -> Response:
    return Response(SessionState.INVALID_QUERY,
                    render_template(SessionState.INVALID_QUERY))


def _result_response(result: ResultSet) -> Response:
    return Response(SessionState.CONFIRM_RESULT,
                    render_template(SessionState.CONFIRM_RESULT,
                                    {"sql": result.sql_text}),
                    result=result)


def _correction_response(pending: PendingCorrection,
                         session: DialogueSession) -> Response:
    session.pending_correction = pending
    corrected = pending.corrected()
    return Response(SessionState.CONFIRM_CORRECTION,
                    render_template(SessionState.CONFIRM_CORRECTION,
                                    {"corrected": corrected}),
                    suggestion=pending.candidates[pending.chosen:][:5],
                    corrected_question=corrected,
                    span=pending.span,
                    question_tokens=pending.tokens)


def _process_fresh(text: str, session: DialogueSession, engine) -> Response:
    if detect_sql_input(text):
        ast = parse_sql(text)
        if engine.check(ast):
            return _invalid()
        try:
            return _result_response(engine.execute(ast))
        except ExecutorError:
            return _invalid()
    return _process_question(text, session, engine)


def _process_question(question: str, session: DialogueSession,
                      engine) -> Response:
    label = engine.classify(question)
    tokens = words(question)
    if label.translatable:
        ast = engine.translate(question)
        if ast is None:
            return _invalid()
        try:
            return _result_response(engine.execute(ast))
        except ExecutorError:
            return _invalid()
    if not tokens:
        return Response(SessionState.NEED_REPHRASE,
                        render_template(SessionState.NEED_REPHRASE))
    strategy = response_strategy(label, len(tokens))
    if strategy is Strategy.CONFIRM_CORRECTION:
        candidates = engine.correction_candidates(tokens, label)
        if candidates:
            pending = PendingCorrection(question=question, tokens=tokens,
                                        span=label, candidates=candidates)
            return _correction_response(pending, session)
    return Response(SessionState.NEED_REPHRASE,
                    render_template(SessionState.NEED_REPHRASE))
