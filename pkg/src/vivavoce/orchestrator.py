"""Session runner: one place where state machine, guard, engine, and
transcript meet.

Both the HTTP service and the terminal tooling drive examinations through
this module, so a session conducted either way produces an identical
transcript for identical inputs.  Per-session work is strictly serialized
behind a session lock, except the provider call itself, which can block
for seconds and must not stall the rest of the session's readers.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Callable

from . import guard
from .core import (
    Abort,
    AnswerReceived,
    ExamConfig,
    ExamSession,
    FinalAssessment,
    QuestionIssued,
    SessionState,
    SubmissionAccepted,
    Timeout,
    VerdictIssued,
    create_session,
    question_budget_remaining,
    transition,
)
from .engine import (
    PROMPT_TEMPLATE_VERSION,
    ProtocolExhausted,
    ProviderPort,
    ProviderUnavailable,
    Question,
    TurnOutcome,
    next_turn,
    verdict_to_json,
)
from .providers import get_provider
from .runtime import RandomIds, SystemClock
from .transcript import (
    Role,
    TranscriptEntry,
    TranscriptHeader,
    TranscriptStore,
    UnknownSession,
    canonical_json,
)

SUBMISSION_INGESTED_PREFIX = "submission ingested:"
ABORT_PREFIX = "ABORTED: "
FLAGS_NOTE_KIND = "injection-flags"


class OrchestratorError(Exception):
    pass


class WrongState(OrchestratorError):
    def __init__(self, state: SessionState, detail: str = ""):
        super().__init__(detail or f"operation not allowed in state {state.value}")
        self.state = state


class EmptyAnswer(OrchestratorError):
    pass


class SessionTimedOut(OrchestratorError):
    """Answer arrived after the deadline; the session has been aborted."""


@dataclass(frozen=True)
class AnswerResult:
    """What the candidate gets back after an answer (never the verdict)."""

    concluded: bool
    question: str | None
    questions_remaining: int


class Orchestrator:
    """Owns live sessions and applies every event through the transcript first."""

    def __init__(
        self,
        store: TranscriptStore | None = None,
        clock=None,
        ids=None,
        provider_factory: Callable[[str], ProviderPort] = get_provider,
    ):
        self.store = store if store is not None else TranscriptStore()
        self.clock = clock if clock is not None else SystemClock()
        self.ids = ids if ids is not None else RandomIds()
        self._provider_factory = provider_factory
        self._providers: dict[str, ProviderPort] = {}
        self._sessions: dict[str, ExamSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._pending_engine: set[str] = set()
        self._registry_lock = threading.Lock()
        self._rehydrate()

    def _rehydrate(self) -> None:
        """Rebuild sessions from transcripts already in the store.

        Replay is tolerant of tampered content (verification is a separate
        concern); transcripts that cannot be replayed at all are skipped and
        left for manual audit.
        """
        for session_id in self.store.session_ids():
            try:
                session = replay_session(self.store, session_id)
            except Exception:
                continue
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
            if self.store.sealed_at(session_id) is None and session.state in (
                SessionState.AWAITING_QUESTION,
                SessionState.CONCLUDING_FORCED,
            ):
                self._pending_engine.add(session_id)

    # -- registry --------------------------------------------------------

    def create(self, config: ExamConfig) -> ExamSession:
        session = create_session(
            config, session_id=self.ids.new_session_id(), created_at=self.clock.now()
        )
        with self._registry_lock:
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()
        return session

    def get(self, session_id: str) -> ExamSession:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    def list_sessions(self) -> list[ExamSession]:
        with self._registry_lock:
            return list(self._sessions.values())

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            lock = self._locks.get(session_id)
        if lock is None:
            raise UnknownSession(session_id)
        return lock

    def _provider_for(self, config: ExamConfig) -> ProviderPort:
        provider = self._providers.get(config.provider_id)
        if provider is None:
            provider = self._provider_factory(config.provider_id)
            self._providers[config.provider_id] = provider
        return provider

    # -- transcript helpers ------------------------------------------------

    def _append_turn(self, session: ExamSession, role: Role, content: str) -> ExamSession:
        entry = self.store.append(
            session.session_id, role, content, timestamp=self.clock.now()
        )
        return replace(session, turns=session.turns + (entry,))

    # -- submission --------------------------------------------------------

    def submit(self, session_id: str, data: bytes, declared_format: str) -> tuple[ExamSession, str]:
        """Ingest the work, open the transcript, and return the first question.

        Raises guard errors unchanged; WrongState when the session already
        has a submission.
        """
        lock = self._lock_for(session_id)
        with lock:
            session = self.get(session_id)
            if session.state is not SessionState.CREATED:
                raise WrongState(session.state, "submission already received")
            raw = guard.ingest(data, declared_format, received_at=self.clock.now())
            sanitized = guard.sanitize(raw)
            provider = self._provider_for(session.config)
            header = TranscriptHeader(
                session_id=session_id,
                created_at=session.created_at,
                config=_config_dict(session.config),
                submission_digest=sanitized.original_digest,
                rules_version=guard.RULES_VERSION,
                prompt_template_version=PROMPT_TEMPLATE_VERSION,
                provider=provider.metadata(),
            )
            self.store.create(header)
            self.store.attach_submission(
                session_id, sanitized.text, [f.to_dict() for f in sanitized.flags]
            )
            session = self._append_turn(
                session,
                Role.SYSTEM,
                f"{SUBMISSION_INGESTED_PREFIX} sha256:{sanitized.original_digest}, "
                f"{sanitized.word_count} words, {len(sanitized.flags)} flag(s)",
            )
            session = transition(session, SubmissionAccepted(sanitized))
            if sanitized.flags:
                session = self._append_turn(
                    session,
                    Role.NOTE,
                    canonical_json(
                        {
                            "kind": FLAGS_NOTE_KIND,
                            "count": len(sanitized.flags),
                            "rules": sorted({f.rule_id for f in sanitized.flags}),
                            "flags": [f.to_dict() for f in sanitized.flags],
                        }
                    ),
                )
            self._sessions[session_id] = session
            self._pending_engine.add(session_id)
            snapshot = session
        session = self._drive_engine(session_id, snapshot)
        question = session.turns[-1].content
        return session, question

    # -- answers -----------------------------------------------------------

    def answer(self, session_id: str, text: str) -> AnswerResult:
        """Record the candidate's answer and advance the examiner.

        If a previous provider call failed, the engine still owes a move;
        posting again (same answer) resumes it without recording a
        duplicate.
        """
        lock = self._lock_for(session_id)
        with lock:
            session = self.get(session_id)
            if session_id in self._pending_engine:
                snapshot = session  # engine owes a move; do not record a new answer
            else:
                if session.state is not SessionState.AWAITING_ANSWER:
                    raise WrongState(session.state)
                self._check_deadline_locked(session)
                if not text.strip():
                    raise EmptyAnswer("answer must be non-empty")
                session = self._append_turn(session, Role.CANDIDATE, text)
                session = transition(session, AnswerReceived(text))
                self._sessions[session_id] = session
                self._pending_engine.add(session_id)
                snapshot = session
        session = self._drive_engine(session_id, snapshot)
        if session.state is SessionState.COMPLETED:
            return AnswerResult(concluded=True, question=None, questions_remaining=0)
        return AnswerResult(
            concluded=False,
            question=session.turns[-1].content,
            questions_remaining=question_budget_remaining(session),
        )

    # -- engine ------------------------------------------------------------

    def _drive_engine(self, session_id: str, snapshot: ExamSession) -> ExamSession:
        """Run one provider turn outside the session lock, then commit it."""
        provider = self._provider_for(snapshot.config)
        try:
            outcome = next_turn(snapshot, provider)
        except ProviderUnavailable:
            raise
        except ProtocolExhausted as exc:
            lock = self._lock_for(session_id)
            with lock:
                self._abort_locked(session_id, Abort(str(exc)), f"{ABORT_PREFIX}{exc}")
            raise
        lock = self._lock_for(session_id)
        with lock:
            session = self.get(session_id)
            if session.turns != snapshot.turns or session.state is not snapshot.state:
                # aborted (or otherwise moved) while the provider was thinking
                raise WrongState(session.state, "session changed during the provider call")
            session = self._commit_outcome_locked(session, outcome)
            self._sessions[session_id] = session
            self._pending_engine.discard(session_id)
            return session

    def _commit_outcome_locked(self, session: ExamSession, outcome: TurnOutcome) -> ExamSession:
        for note in outcome.notes:
            session = self._append_turn(session, Role.NOTE, note)
        if isinstance(outcome.output, Question):
            session = self._append_turn(session, Role.EXAMINER, outcome.output.text)
            return transition(session, QuestionIssued(outcome.output.text))
        verdict = outcome.output.assessment
        session = self._append_turn(session, Role.VERDICT, verdict_to_json(verdict))
        session = transition(session, VerdictIssued(verdict))
        session = replace(session, concluded_at=session.turns[-1].timestamp)
        self.store.seal(session.session_id, sealed_at=self.clock.now())
        return session

    # -- aborts and timeouts -------------------------------------------------

    def abort(self, session_id: str, reason: str) -> ExamSession:
        lock = self._lock_for(session_id)
        with lock:
            session = self.get(session_id)
            if session.state in (SessionState.COMPLETED, SessionState.ABORTED):
                raise WrongState(session.state, "session already concluded")
            return self._abort_locked(session_id, Abort(reason), f"{ABORT_PREFIX}{reason}")

    def _abort_locked(self, session_id: str, event, content: str) -> ExamSession:
        session = self.get(session_id)
        if not self.store.exists(session_id):
            # aborted before any submission: open a minimal transcript for the record
            provider = self._provider_for(session.config)
            self.store.create(
                TranscriptHeader(
                    session_id=session_id,
                    created_at=session.created_at,
                    config=_config_dict(session.config),
                    submission_digest=None,
                    rules_version=guard.RULES_VERSION,
                    prompt_template_version=PROMPT_TEMPLATE_VERSION,
                    provider=provider.metadata(),
                )
            )
        session = self._append_turn(session, Role.SYSTEM, content)
        session = transition(session, event)
        session = replace(session, concluded_at=session.turns[-1].timestamp)
        self.store.seal(session_id, sealed_at=self.clock.now())
        self._sessions[session_id] = session
        self._pending_engine.discard(session_id)
        return session

    def _check_deadline_locked(self, session: ExamSession) -> None:
        deadline_base = None
        for entry in reversed(session.turns):
            if entry.role is Role.EXAMINER:
                deadline_base = entry.timestamp
                break
        if deadline_base is None:
            return
        elapsed = _seconds_between(deadline_base, self.clock.now())
        if elapsed > session.config.answer_timeout:
            self._abort_locked(
                session.session_id,
                Timeout(),
                f"{ABORT_PREFIX}answer timeout exceeded ({session.config.answer_timeout:g}s)",
            )
            raise SessionTimedOut(
                f"no answer within {session.config.answer_timeout:g}s; session aborted"
            )

    def sweep_timeouts(self) -> list[str]:
        """Abort every session whose answer deadline has passed; returns their ids."""
        aborted = []
        for session in self.list_sessions():
            if session.state is not SessionState.AWAITING_ANSWER:
                continue
            lock = self._lock_for(session.session_id)
            with lock:
                try:
                    self._check_deadline_locked(self.get(session.session_id))
                except SessionTimedOut:
                    aborted.append(session.session_id)
        return aborted


def _config_dict(config: ExamConfig) -> dict:
    return {
        "min_questions": config.min_questions,
        "max_questions": config.max_questions,
        "academic_context": config.academic_context,
        "answer_timeout": config.answer_timeout,
        "provider_id": config.provider_id,
        "max_provider_retries": config.max_provider_retries,
    }


def _seconds_between(start_iso: str, end_iso: str) -> float:
    start = datetime.fromisoformat(start_iso)
    end = datetime.fromisoformat(end_iso)
    return (end - start).total_seconds()


def replay_export(document: dict) -> ExamSession:
    """Rebuild an ExamSession purely from a canonical transcript export.

    Replaying is the audit-side inverse of conducting: the returned session
    compares equal to the one the runner finished with.
    """
    header = TranscriptHeader.from_dict(document["header"])
    config = ExamConfig(**header.config)
    session = create_session(
        config, session_id=header.session_id, created_at=header.created_at
    )
    submission = None
    if document.get("submission"):
        sub = document["submission"]
        submission = guard.SanitizedSubmission(
            text=sub["text"],
            flags=tuple(guard.InjectionFlag.from_dict(f) for f in sub["flags"]),
            original_digest=header.submission_digest,
            word_count=len(sub["text"].split()),
        )
    concluded_at = None
    turns = ()
    for record in document["entries"]:
        entry = TranscriptEntry.from_dict(record) if isinstance(record, dict) else record
        turns = turns + (entry,)
        if entry.role is Role.SYSTEM and entry.content.startswith(SUBMISSION_INGESTED_PREFIX):
            if submission is None:
                raise ValueError("transcript references a submission but the export has none")
            session = transition(session, SubmissionAccepted(submission))
        elif entry.role is Role.SYSTEM and entry.content.startswith(ABORT_PREFIX):
            session = transition(session, Abort(entry.content[len(ABORT_PREFIX):]))
            concluded_at = entry.timestamp
        elif entry.role is Role.EXAMINER:
            session = transition(session, QuestionIssued(entry.content))
        elif entry.role is Role.CANDIDATE:
            session = transition(session, AnswerReceived(entry.content))
        elif entry.role is Role.VERDICT:
            payload = json.loads(entry.content)
            session = transition(
                session,
                VerdictIssued(
                    FinalAssessment(
                        assessment=payload["assessment"],
                        confidence_score=payload["confidence_score"],
                    )
                ),
            )
            concluded_at = entry.timestamp
    return replace(session, turns=turns, concluded_at=concluded_at)


def replay_session(store: TranscriptStore, session_id: str) -> ExamSession:
    return replay_export(store.export_json(session_id))
