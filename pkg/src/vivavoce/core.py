"""Examination session state machine.

A session walks a fixed protocol: the candidate uploads written work, the
examiner asks between ``min_questions`` and ``max_questions`` probing
questions, and the exchange ends in a single final verdict.  The state
machine enforces that turn order and the question budget; everything else
(prompting, transport, storage) lives elsewhere.

``transition`` is a pure function: it never mutates its input and never
touches a clock, so replaying the same event sequence always reproduces the
same session.  That determinism is what makes transcripts replayable.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Union

from .guard import SanitizedSubmission
from .transcript import TranscriptEntry


class ExamError(Exception):
    """Base class for examination protocol errors."""


class InvalidConfig(ExamError):
    """Raised when an ExamConfig violates its invariants."""


class InvalidTransition(ExamError):
    """Raised for any (state, event) pair outside the transition table."""

    def __init__(self, state: "SessionState", event: "SessionEvent"):
        super().__init__(f"{type(event).__name__} is not legal in state {state.value}")
        self.state = state
        self.event = event


class PrematureVerdict(ExamError):
    """Raised when a verdict arrives before the minimum question count."""


#: Floor for the length of the verdict's evaluation paragraph, in characters.
MIN_ASSESSMENT_CHARS = 200


@dataclass(frozen=True)
class ExamConfig:
    """Parameters of one examination.

    ``academic_context`` is free text from the assessor (course, level,
    year); the examiner calibrates question difficulty to it.
    """

    min_questions: int = 4
    max_questions: int = 5
    academic_context: str = ""
    answer_timeout: float = 600.0
    provider_id: str = "mock"
    max_provider_retries: int = 2

    def validate(self) -> "ExamConfig":
        if not (1 <= self.min_questions <= self.max_questions <= 20):
            raise InvalidConfig(
                "question budget must satisfy 1 <= min <= max <= 20, got "
                f"min={self.min_questions} max={self.max_questions}"
            )
        if self.answer_timeout <= 0:
            raise InvalidConfig(f"answer_timeout must be positive, got {self.answer_timeout}")
        if self.max_provider_retries < 0:
            raise InvalidConfig(
                f"max_provider_retries must be >= 0, got {self.max_provider_retries}"
            )
        return self


@dataclass(frozen=True)
class FinalAssessment:
    """The examiner's closing judgment: a paragraph plus a confidence score.

    ``confidence_score`` is an integer 0-100 expressing confidence that the
    candidate authored the submitted work.
    """

    assessment: str
    confidence_score: int

    def validate(self) -> "FinalAssessment":
        if not isinstance(self.confidence_score, int) or isinstance(self.confidence_score, bool):
            raise ValueError("confidence_score must be an integer")
        if not 0 <= self.confidence_score <= 100:
            raise ValueError(f"confidence_score out of range: {self.confidence_score}")
        if not isinstance(self.assessment, str):
            raise ValueError("assessment must be a string")
        if len(self.assessment) < MIN_ASSESSMENT_CHARS:
            raise ValueError(
                f"assessment must be paragraph-long (>= {MIN_ASSESSMENT_CHARS} chars), "
                f"got {len(self.assessment)}"
            )
        return self


class SessionState(Enum):
    CREATED = "Created"
    SUBMISSION_INGESTED = "SubmissionIngested"
    AWAITING_QUESTION = "AwaitingQuestion"
    AWAITING_ANSWER = "AwaitingAnswer"
    CONCLUDING_FORCED = "ConcludingForced"
    COMPLETED = "Completed"
    ABORTED = "Aborted"


TERMINAL_STATES = frozenset({SessionState.COMPLETED, SessionState.ABORTED})


@dataclass(frozen=True)
class SubmissionAccepted:
    submission: SanitizedSubmission


@dataclass(frozen=True)
class QuestionIssued:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("question text must be non-empty")


@dataclass(frozen=True)
class AnswerReceived:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("answer text must be non-empty")


@dataclass(frozen=True)
class VerdictIssued:
    verdict: FinalAssessment


@dataclass(frozen=True)
class Timeout:
    pass


@dataclass(frozen=True)
class Abort:
    reason: str


SessionEvent = Union[SubmissionAccepted, QuestionIssued, AnswerReceived, VerdictIssued, Timeout, Abort]


@dataclass(frozen=True)
class ExamSession:
    """One examination instance.

    ``turns`` holds the transcript entries recorded so far; the session
    runner appends to it in lockstep with the transcript store, so the
    session is always reconstructible from its transcript.
    """

    session_id: str
    config: ExamConfig
    state: SessionState = SessionState.CREATED
    submission: SanitizedSubmission | None = None
    questions_asked: int = 0
    turns: tuple[TranscriptEntry, ...] = field(default_factory=tuple)
    verdict: FinalAssessment | None = None
    created_at: str = ""
    concluded_at: str | None = None


def create_session(
    config: ExamConfig,
    *,
    session_id: str | None = None,
    created_at: str | None = None,
) -> ExamSession:
    """Open a fresh session in state Created with an empty history."""
    config.validate()
    return ExamSession(
        session_id=session_id if session_id is not None else uuid.uuid4().hex,
        config=config,
        created_at=created_at
        if created_at is not None
        else datetime.now(timezone.utc).isoformat(),
    )


def transition(session: ExamSession, event: SessionEvent) -> ExamSession:
    """Apply one event and return the updated session.

    Transition table:

    ==================  ==================  =========================================
    state               event               next state
    ==================  ==================  =========================================
    Created             SubmissionAccepted  AwaitingQuestion
    AwaitingQuestion    QuestionIssued      AwaitingAnswer (questions_asked + 1)
    AwaitingAnswer      AnswerReceived      AwaitingQuestion while budget remains,
                                            else ConcludingForced
    any non-terminal    VerdictIssued       Completed (questions_asked >= min only)
    any non-terminal    Timeout / Abort     Aborted
    ==================  ==================  =========================================

    Anything else raises InvalidTransition; a verdict before ``min_questions``
    raises PrematureVerdict.  Terminal states absorb: no event is legal in
    Completed or Aborted.
    """
    state = session.state
    if state in TERMINAL_STATES:
        raise InvalidTransition(state, event)

    if isinstance(event, (Timeout, Abort)):
        return replace(session, state=SessionState.ABORTED)

    if isinstance(event, VerdictIssued):
        if session.questions_asked < session.config.min_questions:
            raise PrematureVerdict(
                f"verdict after {session.questions_asked} questions; "
                f"minimum is {session.config.min_questions}"
            )
        event.verdict.validate()
        return replace(session, state=SessionState.COMPLETED, verdict=event.verdict)

    if isinstance(event, SubmissionAccepted) and state is SessionState.CREATED:
        return replace(session, state=SessionState.AWAITING_QUESTION, submission=event.submission)

    if isinstance(event, QuestionIssued) and state is SessionState.AWAITING_QUESTION:
        return replace(
            session,
            state=SessionState.AWAITING_ANSWER,
            questions_asked=session.questions_asked + 1,
        )

    if isinstance(event, AnswerReceived) and state is SessionState.AWAITING_ANSWER:
        if session.questions_asked < session.config.max_questions:
            next_state = SessionState.AWAITING_QUESTION
        else:
            next_state = SessionState.CONCLUDING_FORCED
        return replace(session, state=next_state)

    raise InvalidTransition(state, event)


def question_budget_remaining(session: ExamSession) -> int:
    """Questions the examiner may still ask, floored at zero."""
    return max(0, session.config.max_questions - session.questions_asked)
