"""State machine tests.

The transition table is checked against an independent brute-force
enumeration: the oracle states the protocol's legal moves directly from
the design table, and the implementation must accept exactly that set.
"""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vivavoce import guard
from vivavoce.core import (
    Abort,
    AnswerReceived,
    ExamConfig,
    ExamSession,
    FinalAssessment,
    InvalidConfig,
    InvalidTransition,
    PrematureVerdict,
    QuestionIssued,
    SessionState,
    SubmissionAccepted,
    Timeout,
    VerdictIssued,
    create_session,
    question_budget_remaining,
    transition,
)

VALID_ASSESSMENT = FinalAssessment(
    assessment=(
        "The candidate defended the submission's central claims consistently across the "
        "exchange, quoting the relevant passages accurately and explaining the reasoning "
        "behind each one without hesitation or contradiction; the record supports the "
        "conclusion that the candidate is the author of the work."
    ),
    confidence_score=80,
)

SUBMISSION = guard.SanitizedSubmission(
    text="A short but sufficient essay body used for state machine tests only.",
    flags=(),
    original_digest="0" * 64,
    word_count=12,
)


def session_in(state: SessionState, questions_asked: int = 0, config: ExamConfig | None = None) -> ExamSession:
    base = create_session(config or ExamConfig(), session_id="s", created_at="t")
    submission = None if state is SessionState.CREATED else SUBMISSION
    return ExamSession(
        session_id=base.session_id,
        config=base.config,
        state=state,
        submission=submission,
        questions_asked=questions_asked,
        created_at=base.created_at,
        verdict=VALID_ASSESSMENT if state is SessionState.COMPLETED else None,
    )


# --- creation -----------------------------------------------------------


def test_create_session_defaults_match_protocol_budget():
    session = create_session(ExamConfig(min_questions=4, max_questions=5))
    assert session.state is SessionState.CREATED
    assert session.questions_asked == 0
    assert session.turns == ()
    assert session.verdict is None


def test_create_session_minimal_budget():
    session = create_session(ExamConfig(min_questions=1, max_questions=1))
    assert session.state is SessionState.CREATED


@pytest.mark.parametrize(
    "config",
    [
        ExamConfig(min_questions=5, max_questions=4),
        ExamConfig(min_questions=0, max_questions=4),
        ExamConfig(min_questions=1, max_questions=21),
        ExamConfig(answer_timeout=0),
        ExamConfig(answer_timeout=-5),
        ExamConfig(max_provider_retries=-1),
    ],
)
def test_invalid_configs_rejected(config):
    with pytest.raises(InvalidConfig):
        create_session(config)


def test_event_payloads_must_be_non_empty():
    with pytest.raises(ValueError):
        QuestionIssued("   ")
    with pytest.raises(ValueError):
        AnswerReceived("")


# --- budget -------------------------------------------------------------


@pytest.mark.parametrize("asked,expected", [(0, 5), (5, 0), (3, 2), (7, 0)])
def test_question_budget_remaining(asked, expected):
    session = session_in(SessionState.AWAITING_QUESTION, questions_asked=asked)
    assert question_budget_remaining(session) == expected


# --- the transition table, against a brute-force oracle -------------------

ALL_STATES = list(SessionState)
EVENT_KINDS = [
    "SubmissionAccepted",
    "QuestionIssued",
    "AnswerReceived",
    "VerdictIssued",
    "Timeout",
    "Abort",
]

TERMINAL = {"Completed", "Aborted"}


def oracle_outcome(state: str, event_kind: str, questions_asked: int, min_q: int, max_q: int) -> str:
    """Independent statement of the protocol's legal moves.

    Written from the design table, not from the implementation: any pair
    not listed is illegal, verdicts respect the floor, terminals absorb.
    """
    if state in TERMINAL:
        return "InvalidTransition"
    if event_kind in ("Timeout", "Abort"):
        return "Aborted"
    if event_kind == "VerdictIssued":
        return "Completed" if questions_asked >= min_q else "PrematureVerdict"
    if event_kind == "SubmissionAccepted":
        return "AwaitingQuestion" if state == "Created" else "InvalidTransition"
    if event_kind == "QuestionIssued":
        return "AwaitingAnswer" if state == "AwaitingQuestion" else "InvalidTransition"
    if event_kind == "AnswerReceived":
        if state != "AwaitingAnswer":
            return "InvalidTransition"
        return "AwaitingQuestion" if questions_asked < max_q else "ConcludingForced"
    raise AssertionError(event_kind)


def make_event(kind: str):
    return {
        "SubmissionAccepted": SubmissionAccepted(SUBMISSION),
        "QuestionIssued": QuestionIssued("Why did you structure the argument this way?"),
        "AnswerReceived": AnswerReceived("Because the sources demanded it."),
        "VerdictIssued": VerdictIssued(VALID_ASSESSMENT),
        "Timeout": Timeout(),
        "Abort": Abort("test abort"),
    }[kind]


@pytest.mark.parametrize("min_q,max_q", [(4, 5), (1, 1), (2, 6)])
def test_transition_table_matches_enumeration_oracle(min_q, max_q):
    config = ExamConfig(min_questions=min_q, max_questions=max_q)
    for state in ALL_STATES:
        for kind in EVENT_KINDS:
            for asked in range(0, max_q + 2):
                session = session_in(state, questions_asked=asked, config=config)
                expected = oracle_outcome(state.value, kind, asked, min_q, max_q)
                if expected == "InvalidTransition":
                    with pytest.raises(InvalidTransition):
                        transition(session, make_event(kind))
                elif expected == "PrematureVerdict":
                    with pytest.raises(PrematureVerdict):
                        transition(session, make_event(kind))
                else:
                    result = transition(session, make_event(kind))
                    assert result.state.value == expected, (state, kind, asked)


def test_spec_transition_examples():
    created = session_in(SessionState.CREATED)
    assert transition(created, SubmissionAccepted(SUBMISSION)).state is SessionState.AWAITING_QUESTION

    exhausted = session_in(SessionState.AWAITING_ANSWER, questions_asked=5)
    assert transition(exhausted, AnswerReceived("answer")).state is SessionState.CONCLUDING_FORCED

    done = session_in(SessionState.COMPLETED, questions_asked=5)
    with pytest.raises(InvalidTransition):
        transition(done, AnswerReceived("answer"))

    early = session_in(SessionState.AWAITING_QUESTION, questions_asked=2)
    with pytest.raises(PrematureVerdict):
        transition(early, VerdictIssued(VALID_ASSESSMENT))


def test_question_count_increments_only_on_question():
    session = session_in(SessionState.AWAITING_QUESTION, questions_asked=2)
    after = transition(session, QuestionIssued("And how does that follow?"))
    assert after.questions_asked == 3
    answered = transition(after, AnswerReceived("It follows from the premise."))
    assert answered.questions_asked == 3


def test_verdict_present_iff_completed():
    session = session_in(SessionState.CONCLUDING_FORCED, questions_asked=5)
    done = transition(session, VerdictIssued(VALID_ASSESSMENT))
    assert done.state is SessionState.COMPLETED
    assert done.verdict == VALID_ASSESSMENT


# --- properties over random event sequences -------------------------------

event_strategy = st.sampled_from(EVENT_KINDS)


@settings(max_examples=200, deadline=None)
@given(kinds=st.lists(event_strategy, max_size=30))
def test_random_event_sequences_respect_budget_and_terminals(kinds):
    config = ExamConfig(min_questions=4, max_questions=5)
    session = create_session(config, session_id="s", created_at="t")
    for kind in kinds:
        was_terminal = session.state in (SessionState.COMPLETED, SessionState.ABORTED)
        try:
            session = transition(session, make_event(kind))
        except (InvalidTransition, PrematureVerdict):
            pass
        else:
            assert not was_terminal, "terminal state accepted an event"
        assert session.questions_asked <= config.max_questions
        if session.state is SessionState.COMPLETED:
            assert config.min_questions <= session.questions_asked <= config.max_questions
            assert session.verdict is not None
        else:
            assert session.verdict is None


@settings(max_examples=100, deadline=None)
@given(kinds=st.lists(event_strategy, max_size=25))
def test_replaying_the_same_events_is_deterministic(kinds):
    def run():
        session = create_session(ExamConfig(), session_id="s", created_at="t")
        for kind in kinds:
            try:
                session = transition(session, make_event(kind))
            except (InvalidTransition, PrematureVerdict):
                pass
        return session

    assert run() == run()
