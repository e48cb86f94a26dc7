import json
from pathlib import Path

import pytest

from vivavoce import guard
from vivavoce.core import ExamConfig
from vivavoce.orchestrator import Orchestrator
from vivavoce.runtime import LogicalClock, SequentialIds

FIXTURES = Path(__file__).parent / "fixtures"

ESSAY = (
    "Debt remission in the ancient Near East recurs with striking regularity at moments "
    "of royal accession, and this essay argues that the pattern marks remission as an "
    "instrument of statecraft rather than an act of charity. "
    "A second chapter traces how later legal instruments were engineered specifically to "
    "insulate creditors from that institution's reach without appearing to defy it. "
    "The final chapter asks what the coexistence of edict and instrument tells us about "
    "how obligation was actually experienced by smallholders in the period."
)

LONG_ANSWER = (
    "I framed it that way because the edicts cluster at accessions across four separate "
    "dynasties, and that regularity is easier to explain as an instrument of legitimation "
    "than as personal generosity, which is the reading the older literature preferred."
)

SHORT_ANSWER = "It seemed the natural reading."


@pytest.fixture
def essay_bytes() -> bytes:
    return ESSAY.encode("utf-8")


@pytest.fixture
def sanitized_essay():
    return guard.sanitize(guard.ingest(ESSAY.encode("utf-8"), "text/plain"))


def make_orchestrator(store=None) -> Orchestrator:
    return Orchestrator(store=store, clock=LogicalClock(), ids=SequentialIds())


def run_full_session(orch: Orchestrator, config: ExamConfig, submission: bytes, answer: str):
    """Drive a session with one scripted answer until the verdict; returns the session."""
    session = orch.create(config)
    orch.submit(session.session_id, submission, "text/plain")
    while True:
        result = orch.answer(session.session_id, answer)
        if result.concluded:
            return orch.get(session.session_id)


def load_fixture(name: str):
    return json.loads((FIXTURES / name).read_text("utf-8"))
