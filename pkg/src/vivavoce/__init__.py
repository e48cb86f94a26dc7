"""Virtual viva voce examination service.

Interrogates a candidate about their submitted written work through a
pluggable completion provider, detects submission-embedded subversion
attempts, and records every exchange in a tamper-evident transcript for
human assessors.
"""

from .core import (
    ExamConfig,
    ExamSession,
    FinalAssessment,
    InvalidConfig,
    InvalidTransition,
    PrematureVerdict,
    SessionState,
    create_session,
    question_budget_remaining,
    transition,
)
from .engine import build_system_prompt, classify_output, next_turn
from .guard import SanitizedSubmission, ingest, sanitize, scan_injection
from .orchestrator import Orchestrator, replay_export
from .transcript import TranscriptStore, verify_export

__all__ = [
    "ExamConfig",
    "ExamSession",
    "FinalAssessment",
    "InvalidConfig",
    "InvalidTransition",
    "PrematureVerdict",
    "SessionState",
    "create_session",
    "question_budget_remaining",
    "transition",
    "build_system_prompt",
    "classify_output",
    "next_turn",
    "SanitizedSubmission",
    "ingest",
    "sanitize",
    "scan_injection",
    "Orchestrator",
    "replay_export",
    "TranscriptStore",
    "verify_export",
]

__version__ = "0.1.0"
