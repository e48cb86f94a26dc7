"""Injectable time and identifier sources.

Wall-clock time and random ids make two otherwise-identical examinations
produce different transcripts.  For reproducible runs (audit comparison,
scripted simulation) the logical variants replace both with deterministic
sequences; the session runner takes whichever pair it is given.
"""

from __future__ import annotations

import threading
import uuid
from datetime import datetime, timedelta, timezone

DETERMINISTIC_EPOCH = "2000-01-01T00:00:00+00:00"


class SystemClock:
    def now(self) -> str:
        return datetime.now(timezone.utc).isoformat()


class LogicalClock:
    """Fixed start, fixed step per reading; thread-safe."""

    def __init__(self, start: str = DETERMINISTIC_EPOCH, step_seconds: float = 1.0):
        self._current = datetime.fromisoformat(start)
        self._step = timedelta(seconds=step_seconds)
        self._lock = threading.Lock()

    def now(self) -> str:
        with self._lock:
            value = self._current
            self._current = self._current + self._step
        return value.isoformat()


class RandomIds:
    def new_session_id(self) -> str:
        return uuid.uuid4().hex


class SequentialIds:
    """Deterministic ids: prefix-000001, prefix-000002, ..."""

    def __init__(self, prefix: str = "session"):
        self._prefix = prefix
        self._counter = 0
        self._lock = threading.Lock()

    def new_session_id(self) -> str:
        with self._lock:
            self._counter += 1
            return f"{self._prefix}-{self._counter:06d}"
