"""Append-only, hash-chained transcript store.

Every utterance in an examination becomes a transcript entry whose hash
covers the previous entry's hash, so insertion, deletion, or mutation is
detectable afterwards.  Storage is an embedded JSONL file per session (or
memory only, for ephemeral runs): self-contained enough to operate inside
an examination room with no external database.

Appends for one session are strictly serialized; readers and subscribers
always observe a prefix of the final entry sequence.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterator


class TranscriptError(Exception):
    """Base class for transcript store errors."""


class UnknownSession(TranscriptError):
    pass


class SessionSealed(TranscriptError):
    pass


class StorageFailure(TranscriptError):
    pass


class InvalidAppend(TranscriptError):
    """Append that would break a transcript invariant (e.g. a second verdict)."""


class MalformedExport(TranscriptError):
    """Exported document that cannot be parsed back into a transcript."""


HASH_ALG = "sha256"
ZERO_HASH = "0" * 64
EXPORT_FORMAT_VERSION = "1"


class Role(Enum):
    SYSTEM = "System"
    EXAMINER = "Examiner"
    CANDIDATE = "Candidate"
    VERDICT = "Verdict"
    NOTE = "Note"


def canonical_json(obj) -> str:
    """Stable serialization used for hashing and for canonical exports."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def compute_entry_hash(
    session_id: str, seq: int, timestamp: str, role: str, content: str, prev_hash: str
) -> str:
    payload = canonical_json([session_id, seq, timestamp, role, content, prev_hash])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TranscriptEntry:
    session_id: str
    seq: int
    timestamp: str
    role: Role
    content: str
    prev_hash: str
    entry_hash: str

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "timestamp": self.timestamp,
            "role": self.role.value,
            "content": self.content,
            "prev_hash": self.prev_hash,
            "entry_hash": self.entry_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TranscriptEntry":
        return cls(
            session_id=d["session_id"],
            seq=d["seq"],
            timestamp=d["timestamp"],
            role=Role(d["role"]),
            content=d["content"],
            prev_hash=d["prev_hash"],
            entry_hash=d["entry_hash"],
        )


@dataclass(frozen=True)
class TranscriptHeader:
    """Audit provenance for one session; immutable once written."""

    session_id: str
    created_at: str
    config: dict
    submission_digest: str | None
    rules_version: str
    prompt_template_version: str
    provider: dict
    hash_alg: str = HASH_ALG

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "config": self.config,
            "submission_digest": self.submission_digest,
            "rules_version": self.rules_version,
            "prompt_template_version": self.prompt_template_version,
            "provider": self.provider,
            "hash_alg": self.hash_alg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TranscriptHeader":
        return cls(
            session_id=d["session_id"],
            created_at=d["created_at"],
            config=d["config"],
            submission_digest=d["submission_digest"],
            rules_version=d["rules_version"],
            prompt_template_version=d["prompt_template_version"],
            provider=d["provider"],
            hash_alg=d["hash_alg"],
        )


@dataclass(frozen=True)
class VerificationReport:
    valid: bool
    broken_seq: int | None = None
    expected_hash: str | None = None
    found_hash: str | None = None
    reason: str = "Valid"

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "broken_seq": self.broken_seq,
            "expected_hash": self.expected_hash,
            "found_hash": self.found_hash,
            "reason": self.reason,
        }


class _Transcript:
    __slots__ = ("header", "submission_text", "flags", "entries", "sealed_at", "cond")

    def __init__(self, header: TranscriptHeader):
        self.header = header
        self.submission_text: str | None = None
        self.flags: list[dict] = []
        self.entries: list[TranscriptEntry] = []
        self.sealed_at: str | None = None
        self.cond = threading.Condition()


class TranscriptStore:
    """Embedded store keyed by session id.

    With ``base_dir`` set, every record is appended to
    ``{base_dir}/{session_id}.jsonl`` and flushed before the append is
    acknowledged (write-ahead with respect to the session state machine).
    With ``base_dir=None`` the store is memory-only.
    """

    def __init__(self, base_dir: str | Path | None = None):
        self._base_dir = Path(base_dir) if base_dir is not None else None
        self._sessions: dict[str, _Transcript] = {}
        self._registry_lock = threading.Lock()
        if self._base_dir is not None:
            self._base_dir.mkdir(parents=True, exist_ok=True)
            self._load()

    # -- persistence ---------------------------------------------------

    def _load(self) -> None:
        assert self._base_dir is not None
        for path in sorted(self._base_dir.glob("*.jsonl")):
            transcript: _Transcript | None = None
            try:
                with path.open("r", encoding="utf-8") as fh:
                    for line in fh:
                        if not line.strip():
                            continue
                        record = json.loads(line)
                        kind = record.pop("kind")
                        if kind == "header":
                            transcript = _Transcript(TranscriptHeader.from_dict(record))
                        elif kind == "submission" and transcript is not None:
                            transcript.submission_text = record["text"]
                            transcript.flags = record["flags"]
                        elif kind == "entry" and transcript is not None:
                            transcript.entries.append(TranscriptEntry.from_dict(record))
                        elif kind == "seal" and transcript is not None:
                            transcript.sealed_at = record["sealed_at"]
            except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
                raise StorageFailure(f"cannot load transcript file {path}: {exc}") from exc
            if transcript is not None:
                self._sessions[transcript.header.session_id] = transcript

    def _persist(self, session_id: str, record: dict) -> None:
        if self._base_dir is None:
            return
        path = self._base_dir / f"{session_id}.jsonl"
        try:
            with path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
                fh.flush()
        except OSError as exc:
            raise StorageFailure(f"cannot persist transcript record: {exc}") from exc

    # -- lookup --------------------------------------------------------

    def _get(self, session_id: str) -> _Transcript:
        with self._registry_lock:
            transcript = self._sessions.get(session_id)
        if transcript is None:
            raise UnknownSession(session_id)
        return transcript

    def session_ids(self) -> list[str]:
        with self._registry_lock:
            return list(self._sessions)

    def exists(self, session_id: str) -> bool:
        with self._registry_lock:
            return session_id in self._sessions

    # -- writing -------------------------------------------------------

    def create(self, header: TranscriptHeader) -> None:
        with self._registry_lock:
            if header.session_id in self._sessions:
                raise InvalidAppend(f"transcript already exists for {header.session_id}")
            self._sessions[header.session_id] = _Transcript(header)
        self._persist(header.session_id, {"kind": "header", **header.to_dict()})

    def attach_submission(self, session_id: str, text: str, flags: list[dict]) -> None:
        """Store the submission text once, beside the header, never per entry."""
        transcript = self._get(session_id)
        with transcript.cond:
            if transcript.submission_text is not None:
                raise InvalidAppend("submission text already attached")
            transcript.submission_text = text
            transcript.flags = list(flags)
        self._persist(session_id, {"kind": "submission", "text": text, "flags": list(flags)})

    def append(
        self, session_id: str, role: Role, content: str, *, timestamp: str | None = None
    ) -> TranscriptEntry:
        """Persist the next chained entry; callers act on the session only after this returns."""
        transcript = self._get(session_id)
        with transcript.cond:
            if transcript.sealed_at is not None:
                raise SessionSealed(session_id)
            if role is not Role.NOTE and any(e.role is Role.VERDICT for e in transcript.entries):
                raise InvalidAppend("only notes may follow the verdict entry")
            seq = len(transcript.entries)
            prev_hash = transcript.entries[-1].entry_hash if transcript.entries else ZERO_HASH
            ts = timestamp if timestamp is not None else datetime.now(timezone.utc).isoformat()
            entry = TranscriptEntry(
                session_id=session_id,
                seq=seq,
                timestamp=ts,
                role=role,
                content=content,
                prev_hash=prev_hash,
                entry_hash=compute_entry_hash(session_id, seq, ts, role.value, content, prev_hash),
            )
            self._persist(session_id, {"kind": "entry", **entry.to_dict()})
            transcript.entries.append(entry)
            transcript.cond.notify_all()
        return entry

    def seal(self, session_id: str, *, sealed_at: str | None = None) -> None:
        transcript = self._get(session_id)
        with transcript.cond:
            if transcript.sealed_at is not None:
                return
            ts = sealed_at if sealed_at is not None else datetime.now(timezone.utc).isoformat()
            self._persist(session_id, {"kind": "seal", "sealed_at": ts})
            transcript.sealed_at = ts
            transcript.cond.notify_all()

    # -- reading -------------------------------------------------------

    def header(self, session_id: str) -> TranscriptHeader:
        return self._get(session_id).header

    def submission(self, session_id: str) -> tuple[str | None, list[dict]]:
        transcript = self._get(session_id)
        with transcript.cond:
            return transcript.submission_text, list(transcript.flags)

    def entries(self, session_id: str) -> list[TranscriptEntry]:
        transcript = self._get(session_id)
        with transcript.cond:
            return list(transcript.entries)

    def sealed_at(self, session_id: str) -> str | None:
        transcript = self._get(session_id)
        with transcript.cond:
            return transcript.sealed_at

    def snapshot_since(self, session_id: str, after_seq: int) -> tuple[list[TranscriptEntry], bool]:
        """Entries with seq > after_seq plus the sealed flag, as one atomic read."""
        transcript = self._get(session_id)
        with transcript.cond:
            fresh = [e for e in transcript.entries if e.seq > after_seq]
            return fresh, transcript.sealed_at is not None

    def subscribe(self, session_id: str, from_seq: int = 0) -> Iterator[TranscriptEntry]:
        """Yield entries in seq order starting at ``from_seq``, exactly once each.

        Blocks for new entries while the session is live and terminates once
        the transcript is sealed and drained.
        """
        transcript = self._get(session_id)
        next_seq = from_seq
        while True:
            with transcript.cond:
                transcript.cond.wait_for(
                    lambda: len(transcript.entries) > next_seq or transcript.sealed_at is not None
                )
                batch = list(transcript.entries[next_seq:])
                sealed = transcript.sealed_at is not None
            for entry in batch:
                yield entry
            next_seq += len(batch)
            if sealed and not batch:
                return
            if sealed:
                with transcript.cond:
                    drained = len(transcript.entries) <= next_seq
                if drained:
                    return

    # -- verification --------------------------------------------------

    def verify_chain(self, session_id: str) -> VerificationReport:
        return verify_entries(self.entries(session_id))

    # -- export --------------------------------------------------------

    def export_json(self, session_id: str) -> dict:
        """Canonical document: header, submission + flags, ordered entries, verdict."""
        transcript = self._get(session_id)
        with transcript.cond:
            entries = list(transcript.entries)
            sealed_at = transcript.sealed_at
            submission_text = transcript.submission_text
            flags = list(transcript.flags)
        verdict = None
        for entry in entries:
            if entry.role is Role.VERDICT:
                verdict = json.loads(entry.content)
        return {
            "format_version": EXPORT_FORMAT_VERSION,
            "header": transcript.header.to_dict(),
            "submission": (
                {"text": submission_text, "flags": flags} if submission_text is not None else None
            ),
            "entries": [e.to_dict() for e in entries],
            "verdict": verdict,
            "sealed_at": sealed_at,
        }

    def export_text(self, session_id: str) -> str:
        """Human-readable transcript: `[role] content` blocks, header and verdict fenced."""
        transcript = self._get(session_id)
        header = transcript.header
        with transcript.cond:
            entries = list(transcript.entries)
            sealed_at = transcript.sealed_at
        provider = header.provider or {}
        lines = [
            "=== EXAMINATION TRANSCRIPT ===",
            f"session: {header.session_id}",
            f"created: {header.created_at}",
            f"submission-digest: {header.submission_digest or '(none)'}",
            f"rules-version: {header.rules_version}",
            f"prompt-template-version: {header.prompt_template_version}",
            f"provider: {provider.get('provider_id', '?')}/{provider.get('model', '?')}",
            f"hash-algorithm: {header.hash_alg}",
            f"sealed: {sealed_at or '(live)'}",
            "=== END HEADER ===",
            "",
        ]
        for entry in entries:
            if entry.role is Role.VERDICT:
                lines.append("=== VERDICT ===")
                lines.append(f"[{entry.role.value}] {entry.content}")
                lines.append("=== END VERDICT ===")
            else:
                lines.append(f"[{entry.role.value}] {entry.content}")
            lines.append("")
        return "\n".join(lines)


def verify_entries(entries: list[TranscriptEntry]) -> VerificationReport:
    """Recompute the full chain; report the first broken sequence number."""
    prev_hash = ZERO_HASH
    for position, entry in enumerate(entries):
        if entry.seq != position:
            return VerificationReport(
                valid=False,
                broken_seq=position,
                reason=f"sequence gap: expected seq {position}, found {entry.seq}",
            )
        if entry.prev_hash != prev_hash:
            return VerificationReport(
                valid=False,
                broken_seq=entry.seq,
                expected_hash=prev_hash,
                found_hash=entry.prev_hash,
                reason=f"chain link broken at seq {entry.seq}",
            )
        recomputed = compute_entry_hash(
            entry.session_id, entry.seq, entry.timestamp, entry.role.value, entry.content, entry.prev_hash
        )
        if recomputed != entry.entry_hash:
            return VerificationReport(
                valid=False,
                broken_seq=entry.seq,
                expected_hash=recomputed,
                found_hash=entry.entry_hash,
                reason=f"entry hash mismatch at seq {entry.seq}",
            )
        prev_hash = entry.entry_hash
    return VerificationReport(valid=True)


def verify_export(document: dict) -> VerificationReport:
    """Verify the chain inside a canonical JSON export document."""
    try:
        entries = [TranscriptEntry.from_dict(d) for d in document["entries"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedExport(f"not a canonical transcript export: {exc}") from exc
    return verify_entries(entries)
