"""Plain-text submission intake and subversion-attempt detection.

Submitted work is accepted only as plain text, normalized (Unicode
composition, newline folding, removal of invisible codepoints that could
hide instructions from human reviewers), and scanned against a versioned
rule set for text that tries to steer the examiner rather than inform it.

Detection is advisory: flagged submissions still proceed to examination,
with the flags surfaced to invigilators and assessors who decide what they
mean.  All operations here are pure functions of their inputs.
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from importlib import resources


class GuardError(Exception):
    """Base class for submission intake errors."""


class UnsupportedFormat(GuardError):
    pass


class InvalidEncoding(GuardError):
    pass


class OversizeSubmission(GuardError):
    pass


class EmptySubmission(GuardError):
    pass


#: Default size cap; far above any essay, guards against resource abuse.
MAX_SUBMISSION_BYTES = 2 * 1024 * 1024

# Codepoints that render as nothing or reorder rendered text, and so can
# smuggle instructions past a human reader: zero-width characters and
# directional marks (U+200B-U+200F), bidirectional overrides
# (U+202A-U+202E), word joiner and invisible operators (U+2060-U+2064),
# and the zero-width no-break space / BOM (U+FEFF).
_INVISIBLE_CODEPOINTS = frozenset(
    [*range(0x200B, 0x2010), *range(0x202A, 0x202F), *range(0x2060, 0x2065), 0xFEFF]
)


class Severity(Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


@dataclass(frozen=True)
class InjectionFlag:
    """One detected subversion attempt.

    ``span`` is a byte-offset range into the UTF-8 encoding of the
    normalized text; ``excerpt`` is exactly the text at that span (empty
    for removal flags, which anchor at the removal point).
    """

    rule_id: str
    severity: Severity
    span: tuple[int, int]
    excerpt: str
    description: str

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "severity": self.severity.value,
            "span": [self.span[0], self.span[1]],
            "excerpt": self.excerpt,
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InjectionFlag":
        return cls(
            rule_id=d["rule_id"],
            severity=Severity(d["severity"]),
            span=(d["span"][0], d["span"][1]),
            excerpt=d["excerpt"],
            description=d["description"],
        )


@dataclass(frozen=True)
class RawSubmission:
    data: bytes
    declared_format: str
    received_at: str


@dataclass(frozen=True)
class SanitizedSubmission:
    text: str
    flags: tuple[InjectionFlag, ...]
    original_digest: str
    word_count: int

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "flags": [f.to_dict() for f in self.flags],
            "original_digest": self.original_digest,
            "word_count": self.word_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SanitizedSubmission":
        return cls(
            text=d["text"],
            flags=tuple(InjectionFlag.from_dict(f) for f in d["flags"]),
            original_digest=d["original_digest"],
            word_count=d["word_count"],
        )


@dataclass(frozen=True)
class _Rule:
    rule_id: str
    severity: Severity
    pattern: re.Pattern
    description: str


@dataclass(frozen=True)
class RuleSet:
    version: str
    rules: tuple[_Rule, ...]


def load_rules() -> RuleSet:
    """Load the packaged detection rule set (id, severity, pattern records)."""
    raw = json.loads(resources.files("vivavoce").joinpath("rules.json").read_text("utf-8"))
    rules = tuple(
        _Rule(
            rule_id=r["id"],
            severity=Severity(r["severity"]),
            pattern=re.compile(r["pattern"], re.IGNORECASE | re.MULTILINE),
            description=r["description"],
        )
        for r in raw["rules"]
    )
    return RuleSet(version=raw["version"], rules=rules)


_RULESET = load_rules()

RULES_VERSION = _RULESET.version


def ingest(
    data: bytes,
    declared_format: str,
    *,
    received_at: str | None = None,
    max_bytes: int = MAX_SUBMISSION_BYTES,
) -> RawSubmission:
    """Accept raw bytes as a submission, or refuse with a specific error.

    Only ``text/plain`` is accepted, by design: richer formats widen the
    surface for smuggled instructions.
    """
    fmt = declared_format.split(";")[0].strip().lower()
    if fmt != "text/plain":
        raise UnsupportedFormat(f"only text/plain submissions are accepted, got {fmt!r}")
    if len(data) == 0:
        raise EmptySubmission("submission contains no bytes")
    if len(data) > max_bytes:
        raise OversizeSubmission(f"submission is {len(data)} bytes; cap is {max_bytes}")
    try:
        decoded = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(f"submission is not valid UTF-8: {exc}") from None
    if not decoded.strip():
        raise EmptySubmission("submission contains no visible text")
    return RawSubmission(
        data=data,
        declared_format=fmt,
        received_at=received_at
        if received_at is not None
        else datetime.now(timezone.utc).isoformat(),
    )


def normalize(raw: RawSubmission) -> tuple[str, list[InjectionFlag]]:
    """Canonicalize the submission text, flagging every hidden-character removal.

    Applies Unicode canonical composition, folds CRLF (and stray CR) to LF,
    and removes invisible/bidi codepoints and other control characters,
    recording one flag per removal.  Total on valid input; the result
    contains no control characters other than newline and tab, and is a
    fixed point of this function.
    """
    text = unicodedata.normalize("NFC", raw.data.decode("utf-8"))
    text = text.replace("\r\n", "\n").replace("\r", "\n")

    kept: list[str] = []
    removals: list[tuple[int, int, str]] = []  # (index into kept text, codepoint, rule id)
    for ch in text:
        cp = ord(ch)
        if cp in _INVISIBLE_CODEPOINTS:
            removals.append((len(kept), cp, "invisible-chars"))
        elif ch not in "\n\t" and unicodedata.category(ch) == "Cc":
            removals.append((len(kept), cp, "control-chars"))
        else:
            kept.append(ch)
    stripped = "".join(kept)
    # Removing a joiner can expose a new composition pair, so compose again.
    normalized = unicodedata.normalize("NFC", stripped)

    total = len(normalized.encode("utf-8"))
    flags = []
    for kept_index, cp, rule_id in removals:
        anchor = min(len(unicodedata.normalize("NFC", stripped[:kept_index]).encode("utf-8")), total)
        flags.append(
            InjectionFlag(
                rule_id=rule_id,
                severity=Severity.HIGH if rule_id == "invisible-chars" else Severity.MEDIUM,
                span=(anchor, anchor),
                excerpt="",
                description=f"removed hidden codepoint U+{cp:04X}",
            )
        )
    return normalized, flags


def scan_injection(text: str, ruleset: RuleSet = _RULESET) -> list[InjectionFlag]:
    """Match the rule set against normalized text; never mutates it.

    Byte spans index the UTF-8 encoding of ``text`` so flags stay valid in
    any store or wire format.
    """
    flags: list[InjectionFlag] = []
    seen: set[tuple[str, int, int]] = set()
    for rule in ruleset.rules:
        for m in rule.pattern.finditer(text):
            start = len(text[: m.start()].encode("utf-8"))
            end = start + len(m.group(0).encode("utf-8"))
            key = (rule.rule_id, start, end)
            if key in seen:
                continue
            seen.add(key)
            flags.append(
                InjectionFlag(
                    rule_id=rule.rule_id,
                    severity=rule.severity,
                    span=(start, end),
                    excerpt=m.group(0),
                    description=rule.description,
                )
            )
    return flags


def sanitize(raw: RawSubmission, ruleset: RuleSet = _RULESET) -> SanitizedSubmission:
    """Normalize then scan; the digest is taken over the raw bytes untouched."""
    text, removal_flags = normalize(raw)
    flags = removal_flags + scan_injection(text, ruleset)
    flags.sort(key=lambda f: (f.span[0], f.span[1], f.rule_id))
    return SanitizedSubmission(
        text=text,
        flags=tuple(flags),
        original_digest=hashlib.sha256(raw.data).hexdigest(),
        word_count=len(text.split()),
    )
