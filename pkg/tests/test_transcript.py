"""Hash-chained transcript store tests: chaining, tamper evidence, export,
subscription, durability."""

from __future__ import annotations

import json
import threading
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vivavoce.transcript import (
    ZERO_HASH,
    InvalidAppend,
    MalformedExport,
    Role,
    SessionSealed,
    TranscriptHeader,
    TranscriptStore,
    UnknownSession,
    canonical_json,
    verify_entries,
    verify_export,
)

VERDICT_JSON = json.dumps(
    {"assessment": "A sufficiently long evaluation paragraph " + "x" * 180, "confidence_score": 77}
)


def make_header(session_id="s1") -> TranscriptHeader:
    return TranscriptHeader(
        session_id=session_id,
        created_at="2001-01-01T00:00:00+00:00",
        config={"min_questions": 4, "max_questions": 5},
        submission_digest="d" * 64,
        rules_version="test-rules",
        prompt_template_version="1",
        provider={"provider_id": "mock", "model": "m"},
    )


def store_with_session(session_id="s1", base_dir=None) -> TranscriptStore:
    store = TranscriptStore(base_dir)
    store.create(make_header(session_id))
    return store


# --- chaining -------------------------------------------------------------


def test_first_entry_is_chain_genesis():
    store = store_with_session()
    entry = store.append("s1", Role.SYSTEM, "submission ingested", timestamp="t0")
    assert entry.seq == 0
    assert entry.prev_hash == ZERO_HASH


def test_second_entry_links_to_first():
    store = store_with_session()
    first = store.append("s1", Role.EXAMINER, "Why this framing?", timestamp="t0")
    second = store.append("s1", Role.CANDIDATE, "Because of the sources.", timestamp="t1")
    assert second.prev_hash == first.entry_hash
    assert second.seq == 1


def test_append_after_seal_rejected():
    store = store_with_session()
    store.append("s1", Role.VERDICT, VERDICT_JSON, timestamp="t0")
    store.seal("s1", sealed_at="t1")
    with pytest.raises(SessionSealed):
        store.append("s1", Role.NOTE, "late", timestamp="t2")


def test_only_notes_may_follow_verdict():
    store = store_with_session()
    store.append("s1", Role.VERDICT, VERDICT_JSON, timestamp="t0")
    store.append("s1", Role.NOTE, "post-verdict note", timestamp="t1")
    with pytest.raises(InvalidAppend):
        store.append("s1", Role.EXAMINER, "one more question", timestamp="t2")


def test_unknown_session_errors():
    store = TranscriptStore()
    with pytest.raises(UnknownSession):
        store.append("nope", Role.NOTE, "x")
    with pytest.raises(UnknownSession):
        store.verify_chain("nope")
    with pytest.raises(UnknownSession):
        store.export_json("nope")


def test_duplicate_create_rejected():
    store = store_with_session()
    with pytest.raises(InvalidAppend):
        store.create(make_header("s1"))


# --- verification ------------------------------------------------------------


def filled_store(n=6) -> TranscriptStore:
    store = store_with_session()
    roles = [Role.SYSTEM, Role.EXAMINER, Role.CANDIDATE, Role.EXAMINER, Role.CANDIDATE, Role.NOTE]
    for i in range(n):
        store.append("s1", roles[i % len(roles)], f"content {i}", timestamp=f"t{i}")
    return store


def test_untampered_chain_is_valid():
    store = filled_store()
    report = store.verify_chain("s1")
    assert report.valid
    assert report.reason == "Valid"


def test_altered_content_breaks_chain_at_that_seq():
    store = filled_store()
    entries = store.entries("s1")
    tampered = entries[:3] + [replace(entries[3], content="doctored answer")] + entries[4:]
    report = verify_entries(tampered)
    assert not report.valid
    assert report.broken_seq == 3
    assert report.expected_hash != report.found_hash


def test_deleted_entry_detected_as_gap():
    store = filled_store()
    entries = store.entries("s1")
    report = verify_entries(entries[:2] + entries[3:])
    assert not report.valid
    assert report.broken_seq == 2
    assert "gap" in report.reason


def test_single_byte_mutation_of_any_entry_detected():
    store = filled_store()
    entries = store.entries("s1")
    for i, entry in enumerate(entries):
        mutated = entry.content[:-1] + ("X" if entry.content[-1] != "X" else "Y")
        tampered = entries[:i] + [replace(entry, content=mutated)] + entries[i + 1 :]
        report = verify_entries(tampered)
        assert not report.valid
        assert report.broken_seq == i


# --- export --------------------------------------------------------------------


def completed_store() -> TranscriptStore:
    store = store_with_session()
    store.attach_submission("s1", "The essay text.", [])
    store.append("s1", Role.SYSTEM, "submission ingested: test", timestamp="t0")
    store.append("s1", Role.EXAMINER, "Why open with the edicts?", timestamp="t1")
    store.append("s1", Role.CANDIDATE, "Because they anchor the argument.", timestamp="t2")
    store.append("s1", Role.VERDICT, VERDICT_JSON, timestamp="t3")
    store.seal("s1", sealed_at="t4")
    return store


def test_export_json_round_trips_and_verifies():
    store = completed_store()
    document = json.loads(canonical_json(store.export_json("s1")))
    assert verify_export(document).valid
    assert document["verdict"]["confidence_score"] == 77
    assert document["header"]["session_id"] == "s1"
    assert document["submission"]["text"] == "The essay text."
    assert [e["seq"] for e in document["entries"]] == [0, 1, 2, 3]


def test_export_text_fences_header_and_verdict():
    text = completed_store().export_text("s1")
    assert text.startswith("=== EXAMINATION TRANSCRIPT ===")
    assert "=== END HEADER ===" in text
    assert "[Examiner] Why open with the edicts?" in text
    assert "[Candidate] Because they anchor the argument." in text
    verdict_block = text[text.index("=== VERDICT ===") :]
    assert '"confidence_score": 77' in verdict_block
    assert "=== END VERDICT ===" in verdict_block


def test_export_verify_rejects_malformed_document():
    with pytest.raises(MalformedExport):
        verify_export({"entries": [{"nonsense": True}]})
    with pytest.raises(MalformedExport):
        verify_export({})


def test_export_tamper_detected_after_round_trip():
    document = json.loads(canonical_json(completed_store().export_json("s1")))
    document["entries"][2]["content"] = "polished answer"
    report = verify_export(document)
    assert not report.valid
    assert report.broken_seq == 2


# --- durability -------------------------------------------------------------------


def test_store_survives_reopen(tmp_path):
    store = TranscriptStore(tmp_path)
    store.create(make_header("s1"))
    store.attach_submission("s1", "essay", [{"rule_id": "x"}])
    store.append("s1", Role.EXAMINER, "Q?", timestamp="t0")
    store.append("s1", Role.CANDIDATE, "A.", timestamp="t1")
    store.seal("s1", sealed_at="t2")

    reopened = TranscriptStore(tmp_path)
    assert reopened.entries("s1") == store.entries("s1")
    assert reopened.header("s1") == store.header("s1")
    assert reopened.submission("s1") == ("essay", [{"rule_id": "x"}])
    assert reopened.sealed_at("s1") == "t2"
    assert reopened.verify_chain("s1").valid


def test_on_disk_mutation_detected(tmp_path):
    store = TranscriptStore(tmp_path)
    store.create(make_header("s1"))
    store.append("s1", Role.CANDIDATE, "original answer text", timestamp="t0")
    path = tmp_path / "s1.jsonl"
    data = path.read_text("utf-8").replace("original answer", "improved answer")
    path.write_text(data, "utf-8")

    reopened = TranscriptStore(tmp_path)
    report = reopened.verify_chain("s1")
    assert not report.valid
    assert report.broken_seq == 0


# --- subscription --------------------------------------------------------------------


def test_subscribe_replays_then_terminates_after_seal():
    store = completed_store()
    received = [e.seq for e in store.subscribe("s1", from_seq=0)]
    assert received == [0, 1, 2, 3]


def test_subscribe_from_offset():
    store = completed_store()
    received = [e.seq for e in store.subscribe("s1", from_seq=2)]
    assert received == [2, 3]


def test_two_concurrent_subscribers_see_identical_sequences():
    store = store_with_session()
    results: dict[str, list[int]] = {}

    def drain(name: str):
        results[name] = [e.seq for e in store.subscribe("s1", from_seq=0)]

    threads = [threading.Thread(target=drain, args=(n,)) for n in ("a", "b")]
    for t in threads:
        t.start()
    for i in range(8):
        store.append("s1", Role.NOTE, f"n{i}", timestamp=f"t{i}")
    store.seal("s1", sealed_at="t9")
    for t in threads:
        t.join(timeout=10)
        assert not t.is_alive()
    assert results["a"] == results["b"] == list(range(8))


# --- append-only property ---------------------------------------------------------------

op_strategy = st.lists(
    st.one_of(
        st.tuples(st.just("append"), st.sampled_from(["System", "Examiner", "Candidate", "Note"])),
        st.tuples(st.just("seal"), st.none()),
    ),
    max_size=25,
)


@settings(max_examples=100, deadline=None)
@given(ops=op_strategy)
def test_public_operations_never_mutate_or_delete(ops):
    store = store_with_session()
    snapshots = [store.entries("s1")]
    for op, role_name in ops:
        try:
            if op == "append":
                store.append("s1", Role(role_name), f"content-{len(snapshots)}", timestamp="t")
            else:
                store.seal("s1", sealed_at="t")
        except SessionSealed:
            pass
        current = store.entries("s1")
        previous = snapshots[-1]
        assert current[: len(previous)] == previous, "existing entries changed"
        assert len(current) >= len(previous)
        snapshots.append(current)
    assert store.verify_chain("s1").valid
