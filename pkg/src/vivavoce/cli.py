"""Operator command line.

``run`` conducts a terminal examination against a submission file,
``simulate`` exercises a whole mock cohort concurrently, ``verify`` checks
an exported transcript's hash chain, and ``scan`` reports injection flags
for a file.  Exit codes are fixed for scripting: 0 ok, 1 tamper or
examination failure, 2 unreadable/parse/ingest error, 3 flags found.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
from pathlib import Path

from . import guard
from .core import ExamConfig, InvalidConfig, SessionState
from .engine import ProtocolExhausted, ProviderUnavailable
from .orchestrator import Orchestrator, WrongState
from .providers import configured_provider_factory, get_provider
from .runtime import LogicalClock, SequentialIds
from .transcript import MalformedExport, Role, canonical_json, verify_export

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_FLAGGED = 3


def _build_orchestrator(args) -> Orchestrator:
    # --config points at the same JSON file the service reads; it supplies
    # live-provider settings and the deterministic default.
    deterministic = args.deterministic
    provider_factory = get_provider
    if getattr(args, "config", None):
        from .api import load_service_config

        service = load_service_config(args.config)
        deterministic = deterministic or service.deterministic
        provider_factory = configured_provider_factory(
            endpoint=service.provider_endpoint,
            model=service.provider_model,
            temperature=service.provider_temperature,
        )
    if deterministic:
        return Orchestrator(
            clock=LogicalClock(), ids=SequentialIds(), provider_factory=provider_factory
        )
    return Orchestrator(provider_factory=provider_factory)


def _config_from_args(args, provider_id: str) -> ExamConfig:
    return ExamConfig(
        min_questions=args.min,
        max_questions=args.max,
        academic_context=args.context,
        provider_id=provider_id,
    ).validate()


def cmd_run(args) -> int:
    path = Path(args.submission)
    try:
        data = path.read_bytes()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        config = _config_from_args(args, args.provider)
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    orch = _build_orchestrator(args)
    session = orch.create(config)
    try:
        session, question = orch.submit(session.session_id, data, "text/plain")
    except guard.GuardError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ProviderUnavailable, ProtocolExhausted) as exc:
        print(f"error: provider failure: {exc}", file=sys.stderr)
        return EXIT_FAIL

    print(f"session {session.session_id}")
    concluded = False
    while not concluded:
        print(f"\n[Examiner] {question}")
        try:
            answer = input("> ")
        except EOFError:
            print("\nno answer received; aborting examination", file=sys.stderr)
            orch.abort(session.session_id, "candidate input ended")
            break
        if not answer.strip():
            print("(answer must be non-empty)")
            continue
        try:
            result = orch.answer(session.session_id, answer)
        except (ProviderUnavailable, ProtocolExhausted) as exc:
            print(f"error: provider failure: {exc}", file=sys.stderr)
            break
        except (WrongState, Exception) as exc:
            print(f"error: {exc}", file=sys.stderr)
            break
        if result.concluded:
            concluded = True
        else:
            question = result.question

    final = orch.get(session.session_id)
    transcript_path = path.with_name(path.name + ".transcript.json")
    if orch.store.exists(session.session_id):
        document = orch.store.export_json(session.session_id)
        transcript_path.write_text(canonical_json(document), encoding="utf-8")
        print(f"\ntranscript written to {transcript_path}")
    if final.state is SessionState.COMPLETED:
        print(
            f"examination concluded: {final.questions_asked} questions, "
            f"confidence {final.verdict.confidence_score}"
        )
        return EXIT_OK
    print(f"examination did not complete (state {final.state.value})", file=sys.stderr)
    return EXIT_FAIL


HONEST_ANSWER = (
    "In that passage I was consolidating the prior argument, because the evidence "
    "discussed earlier only supports the weaker claim, and I wanted the reader to see "
    "how the stronger conclusion follows once the additional premise is granted."
)
TERSE_ANSWER = "It seemed right."


def _simulated_submission(index: int) -> bytes:
    sentences = [
        f"Essay {index} examines how institutions adapt their assessment practices when "
        f"circumstances change faster than their formal procedures can follow.",
        "The central claim is that oral examination persists because it couples judgment "
        "with interaction in a way written artefacts alone cannot reproduce.",
        "A second line of argument traces how transcripts and records alter the balance "
        "between trust in examiners and verifiability of the examination itself.",
        "The essay closes by weighing scalability against fairness and arguing that "
        "neither can be traded away entirely without changing what assessment means.",
    ]
    return ("\n\n".join(sentences)).encode("utf-8")


def _run_one_simulation(orch: Orchestrator, config: ExamConfig, index: int, answer_text: str):
    session = orch.create(config)
    sid = session.session_id
    _, question = orch.submit(sid, _simulated_submission(index), "text/plain")
    while True:
        result = orch.answer(sid, answer_text)
        if result.concluded:
            return orch.get(sid)


def _session_protocol_ok(orch: Orchestrator, session) -> bool:
    if session.state is not SessionState.COMPLETED:
        return False
    if not (session.config.min_questions <= session.questions_asked <= session.config.max_questions):
        return False
    entries = orch.store.entries(session.session_id)
    verdicts = [e for e in entries if e.role is Role.VERDICT]
    if len(verdicts) != 1:
        return False
    non_note = [e for e in entries if e.role is not Role.NOTE]
    return bool(non_note) and non_note[-1].role is Role.VERDICT


def cmd_simulate(args) -> int:
    try:
        config = _config_from_args(args, "mock")
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    answer_text = HONEST_ANSWER if args.answers == "honest" else TERSE_ANSWER
    orch = _build_orchestrator(args)

    sessions = []
    failures = 0
    if args.sessions > 0:
        with concurrent.futures.ThreadPoolExecutor(max_workers=min(32, max(1, args.sessions))) as pool:
            futures = [
                pool.submit(_run_one_simulation, orch, config, i, answer_text)
                for i in range(args.sessions)
            ]
            for future in futures:
                try:
                    sessions.append(future.result())
                except Exception as exc:  # session-level failure: report, keep going
                    failures += 1
                    print(f"session failed: {exc}", file=sys.stderr)

    print(f"{'session':<40} {'state':<12} {'questions':>9} {'confidence':>10}")
    for session in sorted(sessions, key=lambda s: s.session_id):
        confidence = session.verdict.confidence_score if session.verdict else "-"
        print(
            f"{session.session_id:<40} {session.state.value:<12} "
            f"{session.questions_asked:>9} {confidence:>10}"
        )
    print(f"\n{len(sessions)} of {args.sessions} sessions completed")
    if failures or any(not _session_protocol_ok(orch, s) for s in sessions):
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(args) -> int:
    path = Path(args.transcript)
    try:
        document = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"error: cannot parse transcript: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        report = verify_export(document)
    except MalformedExport as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if report.valid:
        print("chain Valid")
        return EXIT_OK
    print(f"chain BROKEN at seq {report.broken_seq}: {report.reason}")
    if report.expected_hash:
        print(f"  expected {report.expected_hash}")
        print(f"  found    {report.found_hash}")
    return EXIT_FAIL


def cmd_scan(args) -> int:
    path = Path(args.path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        sanitized = guard.sanitize(guard.ingest(data, "text/plain"))
    except guard.GuardError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if not sanitized.flags:
        print("no flags")
        return EXIT_OK
    print(f"{len(sanitized.flags)} flag(s) in {path.name}:")
    for flag in sanitized.flags:
        excerpt = flag.excerpt if len(flag.excerpt) <= 60 else flag.excerpt[:57] + "..."
        print(
            f"  [{flag.severity.value:<6}] {flag.rule_id:<22} "
            f"bytes {flag.span[0]}-{flag.span[1]}  {excerpt!r}  ({flag.description})"
        )
    return EXIT_FLAGGED


def _add_exam_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--min", type=int, default=4, help="minimum examiner questions")
    parser.add_argument("--max", type=int, default=5, help="maximum examiner questions")
    parser.add_argument("--context", default="", help="academic context for difficulty calibration")
    parser.add_argument("--config", help="service config file (provider settings, deterministic)")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        help="logical clock and sequential ids for reproducible transcripts",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viva", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="conduct a terminal examination on a submission file")
    p_run.add_argument("submission", help="path to a plain-text submission")
    p_run.add_argument("--provider", choices=["mock", "live"], default="mock")
    _add_exam_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sim = sub.add_parser("simulate", help="run a concurrent mock cohort with scripted answers")
    p_sim.add_argument("--sessions", type=int, default=10)
    p_sim.add_argument("--answers", choices=["honest", "terse"], default="honest")
    _add_exam_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_verify = sub.add_parser("verify", help="verify an exported transcript's hash chain")
    p_verify.add_argument("transcript", help="path to a canonical JSON export")
    p_verify.set_defaults(func=cmd_verify)

    p_scan = sub.add_parser("scan", help="scan a plain-text file for injection flags")
    p_scan.add_argument("path", help="file to scan")
    p_scan.set_defaults(func=cmd_scan)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
