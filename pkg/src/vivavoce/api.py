"""Role-scoped HTTP surface for students, invigilators, and assessors.

Students interact only with their own session (upload, answer) and never
see injection flags or the verdict.  Invigilators watch live transcript
streams and may abort a session; assessors create sessions, review
verdicts and flags, list the cohort, and download exports.  Authentication
is a static bearer token per principal: cohort tokens are provisioned at
setup, student tokens are minted per session.

The event stream is `text/event-stream` with `id:` equal to the entry
sequence number, so clients resume with standard Last-Event-ID semantics.
"""

from __future__ import annotations

import asyncio
import json
import secrets
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from starlette.concurrency import run_in_threadpool

from . import guard
from .core import ExamConfig, InvalidConfig, SessionState
from .engine import ProtocolExhausted, ProviderUnavailable
from .orchestrator import (
    FLAGS_NOTE_KIND,
    ABORT_PREFIX,
    EmptyAnswer,
    Orchestrator,
    SessionTimedOut,
    WrongState,
)
from .transcript import Role, TranscriptEntry, UnknownSession, canonical_json

SSE_POLL_SECONDS = 0.05
SSE_KEEPALIVE_SECONDS = 15.0


class PrincipalRole(Enum):
    STUDENT = "student"
    INVIGILATOR = "invigilator"
    ASSESSOR = "assessor"


@dataclass(frozen=True)
class Principal:
    token: str
    role: PrincipalRole
    session_scope: frozenset[str] = frozenset()

    def may_touch(self, session_id: str) -> bool:
        return not self.session_scope or session_id in self.session_scope


class AuthRegistry:
    """Bearer-token table; students are scoped to exactly one session."""

    def __init__(self):
        self._principals: dict[str, Principal] = {}
        self._lock = threading.Lock()

    def add(self, token: str, role: PrincipalRole, session_scope: frozenset[str] = frozenset()) -> None:
        with self._lock:
            self._principals[token] = Principal(token, role, session_scope)

    def mint_student_token(self, session_id: str) -> str:
        token = secrets.token_urlsafe(24)
        self.add(token, PrincipalRole.STUDENT, frozenset({session_id}))
        return token

    def resolve(self, token: str) -> Principal | None:
        with self._lock:
            return self._principals.get(token)


def create_app(orchestrator: Orchestrator, auth: AuthRegistry, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="vivavoce", docs_url=None, redoc_url=None)
    app.state.orchestrator = orchestrator
    app.state.auth = auth

    def principal_of(request: Request) -> Principal:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        principal = auth.resolve(header[7:].strip())
        if principal is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return principal

    def require(request: Request, *roles: PrincipalRole, session_id: str | None = None) -> Principal:
        principal = principal_of(request)
        if principal.role not in roles:
            raise HTTPException(status_code=403, detail="role not permitted on this endpoint")
        if session_id is not None and not principal.may_touch(session_id):
            raise HTTPException(status_code=403, detail="session outside this token's scope")
        return principal

    def get_session(session_id: str):
        try:
            return orchestrator.get(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail="unknown session")

    # -- health ----------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    # -- session lifecycle -------------------------------------------------

    @app.post("/sessions", status_code=201)
    async def create_session_endpoint(request: Request):
        require(request, PrincipalRole.ASSESSOR)
        try:
            body = await request.json() if await request.body() else {}
        except json.JSONDecodeError:
            raise HTTPException(status_code=400, detail="body must be a JSON config object")
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="body must be a JSON config object")
        allowed = {
            "min_questions",
            "max_questions",
            "academic_context",
            "answer_timeout",
            "provider_id",
            "max_provider_retries",
        }
        unknown = set(body) - allowed
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown config fields: {sorted(unknown)}")
        try:
            config = ExamConfig(**body).validate()
        except (InvalidConfig, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session = orchestrator.create(config)
        student_token = auth.mint_student_token(session.session_id)
        return JSONResponse(
            status_code=201,
            content={
                "session_id": session.session_id,
                "student_token": student_token,
                "state": session.state.value,
            },
        )

    @app.post("/sessions/{session_id}/submission")
    async def submit_endpoint(session_id: str, request: Request):
        require(request, PrincipalRole.STUDENT, session_id=session_id)
        get_session(session_id)
        declared = request.headers.get("content-type", "text/plain") or "text/plain"
        data = await request.body()
        try:
            session, question = await run_in_threadpool(
                orchestrator.submit, session_id, data, declared
            )
        except WrongState as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except guard.UnsupportedFormat as exc:
            raise HTTPException(status_code=415, detail=str(exc))
        except guard.OversizeSubmission as exc:
            raise HTTPException(status_code=413, detail=str(exc))
        except (guard.EmptySubmission, guard.InvalidEncoding) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except ProviderUnavailable as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except ProtocolExhausted as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        # No flag details here: sanitization findings are invigilator/assessor-facing.
        return {
            "question": question,
            "questions_remaining": session.config.max_questions - session.questions_asked,
            "submission": {
                "word_count": session.submission.word_count,
                "sha256": session.submission.original_digest,
            },
        }

    @app.post("/sessions/{session_id}/answers")
    async def answer_endpoint(session_id: str, request: Request):
        require(request, PrincipalRole.STUDENT, session_id=session_id)
        get_session(session_id)
        raw = await request.body()
        content_type = (request.headers.get("content-type") or "").split(";")[0].strip()
        if content_type == "application/json":
            try:
                payload = json.loads(raw.decode("utf-8"))
                text = payload.get("answer", "") if isinstance(payload, dict) else ""
            except (json.JSONDecodeError, UnicodeDecodeError):
                raise HTTPException(status_code=422, detail="body is not valid JSON")
        else:
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise HTTPException(status_code=422, detail="body is not valid UTF-8")
        try:
            result = await run_in_threadpool(orchestrator.answer, session_id, text)
        except EmptyAnswer as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except SessionTimedOut as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except WrongState as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ProviderUnavailable as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except ProtocolExhausted as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        if result.concluded:
            return {"status": "concluded"}
        return {"question": result.question, "questions_remaining": result.questions_remaining}

    @app.post("/sessions/{session_id}/abort")
    async def abort_endpoint(session_id: str, request: Request):
        require(request, PrincipalRole.INVIGILATOR)
        get_session(session_id)
        try:
            body = await request.json() if await request.body() else {}
        except json.JSONDecodeError:
            body = {}
        reason = body.get("reason", "aborted by invigilator") if isinstance(body, dict) else "aborted by invigilator"
        try:
            await run_in_threadpool(orchestrator.abort, session_id, reason)
        except WrongState as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"status": "aborted"}

    # -- observation ---------------------------------------------------------

    @app.get("/sessions")
    def list_sessions(
        request: Request,
        offset: int = Query(default=0, ge=0),
        limit: int = Query(default=50, ge=1, le=500),
    ):
        # Invigilators watch the cohort live, so the listing (states and flag
        # counts, never verdict content) is readable by both oversight roles.
        require(request, PrincipalRole.ASSESSOR, PrincipalRole.INVIGILATOR)
        sessions = sorted(orchestrator.list_sessions(), key=lambda s: (s.created_at, s.session_id))
        window = sessions[offset : offset + limit]
        return {
            "total": len(sessions),
            "sessions": [
                {
                    "session_id": s.session_id,
                    "state": s.state.value,
                    "questions_asked": s.questions_asked,
                    "flag_count": len(s.submission.flags) if s.submission else 0,
                    "created_at": s.created_at,
                    "concluded_at": s.concluded_at,
                }
                for s in window
            ],
        }

    @app.get("/sessions/{session_id}/assessment")
    def assessment_endpoint(session_id: str, request: Request):
        require(request, PrincipalRole.ASSESSOR)
        session = get_session(session_id)
        if session.state not in (SessionState.COMPLETED, SessionState.ABORTED):
            raise HTTPException(status_code=409, detail="session has not concluded")
        verdict = None
        if session.verdict is not None:
            verdict = {
                "assessment": session.verdict.assessment,
                "confidence_score": session.verdict.confidence_score,
            }
        abort_reason = None
        for entry in session.turns:
            if entry.role is Role.SYSTEM and entry.content.startswith(ABORT_PREFIX):
                abort_reason = entry.content[len(ABORT_PREFIX):]
        return {
            "session_id": session_id,
            "state": session.state.value,
            "verdict": verdict,
            "abort_reason": abort_reason,
            "flags": [f.to_dict() for f in session.submission.flags] if session.submission else [],
            "submission_text": session.submission.text if session.submission else None,
            "chain": orchestrator.store.verify_chain(session_id).to_dict(),
            "export": {
                "json": f"/sessions/{session_id}/export?format=json",
                "text": f"/sessions/{session_id}/export?format=text",
            },
        }

    @app.get("/sessions/{session_id}/export")
    def export_endpoint(session_id: str, request: Request, format: str = Query(default="json")):
        require(request, PrincipalRole.ASSESSOR)
        get_session(session_id)
        if format == "json":
            document = orchestrator.store.export_json(session_id)
            return Response(content=canonical_json(document), media_type="application/json")
        if format == "text":
            return PlainTextResponse(orchestrator.store.export_text(session_id))
        raise HTTPException(status_code=415, detail=f"unsupported export format {format!r}")

    @app.get("/sessions/{session_id}/events")
    async def events_endpoint(session_id: str, request: Request, last_id: int | None = Query(default=None)):
        require(request, PrincipalRole.INVIGILATOR, PrincipalRole.ASSESSOR)
        get_session(session_id)
        header_last = request.headers.get("last-event-id")
        resume_after = last_id if last_id is not None else -1
        if header_last is not None:
            try:
                resume_after = int(header_last)
            except ValueError:
                pass

        async def stream():
            after = resume_after
            idle = 0.0
            while True:
                entries, sealed = orchestrator.store.snapshot_since(session_id, after)
                for entry in entries:
                    yield _entry_frame(entry)
                    flag_frame = _maybe_flag_frame(entry)
                    if flag_frame:
                        yield flag_frame
                    after = entry.seq
                if entries:
                    idle = 0.0
                if sealed and not entries:
                    remaining, _ = orchestrator.store.snapshot_since(session_id, after)
                    if not remaining:
                        yield _sealed_frame(orchestrator.store.sealed_at(session_id))
                        return
                if await request.is_disconnected():
                    return
                await asyncio.sleep(SSE_POLL_SECONDS)
                idle += SSE_POLL_SECONDS
                if idle >= SSE_KEEPALIVE_SECONDS:
                    idle = 0.0
                    yield ": keepalive\n\n"

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=static_dir, html=True), name="app")

    return app


def _entry_frame(entry: TranscriptEntry) -> str:
    return f"id: {entry.seq}\nevent: entry\ndata: {canonical_json(entry.to_dict())}\n\n"


def _maybe_flag_frame(entry: TranscriptEntry) -> str | None:
    """Note entries carrying sanitization findings also raise a `flag` event."""
    if entry.role is not Role.NOTE or not entry.content.startswith("{"):
        return None
    try:
        payload = json.loads(entry.content)
    except json.JSONDecodeError:
        return None
    if isinstance(payload, dict) and payload.get("kind") == FLAGS_NOTE_KIND:
        return f"event: flag\ndata: {canonical_json(payload)}\n\n"
    return None


def _sealed_frame(sealed_at: str | None) -> str:
    return f"event: sealed\ndata: {canonical_json({'sealed_at': sealed_at})}\n\n"


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8800
    store_path: str | None = None
    tokens_path: str | None = None
    static_dir: str | None = None
    deterministic: bool = False
    # live-provider settings; the credential itself is environment-only
    provider_endpoint: str | None = None
    provider_model: str | None = None
    provider_temperature: float | None = None


def load_service_config(path: str | Path) -> ServiceConfig:
    raw = json.loads(Path(path).read_text("utf-8"))
    provider = raw.get("provider", {})
    temperature = provider.get("temperature")
    return ServiceConfig(
        host=raw.get("host", "127.0.0.1"),
        port=int(raw.get("port", 8800)),
        store_path=raw.get("store_path"),
        tokens_path=raw.get("tokens_path"),
        static_dir=raw.get("static_dir"),
        deterministic=bool(raw.get("deterministic", False)),
        provider_endpoint=provider.get("endpoint"),
        provider_model=provider.get("model"),
        provider_temperature=float(temperature) if temperature is not None else None,
    )


def build_service(config: ServiceConfig, env=None) -> FastAPI:
    """Wire store, runner, and cohort tokens into a ready application.

    Cohort tokens come from the tokens file; the VIVA_ASSESSOR_TOKENS and
    VIVA_INVIGILATOR_TOKENS environment variables (comma-separated)
    override it so secrets can stay out of config files.
    """
    import os

    from .providers import configured_provider_factory
    from .runtime import LogicalClock, SequentialIds
    from .transcript import TranscriptStore

    env = env if env is not None else os.environ
    provider_factory = configured_provider_factory(
        endpoint=config.provider_endpoint,
        model=config.provider_model,
        temperature=config.provider_temperature,
        env=env,
    )
    store = TranscriptStore(config.store_path)
    if config.deterministic:
        orchestrator = Orchestrator(
            store=store,
            clock=LogicalClock(),
            ids=SequentialIds(),
            provider_factory=provider_factory,
        )
    else:
        orchestrator = Orchestrator(store=store, provider_factory=provider_factory)
    auth = AuthRegistry()
    tokens: dict = {}
    if config.tokens_path:
        tokens = json.loads(Path(config.tokens_path).read_text("utf-8"))
    for role, env_name in (
        (PrincipalRole.ASSESSOR, "VIVA_ASSESSOR_TOKENS"),
        (PrincipalRole.INVIGILATOR, "VIVA_INVIGILATOR_TOKENS"),
    ):
        configured = tokens.get(role.value, [])
        override = env.get(env_name)
        if override:
            configured = [t.strip() for t in override.split(",") if t.strip()]
        for token in configured:
            auth.add(token, role)
    return create_app(orchestrator, auth, static_dir=config.static_dir)


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(build_service(config), host=config.host, port=config.port, log_level="info")
