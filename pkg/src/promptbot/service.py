"""HTTP chat service over the orchestrator.

Sessions live as JSON files under a store directory and survive restarts.
Per-session locks serialize concurrent messages to the same session. Binding
to anything but loopback requires an explicit acknowledgement flag.
"""

from __future__ import annotations

import json
import os
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import (
    ConfigurationError,
    GenerationFault,
    NotFoundError,
    ValidationError,
)
from .orchestrator import Orchestrator, Session

LOOPBACK_HOSTS = {"127.0.0.1", "localhost", "::1"}


class SessionStore:
    """One JSON file per session; writes are atomic via rename."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _path(self, session_id: str) -> str:
        if not session_id.isalnum():
            raise NotFoundError(f"no session {session_id!r}")
        return os.path.join(self.root, f"{session_id}.json")

    def lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def save(self, session: Session) -> None:
        path = self._path(session.id)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(session.to_dict(), fh, ensure_ascii=False)
        os.replace(tmp, path)

    def load(self, session_id: str) -> Session:
        path = self._path(session_id)
        if not os.path.exists(path):
            raise NotFoundError(f"no session {session_id!r}")
        with open(path, encoding="utf-8") as fh:
            return Session.from_dict(json.load(fh))

    def ids(self) -> list[str]:
        return sorted(
            name[: -len(".json")]
            for name in os.listdir(self.root)
            if name.endswith(".json")
        )


class CreateSessionBody(BaseModel):
    pin_skill: str | None = None


class MessageBody(BaseModel):
    text: str
    style: str | None = None
    pin_skill: str | None = None


def create_app(orchestrator: Orchestrator, store: SessionStore, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="promptbot")

    @app.exception_handler(NotFoundError)
    async def _not_found(request: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ValidationError)
    async def _invalid(request: Request, exc: ValidationError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ConfigurationError)
    async def _bad_config(request: Request, exc: ConfigurationError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(GenerationFault)
    async def _fault(request: Request, exc: GenerationFault):
        return JSONResponse(status_code=502, content={"detail": str(exc)})

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody | None = None):
        pin = body.pin_skill if body else None
        if pin is not None:
            orchestrator._skill(pin)  # fail fast on unknown pins
        session = Session.new(orchestrator.config, pinned_skill=pin)
        store.save(session)
        return {"id": session.id}

    @app.post("/api/sessions/{session_id}/message")
    def post_message(session_id: str, body: MessageBody):
        with store.lock(session_id):
            session = store.load(session_id)
            bundle = orchestrator.step(
                session, body.text, style=body.style, pin_skill=body.pin_skill
            )
            store.save(session)
        return bundle.to_dict()

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.load(session_id)
        return session.to_dict()

    @app.get("/api/skills")
    def get_skills():
        return {"skills": [s.to_dict() for s in orchestrator.config.skills.values()]}

    @app.get("/api/styles")
    def get_styles():
        return {"styles": list(orchestrator.config.styles)}

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def check_bind(host: str, acknowledge_remote: bool) -> None:
    """Refuse non-loopback binds unless explicitly acknowledged."""
    if host not in LOOPBACK_HOSTS and not acknowledge_remote:
        raise ConfigurationError(
            f"refusing to bind {host!r}: pass the remote-exposure acknowledgement "
            "flag to serve beyond loopback"
        )


def serve(
    orchestrator: Orchestrator,
    store: SessionStore,
    host: str = "127.0.0.1",
    port: int = 8080,
    acknowledge_remote: bool = False,
    static_dir: str | None = None,
) -> None:
    import uvicorn

    check_bind(host, acknowledge_remote)
    app = create_app(orchestrator, store, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)
