"""HTTP server side of the backend wire protocol.

Wraps any in-process backend (usually a mock) so remote clients can talk to it.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backends import GenerationRequest, LMBackend
from .errors import GenerationFault, WindowOverflowError


class GenerateBody(BaseModel):
    context: str
    max_tokens: int = 150
    stop: list[str] = Field(default_factory=lambda: ["\n"])
    greedy: bool = True


class ScoreBody(BaseModel):
    context: str
    continuation: str


class TokenizeBody(BaseModel):
    text: str


def create_backend_app(backend: LMBackend) -> FastAPI:
    app = FastAPI(title="lm-backend")

    @app.exception_handler(WindowOverflowError)
    async def _overflow(request: Request, exc: WindowOverflowError):
        return JSONResponse(
            status_code=413,
            content={"detail": {"error": str(exc), "token_count": exc.token_count}},
        )

    @app.exception_handler(GenerationFault)
    async def _fault(request: Request, exc: GenerationFault):
        return JSONResponse(status_code=503, content={"detail": {"error": str(exc)}})

    @app.get("/v1/info")
    def info():
        desc = backend.descriptor()
        return {"name": desc.name, "context_window": desc.context_window}

    @app.post("/v1/generate")
    def generate(body: GenerateBody):
        text = backend.generate(
            GenerationRequest(
                context=body.context,
                max_tokens=body.max_tokens,
                stop=tuple(body.stop),
                greedy=body.greedy,
            )
        )
        return {"text": text}

    @app.post("/v1/score")
    def score(body: ScoreBody):
        scored = backend.score(body.context, body.continuation)
        return {"tokens": list(scored.tokens), "logprobs": list(scored.logprobs)}

    @app.post("/v1/tokenize")
    def tokenize(body: TokenizeBody):
        return {"count": backend.count_tokens(body.text)}

    return app
