"""Test-only backends: deterministic pseudo-random scoring and call recording."""

from __future__ import annotations

import hashlib
import re

from promptbot.backends import (
    BackendDescriptor,
    GenerationRequest,
    ScoredContinuation,
    truncate_generation,
)

_TOKEN_RE = re.compile(r"\S+")


class HashBackend:
    """Scores every token with a stable pseudo-random logprob in [-6, -1].

    The logprob depends only on (tail of the context so far, token), so scoring
    is deterministic across runs and prefix-additive in the same way the
    production scoring walk is. Generation plays back suffix-keyed scripts.
    """

    def __init__(
        self,
        generations: dict[str, str] | None = None,
        context_window: int = 1_000_000,
        name: str = "hash-mock",
        salt: str = "",
    ):
        self.generations = dict(generations or {})
        self.salt = salt
        self._descriptor = BackendDescriptor(name=name, context_window=context_window)

    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def count_tokens(self, text: str) -> int:
        return len(text.split())

    def _logprob(self, current: str, token: str) -> float:
        payload = (self.salt + current[-48:] + "\x1f" + token).encode("utf-8")
        digest = hashlib.sha256(payload).digest()
        return -1.0 - 5.0 * (int.from_bytes(digest[:4], "big") % 10_000) / 10_000

    def score(self, context: str, continuation: str) -> ScoredContinuation:
        tokens: list[str] = []
        logprobs: list[float] = []
        for span in _TOKEN_RE.finditer(continuation):
            current = context + continuation[: span.start()]
            tokens.append(span.group())
            logprobs.append(self._logprob(current, span.group()))
        return ScoredContinuation(tokens=tuple(tokens), logprobs=tuple(logprobs))

    def generate(self, request: GenerationRequest) -> str:
        best = None
        for key in self.generations:
            if request.context.endswith(key) and (best is None or len(key) > len(best)):
                best = key
        if best is None:
            return ""
        return truncate_generation(self.generations[best], request.stop, request.max_tokens)


class RecordingBackend:
    """Delegates to another backend while recording every call's inputs."""

    def __init__(self, inner):
        self.inner = inner
        self.generate_contexts: list[str] = []
        self.score_calls: list[tuple[str, str]] = []

    def descriptor(self):
        return self.inner.descriptor()

    def count_tokens(self, text: str) -> int:
        return self.inner.count_tokens(text)

    def generate(self, request: GenerationRequest) -> str:
        self.generate_contexts.append(request.context)
        return self.inner.generate(request)

    def score(self, context: str, continuation: str) -> ScoredContinuation:
        self.score_calls.append((context, continuation))
        return self.inner.score(context, continuation)
