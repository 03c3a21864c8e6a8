"""Language-model backends behind one small boundary.

Everything above this module talks to a backend through four calls: describe
yourself, generate greedily, score a continuation token-by-token, and count
tokens. Mock backends implement the same contract as the HTTP client so every
other module can be exercised offline and deterministically.
"""

from __future__ import annotations

import math
import re
import time
import uuid
from dataclasses import dataclass, field
from typing import Protocol

import httpx

from .errors import BackendTransportError, GenerationFault, WindowOverflowError

DEFAULT_MAX_TOKENS = 150
DEFAULT_STOP = ("\n",)

_TOKEN_RE = re.compile(r"\S+")


def whitespace_token_count(text: str) -> int:
    """Token rule shared by all mock backends."""
    return len(text.split())


@dataclass(frozen=True)
class GenerationRequest:
    context: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    stop: tuple[str, ...] = DEFAULT_STOP
    greedy: bool = True


@dataclass(frozen=True)
class ScoredContinuation:
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.logprobs):
            raise ValueError("tokens and logprobs must align")
        if any(lp > 0 for lp in self.logprobs):
            raise ValueError("logprobs must be <= 0")

    @property
    def token_count(self) -> int:
        return len(self.tokens)

    @property
    def total_logprob(self) -> float:
        return sum(self.logprobs)


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    context_window: int


class LMBackend(Protocol):
    def descriptor(self) -> BackendDescriptor: ...

    def generate(self, request: GenerationRequest) -> str: ...

    def score(self, context: str, continuation: str) -> ScoredContinuation: ...

    def count_tokens(self, text: str) -> int: ...


def perplexity(backend: LMBackend, context: str, continuation: str) -> float:
    """exp of the negative mean token logprob of the continuation."""
    scored = backend.score(context, continuation)
    if scored.token_count == 0:
        raise ValueError("perplexity of an empty continuation is undefined")
    return math.exp(-scored.total_logprob / scored.token_count)


def truncate_generation(text: str, stop: tuple[str, ...], max_tokens: int) -> str:
    """Cut emitted text at the earliest stop sequence, then at max_tokens."""
    cut = len(text)
    for seq in stop:
        pos = text.find(seq)
        if pos != -1:
            cut = min(cut, pos)
    text = text[:cut]
    spans = list(_TOKEN_RE.finditer(text))
    if len(spans) > max_tokens:
        text = text[: spans[max_tokens - 1].end()] if max_tokens > 0 else ""
    return text


class _MockBase:
    """Window accounting shared by the in-process mocks."""

    def __init__(self, name: str, context_window: int):
        self._descriptor = BackendDescriptor(name=name, context_window=context_window)

    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def count_tokens(self, text: str) -> int:
        return whitespace_token_count(text)

    def _check_generate(self, request: GenerationRequest) -> None:
        used = self.count_tokens(request.context)
        if used + request.max_tokens > self._descriptor.context_window:
            raise WindowOverflowError(
                f"context of {used} tokens plus {request.max_tokens} new tokens "
                f"exceeds window {self._descriptor.context_window}",
                token_count=used,
            )

    def _check_score(self, context: str, continuation: str) -> None:
        used = self.count_tokens(context) + self.count_tokens(continuation)
        if used > self._descriptor.context_window:
            raise WindowOverflowError(
                f"scoring request of {used} tokens exceeds window "
                f"{self._descriptor.context_window}",
                token_count=used,
            )


class UniformBackend(_MockBase):
    """Every token of every continuation has probability 1/vocab_size."""

    def __init__(self, vocab_size: int, context_window: int = 2048, name: str = "uniform-mock"):
        super().__init__(name, context_window)
        if vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        self._logprob = -math.log(vocab_size)

    def generate(self, request: GenerationRequest) -> str:
        self._check_generate(request)
        return ""

    def score(self, context: str, continuation: str) -> ScoredContinuation:
        self._check_score(context, continuation)
        tokens = tuple(continuation.split())
        return ScoredContinuation(tokens=tokens, logprobs=(self._logprob,) * len(tokens))


class LookupBackend(_MockBase):
    """Table-driven mock.

    `table` maps a context suffix to a next-token distribution; scoring matches
    the longest key that is a suffix of (context + continuation so far) and
    falls back to `default_prob` for unlisted tokens or unmatched contexts.
    `generations` optionally scripts whole emissions by context suffix (a None
    value simulates a backend fault at that point); without a script,
    generation chains greedy argmax tokens (ties break to the lexicographically
    smallest token).
    """

    def __init__(
        self,
        table: dict[str, dict[str, float]] | None = None,
        generations: dict[str, str | None] | None = None,
        default_prob: float = 1e-6,
        context_window: int = 2048,
        name: str = "lookup-mock",
    ):
        super().__init__(name, context_window)
        self.table = dict(table or {})
        self.generations = dict(generations or {})
        for dist in self.table.values():
            for token, prob in dist.items():
                if not 0 < prob <= 1:
                    raise ValueError(f"probability for {token!r} outside (0, 1]: {prob}")
        if not 0 < default_prob <= 1:
            raise ValueError("default_prob must be in (0, 1]")
        self.default_prob = default_prob

    def _match(self, current: str, keys) -> str | None:
        best = None
        for key in keys:
            if current.endswith(key) and (best is None or len(key) > len(best)):
                best = key
        return best

    def score(self, context: str, continuation: str) -> ScoredContinuation:
        self._check_score(context, continuation)
        tokens: list[str] = []
        logprobs: list[float] = []
        for span in _TOKEN_RE.finditer(continuation):
            current = context + continuation[: span.start()]
            key = self._match(current, self.table)
            dist = self.table[key] if key is not None else {}
            prob = dist.get(span.group(), self.default_prob)
            tokens.append(span.group())
            logprobs.append(math.log(prob))
        return ScoredContinuation(tokens=tuple(tokens), logprobs=tuple(logprobs))

    def _greedy_token(self, current: str) -> str | None:
        key = self._match(current, self.table)
        if key is None:
            return None
        dist = self.table[key]
        best_prob = max(dist.values())
        return min(token for token, prob in dist.items() if prob == best_prob)

    def generate(self, request: GenerationRequest) -> str:
        self._check_generate(request)
        scripted = self._match(request.context, self.generations)
        if scripted is not None:
            value = self.generations[scripted]
            if value is None:
                raise GenerationFault(
                    f"scripted fault for context ending {scripted[-40:]!r}"
                )
            return truncate_generation(value, request.stop, request.max_tokens)
        current = request.context
        emitted = ""
        for _ in range(request.max_tokens):
            token = self._greedy_token(current)
            if token is None:
                break
            joint = token if (not emitted or token == "\n") else " " + token
            emitted += joint
            current += joint
            for seq in request.stop:
                if seq in emitted:
                    return truncate_generation(emitted, request.stop, request.max_tokens)
        return truncate_generation(emitted, request.stop, request.max_tokens)


class EchoBackend(_MockBase):
    """Plays back scripted responses keyed by context suffix.

    A script value of None simulates a backend fault at that point, which the
    orchestrator must treat as a failed, rolled-back step.
    """

    def __init__(
        self,
        script: dict[str, str | None],
        context_window: int = 2048,
        name: str = "echo-mock",
    ):
        super().__init__(name, context_window)
        self.script = dict(script)
        self.calls: list[str] = []

    def generate(self, request: GenerationRequest) -> str:
        self._check_generate(request)
        self.calls.append(request.context)
        best = None
        for key in self.script:
            if request.context.endswith(key) and (best is None or len(key) > len(best)):
                best = key
        if best is None:
            raise GenerationFault(
                f"no scripted response for context ending {request.context[-80:]!r}"
            )
        response = self.script[best]
        if response is None:
            raise GenerationFault(f"scripted fault for context ending {best[-40:]!r}")
        return truncate_generation(response, request.stop, request.max_tokens)

    def score(self, context: str, continuation: str) -> ScoredContinuation:
        self._check_score(context, continuation)
        tokens = tuple(continuation.split())
        return ScoredContinuation(tokens=tokens, logprobs=(0.0,) * len(tokens))


@dataclass
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 0.2

    def delays(self):
        for i in range(self.attempts):
            yield self.base_delay * (2**i)


_RETRYABLE_STATUS = {502, 503, 504}


class RemoteBackend:
    """HTTP client for any server speaking the backend wire protocol.

    Transport failures and gateway errors are retried with exponential backoff;
    window overflows are surfaced immediately and never retried.
    """

    def __init__(
        self,
        base_url: str,
        client: httpx.Client | None = None,
        retry: RetryPolicy | None = None,
        timeout: float = 30.0,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)
        self._retry = retry or RetryPolicy()
        self._info: BackendDescriptor | None = None

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        last_error: Exception | None = None
        headers = {"X-Request-Id": uuid.uuid4().hex}
        for delay in self._retry.delays():
            try:
                response = self._client.request(
                    method, self.base_url + path, json=payload, headers=headers
                )
            except httpx.TransportError as exc:
                last_error = exc
                time.sleep(delay)
                continue
            if response.status_code == 413:
                detail = response.json().get("detail", {})
                raise WindowOverflowError(
                    str(detail.get("error", "window overflow")),
                    token_count=int(detail.get("token_count", -1)),
                )
            if response.status_code in _RETRYABLE_STATUS:
                last_error = BackendTransportError(
                    f"{path} returned {response.status_code}"
                )
                time.sleep(delay)
                continue
            response.raise_for_status()
            return response.json()
        raise BackendTransportError(
            f"backend unreachable after {self._retry.attempts} attempts: {last_error}"
        )

    def descriptor(self) -> BackendDescriptor:
        if self._info is None:
            data = self._request("GET", "/v1/info")
            self._info = BackendDescriptor(
                name=data["name"], context_window=int(data["context_window"])
            )
        return self._info

    def generate(self, request: GenerationRequest) -> str:
        data = self._request(
            "POST",
            "/v1/generate",
            {
                "context": request.context,
                "max_tokens": request.max_tokens,
                "stop": list(request.stop),
                "greedy": request.greedy,
            },
        )
        return data["text"]

    def score(self, context: str, continuation: str) -> ScoredContinuation:
        data = self._request(
            "POST", "/v1/score", {"context": context, "continuation": continuation}
        )
        return ScoredContinuation(
            tokens=tuple(data["tokens"]), logprobs=tuple(data["logprobs"])
        )

    def count_tokens(self, text: str) -> int:
        data = self._request("POST", "/v1/tokenize", {"text": text})
        return int(data["count"])
