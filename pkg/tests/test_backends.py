import math

import httpx
import pytest
from fastapi.testclient import TestClient

from promptbot.backend_api import create_backend_app
from promptbot.backends import (
    EchoBackend,
    GenerationRequest,
    LookupBackend,
    RemoteBackend,
    RetryPolicy,
    ScoredContinuation,
    UniformBackend,
    perplexity,
    truncate_generation,
)
from promptbot.errors import BackendTransportError, GenerationFault, WindowOverflowError


class TestScoredContinuation:
    def test_rejects_misaligned(self):
        with pytest.raises(ValueError):
            ScoredContinuation(tokens=("a",), logprobs=())

    def test_rejects_positive_logprob(self):
        with pytest.raises(ValueError):
            ScoredContinuation(tokens=("a",), logprobs=(0.1,))

    def test_totals(self):
        scored = ScoredContinuation(tokens=("a", "b"), logprobs=(-1.0, -2.0))
        assert scored.token_count == 2
        assert scored.total_logprob == -3.0


class TestTruncateGeneration:
    def test_cuts_at_earliest_stop(self):
        assert truncate_generation("hello\nworld", ("\n",), 150) == "hello"

    def test_cuts_at_max_tokens_on_token_boundary(self):
        assert truncate_generation("a b c d", ("\n",), 2) == "a b"

    def test_zero_max_tokens_is_empty(self):
        assert truncate_generation("a b", ("\n",), 0) == ""


class TestUniformBackend:
    def test_every_token_costs_log_vocab(self):
        backend = UniformBackend(vocab_size=50)
        scored = backend.score("ctx", "one two three")
        assert scored.logprobs == (-math.log(50),) * 3

    def test_perplexity_equals_vocab_size(self):
        backend = UniformBackend(vocab_size=50)
        assert abs(perplexity(backend, "ctx", "a b c d e") - 50.0) < 1e-9

    def test_perplexity_of_empty_continuation_undefined(self):
        with pytest.raises(ValueError):
            perplexity(UniformBackend(vocab_size=5), "ctx", "   ")

    def test_generate_overflow(self):
        backend = UniformBackend(vocab_size=5, context_window=10)
        with pytest.raises(WindowOverflowError):
            backend.generate(GenerationRequest(context="a b c", max_tokens=8))

    def test_score_overflow(self):
        backend = UniformBackend(vocab_size=5, context_window=4)
        with pytest.raises(WindowOverflowError):
            backend.score("a b c", "d e")


class TestLookupBackend:
    def test_longest_suffix_wins(self):
        backend = LookupBackend(
            table={"b c ": {"x": 0.5}, "a b c ": {"x": 0.25}}, default_prob=0.01
        )
        scored = backend.score("a b c ", "x")
        assert scored.logprobs[0] == pytest.approx(math.log(0.25))

    def test_default_prob_for_miss(self):
        backend = LookupBackend(table={}, default_prob=0.01)
        assert backend.score("ctx", "tok").logprobs[0] == pytest.approx(math.log(0.01))

    def test_prefix_additive_scoring(self):
        backend = LookupBackend(
            table={"hello ": {"there": 0.5}, "hello there ": {"friend": 0.25}},
            default_prob=0.01,
        )
        whole = backend.score("hello ", "there friend").total_logprob
        split = (
            backend.score("hello ", "there").total_logprob
            + backend.score("hello there ", "friend").total_logprob
        )
        assert whole == split

    def test_greedy_tie_breaks_to_smallest_token(self):
        backend = LookupBackend(table={"go ": {"zebra": 0.4, "apple": 0.4}})
        assert backend.generate(GenerationRequest(context="go ")) == "apple"

    def test_greedy_chains_tokens_with_spaces(self):
        backend = LookupBackend(
            table={"say ": {"one": 0.9}, "say one": {"two": 0.9}}
        )
        assert backend.generate(GenerationRequest(context="say ")) == "one two"

    def test_generation_stops_without_a_match(self):
        backend = LookupBackend(table={"say ": {"one": 0.9}})
        assert backend.generate(GenerationRequest(context="say ")) == "one"

    def test_scripted_generation_beats_chaining(self):
        backend = LookupBackend(
            table={"q:": {"chained": 0.9}}, generations={"q:": "scripted line"}
        )
        assert backend.generate(GenerationRequest(context="q:")) == "scripted line"

    def test_scripted_generation_respects_stop(self):
        backend = LookupBackend(generations={"q:": "first\nsecond"})
        assert backend.generate(GenerationRequest(context="q:")) == "first"

    def test_scripted_none_is_a_fault(self):
        backend = LookupBackend(generations={"q:": None})
        with pytest.raises(GenerationFault):
            backend.generate(GenerationRequest(context="q:"))

    def test_rejects_bad_probabilities(self):
        with pytest.raises(ValueError):
            LookupBackend(table={"k": {"t": 1.5}})
        with pytest.raises(ValueError):
            LookupBackend(default_prob=0.0)


class TestEchoBackend:
    def test_plays_longest_matching_script(self):
        backend = EchoBackend(script={"B:": "short", "A: hi\nB:": "long"})
        assert backend.generate(GenerationRequest(context="A: hi\nB:")) == "long"
        assert backend.calls == ["A: hi\nB:"]

    def test_none_and_missing_scripts_fault(self):
        backend = EchoBackend(script={"B:": None})
        with pytest.raises(GenerationFault):
            backend.generate(GenerationRequest(context="B:"))
        with pytest.raises(GenerationFault):
            backend.generate(GenerationRequest(context="no such suffix"))

    def test_score_is_free(self):
        backend = EchoBackend(script={})
        assert backend.score("c", "a b").logprobs == (0.0, 0.0)


class TestRetryPolicy:
    def test_delays_double(self):
        assert list(RetryPolicy(attempts=3, base_delay=0.2).delays()) == [0.2, 0.4, 0.8]


def remote_over(app) -> RemoteBackend:
    client = TestClient(app)
    return RemoteBackend(
        "http://testserver", client=client, retry=RetryPolicy(attempts=2, base_delay=0.0)
    )


class TestRemoteBackend:
    def test_round_trip_over_wire_protocol(self):
        inner = LookupBackend(
            table={"ctx ": {"tok": 0.5}},
            generations={"q:": "a reply"},
            context_window=512,
            name="wire-mock",
        )
        remote = remote_over(create_backend_app(inner))
        descriptor = remote.descriptor()
        assert (descriptor.name, descriptor.context_window) == ("wire-mock", 512)
        assert remote.generate(GenerationRequest(context="q:")) == "a reply"
        scored = remote.score("ctx ", "tok")
        assert scored.tokens == ("tok",)
        assert scored.logprobs[0] == pytest.approx(math.log(0.5))
        assert remote.count_tokens("a b c") == 3

    def test_window_overflow_maps_to_413_and_back(self):
        inner = UniformBackend(vocab_size=5, context_window=10)
        remote = remote_over(create_backend_app(inner))
        with pytest.raises(WindowOverflowError) as err:
            remote.generate(GenerationRequest(context="a b c d e f", max_tokens=8))
        assert err.value.token_count == 6

    def test_backend_fault_maps_to_503_then_transport_error(self):
        inner = EchoBackend(script={})
        remote = remote_over(create_backend_app(inner))
        with pytest.raises(BackendTransportError):
            remote.generate(GenerationRequest(context="nothing scripted"))
        assert len(inner.calls) == 2  # retried, then gave up

    def test_transient_errors_are_retried(self):
        attempts = {"n": 0}

        def handler(request: httpx.Request) -> httpx.Response:
            attempts["n"] += 1
            if attempts["n"] == 1:
                return httpx.Response(503)
            return httpx.Response(200, json={"count": 2})

        client = httpx.Client(transport=httpx.MockTransport(handler))
        remote = RemoteBackend(
            "http://mock", client=client, retry=RetryPolicy(attempts=3, base_delay=0.0)
        )
        assert remote.count_tokens("a b") == 2
        assert attempts["n"] == 2

    def test_each_call_carries_a_request_id(self):
        seen = []

        def handler(request: httpx.Request) -> httpx.Response:
            seen.append(request.headers.get("X-Request-Id"))
            return httpx.Response(200, json={"count": 1})

        client = httpx.Client(transport=httpx.MockTransport(handler))
        remote = RemoteBackend("http://mock", client=client)
        remote.count_tokens("x")
        remote.count_tokens("y")
        assert all(seen) and seen[0] != seen[1]
