"""Tests for the completion gateway: digests, transcript store, record/replay, retries."""
from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from ombench.gateway import (
    Completion,
    CompletionRequest,
    ConfigError,
    HttpChatTransport,
    LLMGateway,
    ProviderError,
    ReplayMiss,
    TokenUsage,
    TranscriptStore,
    cache_key,
    sum_usage,
)


def _request(**overrides: object) -> CompletionRequest:
    base: dict = dict(
        model="m-1",
        messages=(("user", "maximize profit"),),
        temperature=0.0,
        max_tokens=None,
        seed_tag="t1",
    )
    base.update(overrides)
    return CompletionRequest(**base)


class CountingTransport:
    """Scripted transport that counts how many times it is invoked."""

    def __init__(self, completion: Completion | None = None) -> None:
        self.calls: list[CompletionRequest] = []
        self.completion = completion or Completion(
            text="ok", usage=TokenUsage(prompt_tokens=10, completion_tokens=5)
        )

    def __call__(self, request: CompletionRequest) -> Completion:
        self.calls.append(request)
        return self.completion


# ---------------------------------------------------------------------------
# cache_key
# ---------------------------------------------------------------------------

def test_cache_key_is_stable_hex_digest() -> None:
    key = cache_key(_request())
    assert key == cache_key(_request())
    assert len(key) == 64
    int(key, 16)


@pytest.mark.parametrize(
    "change",
    [
        {"model": "m-2"},
        {"temperature": 0.7},
        {"seed_tag": "t2"},
        {"max_tokens": 256},
        {"messages": (("user", "maximize profit!"),)},
        {"messages": (("system", "maximize profit"),)},
        {"messages": (("user", "maximize profit"), ("user", "again"))},
    ],
)
def test_cache_key_changes_with_any_request_field(change: dict) -> None:
    assert cache_key(_request(**change)) != cache_key(_request())


def test_cache_key_distinguishes_message_order() -> None:
    a = _request(messages=(("user", "one"), ("user", "two")))
    b = _request(messages=(("user", "two"), ("user", "one")))
    assert cache_key(a) != cache_key(b)


@given(text=st.text(min_size=1, max_size=80), suffix=st.text(min_size=1, max_size=8))
def test_cache_key_sensitive_to_message_content(text: str, suffix: str) -> None:
    a = _request(messages=(("user", text),))
    b = _request(messages=(("user", text + suffix),))
    assert cache_key(a) != cache_key(b)


# ---------------------------------------------------------------------------
# token usage
# ---------------------------------------------------------------------------

def test_sum_usage_of_nothing_is_zero() -> None:
    assert sum_usage([]) == TokenUsage(0, 0)


def test_sum_usage_adds_componentwise() -> None:
    total = sum_usage([TokenUsage(1, 2), TokenUsage(10, 20), TokenUsage(100, 200)])
    assert total == TokenUsage(111, 222)


def test_negative_usage_rejected() -> None:
    with pytest.raises(ValueError):
        TokenUsage(prompt_tokens=-1, completion_tokens=0)


@given(
    counts=st.lists(
        st.tuples(st.integers(0, 10_000), st.integers(0, 10_000)), max_size=20
    ),
    split=st.integers(min_value=0, max_value=20),
)
def test_sum_usage_is_grouping_invariant(counts: list[tuple[int, int]], split: int) -> None:
    usages = [TokenUsage(p, c) for p, c in counts]
    split = min(split, len(usages))
    left, right = usages[:split], usages[split:]
    assert sum_usage([sum_usage(left), sum_usage(right)]) == sum_usage(usages)


# ---------------------------------------------------------------------------
# record / replay
# ---------------------------------------------------------------------------

def test_record_persists_one_file_per_digest(tmp_path: Path) -> None:
    store = TranscriptStore(tmp_path / "transcripts")
    transport = CountingTransport()
    gateway = LLMGateway(mode="record", store=store, transport=transport)
    request = _request()

    completion = gateway.complete(request)

    assert completion.text == "ok"
    assert len(transport.calls) == 1
    files = list((tmp_path / "transcripts").glob("*.json"))
    assert [f.stem for f in files] == [cache_key(request)]
    payload = json.loads(files[0].read_text())
    assert payload["version"] == 1
    assert payload["completion"]["text"] == "ok"
    assert payload["completion"]["usage"]["prompt_tokens"] == 10


def test_replay_returns_identical_completion_without_transport(tmp_path: Path) -> None:
    store = TranscriptStore(tmp_path)
    recorded = Completion(
        text="the\nanswer",
        usage=TokenUsage(7, 3),
        provider_meta={"finish_reason": "stop", "id": "abc"},
    )
    request = _request()
    LLMGateway(mode="record", store=store, transport=CountingTransport(recorded)).complete(request)

    transport = CountingTransport()
    replayed = LLMGateway(mode="replay", store=store, transport=transport).complete(request)

    assert replayed == recorded
    assert transport.calls == []


def test_replay_miss_raises_with_digest(tmp_path: Path) -> None:
    gateway = LLMGateway(mode="replay", store=TranscriptStore(tmp_path))
    request = _request()
    with pytest.raises(ReplayMiss) as err:
        gateway.complete(request)
    assert cache_key(request) in str(err.value)


def test_record_mode_always_calls_transport(tmp_path: Path) -> None:
    transport = CountingTransport()
    gateway = LLMGateway(mode="record", store=TranscriptStore(tmp_path), transport=transport)
    gateway.complete(_request())
    gateway.complete(_request())
    assert len(transport.calls) == 2


def test_live_mode_does_not_persist(tmp_path: Path) -> None:
    transport = CountingTransport()
    gateway = LLMGateway(mode="live", store=TranscriptStore(tmp_path), transport=transport)
    gateway.complete(_request())
    assert list(tmp_path.glob("*.json")) == []


def test_replay_requires_store() -> None:
    with pytest.raises(ConfigError):
        LLMGateway(mode="replay")


def test_record_requires_transport(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        LLMGateway(mode="record", store=TranscriptStore(tmp_path)).complete(_request())


def test_unknown_mode_rejected(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        LLMGateway(mode="cached", store=TranscriptStore(tmp_path))


def test_concurrent_recording_writes_all_transcripts(tmp_path: Path) -> None:
    store = TranscriptStore(tmp_path)
    gateway = LLMGateway(mode="record", store=store, transport=CountingTransport())
    requests = [_request(seed_tag=f"t{i}") for i in range(32)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(gateway.complete, requests))
    assert len(list(tmp_path.glob("*.json"))) == 32


# ---------------------------------------------------------------------------
# HTTP transport: payload shape, retries, failure taxonomy
# ---------------------------------------------------------------------------

class _FakeResponse:
    def __init__(self, status_code: int, payload: dict | None = None) -> None:
        self.status_code = status_code
        self._payload = payload or {}
        self.text = json.dumps(self._payload)

    def json(self) -> dict:
        return self._payload


def _ok_payload(text: str = "hello") -> dict:
    return {
        "id": "cmpl-1",
        "model": "m-1",
        "choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 12, "completion_tokens": 4},
    }


def test_transport_posts_chat_payload_and_parses_completion() -> None:
    seen: list[dict] = []

    def post(url: str, **kwargs: object) -> _FakeResponse:
        seen.append({"url": url, **kwargs})
        return _FakeResponse(200, _ok_payload())

    transport = HttpChatTransport(base_url="http://llm.local/v1", api_key="k", post=post)
    completion = transport(_request(max_tokens=128))

    assert completion.text == "hello"
    assert completion.usage == TokenUsage(12, 4)
    assert seen[0]["url"] == "http://llm.local/v1/chat/completions"
    body = seen[0]["json"]
    assert body["model"] == "m-1"
    assert body["temperature"] == 0.0
    assert body["max_tokens"] == 128
    assert body["messages"] == [{"role": "user", "content": "maximize profit"}]
    assert "seed_tag" not in body
    assert seen[0]["headers"]["Authorization"] == "Bearer k"


def test_transport_retries_on_server_errors_then_succeeds() -> None:
    responses = [_FakeResponse(503), _FakeResponse(500), _FakeResponse(200, _ok_payload())]
    sleeps: list[float] = []

    transport = HttpChatTransport(
        base_url="http://llm.local", post=lambda url, **kw: responses.pop(0),
        sleep=sleeps.append,
    )
    completion = transport(_request())
    assert completion.text == "hello"
    assert len(sleeps) == 2
    assert sleeps[1] > sleeps[0]


def test_transport_retries_on_timeouts_then_gives_up() -> None:
    attempts: list[int] = []

    def post(url: str, **kwargs: object) -> _FakeResponse:
        attempts.append(1)
        raise TimeoutError("read timed out")

    transport = HttpChatTransport(base_url="http://llm.local", post=post, sleep=lambda s: None)
    with pytest.raises(ProviderError):
        transport(_request())
    assert len(attempts) == 3


def test_transport_does_not_retry_client_errors() -> None:
    attempts: list[int] = []

    def post(url: str, **kwargs: object) -> _FakeResponse:
        attempts.append(1)
        return _FakeResponse(401, {"error": "bad key"})

    transport = HttpChatTransport(base_url="http://llm.local", post=post, sleep=lambda s: None)
    with pytest.raises(ProviderError):
        transport(_request())
    assert len(attempts) == 1


def test_transport_rejects_malformed_provider_response() -> None:
    transport = HttpChatTransport(
        base_url="http://llm.local", post=lambda url, **kw: _FakeResponse(200, {"oops": True}),
        sleep=lambda s: None,
    )
    with pytest.raises(ProviderError):
        transport(_request())


def test_transport_requires_base_url(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("OMBENCH_LLM_BASE_URL", raising=False)
    with pytest.raises(ConfigError):
        HttpChatTransport()


# ---------------------------------------------------------------------------
# end-to-end against a local stub server: record then replay round-trips
# ---------------------------------------------------------------------------

class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        length = int(self.headers.get("Content-Length", "0"))
        json.loads(self.rfile.read(length))
        body = json.dumps(_ok_payload("stubbed completion")).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args: object) -> None:
        pass


def test_record_then_replay_round_trips_through_local_server(tmp_path: Path) -> None:
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        base_url = f"http://127.0.0.1:{server.server_port}"
        store = TranscriptStore(tmp_path)
        request = _request()

        recorded = LLMGateway(
            mode="record", store=store, transport=HttpChatTransport(base_url=base_url)
        ).complete(request)
        replayed = LLMGateway(mode="replay", store=store).complete(request)

        assert recorded.text == "stubbed completion"
        assert replayed == recorded
    finally:
        server.shutdown()
        thread.join()
