"""Completion gateway with deterministic record/replay transcripts.

Requests are addressed by a stable content digest so that a benchmark run can
be recorded once against a live provider and replayed byte-for-byte offline.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .core import OMBenchError

ENV_BASE_URL = "OMBENCH_LLM_BASE_URL"
ENV_API_KEY = "OMBENCH_LLM_API_KEY"
ENV_MODEL = "OMBENCH_LLM_MODEL"

GATEWAY_MODES = ("live", "record", "replay")


class ConfigError(OMBenchError):
    """Gateway or transport is missing required configuration."""


class ProviderError(OMBenchError):
    """The completion provider failed after exhausting retries."""


class ReplayMiss(OMBenchError):
    """Replay mode found no stored transcript for a request digest."""


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        for name in ("prompt_tokens", "completion_tokens"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            prompt_tokens=self.prompt_tokens + other.prompt_tokens,
            completion_tokens=self.completion_tokens + other.completion_tokens,
        )


def sum_usage(usages: Iterable[TokenUsage]) -> TokenUsage:
    total = TokenUsage()
    for usage in usages:
        total = total + usage
    return total


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int | None = None
    seed_tag: str = ""

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be non-empty")
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for role, text in self.messages:
            if not role or not isinstance(text, str):
                raise ValueError(f"malformed message: ({role!r}, {text!r})")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens!r}")


@dataclass(frozen=True, eq=True)
class Completion:
    text: str
    usage: TokenUsage = field(default_factory=TokenUsage)
    provider_meta: Mapping[str, object] = field(default_factory=dict)


Transport = Callable[[CompletionRequest], Completion]


def cache_key(request: CompletionRequest) -> str:
    """Stable hex digest of the request content (seed_tag included, platform independent)."""
    payload = {
        "model": request.model,
        "temperature": request.temperature,
        "messages": [[role, text] for role, text in request.messages],
        "max_tokens": request.max_tokens,
        "seed_tag": request.seed_tag,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class TranscriptStore:
    """Directory of recorded completions, one JSON file per request digest."""

    VERSION = 1

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self._write_lock = threading.Lock()

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def load(self, digest: str) -> Completion | None:
        path = self.path_for(digest)
        if not path.exists():
            return None
        payload = json.loads(path.read_text(encoding="utf-8"))
        stored = payload["completion"]
        return Completion(
            text=stored["text"],
            usage=TokenUsage(
                prompt_tokens=stored["usage"]["prompt_tokens"],
                completion_tokens=stored["usage"]["completion_tokens"],
            ),
            provider_meta=stored.get("provider_meta", {}),
        )

    def save(self, digest: str, request: CompletionRequest, completion: Completion) -> None:
        payload = {
            "version": self.VERSION,
            "digest": digest,
            "request": {
                "model": request.model,
                "temperature": request.temperature,
                "messages": [[role, text] for role, text in request.messages],
                "max_tokens": request.max_tokens,
                "seed_tag": request.seed_tag,
            },
            "completion": {
                "text": completion.text,
                "usage": {
                    "prompt_tokens": completion.usage.prompt_tokens,
                    "completion_tokens": completion.usage.completion_tokens,
                },
                "provider_meta": dict(completion.provider_meta),
            },
        }
        serialized = json.dumps(payload, sort_keys=True, indent=2)
        with self._write_lock:
            self.root.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(dir=self.root, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    handle.write(serialized)
                os.replace(tmp_name, self.path_for(digest))
            except BaseException:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
                raise


class LLMGateway:
    """Routes completion requests to a provider, a recorder, or stored transcripts.

    Modes: "live" calls the transport; "record" calls the transport and persists
    the result; "replay" serves only stored transcripts and never touches the
    transport (a miss raises :class:`ReplayMiss`).
    """

    def __init__(
        self,
        mode: str,
        store: TranscriptStore | None = None,
        transport: Transport | None = None,
    ) -> None:
        if mode not in GATEWAY_MODES:
            raise ConfigError(f"unknown gateway mode {mode!r}; expected one of {GATEWAY_MODES}")
        if mode in ("record", "replay") and store is None:
            raise ConfigError(f"{mode} mode requires a transcript store")
        self.mode = mode
        self.store = store
        self._transport = transport

    def _require_transport(self) -> Transport:
        if self._transport is None:
            try:
                self._transport = HttpChatTransport()
            except ConfigError as err:
                raise ConfigError(f"{self.mode} mode requires a transport: {err}") from None
        return self._transport

    def complete(self, request: CompletionRequest) -> Completion:
        digest = cache_key(request)
        if self.mode == "replay":
            assert self.store is not None
            completion = self.store.load(digest)
            if completion is None:
                raise ReplayMiss(
                    f"no transcript for digest {digest} "
                    f"(model={request.model!r}, seed_tag={request.seed_tag!r})"
                )
            return completion
        completion = self._require_transport()(request)
        if self.mode == "record":
            assert self.store is not None
            self.store.save(digest, request, completion)
        return completion


class HttpChatTransport:
    """Chat-completion HTTP transport with bounded retries.

    Talks to an OpenAI-compatible ``/chat/completions`` endpoint. Retries only
    timeouts, connection failures, and 5xx responses, with exponential backoff;
    client errors fail immediately. The replay-disambiguation ``seed_tag`` is a
    local concern and is never sent to the provider.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        attempts: int = 3,
        backoff_s: float = 0.5,
        sleep: Callable[[float], None] | None = None,
        post: Callable[..., object] | None = None,
    ) -> None:
        self.base_url = (base_url or os.environ.get(ENV_BASE_URL, "")).rstrip("/")
        if not self.base_url:
            raise ConfigError(f"no provider base URL; set {ENV_BASE_URL} or pass base_url")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.timeout_s = timeout_s
        self.attempts = attempts
        self.backoff_s = backoff_s
        self._sleep = sleep
        self._post = post

    def _do_post(self, url: str, **kwargs: object) -> object:
        if self._post is not None:
            return self._post(url, **kwargs)
        import requests

        return requests.post(url, **kwargs)  # type: ignore[arg-type]

    @staticmethod
    def _is_retryable(exc: Exception) -> bool:
        if isinstance(exc, (TimeoutError, ConnectionError)):
            return True
        try:
            import requests
        except ImportError:
            return False
        return isinstance(exc, (requests.Timeout, requests.ConnectionError))

    def __call__(self, request: CompletionRequest) -> Completion:
        url = f"{self.base_url}/chat/completions"
        payload: dict[str, object] = {
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{"role": role, "content": text} for role, text in request.messages],
        }
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        sleep = self._sleep
        if sleep is None:
            import time

            sleep = time.sleep

        last_failure = "no attempts made"
        for attempt in range(self.attempts):
            if attempt:
                sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                response = self._do_post(url, json=payload, headers=headers, timeout=self.timeout_s)
            except Exception as exc:
                if self._is_retryable(exc):
                    last_failure = f"{type(exc).__name__}: {exc}"
                    continue
                raise
            status = getattr(response, "status_code", 0)
            if status >= 500:
                last_failure = f"server error {status}"
                continue
            if status >= 400:
                raise ProviderError(f"provider rejected request with status {status}")
            return self._parse(response)
        raise ProviderError(f"provider unreachable after {self.attempts} attempts: {last_failure}")

    @staticmethod
    def _parse(response: object) -> Completion:
        try:
            data = response.json()  # type: ignore[attr-defined]
            message = data["choices"][0]["message"]
            text = message["content"]
            usage_data = data.get("usage") or {}
            usage = TokenUsage(
                prompt_tokens=int(usage_data.get("prompt_tokens", 0)),
                completion_tokens=int(usage_data.get("completion_tokens", 0)),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc
        meta = {
            key: data[key] for key in ("id", "model", "created") if key in data
        }
        finish = data["choices"][0].get("finish_reason")
        if finish is not None:
            meta["finish_reason"] = finish
        return Completion(text=text, usage=usage, provider_meta=meta)
