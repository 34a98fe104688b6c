"""Chat-completion provider: HTTP client with caching, rate limiting and
retries, plus a deterministic replay provider for offline runs.

The cache key is a digest over the full request (model tag, temperature,
max_new_tokens, message list), so identical requests within and across runs
return identical content. The replay provider is cache-only mode over a
fixture directory with the same layout.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .corpus import Turn, count_tokens
from .errors import MissingFixtureError, ProviderError, RetriableError, SchemaError


@dataclass(frozen=True)
class ChatRequest:
    model_tag: str
    messages: tuple[Turn, ...]
    temperature: float = 0.0
    max_new_tokens: int = 512

    def __post_init__(self):
        if self.temperature < 0:
            raise SchemaError("temperature must be >= 0", field="temperature")
        if self.max_new_tokens <= 0:
            raise SchemaError("max_new_tokens must be positive", field="max_new_tokens")

    def to_payload(self) -> dict:
        return {
            "model": self.model_tag,
            "messages": [m.to_dict() for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_new_tokens,
        }


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int
    completion_tokens: int
    cached: bool = False

    def __post_init__(self):
        if not self.content:
            raise SchemaError("response content is empty", field="content")


@dataclass
class ProviderConfig:
    endpoint_url: str = ""
    auth_token_env_var: str = "PROVIDER_TOKEN"
    max_concurrent: int = 4
    max_retries: int = 3
    backoff_base: float = 0.5
    cache_dir: Path | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise SchemaError("max_retries must be >= 0", field="max_retries")
        if self.max_concurrent < 1:
            raise SchemaError("max_concurrent must be positive", field="max_concurrent")


def request_digest(request: ChatRequest) -> str:
    blob = json.dumps(
        {
            "model": request.model_tag,
            "temperature": request.temperature,
            "max_new_tokens": request.max_new_tokens,
            "messages": [m.to_dict() for m in request.messages],
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Provider(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def _load_response(path: Path, *, cached: bool) -> ChatResponse:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        raise SchemaError("unreadable cached response", path=str(path))
    try:
        return ChatResponse(
            content=data["content"],
            prompt_tokens=data.get("prompt_tokens", 0),
            completion_tokens=data.get("completion_tokens", 0),
            cached=cached,
        )
    except KeyError as e:
        raise SchemaError(f"cached response missing {e.args[0]!r}", path=str(path))
    except SchemaError as e:
        raise SchemaError(str(e), path=str(path))


def store_response(directory: Path, request: ChatRequest, response: ChatResponse) -> Path:
    """Write one response keyed by the request digest (cache/fixture layout)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{request_digest(request)}.json"
    path.write_text(
        json.dumps(
            {
                "content": response.content,
                "prompt_tokens": response.prompt_tokens,
                "completion_tokens": response.completion_tokens,
            },
            ensure_ascii=False,
        ),
        encoding="utf-8",
    )
    return path


# transport: (url, headers, payload) -> (status_code, body_text)
Transport = Callable[[str, dict, dict], tuple[int, str]]


def _httpx_transport(url: str, headers: dict, payload: dict) -> tuple[int, str]:
    import httpx

    try:
        resp = httpx.post(url, headers=headers, json=payload, timeout=120.0)
    except httpx.TimeoutException as e:
        raise RetriableError(f"timeout: {e}")
    except httpx.TransportError as e:
        raise RetriableError(f"transport failure: {e}")
    return resp.status_code, resp.text


class HttpChatProvider:
    """Client for a chat-completions HTTP endpoint (messages in, one choice
    out). Thread-safe; callers may fan out up to max_concurrent requests.
    """

    def __init__(self, config: ProviderConfig, transport: Transport | None = None):
        self.config = config
        self._transport = transport or _httpx_transport
        self._semaphore = threading.Semaphore(config.max_concurrent)
        self._cache_lock = threading.Lock()

    def _cache_path(self, request: ChatRequest) -> Path | None:
        if self.config.cache_dir is None:
            return None
        return Path(self.config.cache_dir) / f"{request_digest(request)}.json"

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.auth_token_env_var, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: ChatRequest) -> ChatResponse:
        cache_path = self._cache_path(request)
        if cache_path is not None:
            with self._cache_lock:
                if cache_path.exists():
                    return _load_response(cache_path, cached=True)

        attempt = 0
        while True:
            try:
                with self._semaphore:
                    status, body = self._transport(
                        self.config.endpoint_url, self._headers(), request.to_payload()
                    )
                if status == 429 or status >= 500:
                    raise RetriableError(f"HTTP {status}")
                if not 200 <= status < 300:
                    raise ProviderError("endpoint rejected request", status=status, body=body)
                break
            except RetriableError as e:
                if attempt >= self.config.max_retries:
                    raise ProviderError(f"exhausted retries: {e}")
                time.sleep(self.config.backoff_base * (2**attempt))
                attempt += 1

        try:
            data = json.loads(body)
            content = data["choices"][0]["message"]["content"]
            usage = data.get("usage", {})
        except (json.JSONDecodeError, KeyError, IndexError, TypeError):
            raise ProviderError("malformed endpoint response", body=body)
        response = ChatResponse(
            content=content,
            prompt_tokens=usage.get(
                "prompt_tokens", count_tokens("".join(m.content for m in request.messages))
            ),
            completion_tokens=usage.get("completion_tokens", count_tokens(content)),
            cached=False,
        )
        if cache_path is not None:
            with self._cache_lock:
                store_response(Path(self.config.cache_dir), request, response)
        return response


class ReplayProvider:
    """Answers only from a fixture directory; fully deterministic, offline."""

    def __init__(self, fixture_dir: Path):
        self.fixture_dir = Path(fixture_dir)
        if not self.fixture_dir.is_dir():
            raise SchemaError("fixture directory does not exist", path=str(fixture_dir))

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request)
        path = self.fixture_dir / f"{digest}.json"
        if not path.exists():
            raise MissingFixtureError(digest)
        return _load_response(path, cached=True)


class RecordingProvider:
    """Wraps a provider and records every response into a fixture directory."""

    def __init__(self, inner: Provider, fixture_dir: Path):
        self.inner = inner
        self.fixture_dir = Path(fixture_dir)

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        store_response(self.fixture_dir, request, response)
        return response


def user_request(
    model_tag: str,
    user_text: str,
    *,
    system_text: str | None = None,
    temperature: float = 0.0,
    max_new_tokens: int = 512,
) -> ChatRequest:
    """Convenience constructor for the common single-user-turn request."""
    messages: list[Turn] = []
    if system_text is not None:
        messages.append(Turn("system", system_text))
    messages.append(Turn("user", user_text))
    return ChatRequest(
        model_tag=model_tag,
        messages=tuple(messages),
        temperature=temperature,
        max_new_tokens=max_new_tokens,
    )
