"""Chat-completion client with an on-disk response cache.

Cache layout: ``<cache_dir>/<key[:2]>/<key>.json`` where ``key`` is the
SHA-256 of ``model_name``, ``temperature`` and the full prompt text. Each file
holds ``{"request": ..., "text": ..., "usage": ...}``; files are written to a
temp name and renamed, so concurrent readers never see partial entries.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import requests

from .errors import LlmTransportError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LlmRequest:
    model_name: str
    prompt: str
    temperature: float = 0.0
    max_tokens: int = 512
    system: str = ""

    def cache_key(self) -> str:
        payload = json.dumps([self.model_name, self.system + self.prompt, float(self.temperature)])
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LlmResponse:
    text: str
    usage: dict = field(default_factory=dict)
    cached: bool = False


class ResponseCache:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, request: LlmRequest) -> Optional[dict]:
        path = self._path(request.cache_key())
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except json.JSONDecodeError:
            log.warning("ignoring corrupt cache entry %s", path)
            return None

    def put(self, request: LlmRequest, text: str, usage: dict) -> None:
        path = self._path(request.cache_key())
        entry = {
            "request": {
                "model_name": request.model_name,
                "temperature": request.temperature,
                "system": request.system,
                "prompt": request.prompt,
            },
            "text": text,
            "usage": usage,
        }
        with self._write_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False, sort_keys=True)
            os.replace(tmp, path)


class TokenBucket:
    """Shared request-rate limiter: ``rate`` requests per second, bursts up to ``capacity``."""

    def __init__(self, rate: float, capacity: int = 1):
        self.rate = rate
        self.capacity = capacity
        self._tokens = float(capacity)
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate <= 0:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            time.sleep(wait)


# A backend turns a request into (text, usage) or raises LlmTransportError.
Backend = Callable[[LlmRequest], "tuple[str, dict] | str"]


class ChatCompletionBackend:
    """OpenAI-compatible ``POST {base_url}/chat/completions``."""

    def __init__(self, base_url: str, api_key: str = "", timeout: float = 60.0, session=None):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.api_key = api_key
        self.timeout = timeout
        self.session = session or requests.Session()

    def __call__(self, request: LlmRequest) -> tuple[str, dict]:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.prompt})
        body = {
            "model": request.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = self.session.post(self.url, json=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise LlmTransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise LlmTransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise LlmTransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmTransportError(f"malformed completion response: {exc}") from exc
        return text or "", data.get("usage") or {}


class LlmClient:
    """Cached, rate-limited, retrying front end over a backend callable."""

    def __init__(
        self,
        backend: Backend,
        model_name: str = "gpt-3.5-turbo",
        temperature: float = 0.0,
        cache: ResponseCache | None = None,
        concurrency: int = 4,
        rate_limiter: TokenBucket | None = None,
        max_retries: int = 5,
        backoff_base: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.model_name = model_name
        self.temperature = temperature
        self.cache = cache
        self.rate_limiter = rate_limiter
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, concurrency))
        self.network_calls = 0
        self._count_lock = threading.Lock()

    def complete(self, prompt: str, *, max_tokens: int = 512, refresh: bool = False) -> LlmResponse:
        """Return the completion for ``prompt``; ``refresh`` skips the cache read."""
        request = LlmRequest(self.model_name, prompt, self.temperature, max_tokens)
        if self.cache is not None and not refresh:
            hit = self.cache.get(request)
            if hit is not None:
                return LlmResponse(hit["text"], hit.get("usage") or {}, cached=True)
        text, usage = self._call_with_retries(request)
        if self.cache is not None:
            self.cache.put(request, text, usage)
        return LlmResponse(text, usage, cached=False)

    def _call_with_retries(self, request: LlmRequest) -> tuple[str, dict]:
        last: Exception | None = None
        for attempt in range(self.max_retries):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                with self._slots:
                    with self._count_lock:
                        self.network_calls += 1
                    out = self.backend(request)
                if isinstance(out, str):
                    return out, {}
                return out
            except LlmTransportError as exc:
                last = exc
                if attempt + 1 < self.max_retries:
                    delay = self.backoff_base * (2 ** attempt) * (1 + random.random() * 0.1)
                    log.info("llm transport error (%s); retry %d in %.1fs", exc, attempt + 1, delay)
                    self._sleep(delay)
        raise LlmTransportError(f"giving up after {self.max_retries} attempts: {last}")


def client_from_env(cache_dir: str | Path | None = None, **kwargs) -> LlmClient:
    base_url = os.environ.get("LLM_BASE_URL")
    if not base_url:
        raise LlmTransportError("LLM_BASE_URL is not set")
    backend = ChatCompletionBackend(base_url, os.environ.get("LLM_API_KEY", ""))
    cache = ResponseCache(cache_dir) if cache_dir else None
    model = kwargs.pop("model_name", None) or os.environ.get("LLM_MODEL", "gpt-3.5-turbo")
    return LlmClient(backend, model_name=model, cache=cache, **kwargs)
