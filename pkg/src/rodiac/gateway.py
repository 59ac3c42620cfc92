"""Chat-completion client with retry, rate limiting and an on-disk reply cache.

The client talks to OpenAI-style ``/chat/completions`` endpoints through a
pluggable transport.  Two offline transports are provided for testing and
deterministic replays: :class:`EchoTransport` (reply = prompt) and
:class:`ReplayTransport` (replies recorded on disk, keyed by prompt digest).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional

import httpx

logger = logging.getLogger(__name__)

__all__ = [
    "ModelEndpoint",
    "Completion",
    "GatewayError",
    "AuthError",
    "TransientError",
    "RateLimited",
    "ReplayMiss",
    "HTTPTransport",
    "EchoTransport",
    "ReplayTransport",
    "ScriptedTransport",
    "ResponseCache",
    "Gateway",
    "cache_key",
    "prompt_digest",
    "record_replay",
]


class GatewayError(RuntimeError):
    """Non-retryable failure talking to a model endpoint."""


class AuthError(GatewayError):
    pass


class ReplayMiss(GatewayError):
    pass


class TransientError(Exception):
    """Retryable failure (transport error, 5xx)."""


class RateLimited(TransientError):
    def __init__(self, message: str, retry_after: Optional[float] = None) -> None:
        super().__init__(message)
        self.retry_after = retry_after


@dataclass(frozen=True)
class ModelEndpoint:
    model_id: str
    base_url: str = "mock://echo"
    api_key_env: Optional[str] = None
    developer: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_cap: float = 30.0
    max_in_flight: int = 4
    min_interval: float = 0.0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith("mock://")

    @property
    def params(self) -> Dict[str, object]:
        """Sampling parameters that influence the reply (part of the cache key)."""
        return {"temperature": self.temperature, "max_tokens": self.max_tokens}

    def api_key(self) -> Optional[str]:
        if not self.api_key_env:
            return None
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AuthError(f"environment variable {self.api_key_env} is not set")
        return key

    @classmethod
    def from_dict(cls, data: dict) -> "ModelEndpoint":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown endpoint fields: {sorted(unknown)}")
        return cls(**data)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Completion:
    text: str
    latency: float = 0.0
    usage: Dict[str, int] = field(default_factory=dict)
    cached: bool = False


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def cache_key(endpoint: ModelEndpoint, prompt: str) -> str:
    payload = json.dumps(
        {"model_id": endpoint.model_id, "params": endpoint.params, "prompt": prompt},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# transports

Transport = Callable[[ModelEndpoint, str], Completion]


class HTTPTransport:
    """OpenAI-compatible ``POST {base_url}/chat/completions``."""

    def __init__(self, client: Optional[httpx.Client] = None) -> None:
        self._client = client or httpx.Client()

    def __call__(self, endpoint: ModelEndpoint, prompt: str) -> Completion:
        headers = {"Content-Type": "application/json"}
        key = endpoint.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": endpoint.model_id.split(":", 1)[-1],
            "messages": [{"role": "user", "content": prompt}],
            "temperature": endpoint.temperature,
            "max_tokens": endpoint.max_tokens,
        }
        url = endpoint.base_url.rstrip("/") + "/chat/completions"
        start = time.monotonic()
        try:
            resp = self._client.post(url, json=body, headers=headers,
                                     timeout=endpoint.timeout)
        except httpx.TransportError as exc:
            raise TransientError(f"{type(exc).__name__}: {exc}") from exc
        latency = time.monotonic() - start
        if resp.status_code in (401, 403):
            raise AuthError(f"{endpoint.model_id}: HTTP {resp.status_code}")
        if resp.status_code == 429:
            raise RateLimited(f"{endpoint.model_id}: rate limited",
                              _retry_after(resp.headers.get("retry-after")))
        if resp.status_code >= 500:
            raise TransientError(f"{endpoint.model_id}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"{endpoint.model_id}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"{endpoint.model_id}: malformed response") from exc
        usage = {k: int(v) for k, v in (data.get("usage") or {}).items()
                 if isinstance(v, int)}
        return Completion(text=text, latency=latency, usage=usage)


def _retry_after(value: Optional[str]) -> Optional[float]:
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None


class EchoTransport:
    """Replies with the prompt itself."""

    def __call__(self, endpoint: ModelEndpoint, prompt: str) -> Completion:
        return Completion(text=prompt)


class ScriptedTransport:
    """Replies from a callable; prompts listed in ``fail`` raise ``exc``."""

    def __init__(self, reply: Callable[[str], str], fail: Iterable[str] = (),
                 exc: Exception = None) -> None:
        self.reply = reply
        self.fail = set(fail)
        self.exc = exc

    def __call__(self, endpoint: ModelEndpoint, prompt: str) -> Completion:
        if prompt in self.fail:
            raise self.exc or GatewayError("scripted failure")
        return Completion(text=self.reply(prompt))


def _slug(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", model_id)


class ReplayTransport:
    """Serve replies recorded in ``<dir>/<model slug>.jsonl``.

    Each line is ``{"prompt_sha256": ..., "reply": ...}``.  Unknown prompts
    raise :class:`ReplayMiss`.
    """

    def __init__(self, directory: "str | os.PathLike") -> None:
        self.directory = Path(directory)
        self._tables: Dict[str, Dict[str, str]] = {}
        self._lock = threading.Lock()

    def _table(self, model_id: str) -> Dict[str, str]:
        with self._lock:
            if model_id not in self._tables:
                path = self.directory / f"{_slug(model_id)}.jsonl"
                table: Dict[str, str] = {}
                if path.exists():
                    with open(path, encoding="utf-8") as fh:
                        for line in fh:
                            if line.strip():
                                entry = json.loads(line)
                                table[entry["prompt_sha256"]] = entry["reply"]
                self._tables[model_id] = table
            return self._tables[model_id]

    def __call__(self, endpoint: ModelEndpoint, prompt: str) -> Completion:
        reply = self._table(endpoint.model_id).get(prompt_digest(prompt))
        if reply is None:
            raise ReplayMiss(f"{endpoint.model_id}: no recorded reply for prompt "
                             f"{prompt_digest(prompt)[:12]}")
        return Completion(text=reply)


def record_replay(directory: "str | os.PathLike", model_id: str,
                  replies: Dict[str, str]) -> Path:
    """Write ``{prompt: reply}`` as a replay table for ``model_id``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{_slug(model_id)}.jsonl"
    rows = sorted((prompt_digest(p), r) for p, r in replies.items())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for digest, reply in rows:
            fh.write(json.dumps({"prompt_sha256": digest, "reply": reply},
                                ensure_ascii=False) + "\n")
    return path


# --------------------------------------------------------------------------
# cache


class ResponseCache:
    """One JSON file per cache key under ``directory``."""

    def __init__(self, directory: "str | os.PathLike") -> None:
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[str]:
        path = self.path(key)
        if not path.exists():
            return None
        try:
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
            if entry.get("key") != key or not isinstance(entry.get("reply"), str):
                raise ValueError("key mismatch")
            return entry["reply"]
        except (OSError, ValueError) as exc:
            logger.warning("corrupt cache entry %s (%s); treating as miss", path, exc)
            return None

    def put(self, key: str, endpoint: ModelEndpoint, prompt: str, reply: str) -> None:
        path = self.path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "key": key,
            "model_id": endpoint.model_id,
            "params": endpoint.params,
            "prompt": prompt,
            "reply": reply,
        }
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, ensure_ascii=False, sort_keys=True, indent=1)
        os.replace(tmp, path)

    def clear(self) -> None:
        if not self.directory.exists():
            return
        for p in self.directory.glob("*/*.json"):
            p.unlink()


# --------------------------------------------------------------------------
# client


class Gateway:
    """Thread-safe completion client for a single endpoint."""

    def __init__(self, endpoint: ModelEndpoint, transport: Optional[Transport] = None,
                 cache_dir: "str | os.PathLike | None" = None,
                 sleep: Callable[[float], None] = time.sleep) -> None:
        self.endpoint = endpoint
        if transport is None:
            if endpoint.base_url == "mock://echo":
                transport = EchoTransport()
            elif endpoint.is_mock:
                raise GatewayError(f"{endpoint.model_id}: mock endpoint {endpoint.base_url} "
                                   "needs an explicit transport")
            else:
                transport = HTTPTransport()
        self.transport = transport
        self.cache = ResponseCache(cache_dir) if cache_dir is not None else None
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(endpoint.max_in_flight)
        self._pace_lock = threading.Lock()
        self._next_slot = 0.0
        self._key_locks: Dict[str, threading.Lock] = {}
        self._key_locks_guard = threading.Lock()
        self._count_lock = threading.Lock()
        self.request_count = 0
        self.in_flight = 0
        self.max_observed_in_flight = 0

    def __deepcopy__(self, memo):
        # clients are shared resources (cache, rate limiter); estimator cloning
        # must not duplicate them
        return self

    def _pace(self) -> None:
        if self.endpoint.min_interval <= 0:
            return
        with self._pace_lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self.endpoint.min_interval
        if wait > 0:
            self._sleep(wait)

    def _attempt(self, prompt: str) -> Completion:
        self._pace()
        with self._slots:
            with self._count_lock:
                self.request_count += 1
                self.in_flight += 1
                self.max_observed_in_flight = max(self.max_observed_in_flight,
                                                  self.in_flight)
            try:
                return self.transport(self.endpoint, prompt)
            finally:
                with self._count_lock:
                    self.in_flight -= 1

    def complete(self, prompt: str) -> Completion:
        """Send ``prompt`` as a single user turn and return the trimmed reply.

        Transient failures are retried with capped exponential backoff;
        rate-limit responses wait for the provider's ``Retry-After`` when
        given.  Authentication failures are raised immediately.
        """
        ep = self.endpoint
        attempt = 0
        while True:
            try:
                completion = self._attempt(prompt)
                completion.text = completion.text.strip()
                return completion
            except TransientError as exc:
                if attempt >= ep.max_retries:
                    raise GatewayError(
                        f"{ep.model_id}: giving up after {attempt + 1} attempts: {exc}"
                    ) from exc
                delay = min(ep.backoff_cap, ep.backoff_base * 2 ** attempt)
                if isinstance(exc, RateLimited) and exc.retry_after is not None:
                    delay = exc.retry_after
                logger.warning("%s: %s; retrying in %.2fs", ep.model_id, exc, delay)
                self._sleep(delay)
                attempt += 1

    def _key_lock(self, key: str) -> threading.Lock:
        with self._key_locks_guard:
            return self._key_locks.setdefault(key, threading.Lock())

    def cached_complete(self, prompt: str) -> str:
        if self.cache is None:
            return self.complete(prompt).text
        key = cache_key(self.endpoint, prompt)
        with self._key_lock(key):
            reply = self.cache.get(key)
            if reply is not None:
                return reply
            reply = self.complete(prompt).text
            self.cache.put(key, self.endpoint, prompt, reply)
            return reply
