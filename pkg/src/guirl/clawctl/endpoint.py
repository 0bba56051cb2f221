"""Chat-completions-compatible HTTP client with bounded retries and exponential backoff."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Any, Callable

import httpx

log = logging.getLogger(__name__)

CHAT_PATH = "/v1/chat/completions"


class EndpointError(RuntimeError):
    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class EndpointSpec:
    base_url: str
    auth_env: str | None = None
    timeout_ms: int = 30_000
    retries: int = 2
    backoff_s: float = 0.25
    backoff_factor: float = 2.0
    model: str = "default"

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.backoff_s < 0 or self.backoff_factor < 1:
            raise ValueError("backoff must be non-negative with factor >= 1")


def _digest(obj: Any) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


class EndpointClient:
    """One client per worker is fine; httpx.Client is thread-safe for concurrent requests."""

    def __init__(self, spec: EndpointSpec, sleep: Callable[[float], None] = time.sleep,
                 transport: httpx.BaseTransport | None = None):
        self.spec = spec
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        if spec.auth_env and os.environ.get(spec.auth_env):
            headers["Authorization"] = f"Bearer {os.environ[spec.auth_env]}"
        self._http = httpx.Client(base_url=spec.base_url, headers=headers,
                                  timeout=spec.timeout_ms / 1000.0, transport=transport)
        self.events: list[dict[str, Any]] = []

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def post(self, path: str, body: dict[str, Any]) -> dict[str, Any]:
        attempts = self.spec.retries + 1
        req_digest = _digest(body)
        last = ""
        for attempt in range(attempts):
            if attempt:
                delay = self.spec.backoff_s * self.spec.backoff_factor ** (attempt - 1)
                self.events.append({"event": "retry", "attempt": attempt, "delay_s": delay, "reason": last})
                log.warning("retrying %s (attempt %d/%d) after %s", path, attempt + 1, attempts, last)
                self._sleep(delay)
            try:
                resp = self._http.post(path, json=body)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise EndpointError(f"{path}: HTTP {resp.status_code}: {resp.text[:200]}", attempt + 1)
            try:
                data = resp.json()
            except ValueError:
                raise EndpointError(f"{path}: response is not JSON", attempt + 1) from None
            self.events.append({"event": "ok", "attempt": attempt, "request": req_digest,
                                "response": _digest(data)})
            log.debug("%s request %s -> response %s", path, req_digest, _digest(data))
            return data
        raise EndpointError(f"{path}: giving up after {attempts} attempts ({last})", attempts)

    @property
    def retries_logged(self) -> int:
        return sum(1 for e in self.events if e["event"] == "retry")

    def chat(self, messages: list[dict[str, Any]], temperature: float = 0.0, **extra: Any) -> str:
        body = {"model": self.spec.model, "messages": messages, "temperature": temperature, **extra}
        data = self.post(CHAT_PATH, body)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise EndpointError("malformed chat completion response") from None


def text_message(text: str, role: str = "user") -> dict[str, Any]:
    return {"role": role, "content": text}


def image_message(text: str, image_b64: str, mime: str = "image/png") -> dict[str, Any]:
    return {
        "role": "user",
        "content": [
            {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{image_b64}"}},
            {"type": "text", "text": text},
        ],
    }
