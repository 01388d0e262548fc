"""Model backends: a deterministic offline mock and an HTTP chat-completion client."""

from __future__ import annotations

import base64
import threading
import time
from typing import Callable

import httpx

from ..errors import (BackendError, BackendTimeout, BackendUnreachable,
                      MalformedResponse)
from ..imaging import encode_png
from .types import ChatRequest, PromptKind, cache_key


def mock_text(request: ChatRequest) -> str:
    """Deterministic reply: kind tag, key prefix, and image size for multimodal calls."""
    key8 = cache_key(request)[:8]
    tag = request.kind.value if request.kind is not None else request.role_hint.value
    if request.kind is PromptKind.ARCH_OPEN_GENERATION:
        pairs = []
        for n in range(1, 6):
            stem = "Where" if n == 4 else "What"
            pairs.append(f"Question: {stem} feature {n} is visible in image {key8}?\n"
                         f"Answer: Mock answer {n} for image {key8}.")
        return "\n\n".join(pairs)
    text = f"[{tag}] {key8}"
    if request.image is not None:
        text += f" {request.image.width}x{request.image.height}"
    return text


class MockBackend:
    """Offline backend. ``responder`` overrides :func:`mock_text` for fault injection."""

    def __init__(self, responder: Callable[[ChatRequest], str] | None = None,
                 backend_id: str = "mock"):
        self.responder = responder or mock_text
        self.backend_id = backend_id
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls += 1
        return self.responder(request)


def _message_payload(request: ChatRequest) -> list[dict]:
    messages = []
    if request.system_text:
        messages.append({"role": "system", "content": request.system_text})
    if request.image is not None:
        data = base64.b64encode(encode_png(request.image)).decode("ascii")
        content = [
            {"type": "text", "text": request.user_text},
            {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}},
        ]
    else:
        content = request.user_text
    messages.append({"role": "user", "content": content})
    return messages


def _extract_text(body) -> str:
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"no choices[0].message.content in response: {exc}") from exc
    if isinstance(content, list):
        content = "".join(
            part.get("text", "") for part in content if isinstance(part, dict)
        )
    if not isinstance(content, str) or not content.strip():
        raise MalformedResponse("empty completion text")
    return content


class HttpBackend:
    """OpenAI-compatible ``/chat/completions`` client.

    Timeouts and 5xx responses are retried with exponential backoff; 4xx
    responses fail immediately.
    """

    def __init__(self, base_url: str, api_key: str | None = None, timeout: float = 120.0,
                 backoff: tuple[float, ...] = (1.0, 2.0, 4.0),
                 client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.base_url = base_url.rstrip("/")
        self.backend_id = f"http:{self.base_url}"
        self.backoff = tuple(backoff)
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._headers = headers
        self._client = client or httpx.Client(timeout=timeout)

    def close(self):
        self._client.close()

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "model": request.model_id,
            "messages": _message_payload(request),
            "temperature": float(request.temperature),
            "stream": False,
        }
        url = f"{self.base_url}/chat/completions"
        attempt = 0
        while True:
            try:
                resp = self._client.post(url, json=payload, headers=self._headers)
            except httpx.TimeoutException as exc:
                failure = BackendTimeout(f"{url}: {exc}")
            except httpx.TransportError as exc:
                raise BackendUnreachable(f"{url}: {exc}") from exc
            else:
                if resp.status_code < 400:
                    try:
                        body = resp.json()
                    except ValueError as exc:
                        raise MalformedResponse(f"response is not JSON: {exc}") from exc
                    return _extract_text(body)
                failure = BackendError(resp.status_code, resp.text)
                if resp.status_code < 500:
                    raise failure
            if attempt >= len(self.backoff):
                raise failure
            self._sleep(self.backoff[attempt])
            attempt += 1

