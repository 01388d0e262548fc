"""Role-routed chat gateway with caching and an in-flight request limit."""

from __future__ import annotations

import dataclasses
import threading
import time
from collections import Counter

from .cache import ResponseCache
from .types import ChatRequest, ChatResponse, Role, cache_key


class Gateway:
    """Routes each request to the answerer or reasoner backend by its role hint.

    Model ids left empty on a request are filled from ``models`` before the
    cache key is computed. ``requests``, ``backend_calls`` and ``cache_hits``
    count per role and are safe to read after concurrent use.
    """

    def __init__(self, answerer, reasoner=None, cache: ResponseCache | None = None,
                 models: dict[Role, str] | None = None, max_in_flight: int = 4):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.backends = {
            Role.MULTIMODAL_ANSWERER: answerer,
            Role.TEXT_REASONER: reasoner if reasoner is not None else answerer,
        }
        self.cache = cache
        self.models = {
            Role.MULTIMODAL_ANSWERER: "llava-med",
            Role.TEXT_REASONER: "gpt-4-0125-preview",
        }
        self.models.update(models or {})
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self.requests: Counter = Counter()
        self.backend_calls: Counter = Counter()
        self.cache_hits: Counter = Counter()

    def resolve(self, request: ChatRequest) -> ChatRequest:
        if request.model_id:
            return request
        return dataclasses.replace(request, model_id=self.models[request.role_hint])

    def chat(self, request: ChatRequest, bypass_cache: bool = False) -> ChatResponse:
        """Answer ``request``, from cache when possible.

        ``bypass_cache`` skips both the lookup and the store, so a retry never
        replays (or overwrites) an earlier cached reply.
        """
        request = self.resolve(request)
        role = request.role_hint
        backend = self.backends[role]
        with self._lock:
            self.requests[role] += 1
        key = cache_key(request)
        start = time.perf_counter()
        if self.cache is not None and not bypass_cache:
            hit = self.cache.get(key)
            if hit is not None:
                with self._lock:
                    self.cache_hits[role] += 1
                return ChatResponse(hit["text"], backend.backend_id, True,
                                    (time.perf_counter() - start) * 1000.0)
        with self._slots:
            with self._lock:
                self.backend_calls[role] += 1
            text = backend.complete(request)
        if self.cache is not None and not bypass_cache:
            self.cache.put(key, text, request.model_id)
        return ChatResponse(text, backend.backend_id, False,
                            (time.perf_counter() - start) * 1000.0)
