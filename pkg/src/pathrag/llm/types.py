"""Request/response records and the content-addressed cache key."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass

from ..imaging import RgbImage


class Role(str, enum.Enum):
    MULTIMODAL_ANSWERER = "MultimodalAnswerer"
    TEXT_REASONER = "TextReasoner"


class PromptKind(str, enum.Enum):
    ANSWER_FROM_IMAGE = "answer_from_image"
    DESCRIPTION_FROM_IMAGE = "description_from_image"
    REASON_OVER_ANSWERS = "reason_over_answers"
    REASON_OVER_DESCRIPTIONS = "reason_over_descriptions"
    ARCH_OPEN_GENERATION = "arch_open_generation"


@dataclass(frozen=True)
class ChatRequest:
    role_hint: Role
    user_text: str
    system_text: str | None = None
    image: RgbImage | None = None
    temperature: float = 0.0
    model_id: str = ""
    # not part of the cache key; lets the mock backend tag its output
    kind: PromptKind | None = None

    def __post_init__(self):
        if self.role_hint is Role.TEXT_REASONER and self.image is not None:
            raise ValueError("text reasoner requests cannot carry an image")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    backend_id: str
    cached: bool
    latency_ms: float


@dataclass(frozen=True)
class PromptBundle:
    kind: PromptKind
    rendered: ChatRequest

    @property
    def text(self) -> str:
        if self.rendered.system_text:
            return self.rendered.system_text + "\n\n" + self.rendered.user_text
        return self.rendered.user_text


def cache_key(request: ChatRequest) -> str:
    """SHA-256 over model, temperature, texts and (if present) the raw image."""
    image = None
    if request.image is not None:
        image = request.image.digest()
    canonical = json.dumps(
        {
            "model_id": request.model_id,
            "temperature": float(request.temperature),
            "system_text": request.system_text,
            "user_text": request.user_text,
            "image": image,
        },
        sort_keys=True,
        ensure_ascii=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("ascii")).hexdigest()
