"""Chat gateway for the multimodal answerer and text reasoner roles."""

from .backends import HttpBackend, MockBackend, mock_text
from .cache import ResponseCache
from .gateway import Gateway
from .prompts import (build_answer_prompt, build_archopen_prompt,
                      build_description_prompt, build_reasoning_prompt)
from .types import ChatRequest, ChatResponse, PromptBundle, PromptKind, Role, cache_key

__all__ = [
    "ChatRequest", "ChatResponse", "Gateway", "HttpBackend", "MockBackend",
    "PromptBundle", "PromptKind", "ResponseCache", "Role", "build_answer_prompt",
    "build_archopen_prompt", "build_description_prompt", "build_reasoning_prompt",
    "cache_key", "mock_text",
]
