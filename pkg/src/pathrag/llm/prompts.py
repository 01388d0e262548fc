"""Prompt templates for the multimodal answerer, the text reasoner and QA generation."""

from __future__ import annotations

from ..errors import EmptyCaption, EmptyQuestion
from ..imaging import RgbImage
from .types import ChatRequest, PromptBundle, PromptKind, Role

MAX_PATCH_TEXTS = 9

DESCRIBE_INSTRUCTION = "Describe the following image in detail."

ANSWERS_PREAMBLE = (
    "You are a professional pathologist. Please generate a comprehensive answer in "
    "several sentences that integrates multiple perspectives for a pathology image, "
    "and provide a balanced conclusion based on the information provided."
)

_DESCRIPTIONS_PREAMBLE = (
    "You are a professional pathologist. Please answer the following question in "
    "several sentences from the description of an image{patches}."
)

ARCH_OPEN_TEMPLATE = """\
You are provided with a text description (figure caption) of a pathology image. Unfortunately, you don't have access to the original image.
Your job is to generate a total of 5 open-ended question/answer pairs from this figure caption starting with "What" or "Where". Below are the requirements to generate the question/answer pairs:

Requirement 1: Avoid quoting or referring to specific facts, terms, abbreviations, dates, numbers or names, as these may reveal the conversation is based on the text information, rather than image itself
Requirement 2: Focus on the visual aspects of the image that can be inferred without the text information
Requirement 3: Do not use phrases like "mentioned", "caption", "context", "without the image" in the question/answer pairs. Instead, refer to the information as being "in the image" or preferably don't mention anything
Requirement 4: Ensure that question/anwer pairs are diverse and cover a range of visual aspects of the image
Requirement 5: Answer responsibly, avoiding overconfidence, and do not provide medical advice or diagnostic information

Caption: {caption}

Question:

Answer:"""

_NUMBER_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine")


def descriptions_preamble(n_patches: int) -> str:
    if n_patches == 0:
        return _DESCRIPTIONS_PREAMBLE.format(patches="")
    noun = "patch" if n_patches == 1 else "patches"
    return _DESCRIPTIONS_PREAMBLE.format(
        patches=f" and {_NUMBER_WORDS[n_patches]} important {noun}"
    )


def build_answer_prompt(question: str, image: RgbImage) -> PromptBundle:
    """The question verbatim (no stripping) with the image attached."""
    if not question or not question.strip():
        raise EmptyQuestion("question must be non-empty")
    req = ChatRequest(Role.MULTIMODAL_ANSWERER, question, image=image,
                      kind=PromptKind.ANSWER_FROM_IMAGE)
    return PromptBundle(PromptKind.ANSWER_FROM_IMAGE, req)


def build_description_prompt(image: RgbImage) -> PromptBundle:
    req = ChatRequest(Role.MULTIMODAL_ANSWERER, DESCRIBE_INSTRUCTION, image=image,
                      kind=PromptKind.DESCRIPTION_FROM_IMAGE)
    return PromptBundle(PromptKind.DESCRIPTION_FROM_IMAGE, req)


def build_reasoning_prompt(kind: PromptKind, question: str, full_image_text: str,
                           patch_texts) -> PromptBundle:
    """Aggregate the full-image text and ranked patch texts into one reasoner prompt.

    Answers mode numbers the items ``Perspective 1..N+1`` (full image first);
    descriptions mode labels them ``Description of image`` and
    ``Description of patch 1..N``. The question always comes last.
    """
    if not question or not question.strip():
        raise EmptyQuestion("question must be non-empty")
    patch_texts = list(patch_texts)
    if len(patch_texts) > MAX_PATCH_TEXTS:
        raise ValueError(f"at most {MAX_PATCH_TEXTS} patch texts are supported")

    if kind is PromptKind.REASON_OVER_ANSWERS:
        lines = [ANSWERS_PREAMBLE, ""]
        for n, text in enumerate([full_image_text, *patch_texts], start=1):
            lines.append(f"Perspective {n}: {text}")
    elif kind is PromptKind.REASON_OVER_DESCRIPTIONS:
        lines = [descriptions_preamble(len(patch_texts)), "",
                 f"Description of image: {full_image_text}"]
        for n, text in enumerate(patch_texts, start=1):
            lines.append(f"Description of patch {n}: {text}")
    else:
        raise ValueError(f"not a reasoning prompt kind: {kind}")
    lines.append(f"Question: {question}")
    req = ChatRequest(Role.TEXT_REASONER, "\n".join(lines), kind=kind)
    return PromptBundle(kind, req)


def build_archopen_prompt(caption: str) -> PromptBundle:
    if not caption or not caption.strip():
        raise EmptyCaption("caption must be non-empty")
    # str.replace, not format: captions may contain braces
    text = ARCH_OPEN_TEMPLATE.replace("{caption}", caption)
    req = ChatRequest(Role.TEXT_REASONER, text, kind=PromptKind.ARCH_OPEN_GENERATION)
    return PromptBundle(PromptKind.ARCH_OPEN_GENERATION, req)
