"""Caption-to-QA dataset construction: prompt, parse, validate, split."""

from __future__ import annotations

import enum
import json
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import (BackendFailure, DuplicateId, InvalidQuestionStem,
                     MalformedJson, MissingField, QaParseError, UnpairedMarker,
                     WrongCount)
from .llm.gateway import Gateway
from .llm.prompts import build_archopen_prompt

PAIRS_PER_CAPTION = 5

_MARKER = re.compile(r"\b(question|answer)\s*:", re.IGNORECASE)
_STEM = re.compile(r"(what|where)\b", re.IGNORECASE)


class CaptionOrigin(str, enum.Enum):
    PUBMED = "PubMed"
    BOOKS = "Books"


@dataclass(frozen=True)
class CaptionRecord:
    id: str
    image_path: str
    caption: str
    origin: CaptionOrigin = CaptionOrigin.PUBMED

    def __post_init__(self):
        if not self.caption or not self.caption.strip():
            raise ValueError(f"caption {self.id!r} is empty")
        object.__setattr__(self, "origin", CaptionOrigin(self.origin))


@dataclass(frozen=True)
class GeneratedQa:
    caption_id: str
    question: str
    answer: str
    ordinal: int


def load_captions(path) -> list[CaptionRecord]:
    """Read ``{id, image, caption, origin}`` JSON lines."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedJson(lineno, str(exc)) from exc
            for name in ("id", "image", "caption"):
                if not obj.get(name):
                    raise MissingField(lineno, name)
            records.append(CaptionRecord(str(obj["id"]), str(obj["image"]), obj["caption"],
                                         obj.get("origin", "PubMed")))
    return records


def parse_qa_response(text: str, caption_id: str = "") -> list[GeneratedQa]:
    """Pair ``Question:``/``Answer:`` markers in order and enforce the generation rules.

    Raises:
        UnpairedMarker: markers do not alternate Question, Answer, ... or a field is empty.
        WrongCount: the number of complete pairs is not five.
        InvalidQuestionStem: a question does not open with What or Where.
    """
    marks = list(_MARKER.finditer(text))
    fields = []
    for n, m in enumerate(marks):
        end = marks[n + 1].start() if n + 1 < len(marks) else len(text)
        fields.append((m.group(1).lower(), text[m.end():end].strip()))

    pairs = []
    for n in range(0, len(fields), 2):
        kind, question = fields[n]
        if kind != "question":
            raise UnpairedMarker(f"marker {n + 1} is 'Answer:' without a preceding question")
        if n + 1 >= len(fields):
            raise UnpairedMarker(f"question {len(pairs) + 1} has no answer")
        kind2, answer = fields[n + 1]
        if kind2 != "answer":
            raise UnpairedMarker(f"question {len(pairs) + 1} is followed by another question")
        if not question or not answer:
            raise UnpairedMarker(f"pair {len(pairs) + 1} has an empty field")
        pairs.append((question, answer))

    if len(pairs) != PAIRS_PER_CAPTION:
        raise WrongCount(len(pairs))
    out = []
    for ordinal, (q, a) in enumerate(pairs, start=1):
        if not _STEM.match(q):
            raise InvalidQuestionStem(ordinal)
        out.append(GeneratedQa(caption_id, q, a, ordinal))
    return out


@dataclass(frozen=True)
class GenerationFailure:
    caption_id: str
    attempts: int
    error: str

    def to_dict(self) -> dict:
        return {"caption_id": self.caption_id, "attempts": self.attempts, "error": self.error}


def _generate_one(record: CaptionRecord, gateway: Gateway, max_retries: int):
    request = build_archopen_prompt(record.caption).rendered
    last_error = ""
    for attempt in range(max_retries + 1):
        try:
            # retries skip the cache so a stored malformed reply is not replayed
            resp = gateway.chat(request, bypass_cache=attempt > 0)
            return parse_qa_response(resp.text, record.id), None
        except QaParseError as exc:
            last_error = f"{type(exc).__name__}: {exc}"
        except BackendFailure as exc:
            last_error = f"{type(exc).__name__}: {exc}"
    return [], GenerationFailure(record.id, max_retries + 1, last_error)


def generate_dataset(captions, gateway: Gateway, max_retries: int = 2,
                     workers: int = 1) -> tuple[list[GeneratedQa], list[GenerationFailure]]:
    """Generate five QA pairs per caption; output follows caption order."""
    captions = list(captions)
    seen = set()
    for rec in captions:
        if rec.id in seen:
            raise DuplicateId(rec.id)
        seen.add(rec.id)

    def work(rec):
        return _generate_one(rec, gateway, max_retries)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, captions))
    else:
        results = [work(rec) for rec in captions]
    pairs: list[GeneratedQa] = []
    failures: list[GenerationFailure] = []
    for got, failure in results:
        pairs.extend(got)
        if failure is not None:
            failures.append(failure)
    return pairs, failures


def split_dataset(pairs, train_fraction: float = 0.8,
                  seed: int = 0) -> tuple[list[GeneratedQa], list[GeneratedQa]]:
    """Caption-atomic train/test split: a caption's pairs never straddle the split."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    pairs = list(pairs)
    caption_ids = sorted({p.caption_id for p in pairs})
    random.Random(seed).shuffle(caption_ids)
    n_train = int(train_fraction * len(caption_ids))
    train_ids = set(caption_ids[:n_train])
    train = [p for p in pairs if p.caption_id in train_ids]
    test = [p for p in pairs if p.caption_id not in train_ids]
    return train, test


def qa_to_sample_dict(pair: GeneratedQa, record: CaptionRecord) -> dict:
    """Evaluation-dataset JSON object for one generated pair."""
    return {
        "id": f"{pair.caption_id}-q{pair.ordinal}",
        "image": record.image_path,
        "question": pair.question,
        "answer": pair.answer,
        "caption_id": pair.caption_id,
        "origin": record.origin.value,
    }


def write_jsonl(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
