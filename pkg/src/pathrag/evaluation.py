"""Dataset loading, token recall, grouped reports and paired bootstrap."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DuplicateId, EmptyGold, LengthMismatch, MalformedJson,
                     MissingField, TooFewSamples)

GROUP_NOT_HE = "Not H&E"
GROUP_HE = "H&E"
GROUP_ALL = "All"
GROUPS = (GROUP_NOT_HE, GROUP_HE, GROUP_ALL)

_BOOTSTRAP_CHUNK = 1000


class SourceGroup(str, enum.Enum):
    PATHVQA = "PathVQA"
    ARCH_PUBMED = "ArchPubMed"
    ARCH_BOOKS = "ArchBooks"


@dataclass(frozen=True)
class QaSample:
    id: str
    image_path: Path
    question: str
    gold_answer: str
    source_group: SourceGroup = SourceGroup.PATHVQA
    he_label: bool | None = None


def load_dataset(path, group: SourceGroup | str = SourceGroup.PATHVQA) -> list[QaSample]:
    """Read a JSON-lines dataset of ``{id, image, question, answer[, he]}`` objects.

    Relative image paths resolve against the dataset file's directory. Blank
    lines are skipped; line numbers in errors are 1-based.
    """
    path = Path(path)
    group = SourceGroup(group)
    samples: list[QaSample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedJson(lineno, str(exc)) from exc
            if not isinstance(obj, dict):
                raise MalformedJson(lineno, "expected an object")
            for name in ("id", "image", "question", "answer"):
                value = obj.get(name)
                if value is None or (isinstance(value, str) and not value.strip()):
                    raise MissingField(lineno, name)
            sample_id = str(obj["id"])
            if sample_id in seen:
                raise DuplicateId(sample_id)
            seen.add(sample_id)
            he = obj.get("he")
            if he is not None and not isinstance(he, bool):
                raise MalformedJson(lineno, "'he' must be a boolean")
            image = Path(obj["image"])
            if not image.is_absolute():
                image = path.parent / image
            samples.append(QaSample(sample_id, image, str(obj["question"]),
                                    str(obj["answer"]), group, he))
    return samples


def normalize_text(s: str) -> list[str]:
    """Lowercase, blank out non-alphanumerics, split, dedupe keeping first occurrence."""
    cleaned = "".join(ch if ch.isalnum() else " " for ch in s.lower())
    return list(dict.fromkeys(cleaned.split()))


def recall(prediction: str, gold: str) -> float:
    """Fraction of distinct gold tokens found among the prediction's tokens."""
    gold_tokens = normalize_text(gold)
    if not gold_tokens:
        raise EmptyGold("gold answer has no tokens")
    predicted = set(normalize_text(prediction))
    return sum(1 for t in gold_tokens if t in predicted) / len(gold_tokens)


@dataclass(frozen=True)
class BootstrapResult:
    mean_diff: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class BootstrapSummary:
    label: str
    mean_diff: float
    ci_low: float
    ci_high: float
    iterations: int
    confidence: float
    seed: int

    def render(self) -> str:
        return f"({self.mean_diff:+.2f}, CI [{self.ci_low:.2f}, {self.ci_high:.2f}])"


@dataclass
class EvalReport:
    method: str
    sample_ids: list[str]
    recalls: list[float]
    he_labels: list[bool]
    means: dict[str, float | None]
    counts: dict[str, int]
    config_fingerprint: str = ""
    bootstrap: list[BootstrapSummary] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": "report/1",
            "method": self.method,
            "config_fingerprint": self.config_fingerprint,
            "means": dict(self.means),
            "counts": dict(self.counts),
            "samples": [
                {"id": i, "recall": r, "he": h}
                for i, r, h in zip(self.sample_ids, self.recalls, self.he_labels)
            ],
            "bootstrap": [
                {"label": b.label, "mean_diff": b.mean_diff, "ci_low": b.ci_low,
                 "ci_high": b.ci_high, "iterations": b.iterations,
                 "confidence": b.confidence, "seed": b.seed}
                for b in self.bootstrap
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        samples = obj["samples"]
        return cls(
            method=obj["method"],
            sample_ids=[s["id"] for s in samples],
            recalls=[s["recall"] for s in samples],
            he_labels=[s["he"] for s in samples],
            means=dict(obj["means"]),
            counts=dict(obj["counts"]),
            config_fingerprint=obj.get("config_fingerprint", ""),
            bootstrap=[BootstrapSummary(**b) for b in obj.get("bootstrap", [])],
        )


def _mean_pct(values: list[float]) -> float | None:
    if not values:
        return None
    return 100.0 * float(np.mean(values))


def aggregate(samples, recalls, he_labels, method: str = "",
              config_fingerprint: str = "") -> EvalReport:
    """Group means (as percentages) for Not H&E, H&E and All."""
    samples, recalls, he_labels = list(samples), list(recalls), list(he_labels)
    if not len(samples) == len(recalls) == len(he_labels):
        raise LengthMismatch(
            f"{len(samples)} samples, {len(recalls)} recalls, {len(he_labels)} labels"
        )
    recalls = [float(r) for r in recalls]
    he_labels = [bool(h) for h in he_labels]
    he = [r for r, h in zip(recalls, he_labels) if h]
    not_he = [r for r, h in zip(recalls, he_labels) if not h]
    ids = [s.id if isinstance(s, QaSample) else str(s) for s in samples]
    return EvalReport(
        method=method,
        sample_ids=ids,
        recalls=recalls,
        he_labels=he_labels,
        means={GROUP_NOT_HE: _mean_pct(not_he), GROUP_HE: _mean_pct(he),
               GROUP_ALL: _mean_pct(recalls)},
        counts={GROUP_NOT_HE: len(not_he), GROUP_HE: len(he), GROUP_ALL: len(recalls)},
        config_fingerprint=config_fingerprint,
    )


def bootstrap_means(diffs, iterations: int, seed: int) -> np.ndarray:
    """Means of ``iterations`` with-replacement resamples of ``diffs``.

    Chunk ``c`` draws from a generator seeded by ``(seed, c)``, so the result
    does not depend on how chunks are scheduled.
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    n = diffs.shape[0]
    out = np.empty(iterations, dtype=np.float64)
    for chunk, start in enumerate(range(0, iterations, _BOOTSTRAP_CHUNK)):
        stop = min(start + _BOOTSTRAP_CHUNK, iterations)
        rng = np.random.default_rng([seed, chunk])
        idx = rng.integers(0, n, size=(stop - start, n))
        out[start:stop] = diffs[idx].mean(axis=1)
    return out


def paired_bootstrap(scores_a, scores_b, iterations: int = 10000,
                     confidence: float = 95.0, seed: int = 0) -> BootstrapResult:
    """Mean paired difference ``a - b`` with a percentile bootstrap CI."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape[0]} vs {b.shape[0]} scores")
    if a.shape[0] < 2:
        raise TooFewSamples("paired bootstrap needs at least 2 pairs")
    if iterations < 1 or not 0 < confidence < 100:
        raise ValueError("need iterations >= 1 and 0 < confidence < 100")
    means = bootstrap_means(a - b, iterations, seed)
    tail = (100.0 - confidence) / 2.0
    lo, hi = np.percentile(means, [tail, 100.0 - tail], method="linear")
    return BootstrapResult(float(means.mean()), float(lo), float(hi))


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.1f}"


def render_report(report, fmt: str = "table") -> str:
    """Render one report or a list of reports as a text table or JSON."""
    reports = [report] if isinstance(report, EvalReport) else list(report)
    if fmt == "json":
        payload = reports[0].to_dict() if isinstance(report, EvalReport) else [
            r.to_dict() for r in reports]
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    width = max([len("Method")] + [len(r.method or "-") for r in reports])
    lines = [f"{'Method':<{width}}  {GROUP_NOT_HE:>7}  {GROUP_HE:>5}  {GROUP_ALL:>5}"]
    lines.append(f"{'-' * width}  {'-' * 7}  {'-' * 5}  {'-' * 5}")
    for r in reports:
        lines.append(
            f"{(r.method or '-'):<{width}}  {_fmt(r.means[GROUP_NOT_HE]):>7}  "
            f"{_fmt(r.means[GROUP_HE]):>5}  {_fmt(r.means[GROUP_ALL]):>5}"
        )
        for b in r.bootstrap:
            lines.append(f"{'':<{width}}  {b.render()}  vs {b.label}")
    return "\n".join(lines) + "\n"
