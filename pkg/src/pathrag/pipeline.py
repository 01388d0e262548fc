"""End-to-end orchestration of the four retrieval variants."""

from __future__ import annotations

import enum
import json
import logging
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from . import nuclei as nuclei_mod
from .errors import BackendFailure, EmptyQuestion, PathRagError, StainEstimationError
from .graph import build_nuclei_graph
from .imaging import RgbImage, load_image
from .llm.gateway import Gateway
from .llm.prompts import (build_answer_prompt, build_description_prompt,
                          build_reasoning_prompt)
from .llm.types import PromptKind
from .nuclei import DetectionParams, ImageClass
from .patching import (RankedPatch, count_nuclei_in_patch, crop, random_patches,
                       rank_patches, tile_patches)
from .stain import DEFAULT_REFERENCE, StainReference, normalize_stains

log = logging.getLogger(__name__)

TRACE_SCHEMA = "trace/1"


class Variant(str, enum.Enum):
    BASELINE = "baseline"
    CONCAT_ANSWERS = "concat_answers"
    RAG_DESCRIPTION = "rag_description"
    RAG_ANSWER = "rag_answer"

    @property
    def uses_reasoner(self) -> bool:
        return self in (Variant.RAG_ANSWER, Variant.RAG_DESCRIPTION)


class PatchMode(str, enum.Enum):
    HISTO_RANKED = "histo_ranked"
    RANDOM = "random"


@dataclass(frozen=True)
class PipelineConfig:
    variant: Variant = Variant.RAG_ANSWER
    num_patches: int = 3
    patch_mode: PatchMode = PatchMode.HISTO_RANKED
    seed: int = 0
    normalization_enabled: bool = True
    stain_reference: StainReference = DEFAULT_REFERENCE
    od_threshold: float = 0.15
    alpha_percentile: float = 1.0
    detection: DetectionParams = field(default_factory=DetectionParams)
    graph_k: int = 5
    graph_max_distance: float = 50.0
    build_graph: bool = True
    record_timings: bool = True
    config_fingerprint: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "patch_mode", PatchMode(self.patch_mode))
        if self.variant is Variant.BASELINE and self.num_patches != 0:
            object.__setattr__(self, "num_patches", 0)
        if not 0 <= self.num_patches <= 9:
            raise ValueError("num_patches must be in [0, 9]")


@dataclass
class ImageAnalysis:
    """Per-image work shared by every question on that image."""

    image: RgbImage
    image_class: ImageClass
    selected: list[RankedPatch]
    warnings: list[str]
    timings: dict[str, float]
    graph_edges: int = 0


@dataclass
class PipelineTrace:
    image_id: str
    question: str
    image_class: ImageClass
    selected_patches: list[RankedPatch]
    per_patch_texts: list[str]
    final_answer: str
    reasoner_prompt: str | None = None
    timings: dict[str, float] = field(default_factory=dict)
    cache_hits: int = 0
    warnings: list[str] = field(default_factory=list)
    sample_id: str | None = None
    variant: str = ""
    num_patches: int = 0
    config_fingerprint: str = ""

    def to_dict(self) -> dict:
        return {
            "schema": TRACE_SCHEMA,
            "sample_id": self.sample_id,
            "image_id": self.image_id,
            "question": self.question,
            "variant": self.variant,
            "num_patches": self.num_patches,
            "config_fingerprint": self.config_fingerprint,
            "image_class": self.image_class.to_dict(),
            "selected_patches": [p.to_dict() for p in self.selected_patches],
            "per_patch_texts": list(self.per_patch_texts),
            "reasoner_prompt": self.reasoner_prompt,
            "final_answer": self.final_answer,
            "timings": dict(self.timings),
            "cache_hits": self.cache_hits,
            "warnings": list(self.warnings),
            "error": None,
        }


def error_record(sample_id: str, image_id: str, question: str, stage: str,
                 message: str, config: PipelineConfig) -> dict:
    return {
        "schema": TRACE_SCHEMA,
        "sample_id": sample_id,
        "image_id": image_id,
        "question": question,
        "variant": config.variant.value,
        "num_patches": config.num_patches,
        "config_fingerprint": config.config_fingerprint,
        "error": {"stage": stage, "message": message},
    }


class StageError(PathRagError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


def dump_trace(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


class Pipeline:
    """Runs questions through the pipeline; ``stage_counts`` records per-image work."""

    def __init__(self, config: PipelineConfig, gateway: Gateway):
        self.config = config
        self.gateway = gateway
        self.stage_counts: Counter = Counter()
        self._lock = threading.Lock()

    def _count(self, stage: str):
        with self._lock:
            self.stage_counts[stage] += 1

    def _ms(self, start: float) -> float:
        return round((time.perf_counter() - start) * 1000.0, 3) if self.config.record_timings else 0.0

    def analyze(self, image: RgbImage) -> ImageAnalysis:
        cfg = self.config
        warnings: list[str] = []
        timings: dict[str, float] = {}

        work = image
        if cfg.normalization_enabled:
            t0 = time.perf_counter()
            self._count("normalize")
            try:
                work = normalize_stains(image, cfg.stain_reference, cfg.od_threshold,
                                        cfg.alpha_percentile)
            except StainEstimationError as exc:
                warnings.append(f"stain normalization skipped: {exc}")
                log.warning("stain normalization skipped: %s", exc)
            timings["normalize"] = self._ms(t0)

        t0 = time.perf_counter()
        self._count("classify")
        found = nuclei_mod.detect_nuclei(work, cfg.detection)
        image_class = nuclei_mod.classify_nuclei(found, cfg.detection.pathology_threshold)
        timings["classify"] = self._ms(t0)

        selected: list[RankedPatch] = []
        graph_edges = 0
        if image_class.is_pathology:
            if cfg.build_graph:
                t0 = time.perf_counter()
                self._count("graph")
                graph_edges = len(build_nuclei_graph(found, cfg.graph_k,
                                                     cfg.graph_max_distance).edges)
                timings["graph"] = self._ms(t0)
            if cfg.num_patches > 0:
                t0 = time.perf_counter()
                self._count("tile")
                patches = tile_patches(image.width, image.height)
                self._count("rank")
                if cfg.patch_mode is PatchMode.HISTO_RANKED:
                    selected = rank_patches(patches, found, cfg.num_patches)
                else:
                    drawn = random_patches(patches, cfg.num_patches, cfg.seed)
                    selected = [RankedPatch(p, count_nuclei_in_patch(p, found), r)
                                for r, p in enumerate(drawn)]
                timings["patches"] = self._ms(t0)
        return ImageAnalysis(image, image_class, selected, warnings, timings, graph_edges)

    def _ask(self, stage: str, request):
        try:
            return self.gateway.chat(request)
        except BackendFailure as exc:
            raise StageError(stage, exc) from exc

    def answer(self, analysis: ImageAnalysis, question: str, image_id: str = "",
               sample_id: str | None = None) -> PipelineTrace:
        cfg = self.config
        describe = cfg.variant is Variant.RAG_DESCRIPTION
        timings = dict(analysis.timings)
        hits = 0

        def query(img: RgbImage, stage: str) -> str:
            nonlocal hits
            bundle = build_description_prompt(img) if describe else build_answer_prompt(question, img)
            resp = self._ask(stage, bundle.rendered)
            hits += int(resp.cached)
            return resp.text

        t0 = time.perf_counter()
        texts = [query(analysis.image, "answerer:full")]
        selected = analysis.selected if analysis.image_class.is_pathology else []
        for rp in selected:
            texts.append(query(crop(analysis.image, rp.patch), f"answerer:patch{rp.patch.index}"))
        timings["answerer"] = self._ms(t0)

        reasoner_prompt = None
        if cfg.variant.uses_reasoner:
            kind = PromptKind.REASON_OVER_DESCRIPTIONS if describe else PromptKind.REASON_OVER_ANSWERS
            bundle = build_reasoning_prompt(kind, question, texts[0], texts[1:])
            reasoner_prompt = bundle.text
            t0 = time.perf_counter()
            resp = self._ask("reasoner", bundle.rendered)
            hits += int(resp.cached)
            timings["reasoner"] = self._ms(t0)
            final = resp.text
        elif cfg.variant is Variant.CONCAT_ANSWERS:
            final = " ".join(texts)
        else:
            final = texts[0]

        if not cfg.record_timings:
            timings = {}
        return PipelineTrace(
            image_id=image_id,
            question=question,
            image_class=analysis.image_class,
            selected_patches=list(selected),
            per_patch_texts=texts,
            final_answer=final,
            reasoner_prompt=reasoner_prompt,
            timings=timings,
            cache_hits=hits,
            warnings=list(analysis.warnings),
            sample_id=sample_id,
            variant=cfg.variant.value,
            num_patches=cfg.num_patches,
            config_fingerprint=cfg.config_fingerprint,
        )

    def run_question(self, image: RgbImage, question: str, image_id: str = "",
                     sample_id: str | None = None) -> PipelineTrace:
        if not question or not question.strip():
            raise EmptyQuestion("question must be non-empty")
        return self.answer(self.analyze(image), question, image_id, sample_id)

    def _run_image_group(self, image_path, items) -> list[tuple[int, dict]]:
        def fail_all(stage, exc):
            return [(idx, error_record(s.id, str(image_path), s.question, stage,
                                       str(exc), self.config)) for idx, s in items]

        try:
            image = load_image(image_path)
        except (PathRagError, OSError) as exc:
            return fail_all("load", exc)
        try:
            analysis = self.analyze(image)
        except PathRagError as exc:
            return fail_all("analyze", exc)
        out = []
        for idx, s in items:
            try:
                trace = self.answer(analysis, s.question, str(image_path), s.id)
                out.append((idx, trace.to_dict()))
            except StageError as exc:
                out.append((idx, error_record(s.id, str(image_path), s.question,
                                              exc.stage, str(exc.cause), self.config)))
            except PathRagError as exc:
                out.append((idx, error_record(s.id, str(image_path), s.question,
                                              "prompt", str(exc), self.config)))
        return out

    def run_dataset(self, samples, workers: int = 1) -> list[dict]:
        """One trace record per sample, in input order.

        Samples sharing an image are processed together so per-image analysis
        runs once; distinct images may run on ``workers`` threads.
        """
        groups: dict[str, list] = {}
        for idx, s in enumerate(samples):
            groups.setdefault(str(s.image_path), []).append((idx, s))
        results: list = [None] * len(samples)
        if workers <= 1 or len(groups) <= 1:
            chunks = [self._run_image_group(p, items) for p, items in groups.items()]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(lambda kv: self._run_image_group(*kv), groups.items()))
        for chunk in chunks:
            for idx, record in chunk:
                results[idx] = record
        return results


def run_question(image: RgbImage, question: str, config: PipelineConfig,
                 gateway: Gateway) -> PipelineTrace:
    return Pipeline(config, gateway).run_question(image, question)


def run_dataset(samples, config: PipelineConfig, gateway: Gateway,
                workers: int = 1) -> list[dict]:
    return Pipeline(config, gateway).run_dataset(samples, workers)


def with_fingerprint(config: PipelineConfig, fingerprint: str) -> PipelineConfig:
    return replace(config, config_fingerprint=fingerprint)
