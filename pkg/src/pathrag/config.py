"""Run configuration: file loading, flag overrides, fingerprinting, object factories."""

from __future__ import annotations

import copy
import hashlib
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError
from .llm import Gateway, HttpBackend, MockBackend, ResponseCache, Role
from .nuclei import DetectionParams
from .pipeline import PatchMode, PipelineConfig, Variant
from .stain import (DEFAULT_E, DEFAULT_H, DEFAULT_MAX_CONCENTRATIONS,
                    StainReference)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULTS: dict = {
    "pipeline": {
        "variant": Variant.RAG_ANSWER.value,
        "num_patches": 3,
        "patch_mode": PatchMode.HISTO_RANKED.value,
        "seed": 0,
        "normalize": True,
        "record_timings": True,
    },
    "detection": {"min_area": 10, "max_area": 5000, "pathology_threshold": 5},
    "graph": {"k": 5, "max_distance": 50.0},
    "stain": {
        "hematoxylin": list(DEFAULT_H),
        "eosin": list(DEFAULT_E),
        "max_concentrations": list(DEFAULT_MAX_CONCENTRATIONS),
        "od_threshold": 0.15,
        "alpha_percentile": 1.0,
    },
    "backend": {
        "kind": "mock",
        "answerer_url": "http://localhost:8000/v1",
        "reasoner_url": "https://api.openai.com/v1",
        "answerer_model": "llava-med",
        "reasoner_model": "gpt-4-0125-preview",
        "api_key_env": "OPENAI_API_KEY",
        "answerer_api_key_env": None,
        "max_in_flight": 4,
        "timeout": 120.0,
        "cache_dir": None,
    },
    "run": {"workers": 4},
}


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where}{key!r} must be a table")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the TOML/JSON file at ``path``, then dotted-key ``overrides``.

    Override values of None are ignored, so unset CLI flags fall through.
    """
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            if path.suffix.lower() == ".json":
                data = json.loads(raw)
            else:
                data = tomllib.loads(raw.decode("utf-8"))
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        cfg = _merge(cfg, data)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in cfg or key not in cfg[section]:
            raise ConfigError(f"unknown config key {dotted!r}")
        cfg[section][key] = value
    return cfg


# operational knobs that cannot change any output text
_UNFINGERPRINTED = {("backend", "cache_dir"), ("backend", "max_in_flight"),
                    ("backend", "timeout"), ("run", "workers")}


def fingerprint(cfg: dict) -> str:
    """Short digest of the canonicalized effective config."""
    semantic = {
        section: {k: v for k, v in values.items() if (section, k) not in _UNFINGERPRINTED}
        for section, values in cfg.items()
    }
    canonical = json.dumps(semantic, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("ascii")).hexdigest()[:16]


def pipeline_config(cfg: dict) -> PipelineConfig:
    p, d, g, s = cfg["pipeline"], cfg["detection"], cfg["graph"], cfg["stain"]
    try:
        return PipelineConfig(
            variant=Variant(p["variant"]),
            num_patches=int(p["num_patches"]),
            patch_mode=PatchMode(p["patch_mode"]),
            seed=int(p["seed"]),
            normalization_enabled=bool(p["normalize"]),
            stain_reference=StainReference.from_config(s),
            od_threshold=float(s["od_threshold"]),
            alpha_percentile=float(s["alpha_percentile"]),
            detection=DetectionParams(int(d["min_area"]), int(d["max_area"]),
                                      int(d["pathology_threshold"])),
            graph_k=int(g["k"]),
            graph_max_distance=float(g["max_distance"]),
            record_timings=bool(p["record_timings"]),
            config_fingerprint=fingerprint(cfg),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def make_gateway(cfg: dict, **mock_kwargs) -> Gateway:
    """Build the gateway; for the HTTP backend the API key must be in the environment."""
    b = cfg["backend"]
    cache = ResponseCache(b["cache_dir"]) if b.get("cache_dir") else None
    models = {Role.MULTIMODAL_ANSWERER: b["answerer_model"],
              Role.TEXT_REASONER: b["reasoner_model"]}
    kind = b["kind"]
    if kind == "mock":
        answerer = MockBackend(**mock_kwargs)
        reasoner = answerer
    elif kind == "http":
        key_env = b["api_key_env"]
        api_key = os.environ.get(key_env) if key_env else None
        if not api_key:
            raise ConfigError(f"http backend needs an API key in ${key_env}")
        answerer_env = b.get("answerer_api_key_env")
        answerer_key = os.environ.get(answerer_env) if answerer_env else api_key
        timeout = float(b["timeout"])
        answerer = HttpBackend(b["answerer_url"], answerer_key, timeout=timeout)
        reasoner = HttpBackend(b["reasoner_url"], api_key, timeout=timeout)
    else:
        raise ConfigError(f"unknown backend kind {kind!r}; use 'mock' or 'http'")
    return Gateway(answerer, reasoner, cache=cache, models=models,
                   max_in_flight=int(b["max_in_flight"]))
