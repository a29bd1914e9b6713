"""Pipeline configuration: one JSON document, strict keys, flag overrides.

Every leaf is overridable on the command line with repeated
``--set section.key=value`` flags; values parse as JSON when possible and
fall back to strings. Unknown keys anywhere in the document are rejected.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError

_EMBED_SOURCE = {"file": None, "provider": None, "cache": None, "model_id": None}

SCHEMA = {
    "paths": {
        "corpus": None,
        "calendar": None,
        "labels": None,  # one path or a list; sources are concatenated
        "gold_labels": None,
        "stream": None,
        "tasks": None,
        "responses": None,
        "template": None,
        "stopwords": None,
        "work_dir": None,
        "model": None,
        "manifest": None,
    },
    "embeddings": {
        "text": _EMBED_SOURCE,
        "image": _EMBED_SOURCE,
        "text_keywords_removed": _EMBED_SOURCE,
    },
    "mining": {
        "event": None,
        "alpha": None,
        "min_docs": None,
        "max_keywords": None,
        "ranking": None,
    },
    "build": {
        "seed": None,
        "test_fraction": None,
        "target_positive_ratio": None,
        "upsample_minority": None,
        "volume_cap": None,
        "target_event": None,
    },
    "train": {
        "learning_rate": None,
        "batch_size": None,
        "epochs": None,
        "seed": None,
        "l2": None,
        "hidden_sizes": None,
        "variant": None,
    },
    "eval": {
        "variant": None,
        "zero_modality": None,
    },
    "sweep": {
        "volumes": None,
    },
    "calibration": {
        "window_hours": None,
        "smooth_k": None,
        "delta": None,
        "min_run": None,
        "years": None,
    },
    "annotator": {
        "endpoint": None,
        "event": None,
        "max_tokens": None,
        "temperature": None,
        "max_retries": None,
        "timeout": None,
        "backoff_base": None,
        "max_in_flight": None,
    },
}

DEFAULTS = {
    "paths": {"work_dir": "out"},
    "mining": {"alpha": 1.0, "min_docs": 3, "max_keywords": 50, "ranking": "lift"},
    "build": {
        "seed": 0,
        "test_fraction": 0.2,
        "target_positive_ratio": 0.5,
        "upsample_minority": False,
        "volume_cap": None,
        "target_event": None,
    },
    "train": {
        "learning_rate": 1e-3,
        "batch_size": 64,
        "epochs": 20,
        "seed": 0,
        "l2": 1e-5,
        "hidden_sizes": [256, 64],
        "variant": "with_keywords",
    },
    "eval": {"variant": "with_keywords", "zero_modality": None},
    "sweep": {"volumes": []},
    "calibration": {"window_hours": 24, "smooth_k": 7, "delta": 0.1, "min_run": 3, "years": []},
    "annotator": {
        "max_tokens": 256,
        "temperature": 0.0,
        "max_retries": 2,
        "timeout": 60.0,
        "backoff_base": 0.5,
        "max_in_flight": 1,
    },
}


def _check_keys(obj, schema, crumb=""):
    if not isinstance(obj, dict):
        raise ConfigError(f"expected an object at {crumb or 'top level'}")
    for key, value in obj.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {crumb + key!r}")
        sub = schema[key]
        if isinstance(sub, dict) and isinstance(value, dict):
            _check_keys(value, sub, f"{crumb}{key}.")
        elif isinstance(sub, dict) and value is not None:
            raise ConfigError(f"config key {crumb + key!r} must be an object")


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(spec: str) -> tuple[list[str], object]:
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} must look like section.key=value")
    dotted, raw = spec.split("=", 1)
    path = [p for p in dotted.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {spec!r} has an empty key path")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_override(config: dict, path: list[str], value) -> None:
    node = config
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override through non-object key {part!r}")
    node[path[-1]] = value


class PipelineConfig:
    """Validated configuration with dotted-path access."""

    def __init__(self, data: dict):
        _check_keys(data, SCHEMA)
        self.data = _merge(DEFAULTS, data)

    @classmethod
    def load(cls, path: str | None, overrides: list[str] = ()) -> "PipelineConfig":
        if path is None:
            data = {}
        else:
            try:
                data = json.loads(Path(path).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {path}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc.msg}") from None
        for spec in overrides or ():
            key_path, value = parse_override(spec)
            apply_override(data, key_path, value)
        return cls(data)

    def get(self, dotted: str, default=None):
        node = self.data
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def require(self, dotted: str):
        value = self.get(dotted)
        if value is None:
            raise ConfigError(f"config key {dotted!r} is required for this subcommand")
        return value

    def require_path(self, dotted: str) -> Path:
        path = Path(self.require(dotted))
        if not path.exists():
            raise ConfigError(f"path for {dotted!r} does not exist: {path}")
        return path

    def work_dir(self) -> Path:
        path = Path(self.get("paths.work_dir", "out"))
        path.mkdir(parents=True, exist_ok=True)
        return path
