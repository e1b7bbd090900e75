"""Run configuration: a single JSON file describing one experiment.

Parsing is strict: unknown keys anywhere in the tree are rejected, and
``parse -> serialize -> parse`` is the identity.  Defaults follow the
standard protocol (seed 50, batch 5, 100 iterations, 5 folds).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional

from .models import ClassifierSpec, ModelError
from .oracle import Prices
from .strategies import STRATEGY_NAMES

__all__ = [
    "ConfigError",
    "DatasetConfig",
    "EmbeddingConfig",
    "OracleConfig",
    "PromptConfig",
    "RunConfig",
    "load_config",
]

MODES = ("rq1", "rq2", "rq3", "rq4")


class ConfigError(ValueError):
    pass


def _take(d: dict, where: str, known: dict[str, Any]) -> dict:
    """Pop known keys with defaults; reject anything left over."""
    out = {}
    d = dict(d)
    for key, default in known.items():
        out[key] = d.pop(key, default)
    if d:
        raise ConfigError(f"unknown keys in {where}: {sorted(d)}")
    return out


_REQUIRED = object()


def _require(values: dict, where: str) -> dict:
    for key, value in values.items():
        if value is _REQUIRED:
            raise ConfigError(f"{where}: missing required key {key!r}")
    return values


@dataclass(frozen=True)
class DatasetConfig:
    path: str
    format: str
    text_field: str = "text"
    label_field: Optional[str] = "label"
    label_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"dataset.format must be csv or jsonl, got {self.format!r}")
        if len(self.label_names) < 2:
            raise ConfigError("dataset.label_names needs at least 2 entries")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        vals = _require(
            _take(
                d,
                "dataset",
                {
                    "path": _REQUIRED,
                    "format": _REQUIRED,
                    "text_field": "text",
                    "label_field": "label",
                    "label_names": _REQUIRED,
                },
            ),
            "dataset",
        )
        vals["label_names"] = tuple(vals["label_names"])
        return cls(**vals)


@dataclass(frozen=True)
class EmbeddingConfig:
    source: str  # file | remote | hash
    path: Optional[str] = None
    dim: int = 768
    rng_seed: int = 0
    endpoint: Optional[str] = None
    batch_size: int = 32
    retries: int = 3
    concurrency: int = 1

    def __post_init__(self) -> None:
        if self.source not in ("file", "remote", "hash"):
            raise ConfigError(f"embedding.source must be file/remote/hash, got {self.source!r}")
        if self.source == "file" and not self.path:
            raise ConfigError("embedding.source=file needs embedding.path")
        if self.source == "remote" and not self.endpoint:
            raise ConfigError("embedding.source=remote needs embedding.endpoint")

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingConfig":
        vals = _require(
            _take(
                d,
                "embedding",
                {
                    "source": _REQUIRED,
                    "path": None,
                    "dim": 768,
                    "rng_seed": 0,
                    "endpoint": None,
                    "batch_size": 32,
                    "retries": 3,
                    "concurrency": 1,
                },
            ),
            "embedding",
        )
        return cls(**vals)


@dataclass(frozen=True)
class OracleConfig:
    kind: str  # ground_truth | llm | mock
    endpoint: Optional[str] = None
    model: Optional[str] = None
    script: Optional[str] = None
    prices: Optional[Prices] = None
    retry_limit: int = 3
    backoff: float = 0.25
    min_interval: float = 0.0
    max_in_flight: int = 4
    cache_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("ground_truth", "llm", "mock"):
            raise ConfigError(f"oracle.kind must be ground_truth/llm/mock, got {self.kind!r}")
        if self.kind == "llm" and (not self.endpoint or not self.model):
            raise ConfigError("oracle.kind=llm needs oracle.endpoint and oracle.model")
        if self.kind == "mock" and not self.script:
            raise ConfigError("oracle.kind=mock needs oracle.script")

    @classmethod
    def from_dict(cls, d: dict) -> "OracleConfig":
        vals = _require(
            _take(
                d,
                "oracle",
                {
                    "kind": _REQUIRED,
                    "endpoint": None,
                    "model": None,
                    "script": None,
                    "prices": None,
                    "retry_limit": 3,
                    "backoff": 0.25,
                    "min_interval": 0.0,
                    "max_in_flight": 4,
                    "cache_path": None,
                },
            ),
            "oracle",
        )
        if vals["prices"] is not None:
            prices = _require(
                _take(
                    vals["prices"],
                    "oracle.prices",
                    {
                        "usd_per_1k_prompt_tokens": _REQUIRED,
                        "usd_per_1k_completion_tokens": _REQUIRED,
                    },
                ),
                "oracle.prices",
            )
            vals["prices"] = Prices(**prices)
        return cls(**vals)


@dataclass(frozen=True)
class PromptConfig:
    expertise: str
    task: str
    instruction: str

    @classmethod
    def from_dict(cls, d: dict) -> "PromptConfig":
        vals = _require(
            _take(
                d,
                "prompt",
                {"expertise": _REQUIRED, "task": _REQUIRED, "instruction": _REQUIRED},
            ),
            "prompt",
        )
        return cls(**vals)


@dataclass(frozen=True)
class RunConfig:
    mode: str
    output_dir: str
    dataset: DatasetConfig
    embedding: EmbeddingConfig
    oracle: OracleConfig
    prompt: Optional[PromptConfig] = None
    strategies: tuple[str, ...] = ("qbc", "entropy_diversity", "coreset", "info_density")
    classifier: Optional[ClassifierSpec] = None
    seed_size: int = 50
    batch_size: int = 5
    iterations: int = 100
    candidate_factor: int = 10
    folds: int = 5
    rng_seed: int = 0
    rq4_repeats: int = 5
    parallel_folds: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                raise ConfigError(f"unknown strategy {s!r}")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if self.oracle.kind in ("llm", "mock") and self.prompt is None:
            raise ConfigError(f"oracle.kind={self.oracle.kind} needs a prompt section")
        if self.mode in ("rq2", "rq3") and self.oracle.kind == "ground_truth":
            raise ConfigError(f"mode {self.mode} needs an llm or mock oracle")
        if self.mode == "rq3" and self.oracle.prices is None:
            raise ConfigError("mode rq3 needs oracle.prices (missing price)")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        vals = _require(
            _take(
                d,
                "config",
                {
                    "mode": _REQUIRED,
                    "output_dir": _REQUIRED,
                    "dataset": _REQUIRED,
                    "embedding": _REQUIRED,
                    "oracle": _REQUIRED,
                    "prompt": None,
                    "strategies": None,
                    "strategy": None,
                    "classifier": None,
                    "seed_size": 50,
                    "batch_size": 5,
                    "iterations": 100,
                    "candidate_factor": 10,
                    "folds": 5,
                    "rng_seed": 0,
                    "rq4_repeats": 5,
                    "parallel_folds": 1,
                },
            ),
            "config",
        )
        single = vals.pop("strategy")
        if vals["strategies"] is None:
            vals["strategies"] = (
                (single,) if single else ("qbc", "entropy_diversity", "coreset", "info_density")
            )
        elif single is not None:
            raise ConfigError("give either 'strategy' or 'strategies', not both")
        vals["strategies"] = tuple(vals["strategies"])
        vals["dataset"] = DatasetConfig.from_dict(vals["dataset"])
        vals["embedding"] = EmbeddingConfig.from_dict(vals["embedding"])
        vals["oracle"] = OracleConfig.from_dict(vals["oracle"])
        if vals["prompt"] is not None:
            vals["prompt"] = PromptConfig.from_dict(vals["prompt"])
        if vals["classifier"] is not None:
            spec = _require(
                _take(
                    vals["classifier"],
                    "classifier",
                    {"kind": _REQUIRED, "hyperparameters": {}, "rng_seed": 0},
                ),
                "classifier",
            )
            try:
                vals["classifier"] = ClassifierSpec(
                    kind=spec["kind"],
                    hyperparameters=dict(spec["hyperparameters"]),
                    rng_seed=spec["rng_seed"],
                )
            except ModelError as exc:
                raise ConfigError(str(exc)) from exc
        return cls(**vals)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["strategies"] = list(self.strategies)
        out["dataset"]["label_names"] = list(self.dataset.label_names)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return RunConfig.from_dict(data)
