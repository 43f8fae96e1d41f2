"""Run configuration: a single TOML file with one-to-one CLI flag overrides.

Sections and keys:

    [run]         records, output, estimators, strategy, workers,
                  sentence_sar_temperature
    [similarity]  backend, endpoint, batch_size, retries, backoff,
                  concurrency, cache_dir, timeout
    [evaluation]  scores, dataset_name, max_rejection, report, curves_dir
    [evaluation.task_groups]   group -> [dataset, ...]
    [datasets.<name>]          records, scores (multi-dataset evaluate/ablate)
    [ablation]    estimators, backends, strategies, output
    [synth]       seed, n_records, m, vocab_size, rho, overlap, regime, output

Unknown keys are rejected. The provider endpoint falls back to the
COCOA_SIM_ENDPOINT environment variable when unset.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError
from .estimators import ESTIMATOR_IDS
from .records import STRATEGY_NAMES
from .similarity import parse_backend

__all__ = ["RunConfig", "SimilaritySettings", "load_config", "DEFAULT_TASK_GROUPS"]

ENDPOINT_ENV = "COCOA_SIM_ENDPOINT"

# The benchmark grouping used for aggregate reporting; override per run.
DEFAULT_TASK_GROUPS: dict[str, list[str]] = {
    "qa": ["triviaqa", "mmlu", "coqa", "gsm8k"],
    "nmt": ["wmt14fren", "wmt19deen"],
    "sum": ["xsum"],
}


@dataclass
class SimilaritySettings:
    backend: str = "jaccard"
    endpoint: str | None = None
    batch_size: int = 32
    retries: int = 3
    backoff: float = 0.25
    concurrency: int = 4
    cache_dir: str | None = ".cocoa-sim-cache"
    timeout: float = 30.0


@dataclass
class SynthSettings:
    seed: int = 0
    n_records: int = 100
    m: int = 10
    vocab_size: int = 400
    rho: float = 0.0
    overlap: float | None = None
    regime: str = "confident"
    output: str | None = None


@dataclass
class AblationSettings:
    estimators: list[str] = field(default_factory=list)
    backends: list[str] = field(default_factory=list)
    strategies: list[str] = field(default_factory=list)
    output: str | None = None


@dataclass
class RunConfig:
    records: str | None = None
    output: str | None = None
    estimators: list[str] = field(default_factory=lambda: ["msp"])
    strategy: str = "greedy"
    workers: int = 0
    sentence_sar_temperature: float = 0.001
    similarity: SimilaritySettings = field(default_factory=SimilaritySettings)
    scores: str | None = None
    dataset_name: str = "default"
    max_rejection: float = 0.5
    report: str | None = None
    curves_dir: str | None = None
    task_groups: dict[str, list[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_TASK_GROUPS.items()}
    )
    datasets: dict[str, dict[str, str]] = field(default_factory=dict)
    ablation: AblationSettings = field(default_factory=AblationSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)


_SECTION_KEYS = {
    "run": {
        "records", "output", "estimators", "strategy", "workers",
        "sentence_sar_temperature",
    },
    "similarity": {
        "backend", "endpoint", "batch_size", "retries", "backoff",
        "concurrency", "cache_dir", "timeout",
    },
    "evaluation": {
        "scores", "dataset_name", "max_rejection", "report", "curves_dir",
        "task_groups",
    },
    "ablation": {"estimators", "backends", "strategies", "output"},
    "synth": {
        "seed", "n_records", "m", "vocab_size", "rho", "overlap", "regime",
        "output",
    },
}


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from defaults, an optional TOML file, and
    CLI overrides (a flat dict of 'section.key' entries)."""
    config = RunConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path!r}: {exc}") from None
        _apply_toml(config, data, path)
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set(config, dotted, value)
    _validate(config)
    return config


def _apply_toml(config: RunConfig, data: dict, path: str) -> None:
    for section, content in data.items():
        if section == "datasets":
            if not isinstance(content, dict):
                raise ConfigError(f"{path}: [datasets] must be a table")
            for name, entry in content.items():
                if not isinstance(entry, dict) or not set(entry) <= {"records", "scores"}:
                    raise ConfigError(
                        f"{path}: [datasets.{name}] must define records and/or scores"
                    )
                config.datasets[name] = {k: str(v) for k, v in entry.items()}
            continue
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"{path}: [{section}] must be a table")
        for key, value in content.items():
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            if section == "evaluation" and key == "task_groups":
                if not isinstance(value, dict):
                    raise ConfigError(f"{path}: task_groups must be a table")
                config.task_groups = {
                    g: [str(d) for d in ds] for g, ds in value.items()
                }
                continue
            _set(config, f"{section}.{key}", value)


def _set(config: RunConfig, dotted: str, value: object) -> None:
    section, key = dotted.split(".", 1)
    if section == "run":
        setattr(config, key, value)
    elif section == "similarity":
        setattr(config.similarity, key, value)
    elif section == "evaluation":
        setattr(config, key, value)
    elif section == "ablation":
        setattr(config.ablation, key, value)
    elif section == "synth":
        setattr(config.synth, key, value)
    else:
        raise ConfigError(f"unknown config key {dotted!r}")


def _validate(config: RunConfig) -> None:
    for estimator in config.estimators:
        if estimator not in ESTIMATOR_IDS:
            raise ConfigError(f"unknown estimator {estimator!r}")
    if config.strategy not in STRATEGY_NAMES:
        raise ConfigError(f"unknown target strategy {config.strategy!r}")
    parse_backend(config.similarity.backend)
    if not config.similarity.endpoint:
        config.similarity.endpoint = os.environ.get(ENDPOINT_ENV) or None
    if not 0.0 < config.max_rejection <= 1.0:
        raise ConfigError(
            f"max_rejection must be in (0, 1], got {config.max_rejection}"
        )
    if config.sentence_sar_temperature <= 0:
        raise ConfigError("sentence_sar_temperature must be > 0")
    if config.workers < 0:
        raise ConfigError("workers must be >= 0 (0 means one per core)")
    for group, members in config.task_groups.items():
        if not members:
            raise ConfigError(f"task group {group!r} is empty")
    for name in config.ablation.estimators:
        if name not in ESTIMATOR_IDS:
            raise ConfigError(f"unknown estimator {name!r} in ablation grid")
    for spec in config.ablation.backends:
        parse_backend(spec)
    for strategy in config.ablation.strategies:
        if strategy not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {strategy!r} in ablation grid")
    synth = config.synth
    if synth.n_records < 1 or synth.m < 1 or synth.vocab_size < 1:
        raise ConfigError("synth sizes must be >= 1")
    if not 0.0 <= synth.rho <= 1.0:
        raise ConfigError(f"synth rho must be in [0, 1], got {synth.rho}")
    if synth.overlap is not None and not 0.0 <= synth.overlap <= 1.0:
        raise ConfigError(f"synth overlap must be in [0, 1], got {synth.overlap}")
    if synth.regime not in ("confident", "diffuse"):
        raise ConfigError(
            f"synth regime must be 'confident' or 'diffuse', got {synth.regime!r}"
        )
