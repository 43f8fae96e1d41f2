"""Produces generation records from an open-weights LM and serves neural
similarity backends over the scoring engine's wire contract."""

from .datasets import PromptItem, load_prompts
from .errors import BridgeError, ConfigError, DataError, GenerationError, ModelError
from .graders import GRADERS, exact_match, get_grader, normalize_answer, token_f1
from .producer import TARGET_STRATEGIES, ProducerConfig, produce_records
from .templates import builtin_names, load_template, render

__version__ = "0.1.0"

__all__ = [
    "BridgeError",
    "ConfigError",
    "DataError",
    "GenerationError",
    "ModelError",
    "PromptItem",
    "load_prompts",
    "GRADERS",
    "exact_match",
    "get_grader",
    "normalize_answer",
    "token_f1",
    "TARGET_STRATEGIES",
    "ProducerConfig",
    "produce_records",
    "builtin_names",
    "load_template",
    "render",
]
