"""Generation record producer.

Runs an open-weights causal LM over a prompt dataset and writes generation
records in the scoring engine's JSONL schema: per prompt one greedy decode
plus M stochastic samples, each token annotated with its log-probability and
the entropy of the full next-token distribution (nats), plus a quality score
per target strategy.

Annotation comes from a teacher-forced forward pass over the generated ids,
so the stored numbers describe the model's own distribution even when
sampling warps it (top-k, top-p, temperature).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import torch

from .datasets import PromptItem, load_prompts
from .errors import ConfigError, DataError, GenerationError, ModelError
from .graders import Grader, get_grader
from .templates import load_template, render

log = logging.getLogger("cocoa_bridge")

TARGET_STRATEGIES = ("greedy", "random", "best", "best_normalized")


@dataclass
class ProducerConfig:
    model: str
    dataset: str
    output: str
    template: str = "qa_minimal"
    grader: str = "exact_match"
    m: int = 5
    temperature: float = 1.0
    top_k: int = 50
    top_p: float = 1.0
    max_new_tokens: int = 16
    limit: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if self.top_k < 0:
            raise ConfigError(f"top-k must be >= 0, got {self.top_k}")
        if not 0 < self.top_p <= 1:
            raise ConfigError(f"top-p must be in (0, 1], got {self.top_p}")
        if self.max_new_tokens < 1:
            raise ConfigError(
                f"max-new-tokens must be >= 1, got {self.max_new_tokens}"
            )


def produce_records(config: ProducerConfig) -> int:
    config.validate()
    grader = get_grader(config.grader)
    template = load_template(config.template)
    items = load_prompts(config.dataset, config.limit)
    tokenizer, model = _load_model(config.model)
    torch.manual_seed(config.seed)

    written = 0
    with open(config.output, "w", encoding="utf-8") as out:
        for item in items:
            try:
                record = _produce_one(model, tokenizer, item, template, config, grader)
            except GenerationError as exc:
                log.warning("record %s skipped: %s", item.item_id, exc)
                continue
            json.dump(record, out, ensure_ascii=False)
            out.write("\n")
            written += 1
    if written == 0:
        raise DataError(f"all {len(items)} records failed; nothing written")
    log.info("produced %d record(s) -> %s", written, config.output)
    return written


def _load_model(name: str):
    from transformers import AutoModelForCausalLM, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name)
        model = AutoModelForCausalLM.from_pretrained(name)
    except Exception as exc:
        raise ModelError(f"cannot load model {name!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _produce_one(
    model,
    tokenizer,
    item: PromptItem,
    template: str,
    config: ProducerConfig,
    grader: Grader,
) -> dict:
    prompt = render(template, item.question)
    enc = tokenizer(prompt, return_tensors="pt")
    prompt_ids = enc["input_ids"][0].tolist()

    greedy_ids = _generate(model, tokenizer, enc, config, sample=False)[0]
    sample_ids = _generate(model, tokenizer, enc, config, sample=True)

    greedy = _annotate(model, tokenizer, prompt_ids, greedy_ids)
    samples = [_annotate(model, tokenizer, prompt_ids, ids) for ids in sample_ids]

    quality = {
        strategy: grader(_select(strategy, greedy, samples)["text"], item.answers)
        for strategy in TARGET_STRATEGIES
    }
    return {
        "record_id": item.item_id,
        "input_text": prompt,
        "greedy": greedy,
        "samples": samples,
        "quality": quality,
    }


def _generate(model, tokenizer, enc, config: ProducerConfig, sample: bool) -> list[list[int]]:
    eos_id = tokenizer.eos_token_id
    kwargs = {
        "max_new_tokens": config.max_new_tokens,
        # Keeps EOS out of the first slot so every sequence has a real token.
        "min_new_tokens": 1,
        "pad_token_id": tokenizer.pad_token_id
        if tokenizer.pad_token_id is not None
        else eos_id,
    }
    if sample:
        kwargs.update(
            do_sample=True,
            num_return_sequences=config.m,
            temperature=config.temperature,
            top_k=config.top_k,
            top_p=config.top_p,
        )
    else:
        kwargs["do_sample"] = False
    try:
        with torch.no_grad():
            out = model.generate(**enc, **kwargs)
    except Exception as exc:
        raise GenerationError(f"generation failed: {exc}") from exc

    prompt_len = enc["input_ids"].shape[1]
    rows = []
    for row in out[:, prompt_len:].tolist():
        if eos_id is not None and eos_id in row:
            row = row[: row.index(eos_id)]
        if not row:
            raise GenerationError("model emitted no tokens before EOS")
        rows.append(row)
    return rows


def _annotate(model, tokenizer, prompt_ids: list[int], new_ids: list[int]) -> dict:
    """Token records from a teacher-forced pass over prompt + generation."""
    full = torch.tensor([prompt_ids + new_ids])
    with torch.no_grad():
        logits = model(input_ids=full).logits[0]
    rows = torch.log_softmax(logits.double(), dim=-1)

    tokens = []
    decoded = ""
    offset = len(prompt_ids)
    for k, token_id in enumerate(new_ids):
        row = rows[offset + k - 1]
        probs = row.exp()
        entropy = float(-(probs * row).sum())
        step = tokenizer.decode(new_ids[: k + 1])
        surface = step[len(decoded):]
        decoded = step
        tokens.append(
            {
                "text": surface,
                "log_prob": min(float(row[token_id]), 0.0),
                "dist_entropy": max(entropy, 0.0),
            }
        )
    return {"text": decoded, "tokens": tokens}


def _select(strategy: str, greedy: dict, samples: list[dict]) -> dict:
    if strategy == "greedy":
        return greedy
    if strategy == "random":
        # Mirrors the engine: "random" is pinned to the first sample.
        return samples[0]
    best = samples[0]
    best_score = _strategy_score(best, strategy)
    for candidate in samples[1:]:
        score = _strategy_score(candidate, strategy)
        if score > best_score:
            best, best_score = candidate, score
    return best


def _strategy_score(seq: dict, strategy: str) -> float:
    total = sum(t["log_prob"] for t in seq["tokens"])
    if strategy == "best_normalized":
        return total / len(seq["tokens"])
    return total
