"""Generation records: the serialized unit of work.

A record bundles one prompt with its M sampled sequences, an optional greedy
sequence, quality scores keyed by target strategy, and optional precomputed
similarity blocks. Records travel as JSONL, one object per line:

    {"record_id": str, "input_text": str,
     "greedy": {"text": str, "tokens": [{"text": str, "log_prob": float,
                                         "dist_entropy": float|null}]} | null,
     "samples": [<sequence>, ...],
     "quality": {"greedy": float, ...},
     "precomputed_sim": {"<backend>": [[float, ...], ...]} | null}

Precomputed matrices are ordered greedy row/column first (when a greedy
sequence is present), then samples in order. A sequence's "text" field is
optional on input; when absent it is reconstructed by concatenating token
surface strings. Serialization always writes it.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import ConfigError, DataError

__all__ = [
    "TokenObservation",
    "Sequence",
    "GenerationRecord",
    "TargetStrategy",
    "seq_log_prob",
    "select_target",
    "load_records",
    "parse_record",
    "serialize_record",
    "dump_records",
]


@dataclass(frozen=True)
class TokenObservation:
    """One generated token: surface string, log-probability in nats (<= 0),
    and optionally the entropy of the full next-token distribution at that
    step, in nats (>= 0)."""

    text: str
    log_prob: float
    dist_entropy: float | None = None


@dataclass(frozen=True)
class Sequence:
    """An ordered token list (length >= 1) plus the detokenized output text."""

    tokens: tuple[TokenObservation, ...]
    text: str

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class GenerationRecord:
    record_id: str
    input_text: str
    samples: tuple[Sequence, ...]
    greedy: Sequence | None = None
    quality: dict[str, float] = field(default_factory=dict)
    precomputed_sim: dict[str, list[list[float]]] | None = None


class TargetStrategy(str, enum.Enum):
    """Which sequence counts as 'the answer' being scored."""

    GREEDY = "greedy"
    RANDOM = "random"
    BEST = "best"
    BEST_NORMALIZED = "best_normalized"


STRATEGY_NAMES = tuple(s.value for s in TargetStrategy)


def seq_log_prob(seq: Sequence) -> float:
    """Sequence log-probability: the plain sum of token log-probs."""
    return sum(t.log_prob for t in seq.tokens)


def select_target(
    record: GenerationRecord, strategy: TargetStrategy | str
) -> tuple[Sequence, int | str]:
    """Pick the target sequence for a strategy.

    Returns the sequence and a marker: the sample index, or the string
    "greedy". "random" is pinned to samples[0] (no RNG in the engine);
    best/best_normalized break ties toward the lowest index.
    """
    try:
        strategy = TargetStrategy(strategy)
    except ValueError:
        raise ConfigError(f"unknown target strategy {strategy!r}") from None
    if strategy is TargetStrategy.GREEDY:
        if record.greedy is None:
            raise DataError(
                f"record {record.record_id!r}: strategy 'greedy' requested "
                "but the record has no greedy sequence"
            )
        return record.greedy, "greedy"
    if strategy is TargetStrategy.RANDOM:
        return record.samples[0], 0
    best_i = 0
    best_score = _strategy_score(record.samples[0], strategy)
    for i in range(1, len(record.samples)):
        score = _strategy_score(record.samples[i], strategy)
        if score > best_score:
            best_i, best_score = i, score
    return record.samples[best_i], best_i


def _strategy_score(seq: Sequence, strategy: TargetStrategy) -> float:
    lp = seq_log_prob(seq)
    if strategy is TargetStrategy.BEST_NORMALIZED:
        return lp / len(seq)
    return lp


# --- JSONL ingestion -------------------------------------------------------


def load_records(path: str | os.PathLike) -> Iterator[GenerationRecord]:
    """Stream validated records from a JSONL file, in file order.

    Invalid lines abort the stream with a DataError naming the file, the
    1-based line number, and where possible the record and field at fault.
    Duplicate record_ids across the file are rejected.
    """
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{line_no}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON: {exc}") from None
            record = parse_record(obj, where=where)
            if record.record_id in seen:
                raise DataError(
                    f"{where}: duplicate record_id {record.record_id!r}"
                )
            seen.add(record.record_id)
            yield record


def parse_record(obj: object, where: str = "record") -> GenerationRecord:
    """Validate one decoded JSON object against the record schema."""
    if not isinstance(obj, dict):
        raise DataError(f"{where}: record must be a JSON object")
    record_id = obj.get("record_id")
    if not isinstance(record_id, str) or not record_id:
        raise DataError(f"{where}: record_id must be a non-empty string")
    ctx = f"{where}: record {record_id!r}"
    input_text = obj.get("input_text")
    if not isinstance(input_text, str):
        raise DataError(f"{ctx}: input_text must be a string")

    raw_samples = obj.get("samples")
    if not isinstance(raw_samples, list) or not raw_samples:
        raise DataError(f"{ctx}: samples must be a non-empty list")
    samples = tuple(
        _parse_sequence(s, f"{ctx}: samples[{i}]") for i, s in enumerate(raw_samples)
    )

    raw_greedy = obj.get("greedy")
    greedy = None if raw_greedy is None else _parse_sequence(raw_greedy, f"{ctx}: greedy")

    quality = _parse_quality(obj.get("quality"), ctx)
    precomputed = _parse_precomputed(
        obj.get("precomputed_sim"), ctx, n=len(samples) + (1 if greedy else 0)
    )
    return GenerationRecord(
        record_id=record_id,
        input_text=input_text,
        samples=samples,
        greedy=greedy,
        quality=quality,
        precomputed_sim=precomputed,
    )


def _parse_sequence(obj: object, ctx: str) -> Sequence:
    if not isinstance(obj, dict):
        raise DataError(f"{ctx}: sequence must be an object")
    raw_tokens = obj.get("tokens")
    if not isinstance(raw_tokens, list) or not raw_tokens:
        raise DataError(f"{ctx}: tokens must be a non-empty list")
    tokens = []
    for i, tok in enumerate(raw_tokens):
        tctx = f"{ctx}: tokens[{i}]"
        if not isinstance(tok, dict):
            raise DataError(f"{tctx}: token must be an object")
        text = tok.get("text")
        if not isinstance(text, str):
            raise DataError(f"{tctx}: text must be a string")
        log_prob = _require_finite_number(tok.get("log_prob"), f"{tctx}: log_prob")
        if log_prob > 0:
            raise DataError(f"{tctx}: log_prob {log_prob} > 0")
        entropy = tok.get("dist_entropy")
        if entropy is not None:
            entropy = _require_finite_number(entropy, f"{tctx}: dist_entropy")
            if entropy < 0:
                raise DataError(f"{tctx}: dist_entropy {entropy} < 0")
        tokens.append(TokenObservation(text=text, log_prob=log_prob, dist_entropy=entropy))
    text = obj.get("text")
    if text is None:
        text = "".join(t.text for t in tokens)
    elif not isinstance(text, str):
        raise DataError(f"{ctx}: text must be a string")
    return Sequence(tokens=tuple(tokens), text=text)


def _parse_quality(obj: object, ctx: str) -> dict[str, float]:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise DataError(f"{ctx}: quality must be an object")
    quality: dict[str, float] = {}
    for key, value in obj.items():
        if key not in STRATEGY_NAMES:
            raise DataError(
                f"{ctx}: quality key {key!r} is not a target strategy "
                f"(expected one of {', '.join(STRATEGY_NAMES)})"
            )
        value = _require_finite_number(value, f"{ctx}: quality[{key!r}]")
        if not 0.0 <= value <= 1.0:
            raise DataError(f"{ctx}: quality[{key!r}] = {value} outside [0,1]")
        quality[key] = value
    return quality


def _parse_precomputed(
    obj: object, ctx: str, n: int
) -> dict[str, list[list[float]]] | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise DataError(f"{ctx}: precomputed_sim must be an object")
    blocks: dict[str, list[list[float]]] = {}
    for name, matrix in obj.items():
        mctx = f"{ctx}: precomputed_sim[{name!r}]"
        if not isinstance(matrix, list) or len(matrix) != n:
            raise DataError(f"{mctx}: expected a {n}x{n} matrix")
        rows: list[list[float]] = []
        for i, row in enumerate(matrix):
            if not isinstance(row, list) or len(row) != n:
                raise DataError(f"{mctx}: row {i} is not length {n}")
            vals = []
            for j, v in enumerate(row):
                v = _require_finite_number(v, f"{mctx}[{i}][{j}]")
                if not 0.0 <= v <= 1.0:
                    raise DataError(f"{mctx}[{i}][{j}] = {v} outside [0,1]")
                vals.append(v)
            rows.append(vals)
        blocks[name] = rows
    return blocks


def _require_finite_number(value: object, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataError(f"{ctx} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise DataError(f"{ctx} must be finite")
    return value


# --- Serialization ---------------------------------------------------------


def serialize_record(record: GenerationRecord) -> dict:
    """Record as a JSON-compatible dict; inverse of parse_record."""
    return {
        "record_id": record.record_id,
        "input_text": record.input_text,
        "greedy": None if record.greedy is None else _serialize_sequence(record.greedy),
        "samples": [_serialize_sequence(s) for s in record.samples],
        "quality": dict(record.quality),
        "precomputed_sim": record.precomputed_sim,
    }


def _serialize_sequence(seq: Sequence) -> dict:
    return {
        "text": seq.text,
        "tokens": [
            {"text": t.text, "log_prob": t.log_prob, "dist_entropy": t.dist_entropy}
            for t in seq.tokens
        ],
    }


def dump_records(records: Iterable[GenerationRecord], fh: IO[str]) -> None:
    for record in records:
        fh.write(json.dumps(serialize_record(record), ensure_ascii=False))
        fh.write("\n")
