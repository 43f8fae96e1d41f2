"""Prompt datasets.

A dataset is a JSONL file, one object per line:

    {"id": "tq_001", "question": "...", "answers": ["...", "..."]}

"id" is optional and falls back to the line number. Which subset of a public
benchmark to export into this shape is left to the caller; `limit` truncates
whatever the file contains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class PromptItem:
    item_id: str
    question: str
    answers: tuple[str, ...]


def load_prompts(path: str, limit: int | None = None) -> list[PromptItem]:
    if limit is not None and limit < 1:
        raise ConfigError(f"limit must be >= 1, got {limit}")
    items: list[PromptItem] = []
    seen: set[str] = set()
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed JSON: {exc}") from exc
            items.append(_parse_item(obj, where, lineno, seen))
            if limit is not None and len(items) == limit:
                break
    if not items:
        raise DataError(f"dataset {path} contains no items")
    return items


def _parse_item(obj: object, where: str, lineno: int, seen: set[str]) -> PromptItem:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: item must be a JSON object")
    item_id = obj.get("id", f"q{lineno:05d}")
    if not isinstance(item_id, str) or not item_id:
        raise DataError(f"{where}: id must be a non-empty string")
    if item_id in seen:
        raise DataError(f"{where}: duplicate id {item_id!r}")
    seen.add(item_id)
    question = obj.get("question")
    if not isinstance(question, str) or not question.strip():
        raise DataError(f"{where}: question must be a non-empty string")
    answers = obj.get("answers")
    if not isinstance(answers, list) or not answers:
        raise DataError(f"{where}: answers must be a non-empty list")
    for i, answer in enumerate(answers):
        if not isinstance(answer, str) or not answer.strip():
            raise DataError(f"{where}: answers[{i}] must be a non-empty string")
    return PromptItem(item_id, question, tuple(answers))
