"""Answer quality graders.

Both graders normalize text the way open-domain QA benchmarks do: casefold,
drop punctuation and the articles a/an/the, collapse whitespace. Scores land
in [0, 1] as the record schema requires. Model-based quality scorers plug in
by grading offline and rewriting the "quality" field; this module only ships
the reference-free string graders.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from typing import Callable, Sequence

from .errors import ConfigError

_PUNCT = str.maketrans("", "", string.punctuation)
_ARTICLES = re.compile(r"\b(a|an|the)\b")

Grader = Callable[[str, Sequence[str]], float]


def normalize_answer(text: str) -> str:
    text = text.casefold().translate(_PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, answers: Sequence[str]) -> float:
    got = normalize_answer(prediction)
    return 1.0 if any(got == normalize_answer(a) for a in answers) else 0.0


def token_f1(prediction: str, answers: Sequence[str]) -> float:
    got = Counter(normalize_answer(prediction).split())
    best = 0.0
    for answer in answers:
        want = Counter(normalize_answer(answer).split())
        overlap = sum((got & want).values())
        if overlap == 0:
            continue
        precision = overlap / sum(got.values())
        recall = overlap / sum(want.values())
        best = max(best, 2 * precision * recall / (precision + recall))
    return best


GRADERS: dict[str, Grader] = {
    "exact_match": exact_match,
    "token_f1": token_f1,
}


def get_grader(name: str) -> Grader:
    try:
        return GRADERS[name]
    except KeyError:
        raise ConfigError(
            f"unknown grader {name!r} (expected one of {', '.join(sorted(GRADERS))})"
        ) from None
