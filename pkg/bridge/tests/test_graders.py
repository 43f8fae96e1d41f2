import random

import pytest

from cocoa_bridge.errors import ConfigError
from cocoa_bridge.graders import (
    GRADERS,
    exact_match,
    get_grader,
    normalize_answer,
    token_f1,
)


def test_normalize_folds_case_punctuation_and_articles():
    assert normalize_answer("The  Blue, Whale!") == "blue whale"
    assert normalize_answer("an answer") == "answer"
    assert normalize_answer("A.") == ""


def test_exact_match_scans_the_answer_list():
    assert exact_match("the Pacific Ocean.", ["Pacific ocean", "sea"]) == 1.0
    assert exact_match("Atlantic", ["Pacific ocean", "sea"]) == 0.0


def test_token_f1_gives_partial_credit():
    assert token_f1("blue whale", ["big blue whale"]) == pytest.approx(0.8)
    assert token_f1("iron", ["gold"]) == 0.0
    assert token_f1("", ["gold"]) == 0.0


def test_token_f1_takes_the_best_answer():
    assert token_f1("blue whale", ["red fox", "blue whale"]) == 1.0


def test_token_f1_ignores_word_order():
    assert token_f1("mint snow bone", ["snow bone mint"]) == 1.0


def test_get_grader_rejects_unknown_names():
    with pytest.raises(ConfigError, match="exact_match"):
        get_grader("rougeL")
    assert set(GRADERS) == {"exact_match", "token_f1"}


def test_grader_scores_stay_in_unit_interval():
    rng = random.Random(5)
    words = ["alpha", "beta", "gamma", "delta", "the", "an"]
    for _ in range(200):
        pred = " ".join(rng.choices(words, k=rng.randint(0, 4)))
        answers = [" ".join(rng.choices(words, k=rng.randint(1, 4)))]
        for grader in GRADERS.values():
            value = grader(pred, answers)
            assert 0.0 <= value <= 1.0
