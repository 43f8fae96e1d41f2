"""Seeded synthetic generation records for tests and demos.

Every record gets a latent quality q in [0, 1] and a planted consistency
level c. Sample texts share a controlled fraction of words with the greedy
text, so lexical similarity between target and samples tracks c, while token
log-probabilities carry only a weak quality signal. The knob rho interpolates
how strongly c follows q:

    c = rho * q + (1 - rho) * noise        (or a fixed overlap rate)

so at rho = 0 consistency is pure noise and at rho = 1 dissimilarity is a
clean proxy for 1 - q. That planted signal is what end-to-end tests measure:
combination estimators should climb with rho while the pure information
scores stay put.

All randomness lives behind the seed; the same settings always produce a
byte-identical file.
"""

from __future__ import annotations

import random

from .config import SynthSettings
from .errors import ConfigError
from .records import GenerationRecord, Sequence, TokenObservation

__all__ = ["generate_records", "REGIME_SCALES"]

REGIME_SCALES = {"confident": 0.4, "diffuse": 2.5}

# Weight of the quality signal inside token log-probs; kept deliberately weak
# so consistency, not raw probability, carries most of the planted signal.
MSP_SIGNAL_WEIGHT = 0.35

TARGET_LEN_RANGE = (4, 8)


def generate_records(settings: SynthSettings) -> list[GenerationRecord]:
    if settings.vocab_size < 20:
        raise ConfigError("synth vocab_size must be >= 20")
    scale = REGIME_SCALES.get(settings.regime)
    if scale is None:
        raise ConfigError(f"unknown synth regime {settings.regime!r}")
    rng = random.Random(settings.seed)
    vocab = [f"w{i:04d}" for i in range(settings.vocab_size)]
    records = []
    for i in range(settings.n_records):
        records.append(_record(rng, i, vocab, scale, settings))
    return records


def _record(
    rng: random.Random,
    index: int,
    vocab: list[str],
    scale: float,
    settings: SynthSettings,
) -> GenerationRecord:
    q = rng.random()
    noise = rng.random()
    if settings.overlap is not None:
        c = settings.overlap
    else:
        c = settings.rho * q + (1.0 - settings.rho) * noise

    # Weakly quality-linked confidence level for log-probs and entropies.
    x = _clamp01(MSP_SIGNAL_WEIGHT * (1.0 - q) + (1.0 - MSP_SIGNAL_WEIGHT) * rng.random())

    target_len = rng.randint(*TARGET_LEN_RANGE)
    target_words = rng.sample(vocab, target_len)
    distractors = [w for w in vocab if w not in target_words]
    rng.shuffle(distractors)
    next_distractor = 0

    greedy = _sequence(rng, target_words, x, scale)
    samples = []
    for _ in range(settings.m):
        if settings.overlap is not None:
            g = settings.overlap
        else:
            g = _clamp01(c + rng.gauss(0.0, 0.08))
        if g >= 0.999:
            # Full overlap duplicates the target text exactly, so every
            # backend sees similarity 1.
            words = list(target_words)
        else:
            length = min(12, max(2, target_len + rng.choice((-1, 0, 1))))
            shared_n = round(g * (target_len + length) / (1.0 + g))
            shared_n = max(0, min(shared_n, target_len, length))
            words = rng.sample(target_words, shared_n)
            for _ in range(length - shared_n):
                if next_distractor >= len(distractors):
                    # Tiny vocab: reuse distractors; target overlap is intact.
                    next_distractor = 0
                words.append(distractors[next_distractor])
                next_distractor += 1
            rng.shuffle(words)
        sample_x = _clamp01(x + rng.gauss(0.0, 0.1))
        samples.append(_sequence(rng, words, sample_x, scale))

    quality = round(q, 6)
    return GenerationRecord(
        record_id=f"r{index:05d}",
        input_text=f"prompt {index:05d}",
        samples=tuple(samples),
        greedy=greedy,
        quality={s: quality for s in ("greedy", "random", "best", "best_normalized")},
    )


def _sequence(rng: random.Random, words: list[str], x: float, scale: float) -> Sequence:
    tokens = []
    for pos, word in enumerate(words):
        surface = word if pos == 0 else " " + word
        log_prob = round(-scale * x * (0.5 + rng.random()), 6)
        entropy = round(scale * x * (0.5 + rng.random()), 6)
        tokens.append(
            TokenObservation(text=surface, log_prob=log_prob, dist_entropy=entropy)
        )
    return Sequence(tokens=tuple(tokens), text=" ".join(words))


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))
