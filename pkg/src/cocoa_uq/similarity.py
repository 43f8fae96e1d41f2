"""Similarity functions g(a, b) in [0, 1] between texts.

Native lexical backends (jaccard, rouge_l) run in-process. Neural backends
(nli_entail, nli_contra, cross_encoder, align_score) go through the remote
provider client. Backend "precomputed:<name>" reads a stored block from each
record instead of computing anything.

Raw similarities are directional in general; everything consumed downstream
is symmetrized as (g(a,b) + g(b,a)) / 2. Identical texts score 1.0 exactly,
for any backend, without a provider call (self-similarity is pinned to 1).
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Sequence as Seq

import numpy as np

from .errors import ConfigError, DataError
from .provider import ProviderClient
from .records import GenerationRecord, Sequence

__all__ = [
    "LEXICAL_BACKENDS",
    "PROVIDER_BACKENDS",
    "Backend",
    "parse_backend",
    "SimilarityMatrix",
    "jaccard",
    "rouge_l",
    "build_matrix",
    "target_row",
    "SimilaritySource",
]

LEXICAL_BACKENDS = frozenset({"jaccard", "rouge_l"})
PROVIDER_BACKENDS = frozenset({"nli_entail", "nli_contra", "cross_encoder", "align_score"})


@dataclass(frozen=True)
class Backend:
    """A parsed similarity backend: kind is lexical, provider, or precomputed."""

    kind: str
    name: str

    @property
    def spec(self) -> str:
        if self.kind == "precomputed":
            return f"precomputed:{self.name}"
        return self.name


def parse_backend(spec: str) -> Backend:
    if spec in LEXICAL_BACKENDS:
        return Backend("lexical", spec)
    if spec in PROVIDER_BACKENDS:
        return Backend("provider", spec)
    if spec.startswith("precomputed:"):
        name = spec[len("precomputed:"):]
        if not name:
            raise ConfigError("precomputed backend needs a block name, e.g. precomputed:jaccard")
        return Backend("precomputed", name)
    known = sorted(LEXICAL_BACKENDS | PROVIDER_BACKENDS) + ["precomputed:<name>"]
    raise ConfigError(f"unknown similarity backend {spec!r} (expected one of {', '.join(known)})")


@dataclass(frozen=True)
class SimilarityMatrix:
    n: int
    entries: np.ndarray
    backend: str
    symmetrized: bool


# --- Lexical backends ------------------------------------------------------


def _words(text: str) -> list[str]:
    """Lowercase, split on Unicode whitespace, strip leading/trailing
    punctuation from each piece; empty leftovers are dropped. This rule is
    frozen so golden files stay stable."""
    out = []
    for piece in text.lower().split():
        start, end = 0, len(piece)
        while start < end and unicodedata.category(piece[start]).startswith("P"):
            start += 1
        while end > start and unicodedata.category(piece[end - 1]).startswith("P"):
            end -= 1
        if end > start:
            out.append(piece[start:end])
    return out


def jaccard(a: str, b: str) -> float:
    """Shared-word proportion |W(a) & W(b)| / |W(a) | W(b)|; 1.0 when both
    word sets are empty."""
    wa, wb = set(_words(a)), set(_words(b))
    if not wa and not wb:
        return 1.0
    return len(wa & wb) / len(wa | wb)


def rouge_l(a: str, b: str) -> float:
    """LCS-based F1 over word tokens: P = LCS/|b|, R = LCS/|a|,
    F = 2PR/(P+R); 0.0 when either text is empty or there is no common
    subsequence. Symmetric by construction of F1."""
    wa, wb = _words(a), _words(b)
    if not wa or not wb:
        return 0.0
    lcs = _lcs_length(wa, wb)
    if lcs == 0:
        return 0.0
    precision = lcs / len(wb)
    recall = lcs / len(wa)
    return 2 * precision * recall / (precision + recall)


def _lcs_length(a: list[str], b: list[str]) -> int:
    # One-row dynamic program; O(len(a) * len(b)).
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


_LEXICAL_FNS = {"jaccard": jaccard, "rouge_l": rouge_l}


# --- Matrix construction ---------------------------------------------------


def _raw_scores(
    pairs: list[tuple[str, str]], backend: Backend, client: ProviderClient | None
) -> list[float]:
    """Directional raw g for ordered pairs. Equal texts are short-circuited
    by the callers; this computes every pair it is given."""
    if backend.kind == "lexical":
        fn = _LEXICAL_FNS[backend.name]
        return [fn(a, b) for a, b in pairs]
    if backend.kind == "provider":
        if client is None:
            raise ConfigError(
                f"backend {backend.name!r} needs a provider endpoint "
                "(set similarity.endpoint or COCOA_SIM_ENDPOINT)"
            )
        return client.scores(backend.name, pairs)
    raise DataError(
        f"backend {backend.spec!r} cannot score new text pairs; "
        "use a lexical or provider backend"
    )


def _sym_matrix(texts: list[str], backend: Backend, client: ProviderClient | None) -> np.ndarray:
    n = len(texts)
    entries = np.ones((n, n), dtype=float)
    pairs: list[tuple[str, str]] = []
    slots: list[tuple[int, int]] = []
    for i in range(n):
        for j in range(i + 1, n):
            if texts[i] == texts[j]:
                continue
            pairs.append((texts[i], texts[j]))
            pairs.append((texts[j], texts[i]))
            slots.append((i, j))
    scores = _raw_scores(pairs, backend, client)
    for k, (i, j) in enumerate(slots):
        g = (scores[2 * k] + scores[2 * k + 1]) / 2.0
        entries[i, j] = g
        entries[j, i] = g
    return entries


def build_matrix(
    seqs: Seq[Sequence],
    backend: Backend | str,
    endpoint: str | None = None,
    client: ProviderClient | None = None,
) -> SimilarityMatrix:
    """Symmetrized similarity matrix over sequences: raw g computed for all
    ordered pairs, diagonal pinned to 1, entries averaged pairwise."""
    if not seqs:
        raise DataError("build_matrix needs at least one sequence")
    if isinstance(backend, str):
        backend = parse_backend(backend)
    if client is None and endpoint:
        client = ProviderClient(endpoint)
    entries = _sym_matrix([s.text for s in seqs], backend, client)
    return SimilarityMatrix(
        n=len(seqs), entries=entries, backend=backend.spec, symmetrized=True
    )


def target_row(
    target: Sequence,
    samples: Seq[Sequence],
    backend: Backend | str,
    endpoint: str | None = None,
    client: ProviderClient | None = None,
) -> list[float]:
    """Symmetrized similarity g_*i between the target and each sample.

    When the target is one of the samples (or simply shares its text), the
    entry is 1.0 exactly with no provider call.
    """
    if isinstance(backend, str):
        backend = parse_backend(backend)
    if client is None and endpoint:
        client = ProviderClient(endpoint)
    row = [1.0] * len(samples)
    pairs: list[tuple[str, str]] = []
    slots: list[int] = []
    for i, s in enumerate(samples):
        if target is s or target.text == s.text:
            continue
        pairs.append((target.text, s.text))
        pairs.append((s.text, target.text))
        slots.append(i)
    scores = _raw_scores(pairs, backend, client)
    for k, i in enumerate(slots):
        row[i] = (scores[2 * k] + scores[2 * k + 1]) / 2.0
    return row


# --- Per-record resolution -------------------------------------------------


class SimilaritySource:
    """Resolves similarity inputs for scoring one run.

    Computable backends (lexical, provider) score texts directly; the
    precomputed backend reads each record's stored block (symmetrizing it and
    pinning the diagonal, both no-ops on blocks written by `sim`). NLI
    probabilities for clustering always need a live endpoint: direction is
    lost in symmetrized blocks.
    """

    def __init__(self, backend: Backend | str, client: ProviderClient | None = None):
        self.backend = parse_backend(backend) if isinstance(backend, str) else backend
        self.client = client

    def sample_matrix(self, record: GenerationRecord) -> np.ndarray:
        """M x M symmetrized similarity over the record's samples."""
        if self.backend.kind == "precomputed":
            block, offset = self._block(record)
            return block[offset:, offset:]
        return _sym_matrix([s.text for s in record.samples], self.backend, self.client)

    def target_row(
        self, record: GenerationRecord, target: Sequence, marker: int | str
    ) -> np.ndarray:
        """Row of g_*i between the selected target and the samples."""
        if self.backend.kind == "precomputed":
            block, offset = self._block(record)
            if marker == "greedy":
                row_index = 0
                if offset == 0:
                    raise DataError(
                        f"record {record.record_id!r}: precomputed block "
                        f"{self.backend.name!r} has no greedy row"
                    )
            else:
                row_index = offset + int(marker)
            return block[row_index, offset:]
        return np.asarray(
            target_row(target, record.samples, self.backend, client=self.client),
            dtype=float,
        )

    def pair_scores(self, pairs: list[tuple[str, str]]) -> list[float]:
        """Symmetrized scores for arbitrary text pairs (token-level use)."""
        out = [1.0] * len(pairs)
        todo: list[tuple[str, str]] = []
        slots: list[int] = []
        for k, (a, b) in enumerate(pairs):
            if a == b:
                continue
            todo.append((a, b))
            todo.append((b, a))
            slots.append(k)
        scores = _raw_scores(todo, self.backend, self.client)
        for k, slot in enumerate(slots):
            out[slot] = (scores[2 * k] + scores[2 * k + 1]) / 2.0
        return out

    def nli_probs(self, pairs: list[tuple[str, str]]) -> list[tuple[float, float]]:
        """Directional (p_entail, p_contra) per ordered pair. Equal texts are
        pinned to (1, 0). Requires a provider endpoint regardless of the
        configured scoring backend."""
        out: list[tuple[float, float] | None] = [None] * len(pairs)
        todo: list[tuple[str, str]] = []
        slots: list[int] = []
        for k, (a, b) in enumerate(pairs):
            if a == b:
                out[k] = (1.0, 0.0)
                continue
            todo.append((a, b))
            slots.append(k)
        if todo:
            if self.client is None:
                raise ConfigError(
                    "semantic clustering needs an NLI provider endpoint "
                    "(set similarity.endpoint or COCOA_SIM_ENDPOINT)"
                )
            entail = self.client.scores("nli_entail", todo)
            # The wire returns similarities; nli_contra is 1 - p_contra.
            contra_sim = self.client.scores("nli_contra", todo)
            for k, slot in enumerate(slots):
                out[slot] = (entail[k], 1.0 - contra_sim[k])
        return out  # type: ignore[return-value]

    def _block(self, record: GenerationRecord) -> tuple[np.ndarray, int]:
        name = self.backend.name
        blocks = record.precomputed_sim or {}
        if name not in blocks:
            raise DataError(
                f"record {record.record_id!r} has no precomputed_sim block "
                f"{name!r}"
            )
        raw = np.asarray(blocks[name], dtype=float)
        block = (raw + raw.T) / 2.0
        np.fill_diagonal(block, 1.0)
        offset = 1 if record.greedy is not None else 0
        return block, offset
