"""Uncertainty estimators over generation records.

Three families, all returning scores where larger means less reliable:

- information-based, from the model's own probabilities: msp, ppl, mte,
  token_sar;
- repeated-sampling, over the M sampled sequences: mcse, mcnse,
  semantic_entropy, sentence_sar, sar;
- consistency-based, from the sample similarity graph: deg_mat,
  eig_val_laplacian, num_sem_sets, plus the target-vs-samples average
  dissimilarity;
- combinations of an information score u_info with a consistency score
  u_cons: cocoa_* (u_info * u_cons), additive_cocoa_* (u_info + u_cons),
  full_sample_cocoa_* (u_info * deg_mat), prob_cocoa_* ((1 - e^{-u_info}) *
  u_cons).

Probability aggregation stays in log space; probabilities are materialized
only where a formula demands them (sentence_sar, sar, prob_cocoa_*), with
underflow flushed to the smallest positive normal float and flagged as
"prob_underflow" in the result.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable, Sequence as Seq

import numpy as np

from .errors import ConfigError, DataError
from .records import GenerationRecord, Sequence, select_target, seq_log_prob
from .similarity import SimilaritySource
from .spectral import normalized_laplacian, sym_eigenvalues

__all__ = [
    "ESTIMATOR_IDS",
    "TARGET_FREE_ESTIMATORS",
    "EstimatorResult",
    "SemanticClustering",
    "msp",
    "ppl",
    "mte",
    "token_sar",
    "mcse",
    "mcnse",
    "cluster_semantic",
    "semantic_entropy",
    "sentence_sar",
    "sar",
    "deg_mat",
    "eig_val_laplacian",
    "num_sem_sets",
    "ave_dissimilarity",
    "cocoa",
    "additive_cocoa",
    "full_sample_cocoa",
    "prob_cocoa",
    "score_record",
]

INFO_BASES = ("msp", "ppl", "mte")

ESTIMATOR_IDS: tuple[str, ...] = (
    "msp",
    "ppl",
    "mte",
    "token_sar",
    "mcse",
    "mcnse",
    "semantic_entropy",
    "sentence_sar",
    "sar",
    "deg_mat",
    "eig_val_laplacian",
    "num_sem_sets",
    "ave_dissimilarity",
    "cocoa_msp",
    "cocoa_ppl",
    "cocoa_mte",
    "additive_cocoa_msp",
    "additive_cocoa_ppl",
    "additive_cocoa_mte",
    "full_sample_cocoa_msp",
    "full_sample_cocoa_ppl",
    "full_sample_cocoa_mte",
    "prob_cocoa_msp",
    "prob_cocoa_ppl",
)

# Estimators that aggregate over the sample set and ignore the target
# strategy entirely.
TARGET_FREE_ESTIMATORS = frozenset(
    {
        "mcse",
        "mcnse",
        "semantic_entropy",
        "sentence_sar",
        "sar",
        "deg_mat",
        "eig_val_laplacian",
        "num_sem_sets",
    }
)

UNIFORM_RELEVANCE_FLAG = "uniform_token_relevance"
UNDERFLOW_FLAG = "prob_underflow"

_TINY = sys.float_info.min


@dataclass(frozen=True)
class EstimatorResult:
    estimator: str
    record_id: str
    value: float
    strategy: str | None = None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SemanticClustering:
    """Sample index -> cluster id, ids dense 0..K-1 in founding order."""

    assignments: tuple[int, ...]
    k: int


# --- Information-based, single sequence ------------------------------------


def msp(target: Sequence) -> float:
    """Maximum sequence probability score: -log P(y | x)."""
    return -seq_log_prob(target)


def ppl(target: Sequence) -> float:
    """Length-normalized score -log P(y | x) / L (log-perplexity)."""
    return msp(target) / len(target)


def mte(target: Sequence) -> float:
    """Mean token entropy: (1/L) sum of per-step distribution entropies."""
    total = 0.0
    for i, tok in enumerate(target.tokens):
        if tok.dist_entropy is None:
            raise DataError(
                f"mte requires dist_entropy on every token; token {i} has none"
            )
        total += tok.dist_entropy
    return total / len(target)


def token_sar(
    target: Sequence, input_text: str, source: SimilaritySource
) -> tuple[float, tuple[str, ...]]:
    """Relevance-weighted negative log-probability.

    Each token's relevance is R_T = 1 - g(full, full minus that token),
    where "full" is input + " " + output and the output is reconstructed by
    concatenating token surface strings (so deletion is well defined).
    Relevances are normalized to sum to one; an all-zero relevance vector
    falls back to uniform weights and flags the result.
    """
    surfaces = [t.text for t in target.tokens]
    full = input_text + " " + "".join(surfaces)
    pairs = []
    for k in range(len(surfaces)):
        deleted = input_text + " " + "".join(surfaces[:k] + surfaces[k + 1 :])
        pairs.append((full, deleted))
    sims = source.pair_scores(pairs)
    relevance = [1.0 - g for g in sims]
    total = sum(relevance)
    flags: tuple[str, ...] = ()
    if total <= 0.0:
        weights = [1.0 / len(surfaces)] * len(surfaces)
        flags = (UNIFORM_RELEVANCE_FLAG,)
    else:
        weights = [r / total for r in relevance]
    value = -sum(w * t.log_prob for w, t in zip(weights, target.tokens))
    return value, flags


# --- Repeated sampling ------------------------------------------------------


def mcse(samples: Seq[Sequence]) -> float:
    """Monte Carlo sequence entropy: -(1/M) sum of sequence log-probs."""
    return -sum(seq_log_prob(s) for s in samples) / len(samples)


def mcnse(samples: Seq[Sequence]) -> float:
    """Length-normalized Monte Carlo entropy: -(1/M) sum log P_i / L_i."""
    return -sum(seq_log_prob(s) / len(s) for s in samples) / len(samples)


def cluster_semantic(
    samples: Seq[Sequence],
    nli: Callable[[list[tuple[str, str]]], list[tuple[float, float]]],
) -> SemanticClustering:
    """Greedy bidirectional-entailment clustering.

    One pass in sample order: a sample joins the first existing cluster whose
    representative (first member) entails it and is entailed by it, where
    "entails" means p_entail > p_contra for that ordered pair; otherwise it
    founds a new cluster. Deterministic given the sample order; reordering
    samples can change the representatives and with them the clustering.
    """
    texts = [s.text for s in samples]
    pairs = []
    for i in range(len(texts)):
        for j in range(len(texts)):
            if i != j:
                pairs.append((texts[i], texts[j]))
    probs = dict(zip(pairs, nli(pairs))) if pairs else {}

    def entails(a: str, b: str) -> bool:
        if a == b:
            return True
        p_entail, p_contra = probs[(a, b)]
        return p_entail > p_contra

    assignments: list[int] = []
    representatives: list[str] = []
    for text in texts:
        for cluster_id, rep in enumerate(representatives):
            if entails(text, rep) and entails(rep, text):
                assignments.append(cluster_id)
                break
        else:
            assignments.append(len(representatives))
            representatives.append(text)
    return SemanticClustering(assignments=tuple(assignments), k=len(representatives))


def semantic_entropy(samples: Seq[Sequence], clustering: SemanticClustering) -> float:
    """-(sum over clusters) (|C_k| / M) log P-hat_k, with P-hat_k the summed
    probability of the cluster's members, accumulated via log-sum-exp."""
    if len(clustering.assignments) != len(samples):
        raise DataError("clustering does not cover these samples")
    members: dict[int, list[float]] = {}
    for idx, cluster_id in enumerate(clustering.assignments):
        members.setdefault(cluster_id, []).append(seq_log_prob(samples[idx]))
    m = len(samples)
    value = 0.0
    for log_probs in members.values():
        value -= (len(log_probs) / m) * _log_sum_exp(log_probs)
    return value


def sentence_sar(
    log_probs: Seq[float], g: np.ndarray, temperature: float
) -> tuple[float, tuple[str, ...]]:
    """-(1/M) sum log(P_i + (1/t) R_i) with R_i = sum_{k != i} g_ik P_k.

    P_i is the materialized sequence probability exp(log P_i); relevance R_i
    boosts sentences similar to probable ones. The log argument can exceed 1,
    so the value may be negative.
    """
    if temperature <= 0:
        raise ConfigError(f"sentence_sar temperature must be > 0, got {temperature}")
    probs, flags = _materialize(log_probs)
    m = len(probs)
    total = 0.0
    for i in range(m):
        relevance = sum(g[i, k] * probs[k] for k in range(m) if k != i)
        total += math.log(probs[i] + relevance / temperature)
    return -total / m, flags


def sar(
    token_sar_values: Seq[float], g: np.ndarray, temperature: float
) -> tuple[float, tuple[str, ...]]:
    """sentence_sar with P_i replaced by the token-shifted probability
    P'_i = exp(-token_sar_i)."""
    value, flags = sentence_sar([-v for v in token_sar_values], g, temperature)
    return value, flags


def _materialize(log_probs: Seq[float]) -> tuple[list[float], tuple[str, ...]]:
    probs = []
    flushed = False
    for lp in log_probs:
        p = math.exp(lp)
        if p < _TINY:
            p = _TINY
            flushed = True
        probs.append(p)
    return probs, ((UNDERFLOW_FLAG,) if flushed else ())


def _log_sum_exp(values: Seq[float]) -> float:
    peak = max(values)
    if math.isinf(peak):
        return peak
    return peak + math.log(sum(math.exp(v - peak) for v in values))


# --- Consistency-based ------------------------------------------------------


def deg_mat(g: np.ndarray) -> float:
    """1 - trace(D) / M^2 where D_ii are the row sums of the symmetrized
    similarity matrix; ranges over [0, 1 - 1/M]."""
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    return 1.0 - float(g.sum()) / (m * m)


def eig_val_laplacian(g: np.ndarray) -> float:
    """Sum of max(0, 1 - lambda_i) over the normalized-Laplacian spectrum;
    counts semantic components softly."""
    eigenvalues = sym_eigenvalues(normalized_laplacian(g))
    return float(np.sum(np.maximum(0.0, 1.0 - eigenvalues)))


def num_sem_sets(
    samples: Seq[Sequence],
    nli: Callable[[list[tuple[str, str]]], list[tuple[float, float]]],
) -> float:
    """Number of semantic clusters, as a real number."""
    return float(cluster_semantic(samples, nli).k)


def ave_dissimilarity(row: Seq[float]) -> float:
    """u_cons: mean of (1 - g_*i) over the target-to-sample similarities.
    If the target is one of the samples its own term contributes zero."""
    row = np.asarray(row, dtype=float)
    return float(np.mean(1.0 - row))


# --- Combinations -----------------------------------------------------------


def cocoa(u_info: float, u_cons: float) -> float:
    """Multiplicative combination u_info * u_cons."""
    return u_info * u_cons


def additive_cocoa(u_info: float, u_cons: float) -> float:
    return u_info + u_cons


def full_sample_cocoa(u_info: float, g: np.ndarray) -> float:
    """u_info scaled by the full pairwise dissimilarity deg_mat(G)."""
    return u_info * deg_mat(g)


def prob_cocoa(u_info: float, u_cons: float) -> tuple[float, tuple[str, ...]]:
    """(1 - exp(-u_info)) * u_cons: the confidence term converted back to a
    probability, so the factor is 1 - P(y|x) for msp and 1 - P(y|x)^{1/L}
    for ppl."""
    p, flags = _materialize([-u_info])
    return (1.0 - p[0]) * u_cons, flags


# --- Dispatch ----------------------------------------------------------------


def score_record(
    record: GenerationRecord,
    estimator: str,
    strategy: str,
    source: SimilaritySource,
    sentence_sar_temperature: float = 0.001,
    shared: dict | None = None,
) -> EstimatorResult:
    """Route one record through one estimator.

    Target-based estimators resolve the target per `strategy`; sample-set
    estimators ignore it (their result carries strategy None). `shared` is an
    optional per-record scratch dict so several estimators on the same record
    reuse the similarity matrix, target rows, clusterings, and per-sample
    token_sar values.
    """
    if estimator not in ESTIMATOR_IDS:
        raise ConfigError(f"unknown estimator {estimator!r}")
    if shared is None:
        shared = {}
    value: float
    flags: tuple[str, ...] = ()

    if estimator in TARGET_FREE_ESTIMATORS:
        samples = record.samples
        if estimator == "mcse":
            value = mcse(samples)
        elif estimator == "mcnse":
            value = mcnse(samples)
        elif estimator == "semantic_entropy":
            value = semantic_entropy(samples, _clustering(record, source, shared))
        elif estimator == "num_sem_sets":
            value = float(_clustering(record, source, shared).k)
        elif estimator == "deg_mat":
            value = deg_mat(_matrix(record, source, shared))
        elif estimator == "eig_val_laplacian":
            value = eig_val_laplacian(_matrix(record, source, shared))
        elif estimator == "sentence_sar":
            log_probs = [seq_log_prob(s) for s in samples]
            value, flags = sentence_sar(
                log_probs, _matrix(record, source, shared), sentence_sar_temperature
            )
        else:  # sar
            sars, token_flags = _sample_token_sars(record, source, shared)
            value, flags = sar(
                sars, _matrix(record, source, shared), sentence_sar_temperature
            )
            flags = tuple(dict.fromkeys(token_flags + flags))
        return EstimatorResult(estimator, record.record_id, _finite(value, record, estimator), None, flags)

    target, marker = _target(record, strategy, shared)

    if estimator in ("msp", "ppl", "mte"):
        value = _info_base(estimator, target)
    elif estimator == "token_sar":
        value, flags = _target_token_sar(record, target, marker, source, shared)
    elif estimator == "ave_dissimilarity":
        value = ave_dissimilarity(_row(record, target, marker, source, shared))
    else:
        base = estimator.rsplit("_", 1)[1]
        u_info = _info_base(base, target)
        if estimator.startswith("full_sample_cocoa_"):
            value = full_sample_cocoa(u_info, _matrix(record, source, shared))
        else:
            u_cons = ave_dissimilarity(_row(record, target, marker, source, shared))
            if estimator.startswith("cocoa_"):
                value = cocoa(u_info, u_cons)
            elif estimator.startswith("additive_cocoa_"):
                value = additive_cocoa(u_info, u_cons)
            else:
                value, flags = prob_cocoa(u_info, u_cons)
    return EstimatorResult(
        estimator, record.record_id, _finite(value, record, estimator), strategy, flags
    )


def _info_base(base: str, target: Sequence) -> float:
    if base == "msp":
        return msp(target)
    if base == "ppl":
        return ppl(target)
    return mte(target)


def _finite(value: float, record: GenerationRecord, estimator: str) -> float:
    if not math.isfinite(value):
        raise DataError(
            f"record {record.record_id!r}: estimator {estimator!r} produced "
            f"a non-finite value"
        )
    return float(value)


def _target(record, strategy, shared):
    key = ("target", strategy)
    if key not in shared:
        shared[key] = select_target(record, strategy)
    return shared[key]


def _matrix(record, source, shared):
    if "matrix" not in shared:
        shared["matrix"] = source.sample_matrix(record)
    return shared["matrix"]


def _row(record, target, marker, source, shared):
    key = ("row", marker)
    if key not in shared:
        shared[key] = source.target_row(record, target, marker)
    return shared[key]


def _clustering(record, source, shared):
    if "clustering" not in shared:
        shared["clustering"] = cluster_semantic(record.samples, source.nli_probs)
    return shared["clustering"]


def _target_token_sar(record, target, marker, source, shared):
    key = ("token_sar", marker)
    if key not in shared:
        shared[key] = token_sar(target, record.input_text, source)
    return shared[key]


def _sample_token_sars(record, source, shared):
    if "sample_token_sars" not in shared:
        values: list[float] = []
        flags: tuple[str, ...] = ()
        for i, sample in enumerate(record.samples):
            value, f = _target_token_sar(record, sample, i, source, shared)
            values.append(value)
            flags = flags + f
        shared["sample_token_sars"] = (values, tuple(dict.fromkeys(flags)))
    return shared["sample_token_sars"]
