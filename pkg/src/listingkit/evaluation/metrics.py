"""Text-generation metrics: BLEU, ROUGE-1/2/L, embedding SIM, attribute accuracy.

All scores live in [0, 1]. BLEU-k is the cumulative score: brevity penalty
times the geometric mean of clipped n-gram precisions for orders 1..k.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from ..attributes import ExtractedAttributes
from ..tokenization import TokenizerConfig, tokenize

DEFAULT_BLEU_EPSILON = 1e-9

Tokens = Sequence[str]


class MetricError(Exception):
    pass


class EmptyGoldError(MetricError):
    pass


@dataclass(frozen=True)
class MetricScore:
    name: str
    value: float
    sample_count: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.value <= 1.0):
            raise MetricError(f"{self.name}: value {self.value} outside [0, 1]")
        if self.sample_count < 1:
            raise MetricError(f"{self.name}: sample_count must be >= 1")


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------


def _ngram_counts(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _effective_reference_length(candidate_len: int, references: Sequence[Tokens]) -> int:
    # Closest reference length to the candidate; ties prefer the shorter.
    return min((abs(len(r) - candidate_len), len(r)) for r in references)[1]


def _clipped_stats(
    candidate: Tokens, references: Sequence[Tokens], max_n: int
) -> list[tuple[int, int]]:
    """Per order n: (clipped matching n-grams, total candidate n-grams)."""
    stats = []
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(candidate, n)
        if not cand_counts:
            stats.append((0, 0))
            continue
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in _ngram_counts(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
        stats.append((clipped, sum(cand_counts.values())))
    return stats


def _bleu_from_stats(
    stats: Sequence[tuple[int, int]],
    candidate_len: int,
    reference_len: int,
    max_n: int,
    epsilon: float,
) -> list[MetricScore]:
    if candidate_len == 0:
        return [MetricScore(f"bleu{k}", 0.0, 1) for k in range(1, max_n + 1)]
    bp = 1.0 if candidate_len > reference_len else math.exp(1.0 - reference_len / candidate_len)
    scores = []
    log_sum = 0.0
    for k in range(1, max_n + 1):
        clipped, total = stats[k - 1]
        # Zero (or undefined, when the candidate is shorter than k) precisions
        # are smoothed to epsilon so cumulative scores stay well-defined.
        precision = clipped / total if total > 0 and clipped > 0 else epsilon
        log_sum += math.log(precision)
        value = bp * math.exp(log_sum / k)
        scores.append(MetricScore(f"bleu{k}", min(value, 1.0), 1))
    return scores


def sentence_bleu(
    candidate: Tokens,
    references: Sequence[Tokens],
    max_n: int = 4,
    epsilon: float = DEFAULT_BLEU_EPSILON,
) -> list[MetricScore]:
    """Cumulative BLEU-1..max_n for one candidate against its references."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if not references:
        raise ValueError("at least one reference is required")
    if not candidate:
        return [MetricScore(f"bleu{k}", 0.0, 1) for k in range(1, max_n + 1)]
    stats = _clipped_stats(candidate, references, max_n)
    ref_len = _effective_reference_length(len(candidate), references)
    return _bleu_from_stats(stats, len(candidate), ref_len, max_n, epsilon)


def corpus_bleu(
    pairs: Sequence[tuple[Tokens, Sequence[Tokens]]],
    max_n: int = 4,
    epsilon: float = DEFAULT_BLEU_EPSILON,
) -> list[MetricScore]:
    """Corpus BLEU: n-gram statistics and lengths pooled over all pairs."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if not pairs:
        raise ValueError("empty corpus")
    totals = [(0, 0)] * max_n
    cand_len = 0
    ref_len = 0
    for candidate, references in pairs:
        if not references:
            raise ValueError("every pair needs at least one reference")
        if candidate:
            ref_len += _effective_reference_length(len(candidate), references)
            cand_len += len(candidate)
            for i, (c, t) in enumerate(_clipped_stats(candidate, references, max_n)):
                totals[i] = (totals[i][0] + c, totals[i][1] + t)
    scores = _bleu_from_stats(totals, cand_len, ref_len, max_n, epsilon)
    return [MetricScore(s.name, s.value, len(pairs)) for s in scores]


# ---------------------------------------------------------------------------
# ROUGE
# ---------------------------------------------------------------------------


class RougeVariant(str, Enum):
    R1 = "rouge1"
    R2 = "rouge2"
    RL = "rougeL"


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Length of the longest common subsequence (row-vectorized DP).

    Works on any hashable elements (characters, tokens). The row update
    cur[j] = max(prev[j], prev[j-1] + match, cur[j-1]) folds the in-row
    dependency into a running maximum, which numpy accumulates.
    """
    if not a or not b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    vocab: dict = {}

    def encode(seq: Sequence) -> np.ndarray:
        return np.asarray([vocab.setdefault(x, len(vocab)) for x in seq], dtype=np.int64)

    a_ids = encode(a)
    b_ids = encode(b)
    prev = np.zeros(len(b) + 1, dtype=np.int32)
    cur = np.zeros(len(b) + 1, dtype=np.int32)
    for aid in a_ids:
        match = (b_ids == aid).astype(np.int32)
        base = np.maximum(prev[1:], prev[:-1] + match)
        np.maximum.accumulate(base, out=cur[1:])
        prev, cur = cur, prev
    return int(prev[-1])


def rouge_n(candidate: Tokens, reference: Tokens, n: int) -> float:
    cand = _ngram_counts(candidate, n)
    ref = _ngram_counts(reference, n)
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    if cand_total == 0 or ref_total == 0:
        return 0.0
    matched = sum(min(count, ref[gram]) for gram, count in cand.items())
    return _f1(matched / cand_total, matched / ref_total)


def rouge_l(candidate: Tokens, reference: Tokens) -> float:
    if not candidate or not reference:
        return 0.0
    lcs = lcs_length(candidate, reference)
    return _f1(lcs / len(candidate), lcs / len(reference))


def rouge(candidate: Tokens, reference: Tokens, variant: RougeVariant) -> MetricScore:
    if variant is RougeVariant.R1:
        value = rouge_n(candidate, reference, 1)
    elif variant is RougeVariant.R2:
        value = rouge_n(candidate, reference, 2)
    else:
        value = rouge_l(candidate, reference)
    return MetricScore(variant.value, value, 1)


# ---------------------------------------------------------------------------
# Embedding similarity (greedy matching F1)
# ---------------------------------------------------------------------------


def sim(
    candidate: str,
    reference: str,
    embedder,
    tokenizer: TokenizerConfig | None = None,
) -> MetricScore:
    """Greedy token-level cosine matching F1 over a pluggable embedder.

    Precision averages each candidate token's best cosine against the
    reference tokens; recall is symmetric; negatives clamp to zero.
    """
    cand_tokens = tokenize(candidate, tokenizer)
    ref_tokens = tokenize(reference, tokenizer)
    if not cand_tokens and not ref_tokens:
        return MetricScore("sim", 1.0, 1)
    if not cand_tokens or not ref_tokens:
        return MetricScore("sim", 0.0, 1)
    cand_mat = np.stack([embedder.embed_token(t) for t in cand_tokens])
    ref_mat = np.stack([embedder.embed_token(t) for t in ref_tokens])
    scores = cand_mat @ ref_mat.T
    precision = max(0.0, float(scores.max(axis=1).mean()))
    recall = max(0.0, float(scores.max(axis=0).mean()))
    return MetricScore("sim", min(_f1(precision, recall), 1.0), 1)


# ---------------------------------------------------------------------------
# Attribute accuracy surrogate
# ---------------------------------------------------------------------------

_WS_RE = re.compile(r"\s+")


def _normalize(text: str) -> str:
    return _WS_RE.sub(" ", text.casefold()).strip()


def attribute_accuracy(generated: str, gold: ExtractedAttributes) -> MetricScore:
    """Fraction of gold attribute values present in the generated text.

    Matching is substring containment after case folding and whitespace
    collapsing (automated surrogate for human attribute checks).
    """
    if not gold.values:
        raise EmptyGoldError("gold attributes must be nonempty")
    text = _normalize(generated)
    matched = sum(1 for value in gold.values.values() if _normalize(value) in text)
    return MetricScore("attribute_accuracy", matched / len(gold.values), 1)
