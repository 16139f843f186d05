"""String-level translation metrics and paired significance testing.

chrF++ follows Popović (2017): macro-averaged F-beta over character n-gram
orders 1..char_order (whitespace removed) and word n-gram orders
1..word_order (whitespace tokens with a single edge punctuation character
split off), with char_order=6, word_order=2, beta=2 as defaults.
word_order=0 reduces to plain chrF.  Corpus scores aggregate the per-order
n-gram statistics over all segments before computing F.

An n-gram order with zero hypothesis n-grams contributes F=0; an order with
no n-grams on either side is dropped from the macro-average, so identical
strings always score 100 regardless of length.

BLEU is unsmoothed corpus BLEU (modified precisions up to order 4, geometric
mean, exponential brevity penalty).  The default tokenizer splits on
whitespace after isolating every Unicode punctuation character as its own
token; it is deterministic and language-agnostic.

All operations are pure.  Corpus statistics are reduced in corpus order so
results do not depend on evaluation scheduling.
"""

from __future__ import annotations

import math
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import ValidationError

_CHRF_PUNCTUATION = set(string.punctuation)


@dataclass(frozen=True)
class ChrfParams:
    char_order: int = 6
    word_order: int = 2
    beta: float = 2.0

    def __post_init__(self):
        if self.char_order < 1:
            raise ValidationError(f"char_order must be >= 1, got {self.char_order}")
        if self.word_order < 0:
            raise ValidationError(f"word_order must be >= 0, got {self.word_order}")
        if not self.beta > 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class MetricScore:
    value: float
    per_sentence: tuple[float, ...] | None = None


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    n: int


def levenshtein(a: str, b: str) -> int:
    """Minimal insert/delete/substitute edit count between two strings,
    computed over Unicode scalar values."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


def orthographic_similarity(a: str, b: str) -> float:
    """Inverse normalized Levenshtein distance: 1 - d(a,b)/max(|a|,|b|).

    Two empty strings are identical by convention and score 1.0.
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def _char_tokens(text: str) -> str:
    return "".join(text.split())


def _split_edge_punctuation(word: str) -> list[str]:
    # One punctuation character is split off a word edge, end before start,
    # matching the reference chrF++ tokenization.
    if len(word) == 1:
        return [word]
    if word[-1] in _CHRF_PUNCTUATION:
        return [word[:-1], word[-1]]
    if word[0] in _CHRF_PUNCTUATION:
        return [word[0], word[1:]]
    return [word]


def _word_tokens(text: str) -> list[str]:
    tokens: list[str] = []
    for word in text.split():
        tokens.extend(_split_edge_punctuation(word))
    return tokens


def _ngram_counts(items: Sequence, order: int) -> Counter:
    return Counter(tuple(items[i : i + order]) for i in range(len(items) - order + 1))


def _pair_statistics(hypothesis: str, reference: str, params: ChrfParams) -> list[tuple[int, int, int]]:
    """Per-order (hyp_total, ref_total, match) counts; char orders first."""
    stats: list[tuple[int, int, int]] = []
    hyp_chars = _char_tokens(hypothesis)
    ref_chars = _char_tokens(reference)
    for n in range(1, params.char_order + 1):
        hyp_counts = _ngram_counts(hyp_chars, n)
        ref_counts = _ngram_counts(ref_chars, n)
        match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        stats.append((sum(hyp_counts.values()), sum(ref_counts.values()), match))
    if params.word_order:
        hyp_words = _word_tokens(hypothesis)
        ref_words = _word_tokens(reference)
        for n in range(1, params.word_order + 1):
            hyp_counts = _ngram_counts(hyp_words, n)
            ref_counts = _ngram_counts(ref_words, n)
            match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            stats.append((sum(hyp_counts.values()), sum(ref_counts.values()), match))
    return stats


def _fscore_from_statistics(stats: Sequence[tuple[int, int, int]], beta: float) -> float:
    factor = beta * beta
    total = 0.0
    effective_orders = 0
    for hyp_total, ref_total, match in stats:
        if hyp_total == 0 and ref_total == 0:
            continue
        effective_orders += 1
        if match == 0:
            continue
        precision = match / hyp_total
        recall = match / ref_total
        total += (1 + factor) * precision * recall / (factor * precision + recall)
    if effective_orders == 0:
        return 0.0
    return 100.0 * total / effective_orders


def chrf_pp(
    hypotheses: Sequence[str],
    references: Sequence[str],
    params: ChrfParams = ChrfParams(),
    per_sentence: bool = False,
) -> MetricScore:
    """Corpus chrF++ over parallel hypothesis/reference lists."""
    if len(hypotheses) != len(references):
        raise ValidationError(
            f"{len(hypotheses)} hypotheses for {len(references)} references"
        )
    for i, ref in enumerate(references):
        if not ref:
            raise ValidationError(f"empty reference at index {i}")
    corpus_stats: list[tuple[int, int, int]] | None = None
    sentence_scores: list[float] = []
    for hyp, ref in zip(hypotheses, references):
        stats = _pair_statistics(hyp, ref, params)
        if per_sentence:
            sentence_scores.append(_fscore_from_statistics(stats, params.beta))
        if corpus_stats is None:
            corpus_stats = stats
        else:
            corpus_stats = [
                (a0 + b0, a1 + b1, a2 + b2)
                for (a0, a1, a2), (b0, b1, b2) in zip(corpus_stats, stats)
            ]
    if corpus_stats is None:
        raise ValidationError("no segments to score")
    value = _fscore_from_statistics(corpus_stats, params.beta)
    return MetricScore(value=value, per_sentence=tuple(sentence_scores) if per_sentence else None)


def sentence_chrf_pp(hypothesis: str, reference: str, params: ChrfParams = ChrfParams()) -> float:
    """Sentence-level chrF++: the corpus formula on single-sentence statistics."""
    return chrf_pp([hypothesis], [reference], params).value


def tokenize_words(text: str) -> list[str]:
    """BLEU tokenizer: every Unicode punctuation character becomes its own
    token; the remainder splits on whitespace."""
    tokens: list[str] = []
    for chunk in text.split():
        current = ""
        for ch in chunk:
            if unicodedata.category(ch).startswith("P"):
                if current:
                    tokens.append(current)
                    current = ""
                tokens.append(ch)
            else:
                current += ch
        if current:
            tokens.append(current)
    return tokens


_BLEU_ORDER = 4


def _bleu_pair_statistics(hyp_tokens: list[str], ref_tokens: list[str]):
    correct = [0] * _BLEU_ORDER
    total = [0] * _BLEU_ORDER
    for n in range(1, _BLEU_ORDER + 1):
        hyp_counts = _ngram_counts(hyp_tokens, n)
        ref_counts = _ngram_counts(ref_tokens, n)
        correct[n - 1] = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        total[n - 1] = sum(hyp_counts.values())
    return correct, total, len(hyp_tokens), len(ref_tokens)


def _bleu_from_statistics(correct, total, sys_len: int, ref_len: int) -> float:
    if sys_len == 0:
        return 0.0
    log_precision_sum = 0.0
    for c, t in zip(correct, total):
        if c == 0 or t == 0:
            return 0.0
        log_precision_sum += math.log(c / t)
    brevity = 1.0 if sys_len >= ref_len else math.exp(1.0 - ref_len / sys_len)
    return 100.0 * brevity * math.exp(log_precision_sum / _BLEU_ORDER)


def bleu(
    hypotheses: Sequence[str], references: Sequence[str], per_sentence: bool = False
) -> MetricScore:
    """Unsmoothed corpus BLEU with the default tokenizer.

    Any order with zero matches (or no n-grams) zeroes the score, so
    per-sentence values are only meaningful for longer segments.
    """
    if len(hypotheses) != len(references):
        raise ValidationError(
            f"{len(hypotheses)} hypotheses for {len(references)} references"
        )
    for i, ref in enumerate(references):
        if not ref:
            raise ValidationError(f"empty reference at index {i}")
    if not hypotheses:
        raise ValidationError("no segments to score")
    corr_sum = [0] * _BLEU_ORDER
    total_sum = [0] * _BLEU_ORDER
    sys_len = 0
    ref_len = 0
    sentence_scores: list[float] = []
    for hyp, ref in zip(hypotheses, references):
        correct, total, s_len, r_len = _bleu_pair_statistics(
            tokenize_words(hyp), tokenize_words(ref)
        )
        if per_sentence:
            sentence_scores.append(_bleu_from_statistics(correct, total, s_len, r_len))
        corr_sum = [a + b for a, b in zip(corr_sum, correct)]
        total_sum = [a + b for a, b in zip(total_sum, total)]
        sys_len += s_len
        ref_len += r_len
    value = _bleu_from_statistics(corr_sum, total_sum, sys_len, ref_len)
    return MetricScore(value=value, per_sentence=tuple(sentence_scores) if per_sentence else None)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # Lentz's algorithm for the incomplete beta continued fraction.
    max_iterations = 300
    epsilon = 1e-15
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < epsilon:
            return h
    raise ValidationError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to about 1e-10 over the t-test parameter range."""
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on elementwise differences.

    Conventions: all-zero differences give (t=0, p=1); a constant nonzero
    difference gives p=0 with an infinite t carrying the sign of the mean.
    """
    if len(a) != len(b):
        raise ValidationError(f"sample sizes differ: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValidationError(f"need at least 2 paired samples, got {n}")
    diffs = [float(x) - float(y) for x, y in zip(a, b)]
    mean = sum(diffs) / n
    variance = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if variance == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, p=1.0, n=n)
        return TTestResult(t=math.copysign(math.inf, mean), p=0.0, n=n)
    t = mean / math.sqrt(variance / n)
    df = n - 1
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return TTestResult(t=t, p=min(max(p, 0.0), 1.0), n=n)
