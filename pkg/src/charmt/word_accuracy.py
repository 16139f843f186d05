"""Alignment-based word-level translation accuracy, binned by orthographic
similarity and by training-data frequency.

Tokens are whitespace tokens (matching aligner output); comparisons strip
punctuation from token edges and case-fold, so a pair is correct when some
hypothesis word aligned to the same source position equals the reference
word under that normalization.  The criterion is applied identically to both
systems, which keeps system deltas meaningful.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus_io import Alignment, Corpus, SentenceRecord
from .errors import ValidationError
from .metrics import orthographic_similarity


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize_token(token: str) -> str:
    """Strip edge punctuation and case-fold."""
    start = 0
    end = len(token)
    while start < end and _is_punctuation(token[start]):
        start += 1
    while end > start and _is_punctuation(token[end - 1]):
        end -= 1
    return token[start:end].casefold()


@dataclass(frozen=True)
class WordPair:
    """An aligned (source, reference) word pair with its similarity.

    Words are stored in normalized form (edge punctuation stripped,
    case-folded); similarity is the orthographic similarity of those forms.
    """

    src_word: str
    ref_word: str
    src_index: int
    ref_index: int
    similarity: float


@dataclass(frozen=True)
class AlignmentSet:
    """Alignments needed for word-accuracy analyses: source-to-reference and,
    per system, source-to-hypothesis, all keyed by record id."""

    src_ref: Mapping[str, Alignment]
    src_hyp: Mapping[str, Mapping[str, Alignment]]

    def for_record(self, rec_id: str) -> Alignment:
        try:
            return self.src_ref[rec_id]
        except KeyError:
            raise ValidationError(f"no source-reference alignment for record {rec_id!r}") from None

    def for_hypothesis(self, system: str, rec_id: str) -> Alignment:
        try:
            return self.src_hyp[system][rec_id]
        except KeyError:
            raise ValidationError(
                f"no source-hypothesis alignment for system {system!r}, record {rec_id!r}"
            ) from None


@dataclass(frozen=True)
class AccuracyBin:
    label: str
    n_pairs: int
    accuracy: dict[str, float | None]
    delta: float | None  # system1 - system2; None when the bin is empty


@dataclass(frozen=True)
class BinnedAccuracy:
    systems: tuple[str, str]
    bins: tuple[AccuracyBin, ...]


@dataclass(frozen=True)
class FrequencyTable:
    counts: Mapping[str, int]

    def get(self, word: str) -> int:
        return self.counts.get(word, 0)


def extract_word_pairs(record: SentenceRecord, src_ref_alignment: Alignment) -> list[WordPair]:
    """One WordPair per alignment link, in sorted link order."""
    src_tokens = record.source.split()
    ref_tokens = record.reference.split()
    pairs = []
    for i, j in sorted(src_ref_alignment.links):
        if i >= len(src_tokens) or j >= len(ref_tokens):
            raise ValidationError(
                f"record {record.id!r}: alignment link ({i},{j}) out of range "
                f"for {len(src_tokens)} source / {len(ref_tokens)} reference words"
            )
        src_word = normalize_token(src_tokens[i])
        ref_word = normalize_token(ref_tokens[j])
        pairs.append(
            WordPair(
                src_word=src_word,
                ref_word=ref_word,
                src_index=i,
                ref_index=j,
                similarity=orthographic_similarity(src_word, ref_word),
            )
        )
    return pairs


def word_correct(pair: WordPair, hypothesis: str, src_hyp_alignment: Alignment) -> bool:
    """True iff some hypothesis word aligned to the pair's source position
    matches the reference word (normalized comparison, set semantics)."""
    hyp_tokens = hypothesis.split()
    for j in src_hyp_alignment.targets_of(pair.src_index):
        if j < len(hyp_tokens) and normalize_token(hyp_tokens[j]) == pair.ref_word:
            return True
    return False


def _evaluated_pairs(
    corpus: Corpus, alignments: AlignmentSet, systems: tuple[str, str]
) -> list[tuple[WordPair, dict[str, bool]]]:
    """All word pairs with per-system correctness, in corpus order."""
    out = []
    for record in corpus:
        pairs = extract_word_pairs(record, alignments.for_record(record.id))
        for pair in pairs:
            verdict = {}
            for system in systems:
                try:
                    hypothesis = record.hypotheses[system]
                except KeyError:
                    raise ValidationError(
                        f"record {record.id!r} has no hypothesis for system {system!r}"
                    ) from None
                verdict[system] = word_correct(
                    pair, hypothesis, alignments.for_hypothesis(system, record.id)
                )
            out.append((pair, verdict))
    return out


def _bin_from_subset(
    label: str, subset: Sequence[tuple[WordPair, dict[str, bool]]], systems: tuple[str, str]
) -> AccuracyBin:
    n = len(subset)
    if n == 0:
        return AccuracyBin(label=label, n_pairs=0, accuracy={s: None for s in systems}, delta=None)
    accuracy = {s: sum(v[s] for _, v in subset) / n for s in systems}
    return AccuracyBin(
        label=label,
        n_pairs=n,
        accuracy=accuracy,
        delta=accuracy[systems[0]] - accuracy[systems[1]],
    )


def accuracy_by_similarity(
    corpus: Corpus,
    alignments: AlignmentSet,
    systems: tuple[str, str],
    thresholds: Sequence[float] = tuple(t / 10 for t in range(11)),
    cumulative: bool = True,
) -> BinnedAccuracy:
    """Per-threshold word accuracy and system delta.

    Cumulative bins keep pairs with similarity >= threshold (threshold 0 is
    the unbinned accuracy); disjoint bins cover [t_i, t_i+1) with the last
    bin closed at 1.
    """
    thresholds = list(thresholds)
    if not thresholds or any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValidationError("thresholds must be strictly ascending and non-empty")
    if thresholds[0] < 0 or thresholds[-1] > 1:
        raise ValidationError("thresholds must lie in [0, 1]")
    evaluated = _evaluated_pairs(corpus, alignments, systems)
    bins = []
    for k, tau in enumerate(thresholds):
        if cumulative:
            label = f">={tau:g}"
            subset = [e for e in evaluated if e[0].similarity >= tau]
        else:
            upper = thresholds[k + 1] if k + 1 < len(thresholds) else None
            if upper is None:
                label = f"[{tau:g},1]"
                subset = [e for e in evaluated if tau <= e[0].similarity <= 1.0]
            else:
                label = f"[{tau:g},{upper:g})"
                subset = [e for e in evaluated if tau <= e[0].similarity < upper]
        bins.append(_bin_from_subset(label, subset, systems))
    return BinnedAccuracy(systems=systems, bins=tuple(bins))


def build_frequency_table(training_target_text: Iterable[str]) -> FrequencyTable:
    """Count normalized tokens over the training-side text."""
    counts: Counter[str] = Counter()
    for line in training_target_text:
        for token in line.split():
            normalized = normalize_token(token)
            if normalized:
                counts[normalized] += 1
    return FrequencyTable(counts=dict(counts))


def accuracy_by_frequency(
    corpus: Corpus,
    alignments: AlignmentSet,
    systems: tuple[str, str],
    freq: FrequencyTable,
    bins: Sequence[int] = (0, 1, 10, 100, 1000),
) -> BinnedAccuracy:
    """Bucket pairs by the reference word's training frequency (missing words
    count 0); boundaries b0..bk give bins [b0,b1), ..., [bk, inf)."""
    boundaries = list(bins)
    if not boundaries or any(b <= a for a, b in zip(boundaries, boundaries[1:])):
        raise ValidationError("bin boundaries must be strictly ascending and non-empty")
    if boundaries[0] != 0:
        raise ValidationError("first bin boundary must be 0 so the bins partition all pairs")
    evaluated = _evaluated_pairs(corpus, alignments, systems)
    out = []
    for k, low in enumerate(boundaries):
        upper = boundaries[k + 1] if k + 1 < len(boundaries) else None
        if upper is None:
            label = f"[{low},inf)"
            subset = [e for e in evaluated if freq.get(e[0].ref_word) >= low]
        else:
            label = f"[{low},{upper})"
            subset = [e for e in evaluated if low <= freq.get(e[0].ref_word) < upper]
        out.append(_bin_from_subset(label, subset, systems))
    return BinnedAccuracy(systems=systems, bins=tuple(out))
