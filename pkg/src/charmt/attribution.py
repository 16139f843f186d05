"""Source-vs-target contribution analytics over attribution records.

Per generated byte, the source share is the summed source gradient-norm mass
divided by the total (source + target-prefix) mass, so source and target
shares sum to 1 and all statistics are invariant to rescaling a record's
norms by a positive constant.  Step 0 has an empty target prefix and
therefore source share 1.

Position curves average shares per in-sentence byte position and smooth with
a trailing rolling window (truncated at the start).  In-word statistics
divide each byte's share by the raw curve value at its sentence position, so
a corpus measured against its own curve averages to 100%.

The trailing element of ``target_bytes`` is the end-of-sentence byte: it is
attributed like any other step in position curves but belongs to no word
span, and whitespace bytes carry no in-word position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus_io import Alignment, AttributionRecord, Corpus
from .errors import ValidationError
from .metrics import orthographic_similarity
from .word_accuracy import normalize_token

_WHITESPACE_BYTES = frozenset((9, 10, 32))  # tab, newline, space


@dataclass(frozen=True)
class StepShare:
    source_share: float
    target_share: float


@dataclass(frozen=True)
class WordSpan:
    """Inclusive byte span [start_byte, end_byte] of one word."""

    start_byte: int
    end_byte: int
    word_index: int

    def __contains__(self, byte_index: int) -> bool:
        return self.start_byte <= byte_index <= self.end_byte


@dataclass(frozen=True)
class PositionCurve:
    """Mean source share per in-sentence byte position.

    ``raw`` holds the unsmoothed means, ``smoothed`` the trailing rolling
    means, ``support`` the number of records contributing at each position.
    """

    raw: tuple[float, ...]
    smoothed: tuple[float, ...]
    support: tuple[int, ...]
    window: int

    @property
    def values(self) -> tuple[float, ...]:
        return self.smoothed

    def __len__(self) -> int:
        return len(self.raw)


@dataclass(frozen=True)
class InWordImportance:
    position: int
    mean_relative_pct: float | None
    n_bytes: int


@dataclass(frozen=True)
class OswImportance:
    """Source-importance summary for orthographically similar vs dissimilar
    aligned words, over the generated bytes of words found in the output.

    ``*_pct`` is the mean position-normalized source share (percent);
    ``*_focus`` the mean fraction of per-step source norm mass on the aligned
    source word's bytes.  Empty buckets carry None values and zero counts.
    """

    osw_pct: float | None
    non_osw_pct: float | None
    osw_focus: float | None
    non_osw_focus: float | None
    osw_bytes: int
    non_osw_bytes: int
    osw_words: int
    non_osw_words: int


def step_shares(record: AttributionRecord) -> list[StepShare]:
    """Normalized source/target contribution per generated byte."""
    shares = []
    for t, step in enumerate(record.steps):
        source_mass = sum(step.src_norms)
        target_mass = sum(step.tgt_norms)
        total = source_mass + target_mass
        if total <= 0.0:
            raise ValidationError(f"record {record.id!r}: step {t} has zero total norm mass")
        shares.append(StepShare(source_share=source_mass / total, target_share=target_mass / total))
    return shares


def _truncated_records(
    records: Sequence[AttributionRecord], drop_eos: bool
) -> list[tuple[AttributionRecord, int]]:
    return [(r, len(r.steps) - 1 if drop_eos else len(r.steps)) for r in records]


def sentence_position_curve(
    records: Sequence[AttributionRecord], window: int = 10, drop_eos: bool = False
) -> PositionCurve:
    """Mean source share per byte position, smoothed with a trailing rolling
    window of the given width."""
    if not records:
        raise ValidationError("no attribution records")
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    longest = max(
        (steps for _, steps in _truncated_records(records, drop_eos)), default=0
    )
    sums = [0.0] * longest
    support = [0] * longest
    for record, steps in _truncated_records(records, drop_eos):
        for t, share in enumerate(step_shares(record)[:steps]):
            sums[t] += share.source_share
            support[t] += 1
    raw = tuple(s / n for s, n in zip(sums, support))
    smoothed = tuple(
        sum(raw[max(0, t - window + 1) : t + 1]) / min(t + 1, window) for t in range(len(raw))
    )
    return PositionCurve(raw=raw, smoothed=smoothed, support=tuple(support), window=window)


def segment_words(target_bytes: Sequence[int]) -> list[WordSpan]:
    """Maximal runs of non-whitespace bytes (whitespace: ASCII space, tab,
    newline).  UTF-8 continuation bytes are never whitespace, so multi-byte
    characters are never split."""
    spans = []
    start = None
    for i, b in enumerate(target_bytes):
        if b in _WHITESPACE_BYTES:
            if start is not None:
                spans.append(WordSpan(start_byte=start, end_byte=i - 1, word_index=len(spans)))
                start = None
        elif start is None:
            start = i
    if start is not None:
        spans.append(
            WordSpan(start_byte=start, end_byte=len(target_bytes) - 1, word_index=len(spans))
        )
    return spans


def _relative_share(share: float, curve: PositionCurve, position: int, rec_id: str) -> float:
    if position >= len(curve.raw):
        raise ValidationError(
            f"record {rec_id!r}: curve has no value at position {position}"
        )
    denominator = curve.raw[position]
    if denominator <= 0.0:
        raise ValidationError(
            f"record {rec_id!r}: zero curve value at position {position}"
        )
    return share / denominator


def in_word_relative_importance(
    records: Sequence[AttributionRecord], curve: PositionCurve, max_pos: int
) -> list[InWordImportance]:
    """Mean position-normalized source share (percent) per in-word byte
    position 0..max_pos.

    Word spans are taken over the generated bytes with the trailing
    end-of-sentence byte removed.
    """
    if max_pos < 0:
        raise ValidationError(f"max_pos must be >= 0, got {max_pos}")
    sums = [0.0] * (max_pos + 1)
    counts = [0] * (max_pos + 1)
    for record in records:
        shares = step_shares(record)
        for span in segment_words(record.target_bytes[:-1]):
            for t in range(span.start_byte, span.end_byte + 1):
                p = t - span.start_byte
                if p > max_pos:
                    break
                relative = _relative_share(shares[t].source_share, curve, t, record.id)
                sums[p] += relative
                counts[p] += 1
    return [
        InWordImportance(
            position=p,
            mean_relative_pct=100.0 * sums[p] / counts[p] if counts[p] else None,
            n_bytes=counts[p],
        )
        for p in range(max_pos + 1)
    ]


def mean_relative_importance(
    records: Sequence[AttributionRecord], curve: PositionCurve
) -> float:
    """Corpus-wide mean position-normalized source share (percent) over all
    generated bytes; equals 100% when the curve was built from the same
    records without dropping steps."""
    total = 0.0
    n = 0
    for record in records:
        for t, share in enumerate(step_shares(record)):
            if t >= len(curve.raw):
                break
            total += _relative_share(share.source_share, curve, t, record.id)
            n += 1
    if n == 0:
        raise ValidationError("no generated bytes")
    return 100.0 * total / n


def _token_byte_spans(text: str) -> list[tuple[int, int]]:
    """[start, end) UTF-8 byte spans of the whitespace tokens of ``text``."""
    spans = []
    char_pos = 0
    byte_pos = 0
    for token in text.split():
        found = text.find(token, char_pos)
        byte_pos += len(text[char_pos:found].encode("utf-8"))
        token_bytes = len(token.encode("utf-8"))
        spans.append((byte_pos, byte_pos + token_bytes))
        byte_pos += token_bytes
        char_pos = found + len(token)
    return spans


def osw_source_importance(
    records: Sequence[AttributionRecord],
    corpus: Corpus,
    alignments: Mapping[str, Alignment],
    osw_min: float = 0.7,
    nonosw_max: float = 0.3,
    curve: PositionCurve | None = None,
) -> OswImportance:
    """Source importance for generated words whose aligned (source, reference)
    pair is orthographically similar (similarity >= osw_min) vs dissimilar
    (similarity <= nonosw_max).

    Reference words are located in the generated output by normalized surface
    match, scanning generated words left to right.  The record's source text
    must occur in its attribution source bytes (a rendered prompt prefix is
    allowed).
    """
    if not 0.0 <= nonosw_max <= osw_min <= 1.0:
        raise ValidationError(
            f"need 0 <= nonosw_max <= osw_min <= 1, got {nonosw_max}, {osw_min}"
        )
    if curve is None:
        curve = sentence_position_curve(records)
    by_id = corpus.by_id()
    buckets: dict[bool, dict[str, float | int]] = {
        flag: {"rel_sum": 0.0, "focus_sum": 0.0, "bytes": 0, "words": 0} for flag in (True, False)
    }
    for record in records:
        if record.id not in by_id:
            raise ValidationError(f"attribution record {record.id!r} not present in corpus")
        sentence = by_id[record.id]
        if sentence.id not in alignments:
            raise ValidationError(f"no source-reference alignment for record {record.id!r}")
        links = sorted(alignments[sentence.id].links, key=lambda link: (link[1], link[0]))
        src_tokens = sentence.source.split()
        ref_tokens = sentence.reference.split()
        src_byte_spans = _token_byte_spans(sentence.source)
        source_blob = bytes(record.source_bytes)
        offset = source_blob.find(sentence.source.encode("utf-8"))
        if offset < 0:
            raise ValidationError(
                f"record {record.id!r}: corpus source text not found in attribution source bytes"
            )
        generated = record.target_bytes[:-1]
        spans = segment_words(generated)
        span_texts = [
            normalize_token(bytes(generated[s.start_byte : s.end_byte + 1]).decode("utf-8", "replace"))
            for s in spans
        ]
        shares = step_shares(record)
        cursor = 0
        matched: dict[int, WordSpan] = {}
        for i, j in links:
            if i >= len(src_tokens) or j >= len(ref_tokens):
                raise ValidationError(
                    f"record {record.id!r}: alignment link ({i},{j}) out of range"
                )
            if j not in matched:
                want = normalize_token(ref_tokens[j])
                if not want:
                    continue
                for k in range(cursor, len(spans)):
                    if span_texts[k] == want:
                        matched[j] = spans[k]
                        cursor = k + 1
                        break
                if j not in matched:
                    continue
            span = matched[j]
            similarity = orthographic_similarity(
                normalize_token(src_tokens[i]), normalize_token(ref_tokens[j])
            )
            if similarity >= osw_min:
                is_osw = True
            elif similarity <= nonosw_max:
                is_osw = False
            else:
                continue
            lo, hi = src_byte_spans[i]
            lo += offset
            hi += offset
            bucket = buckets[is_osw]
            bucket["words"] += 1
            for t in range(span.start_byte, span.end_byte + 1):
                bucket["rel_sum"] += _relative_share(shares[t].source_share, curve, t, record.id)
                source_mass = sum(record.steps[t].src_norms)
                word_mass = sum(record.steps[t].src_norms[lo:hi])
                bucket["focus_sum"] += word_mass / source_mass if source_mass > 0 else 0.0
                bucket["bytes"] += 1

    def summarize(flag: bool) -> tuple[float | None, float | None, int, int]:
        b = buckets[flag]
        n = int(b["bytes"])
        if n == 0:
            return None, None, 0, int(b["words"])
        return 100.0 * b["rel_sum"] / n, b["focus_sum"] / n, n, int(b["words"])

    osw_pct, osw_focus, osw_bytes, osw_words = summarize(True)
    non_pct, non_focus, non_bytes, non_words = summarize(False)
    return OswImportance(
        osw_pct=osw_pct,
        non_osw_pct=non_pct,
        osw_focus=osw_focus,
        non_osw_focus=non_focus,
        osw_bytes=osw_bytes,
        non_osw_bytes=non_bytes,
        osw_words=osw_words,
        non_osw_words=non_words,
    )
