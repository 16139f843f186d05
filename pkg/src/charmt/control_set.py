"""Synthetic proper-noun copying control set.

Every aligned (source, reference) word pair tagged as a proper noun on both
sides is replaced, on both sides, by one fresh random string of ASCII
letters matching the source word's character length, uppercased on the
first letter.  Copying the string is then the uniquely correct translation,
so the fraction of replacements appearing verbatim in a system's output
measures its copying ability.

Generation draws from a single Mersenne Twister stream
(``random.Random(seed)``, letters indexed by ``int(random() * 52)``) and
processes records in corpus order and links in sorted order, so identical
inputs and seed reproduce the control corpus byte for byte on any platform.
"""

from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus_io import Alignment, Corpus, SentenceRecord
from .errors import ParseError, ValidationError

PROPER_NOUN_TAGS = frozenset({"NNP", "NNPS", "PROPN"})

_LETTERS = string.ascii_lowercase + string.ascii_uppercase


@dataclass(frozen=True)
class Replacement:
    record_id: str
    src_index: int
    ref_index: int
    original_src: str
    original_ref: str
    replacement: str


@dataclass(frozen=True)
class ControlCorpus:
    corpus: Corpus
    replacements: tuple[Replacement, ...]
    seed: int


def _token_char_spans(text: str) -> list[tuple[int, int]]:
    spans = []
    cursor = 0
    for token in text.split():
        start = text.find(token, cursor)
        spans.append((start, start + len(token)))
        cursor = start + len(token)
    return spans


def _splice(text: str, edits: Mapping[int, str], spans: Sequence[tuple[int, int]]) -> str:
    """Replace the tokens named by ``edits`` (token index -> new text),
    leaving every other byte of ``text`` untouched."""
    pieces = []
    cursor = 0
    for index in sorted(edits):
        start, end = spans[index]
        pieces.append(text[cursor:start])
        pieces.append(edits[index])
        cursor = end
    pieces.append(text[cursor:])
    return "".join(pieces)


def _random_word(rng: random.Random, length: int) -> str:
    chars = [_LETTERS[int(rng.random() * len(_LETTERS))] for _ in range(length)]
    chars[0] = chars[0].upper()
    return "".join(chars)


def _check_tags(record_id: str, side: str, tokens: Sequence[str], tags: Sequence[str]):
    if len(tokens) != len(tags):
        raise ValidationError(
            f"record {record_id!r}: {len(tags)} {side} tags for {len(tokens)} tokens"
        )


def generate_control(
    corpus: Corpus,
    src_ref_alignments: Mapping[str, Alignment],
    src_tags: Mapping[str, Sequence[str]],
    ref_tags: Mapping[str, Sequence[str]],
    seed: int,
    proper_tags: frozenset[str] = PROPER_NOUN_TAGS,
) -> ControlCorpus:
    """Build the control corpus by replacing aligned proper-noun pairs."""
    rng = random.Random(seed)
    new_records = []
    replacements: list[Replacement] = []
    for record in corpus:
        src_tokens = record.source.split()
        ref_tokens = record.reference.split()
        if record.id not in src_tags or record.id not in ref_tags:
            raise ValidationError(f"record {record.id!r}: missing tag sequence")
        _check_tags(record.id, "source", src_tokens, src_tags[record.id])
        _check_tags(record.id, "reference", ref_tokens, ref_tags[record.id])
        if record.id not in src_ref_alignments:
            raise ValidationError(f"record {record.id!r}: missing alignment")
        src_edits: dict[int, str] = {}
        ref_edits: dict[int, str] = {}
        by_surface: dict[str, str] = {}
        for i, j in sorted(src_ref_alignments[record.id].links):
            if i >= len(src_tokens) or j >= len(ref_tokens):
                raise ValidationError(
                    f"record {record.id!r}: alignment link ({i},{j}) out of range"
                )
            if src_tags[record.id][i] not in proper_tags or ref_tags[record.id][j] not in proper_tags:
                continue
            surface = src_tokens[i]
            word = by_surface.get(surface)
            if word is None:
                # Regenerate on collision so a copying match cannot come from
                # text that was already in the sentence or from another
                # replacement containing this one.
                for _ in range(10000):
                    word = _random_word(rng, len(surface))
                    if (
                        word not in record.source
                        and word not in record.reference
                        and all(word not in w and w not in word for w in by_surface.values())
                    ):
                        break
                else:
                    raise ValidationError(
                        f"record {record.id!r}: could not draw a collision-free "
                        f"replacement for {surface!r}"
                    )
                by_surface[surface] = word
            src_edits[i] = word
            ref_edits[j] = word
            replacements.append(
                Replacement(
                    record_id=record.id,
                    src_index=i,
                    ref_index=j,
                    original_src=src_tokens[i],
                    original_ref=ref_tokens[j],
                    replacement=word,
                )
            )
        if src_edits or ref_edits:
            new_records.append(
                SentenceRecord(
                    id=record.id,
                    source=_splice(record.source, src_edits, _token_char_spans(record.source)),
                    reference=_splice(record.reference, ref_edits, _token_char_spans(record.reference)),
                    hypotheses=record.hypotheses,
                )
            )
        else:
            new_records.append(record)
    return ControlCorpus(
        corpus=Corpus(
            records=tuple(new_records),
            source_lang=corpus.source_lang,
            target_lang=corpus.target_lang,
        ),
        replacements=tuple(replacements),
        seed=seed,
    )


def copying_accuracy(
    control: ControlCorpus | Sequence[Replacement], hypotheses: Mapping[str, str]
) -> float:
    """Fraction of replacement strings occurring verbatim (case-sensitive
    substring) in the corresponding hypothesis."""
    if isinstance(control, ControlCorpus):
        replacements = control.replacements
        required = [record.id for record in control.corpus]
    else:
        replacements = tuple(control)
        required = [r.record_id for r in replacements]
    for rec_id in required:
        if rec_id not in hypotheses:
            raise ValidationError(f"missing hypothesis for record {rec_id!r}")
    if not replacements:
        raise ValidationError("no replacements to score")
    hits = sum(1 for r in replacements if r.replacement in hypotheses[r.record_id])
    return hits / len(replacements)


def proper_noun_rate(
    corpus: Corpus,
    ref_tags: Mapping[str, Sequence[str]],
    proper_tags: frozenset[str] = PROPER_NOUN_TAGS,
) -> float:
    """Fraction of reference tokens tagged as proper nouns."""
    total = 0
    proper = 0
    for record in corpus:
        ref_tokens = record.reference.split()
        if record.id not in ref_tags:
            raise ValidationError(f"record {record.id!r}: missing tag sequence")
        _check_tags(record.id, "reference", ref_tokens, ref_tags[record.id])
        total += len(ref_tokens)
        proper += sum(1 for tag in ref_tags[record.id] if tag in proper_tags)
    if total == 0:
        raise ValidationError("corpus has no reference tokens")
    return proper / total


def load_tags(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Load an ``id<TAB>tag tag ...`` file."""
    out: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            rec_id, _, rest = line.partition("\t")
            if not rec_id:
                raise ParseError("missing record id", str(path), lineno)
            if rec_id in out:
                raise ParseError(f"duplicate id {rec_id!r}", str(path), lineno)
            out[rec_id] = tuple(rest.split())
    return out


def load_hypotheses(path: str | Path) -> dict[str, str]:
    """Load an ``id<TAB>text`` hypothesis file."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            rec_id, sep, text = line.partition("\t")
            if not rec_id or not sep:
                raise ParseError("expected id<TAB>text", str(path), lineno)
            if rec_id in out:
                raise ParseError(f"duplicate id {rec_id!r}", str(path), lineno)
            out[rec_id] = text
    return out


def write_replacement_log(replacements: Sequence[Replacement]) -> str:
    lines = []
    for r in replacements:
        lines.append(
            json.dumps(
                {
                    "id": r.record_id,
                    "src_index": r.src_index,
                    "ref_index": r.ref_index,
                    "original_src": r.original_src,
                    "original_ref": r.original_ref,
                    "replacement": r.replacement,
                },
                ensure_ascii=False,
            )
        )
    return "".join(line + "\n" for line in lines)


def load_replacement_log(path: str | Path) -> list[Replacement]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", str(path), lineno) from exc
            try:
                out.append(
                    Replacement(
                        record_id=obj["id"],
                        src_index=obj["src_index"],
                        ref_index=obj["ref_index"],
                        original_src=obj["original_src"],
                        original_ref=obj["original_ref"],
                        replacement=obj["replacement"],
                    )
                )
            except KeyError as exc:
                raise ParseError(f"missing field {exc}", str(path), lineno) from exc
    return out
