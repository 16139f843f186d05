"""Input parsing and domain model.

File formats
------------
Corpus        UTF-8, one JSON object per line:
              ``{"id": ..., "src": ..., "ref": ..., "hyp": {"byt5": ..., "mt5": ...}}``
Alignment     UTF-8 text, ``id<TAB>i-j i-j ...`` (Pharaoh pairs), one line per
              corpus record in corpus order.
Attribution   one JSON object per line:
              ``{"id": ..., "source_bytes": [ints], "target_bytes": [ints],
              "steps": [{"src": [floats], "tgt": [floats]}, ...]}``
Language      TSV with header: ``code<TAB>script<TAB>subgrouping<TAB>in_pretraining``
metadata      (0/1).
Score table   CSV with header: ``system,code,script,condition,chrfpp``.

Inputs are taken verbatim; no Unicode normalization is applied, since the
byte-level analyses depend on exact encodings.  All parsed values are
immutable and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ParseError, ValidationError

_CORPUS_KEYS = {"id", "src", "ref", "hyp"}
_ATTR_KEYS = {"id", "source_bytes", "target_bytes", "steps"}
_STEP_KEYS = {"src", "tgt"}


@dataclass(frozen=True)
class SentenceRecord:
    """One parallel example: source, reference, and one hypothesis per system."""

    id: str
    source: str
    reference: str
    hypotheses: Mapping[str, str]

    def __post_init__(self):
        if not self.id:
            raise ValidationError("record id must be non-empty")
        if not self.source:
            raise ValidationError(f"record {self.id!r}: source must be non-empty")
        if not self.reference:
            raise ValidationError(f"record {self.id!r}: reference must be non-empty")


@dataclass(frozen=True)
class Corpus:
    """Ordered collection of records sharing one hypothesis system set."""

    records: tuple[SentenceRecord, ...]
    source_lang: str = ""
    target_lang: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def systems(self) -> frozenset[str]:
        if not self.records:
            return frozenset()
        return frozenset(self.records[0].hypotheses)

    def by_id(self) -> dict[str, SentenceRecord]:
        return {r.id: r for r in self.records}


@dataclass(frozen=True)
class Alignment:
    """Set of (source word index, target word index) links for one sentence pair."""

    links: frozenset[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.links)

    def targets_of(self, src_index: int) -> frozenset[int]:
        return frozenset(j for i, j in self.links if i == src_index)


@dataclass(frozen=True)
class AttributionStep:
    """Gradient L2 norms for one generated byte: per source byte and per
    preceding target byte."""

    src_norms: tuple[float, ...]
    tgt_norms: tuple[float, ...]


@dataclass(frozen=True)
class AttributionRecord:
    """Per-step source/target gradient norms for one generated sentence.

    ``target_bytes`` is the generated output including the trailing
    end-of-sentence byte; step ``t`` attributes the prediction of
    ``target_bytes[t]`` given the source and the first ``t`` target bytes.
    """

    id: str
    source_bytes: tuple[int, ...]
    target_bytes: tuple[int, ...]
    steps: tuple[AttributionStep, ...]


@dataclass(frozen=True)
class LanguageInfo:
    """FLoRes-style language entry: code, writing script, subgrouping, and
    whether the language occurs in the model pretraining corpus."""

    code: str
    script: str
    subgrouping: str
    in_pretraining: bool


@dataclass(frozen=True)
class ScoreTable:
    """(system, language code, script, condition) -> corpus chrF++ score."""

    entries: Mapping[tuple[str, str, str, str], float] = field(default_factory=dict)

    def systems(self) -> frozenset[str]:
        return frozenset(k[0] for k in self.entries)

    def conditions(self) -> frozenset[str]:
        return frozenset(k[3] for k in self.entries)

    def languages(self) -> list[tuple[str, str]]:
        """Distinct (code, script) pairs in first-seen order."""
        seen: dict[tuple[str, str], None] = {}
        for _, code, script, _ in self.entries:
            seen.setdefault((code, script))
        return list(seen)

    def get(self, system: str, code: str, script: str, condition: str) -> float | None:
        return self.entries.get((system, code, script, condition))


def _require_str(obj: dict, key: str, where: str, path, line) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise ParseError(f"{where}: field {key!r} must be a string", path, line)
    return value


def parse_corpus(path: str | Path, source_lang: str = "", target_lang: str = "") -> Corpus:
    """Parse a line-delimited corpus file, preserving line order."""
    with open(path, encoding="utf-8") as fh:
        return parse_corpus_lines(fh, str(path), source_lang, target_lang)


def parse_corpus_lines(
    lines: Iterable[str], path: str | None = None, source_lang: str = "", target_lang: str = ""
) -> Corpus:
    records: list[SentenceRecord] = []
    seen_ids: dict[str, int] = {}
    system_set: frozenset[str] | None = None
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path, lineno) from exc
        if not isinstance(obj, dict):
            raise ParseError("record must be a JSON object", path, lineno)
        if set(obj) != _CORPUS_KEYS:
            missing = _CORPUS_KEYS - set(obj)
            extra = set(obj) - _CORPUS_KEYS
            detail = []
            if missing:
                detail.append(f"missing {sorted(missing)}")
            if extra:
                detail.append(f"unknown {sorted(extra)}")
            raise ParseError("record fields: " + ", ".join(detail), path, lineno)
        rec_id = _require_str(obj, "id", "record", path, lineno)
        if rec_id in seen_ids:
            raise ParseError(
                f"duplicate id {rec_id!r} (first seen on line {seen_ids[rec_id]})", path, lineno
            )
        seen_ids[rec_id] = lineno
        hyp = obj["hyp"]
        if not isinstance(hyp, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in hyp.items()
        ):
            raise ParseError("field 'hyp' must map system name to text", path, lineno)
        systems = frozenset(hyp)
        if system_set is None:
            system_set = systems
        elif systems != system_set:
            raise ParseError(
                f"inconsistent hypothesis systems {sorted(systems)} != {sorted(system_set)}",
                path,
                lineno,
            )
        try:
            record = SentenceRecord(
                id=rec_id,
                source=_require_str(obj, "src", "record", path, lineno),
                reference=_require_str(obj, "ref", "record", path, lineno),
                hypotheses=dict(hyp),
            )
        except ValidationError as exc:
            raise ParseError(str(exc), path, lineno) from exc
        records.append(record)
    return Corpus(records=tuple(records), source_lang=source_lang, target_lang=target_lang)


def serialize_corpus(corpus: Corpus) -> str:
    """Inverse of :func:`parse_corpus_lines`; re-parsing yields an equal Corpus."""
    lines = []
    for rec in corpus:
        lines.append(
            json.dumps(
                {"id": rec.id, "src": rec.source, "ref": rec.reference, "hyp": dict(rec.hypotheses)},
                ensure_ascii=False,
            )
        )
    return "".join(line + "\n" for line in lines)


def parse_alignment_line(text: str) -> Alignment:
    """Parse Pharaoh-style ``i-j`` pairs; duplicate links collapse silently."""
    links = set()
    for token in text.split():
        left, sep, right = token.partition("-")
        if not sep or not left.isdigit() or not right.isdigit():
            raise ParseError(f"malformed alignment token {token!r}")
        links.add((int(left), int(right)))
    return Alignment(links=frozenset(links))


def load_alignments(path: str | Path) -> dict[str, Alignment]:
    """Load an ``id<TAB>links`` alignment file into an ordered id -> Alignment map."""
    out: dict[str, Alignment] = {}
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
            try:
                out[rec_id] = parse_alignment_line(rest)
            except ParseError as exc:
                raise ParseError(str(exc), str(path), lineno) from exc
    return out


def _parse_norms(values, what: str, where: str, path, lineno) -> tuple[float, ...]:
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
        raise ParseError(f"{where}: {what} must be a list of numbers", path, lineno)
    norms = tuple(float(v) for v in values)
    for v in norms:
        if not v >= 0.0:
            raise ParseError(f"{where}: negative norm {v} in {what}", path, lineno)
    return norms


def _parse_bytes(values, what: str, where: str, path, lineno) -> tuple[int, ...]:
    if not isinstance(values, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in values
    ):
        raise ParseError(f"{where}: {what} must be a list of integers", path, lineno)
    for v in values:
        if not 0 <= v <= 255:
            raise ParseError(f"{where}: byte value {v} out of range in {what}", path, lineno)
    return tuple(values)


def load_attributions(path: str | Path) -> list[AttributionRecord]:
    """Load attribution records, enforcing the per-record shape invariants."""
    records: list[AttributionRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", str(path), lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("record must be a JSON object", str(path), lineno)
            if set(obj) != _ATTR_KEYS:
                raise ParseError(
                    f"unknown or missing fields {sorted(set(obj) ^ _ATTR_KEYS)}", str(path), lineno
                )
            rec_id = _require_str(obj, "id", "record", str(path), lineno)
            where = f"record {rec_id!r}"
            source_bytes = _parse_bytes(obj["source_bytes"], "source_bytes", where, str(path), lineno)
            target_bytes = _parse_bytes(obj["target_bytes"], "target_bytes", where, str(path), lineno)
            raw_steps = obj["steps"]
            if not isinstance(raw_steps, list):
                raise ParseError(f"{where}: steps must be a list", str(path), lineno)
            if len(raw_steps) != len(target_bytes):
                raise ParseError(
                    f"{where}: {len(raw_steps)} steps for {len(target_bytes)} target bytes",
                    str(path),
                    lineno,
                )
            steps: list[AttributionStep] = []
            for t, raw in enumerate(raw_steps):
                if not isinstance(raw, dict) or set(raw) != _STEP_KEYS:
                    raise ParseError(f"{where}: step {t} must have fields 'src' and 'tgt'", str(path), lineno)
                src = _parse_norms(raw["src"], f"step {t} src", where, str(path), lineno)
                tgt = _parse_norms(raw["tgt"], f"step {t} tgt", where, str(path), lineno)
                if len(src) != len(source_bytes):
                    raise ParseError(
                        f"{where}: step {t} has {len(src)} source norms for {len(source_bytes)} source bytes",
                        str(path),
                        lineno,
                    )
                if len(tgt) != t:
                    raise ParseError(
                        f"{where}: step {t} has {len(tgt)} target norms, expected {t}",
                        str(path),
                        lineno,
                    )
                if not any(v > 0.0 for v in src + tgt):
                    raise ParseError(f"{where}: step {t} has all-zero norms", str(path), lineno)
                steps.append(AttributionStep(src_norms=src, tgt_norms=tgt))
            records.append(
                AttributionRecord(
                    id=rec_id,
                    source_bytes=source_bytes,
                    target_bytes=target_bytes,
                    steps=tuple(steps),
                )
            )
    return records


def load_language_metadata(path: str | Path) -> list[LanguageInfo]:
    """Load the language metadata TSV; (code, script) pairs must be unique."""
    out: list[LanguageInfo] = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header != ["code", "script", "subgrouping", "in_pretraining"]:
            raise ParseError(f"unexpected header {header}", str(path), 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 columns, got {len(row)}", str(path), lineno)
            code, script, subgrouping, pretrain = (c.strip() for c in row)
            if pretrain not in ("0", "1"):
                raise ParseError(f"in_pretraining must be 0 or 1, got {pretrain!r}", str(path), lineno)
            key = (code, script)
            if key in seen:
                raise ParseError(f"duplicate language ({code}, {script})", str(path), lineno)
            seen.add(key)
            out.append(
                LanguageInfo(
                    code=code, script=script, subgrouping=subgrouping, in_pretraining=pretrain == "1"
                )
            )
    return out


def load_score_table(path: str | Path) -> ScoreTable:
    """Load the score CSV; keys must be unique and scores must be in [0, 100]."""
    entries: dict[tuple[str, str, str, str], float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["system", "code", "script", "condition", "chrfpp"]:
            raise ParseError(f"unexpected header {header}", str(path), 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 columns, got {len(row)}", str(path), lineno)
            system, code, script, condition, raw_score = (c.strip() for c in row)
            try:
                score = float(raw_score)
            except ValueError as exc:
                raise ParseError(f"invalid score {raw_score!r}", str(path), lineno) from exc
            if not 0.0 <= score <= 100.0:
                raise ParseError(f"score {score} outside [0, 100]", str(path), lineno)
            key = (system, code, script, condition)
            if key in entries:
                raise ParseError(f"duplicate entry {key}", str(path), lineno)
            entries[key] = score
    return ScoreTable(entries=entries)
