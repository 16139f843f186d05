"""Resourcedness classification, winner prediction, and script-grouped
zero-shot degradation analysis over score tables.

A language is High Resource when it occurs in the pretraining corpus,
Low Resource - Related when some pretraining language shares both its
subgrouping and its script, and Low Resource - Unrelated otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from statistics import median
from typing import Iterable, Mapping, Sequence

from .corpus_io import LanguageInfo, ScoreTable
from .errors import ValidationError

PRESENCE_ONLY = "presence"
SUBGROUP_AND_SCRIPT = "full"


class ResourceCategory(enum.Enum):
    HIGH_RESOURCE = "high_resource"
    LOW_RELATED = "low_related"
    LOW_UNRELATED = "low_unrelated"


@dataclass(frozen=True)
class PredictorRow:
    code: str
    script: str
    category: ResourceCategory
    predicted: str
    actual: str  # winning system name, or "tie"
    correct: bool
    score_1: float
    score_2: float


@dataclass(frozen=True)
class PredictorReport:
    rule: str
    systems: tuple[str, str]
    condition: str
    rows: tuple[PredictorRow, ...]
    skipped: tuple[tuple[str, str, str], ...]  # (code, script, reason)

    @property
    def accuracy(self) -> float:
        if not self.rows:
            raise ValidationError("no languages evaluated")
        return sum(r.correct for r in self.rows) / len(self.rows)


@dataclass(frozen=True)
class GroupDegradation:
    label: str
    n: int
    mean_low: float | None
    mean_high: float | None
    mean_drop: float | None
    median_drop: float | None
    mean_ratio: float | None


@dataclass(frozen=True)
class DegradationReport:
    system: str
    floor: float
    groups: tuple[GroupDegradation, ...]
    excluded: tuple[tuple[str, str, float], ...]  # (code, script, low score)


def classify_resourcedness(lang: LanguageInfo, table: Sequence[LanguageInfo]) -> ResourceCategory:
    """Classify one language against a metadata table."""
    if not any(entry.in_pretraining for entry in table):
        raise ValidationError("metadata table contains no pretraining language")
    if not any(entry.code == lang.code and entry.script == lang.script for entry in table):
        raise ValidationError(f"language ({lang.code}, {lang.script}) not in metadata table")
    if lang.in_pretraining:
        return ResourceCategory.HIGH_RESOURCE
    for entry in table:
        if (
            entry.in_pretraining
            and entry.subgrouping == lang.subgrouping
            and entry.script == lang.script
        ):
            return ResourceCategory.LOW_RELATED
    return ResourceCategory.LOW_UNRELATED


def _unique_condition(scores: ScoreTable, condition: str | None) -> str:
    conditions = scores.conditions()
    if condition is not None:
        if condition not in conditions:
            raise ValidationError(f"condition {condition!r} not present in score table")
        return condition
    if len(conditions) != 1:
        raise ValidationError(
            f"score table has conditions {sorted(conditions)}; specify one explicitly"
        )
    return next(iter(conditions))


def evaluate_predictor(
    scores: ScoreTable,
    table: Sequence[LanguageInfo],
    rule: str,
    systems: tuple[str, str],
    condition: str | None = None,
) -> PredictorReport:
    """Predict the winning system per language and compare with the scores.

    The first system is predicted to win for High Resource or Low
    Resource - Related languages (full rule), or for pretraining languages
    (presence rule); otherwise the second.  Exact score ties count as
    incorrect.  Languages with missing scores or metadata are skipped and
    listed so the denominator stays auditable.
    """
    if rule not in (PRESENCE_ONLY, SUBGROUP_AND_SCRIPT):
        raise ValidationError(f"unknown rule {rule!r}")
    if systems[0] == systems[1]:
        raise ValidationError("systems must differ")
    chosen = _unique_condition(scores, condition)
    by_key = {(entry.code, entry.script): entry for entry in table}
    rows: list[PredictorRow] = []
    skipped: list[tuple[str, str, str]] = []
    for code, script in scores.languages():
        entry = by_key.get((code, script))
        if entry is None:
            skipped.append((code, script, "no metadata"))
            continue
        score_1 = scores.get(systems[0], code, script, chosen)
        score_2 = scores.get(systems[1], code, script, chosen)
        if score_1 is None or score_2 is None:
            missing = systems[0] if score_1 is None else systems[1]
            skipped.append((code, script, f"no {missing} score"))
            continue
        category = classify_resourcedness(entry, table)
        if rule == PRESENCE_ONLY:
            first_wins = entry.in_pretraining
        else:
            first_wins = category in (ResourceCategory.HIGH_RESOURCE, ResourceCategory.LOW_RELATED)
        predicted = systems[0] if first_wins else systems[1]
        if score_1 == score_2:
            actual = "tie"
        else:
            actual = systems[0] if score_1 > score_2 else systems[1]
        rows.append(
            PredictorRow(
                code=code,
                script=script,
                category=category,
                predicted=predicted,
                actual=actual,
                correct=predicted == actual,
                score_1=score_1,
                score_2=score_2,
            )
        )
    return PredictorReport(
        rule=rule,
        systems=systems,
        condition=chosen,
        rows=tuple(rows),
        skipped=tuple(skipped),
    )


def build_script_groups(preset: str, scripts: Iterable[str]) -> dict[str, str]:
    """Expand a grouping preset (e.g. ``latin:nonlatin`` or
    ``latin:cyrillic:multibyte``) into a script -> group-label map."""
    labels = [p.strip().lower() for p in preset.split(":") if p.strip()]
    known = {"latin", "cyrillic", "nonlatin", "multibyte"}
    unknown = [p for p in labels if p not in known]
    if unknown or not labels:
        raise ValidationError(f"unknown group labels {unknown} in preset {preset!r}")
    mapping = {}
    for script in scripts:
        if "latin" in labels and script == "Latin":
            mapping[script] = "latin"
        elif "cyrillic" in labels and script == "Cyrillic":
            mapping[script] = "cyrillic"
        elif "nonlatin" in labels:
            mapping[script] = "nonlatin"
        elif "multibyte" in labels:
            mapping[script] = "multibyte"
        else:
            raise ValidationError(f"preset {preset!r} leaves script {script!r} unmapped")
    return mapping


def degradation_by_script(
    scores_low: ScoreTable,
    scores_high: ScoreTable,
    groups: Mapping[str, str],
    floor: float = 25.0,
) -> DegradationReport:
    """Per script group, degradation from the low-data to the high-data
    fine-tuning condition.

    Languages scoring at or below the floor in the low condition are
    excluded (boundary inclusive); drop is low - high, ratio is high / low.
    Scripts absent from the group map form their own group.
    """
    if floor < 0:
        raise ValidationError(f"floor must be >= 0, got {floor}")
    low_systems = scores_low.systems()
    high_systems = scores_high.systems()
    if len(low_systems) != 1 or low_systems != high_systems:
        raise ValidationError(
            f"expected one shared system, got {sorted(low_systems)} and {sorted(high_systems)}"
        )
    system = next(iter(low_systems))
    cond_low = _unique_condition(scores_low, None)
    cond_high = _unique_condition(scores_high, None)
    low_langs = scores_low.languages()
    if set(low_langs) != set(scores_high.languages()):
        raise ValidationError("low and high score tables cover different language sets")
    excluded: list[tuple[str, str, float]] = []
    per_group: dict[str, list[tuple[float, float]]] = {}
    for label in groups.values():
        per_group.setdefault(label, [])
    for code, script in sorted(low_langs):
        low = scores_low.get(system, code, script, cond_low)
        high = scores_high.get(system, code, script, cond_high)
        assert low is not None and high is not None
        if low <= floor:
            excluded.append((code, script, low))
            continue
        per_group.setdefault(groups.get(script, script), []).append((low, high))
    reported = []
    for label in sorted(per_group):
        values = per_group[label]
        if not values:
            reported.append(
                GroupDegradation(
                    label=label,
                    n=0,
                    mean_low=None,
                    mean_high=None,
                    mean_drop=None,
                    median_drop=None,
                    mean_ratio=None,
                )
            )
            continue
        n = len(values)
        drops = [low - high for low, high in values]
        reported.append(
            GroupDegradation(
                label=label,
                n=n,
                mean_low=sum(low for low, _ in values) / n,
                mean_high=sum(high for _, high in values) / n,
                mean_drop=sum(drops) / n,
                median_drop=median(drops),
                mean_ratio=sum(high / low for low, high in values) / n,
            )
        )
    return DegradationReport(
        system=system, floor=floor, groups=tuple(reported), excluded=tuple(excluded)
    )
