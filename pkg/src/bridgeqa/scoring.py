"""Strict and lenient accuracy over antecedent predictions.

Strict accuracy accepts only the originally annotated antecedent strings;
lenient accuracy additionally accepts their head and truncated variants.
Both are exact string matches after whitespace normalization, computed
over the top-1 prediction for every gold anaphor.  F1 is deliberately not
reported: partial overlap with an annotation does not establish that the
prediction captures its meaning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import InputError, ReconciliationError, SchemaError
from .qagen import ORIGIN_GOLD, QAInstance

FORMAT_VERSION = 1

MODE_STRICT = "strict"
MODE_LENIENT = "lenient"


def normalize(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class PredictionEntry:
    """Top-level view of one instance's predictions file record."""

    instance_id: str
    top_text: Optional[str]  # None encodes a no-answer prediction
    selected_mention_id: Optional[str] = None
    selected_mention_coords: Optional[tuple[int, int, int]] = None


@dataclass(frozen=True)
class AnaphorResult:
    id: str
    prediction_text: Optional[str]
    matched_gold: Optional[str]
    strict_correct: bool
    lenient_correct: bool
    mention_match: Optional[bool] = None

    def to_json(self) -> dict:
        record = {
            "id": self.id,
            "prediction_text": self.prediction_text,
            "matched_gold": self.matched_gold,
            "strict_correct": self.strict_correct,
            "lenient_correct": self.lenient_correct,
        }
        if self.mention_match is not None:
            record["mention_match"] = self.mention_match
        return record


@dataclass
class EvalReport:
    total_anaphors: int
    correct_strict: int
    correct_lenient: int
    per_anaphor: list

    @property
    def accuracy_strict(self) -> float:
        return self.correct_strict / self.total_anaphors if self.total_anaphors else 0.0

    @property
    def accuracy_lenient(self) -> float:
        return self.correct_lenient / self.total_anaphors if self.total_anaphors else 0.0

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "total_anaphors": self.total_anaphors,
            "correct_strict": self.correct_strict,
            "correct_lenient": self.correct_lenient,
            "accuracy_strict": self.accuracy_strict,
            "accuracy_lenient": self.accuracy_lenient,
            "per_anaphor": [r.to_json() for r in self.per_anaphor],
        }

    @classmethod
    def from_json(cls, record: dict) -> "EvalReport":
        report = cls(
            total_anaphors=record["total_anaphors"],
            correct_strict=record["correct_strict"],
            correct_lenient=record["correct_lenient"],
            per_anaphor=[
                AnaphorResult(
                    id=r["id"],
                    prediction_text=r.get("prediction_text"),
                    matched_gold=r.get("matched_gold"),
                    strict_correct=r["strict_correct"],
                    lenient_correct=r["lenient_correct"],
                    mention_match=r.get("mention_match"),
                )
                for r in record["per_anaphor"]
            ],
        )
        return report


def read_prediction_entries(path: Path) -> list[PredictionEntry]:
    """Read a predictions file down to the fields scoring needs.

    When map-mentions has augmented a record with a selected mention, the
    mention's text replaces the raw top-1 span as the scored prediction.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"predictions file not found: {path}")
    entries = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                predictions = record["predictions"]
            except (KeyError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad prediction record ({exc})")
            selected = record.get("selected_mention")
            if selected is not None:
                top_text = selected["text"]
                mention_id = selected.get("mention_id")
                coords = (
                    selected["sentence_index"],
                    selected["token_span"][0],
                    selected["token_span"][1],
                ) if "sentence_index" in selected else None
            elif "selected_mention" in record:
                # mapped file where nothing survived mapping: no answer
                top_text, mention_id, coords = None, None, None
            else:
                top_text = predictions[0]["text"] if predictions else None
                mention_id, coords = None, None
            entries.append(
                PredictionEntry(
                    instance_id=record["instance_id"],
                    top_text=top_text,
                    selected_mention_id=mention_id,
                    selected_mention_coords=coords,
                )
            )
    return entries


def score_instance(
    instance: QAInstance, entry: Optional[PredictionEntry]
) -> AnaphorResult:
    prediction_text = entry.top_text if entry is not None else None
    if instance.is_no_answer:
        correct = prediction_text is None
        return AnaphorResult(
            id=instance.id,
            prediction_text=prediction_text,
            matched_gold=None,
            strict_correct=correct,
            lenient_correct=correct,
            mention_match=_mention_match(instance, entry),
        )
    if prediction_text is None:
        return AnaphorResult(
            id=instance.id,
            prediction_text=None,
            matched_gold=None,
            strict_correct=False,
            lenient_correct=False,
            mention_match=_mention_match(instance, entry),
        )
    predicted = normalize(prediction_text)
    strict_set = {normalize(a.text) for a in instance.answers if a.origin == ORIGIN_GOLD}
    lenient_set = {normalize(a.text) for a in instance.answers}
    strict_correct = predicted in strict_set
    lenient_correct = predicted in lenient_set
    matched = predicted if lenient_correct else None
    return AnaphorResult(
        id=instance.id,
        prediction_text=prediction_text,
        matched_gold=matched,
        strict_correct=strict_correct,
        lenient_correct=lenient_correct,
        mention_match=_mention_match(instance, entry),
    )


def _mention_match(instance: QAInstance, entry: Optional[PredictionEntry]) -> Optional[bool]:
    if entry is None or entry.selected_mention_coords is None:
        return None
    if not instance.gold_antecedents:
        return False
    return entry.selected_mention_coords in set(instance.gold_antecedents)


def score(
    instances: Sequence[QAInstance], entries: Sequence[PredictionEntry]
) -> EvalReport:
    """Score top-1 predictions against gold instances.

    Gold anaphors without a prediction count as incorrect; predictions
    referencing unknown anaphor ids are an error.
    """
    by_id = {}
    for entry in entries:
        if entry.instance_id in by_id:
            raise SchemaError(f"duplicate prediction for instance {entry.instance_id}")
        by_id[entry.instance_id] = entry
    known = {inst.id for inst in instances}
    unknown = sorted(set(by_id) - known)
    if unknown:
        raise ReconciliationError(f"predictions reference unknown anaphor ids: {unknown[:10]}")
    results = [score_instance(inst, by_id.get(inst.id)) for inst in instances]
    return EvalReport(
        total_anaphors=len(results),
        correct_strict=sum(r.strict_correct for r in results),
        correct_lenient=sum(r.lenient_correct for r in results),
        per_anaphor=results,
    )


def compare_reports(report_a: EvalReport, report_b: EvalReport) -> dict:
    """Per-anaphor correctness flips and net accuracy deltas."""
    ids_a = {r.id for r in report_a.per_anaphor}
    ids_b = {r.id for r in report_b.per_anaphor}
    if ids_a != ids_b:
        raise ReconciliationError(
            f"reports cover different anaphor sets: only-a={sorted(ids_a - ids_b)[:5]}, "
            f"only-b={sorted(ids_b - ids_a)[:5]}"
        )
    by_id_b = {r.id: r for r in report_b.per_anaphor}
    flips = []
    for ra in report_a.per_anaphor:
        rb = by_id_b[ra.id]
        for mode, a_ok, b_ok in (
            (MODE_STRICT, ra.strict_correct, rb.strict_correct),
            (MODE_LENIENT, ra.lenient_correct, rb.lenient_correct),
        ):
            if a_ok != b_ok:
                flips.append(
                    {
                        "id": ra.id,
                        "mode": mode,
                        "direction": "fixed" if b_ok else "broken",
                    }
                )
    return {
        "format_version": FORMAT_VERSION,
        "anaphors": report_a.total_anaphors,
        "delta_strict": report_b.accuracy_strict - report_a.accuracy_strict,
        "delta_lenient": report_b.accuracy_lenient - report_a.accuracy_lenient,
        "flips": flips,
    }


def write_report(report: EvalReport, path: Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_json(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def format_summary(report: EvalReport) -> str:
    """Plain-text summary table."""
    lines = [
        f"{'anaphors':<18}{report.total_anaphors}",
        f"{'strict correct':<18}{report.correct_strict}",
        f"{'lenient correct':<18}{report.correct_lenient}",
        f"{'strict accuracy':<18}{report.accuracy_strict:.4f}",
        f"{'lenient accuracy':<18}{report.accuracy_lenient:.4f}",
    ]
    return "\n".join(lines)
