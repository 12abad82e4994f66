"""Schema validation and sniffing for the toolkit's file formats.

Formats covered: extended-SQuAD datasets, logits and predictions NDJSON,
mention NDJSON, quasi-bridging instance NDJSON, and evaluation reports.
Validators raise SchemaError naming the offending record.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import decode, mentionmap, qagen, quasigen, scoring
from .errors import InputError, SchemaError

KIND_DATASET = "dataset"
KIND_LOGITS = "logits"
KIND_PREDICTIONS = "predictions"
KIND_MENTIONS = "mentions"
KIND_QUASI = "quasi"
KIND_REPORT = "report"

ALL_KINDS = (
    KIND_DATASET,
    KIND_LOGITS,
    KIND_PREDICTIONS,
    KIND_MENTIONS,
    KIND_QUASI,
    KIND_REPORT,
)


def detect_kind(path: Path) -> str:
    """Infer a file's kind from its first record."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    with path.open(encoding="utf-8") as handle:
        head = handle.read(1 << 20).lstrip()
    if not head:
        raise SchemaError(f"{path}: empty file")
    first_line = head.split("\n", 1)[0]
    try:
        record = json.loads(first_line)
    except json.JSONDecodeError:
        try:
            record = json.loads(head)
        except json.JSONDecodeError:
            raise SchemaError(f"{path}: not JSON or NDJSON")
    if not isinstance(record, dict):
        raise SchemaError(f"{path}: unrecognized format")
    if "data" in record:
        return KIND_DATASET
    if "per_anaphor" in record:
        return KIND_REPORT
    if "context_tokens" in record:
        return KIND_LOGITS
    if "predictions" in record:
        return KIND_PREDICTIONS
    if "mention_id" in record:
        return KIND_MENTIONS
    if "s_y" in record and "s_x" in record:
        return KIND_QUASI
    raise SchemaError(f"{path}: unrecognized format")


def validate_dataset(path: Path) -> int:
    return len(qagen.load_squad_json(path))


def validate_logits(path: Path) -> int:
    records = decode.read_logits(path)
    for record in records:
        prev_end = 0
        for token in record.context_tokens:
            if not (0 <= token.char_start < token.char_end):
                raise SchemaError(
                    f"record {record.instance_id}: bad token offsets {token}"
                )
            if token.char_start < prev_end:
                raise SchemaError(
                    f"record {record.instance_id}: overlapping context tokens"
                )
            prev_end = token.char_end
    return len(records)


def validate_logits_against_dataset(path: Path, dataset_path: Path) -> int:
    """Cross-check token offsets and texts against dataset contexts."""
    validate_logits(path)
    records = decode.read_logits(path)
    instances = {inst.id: inst for inst in qagen.load_squad_json(dataset_path)}
    for record in records:
        inst = instances.get(record.instance_id)
        if inst is None:
            raise SchemaError(f"record {record.instance_id}: not in dataset")
        for token in record.context_tokens:
            if inst.context[token.char_start : token.char_end] != token.text:
                raise SchemaError(
                    f"record {record.instance_id}: token {token.text!r} does not "
                    f"match context at {token.char_start}"
                )
    return len(records)


def validate_predictions(path: Path) -> int:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"predictions file not found: {path}")
    count = 0
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                instance_id = record["instance_id"]
                predictions = record["predictions"]
            except (KeyError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad prediction record ({exc})")
            last_score = None
            for entry in predictions:
                try:
                    text, start, end, score = (
                        entry["text"],
                        entry["char_start"],
                        entry["char_end"],
                        float(entry["score"]),
                    )
                except (KeyError, TypeError, ValueError):
                    raise SchemaError(f"{path}:{lineno}: bad span entry in {instance_id}")
                if not (0 <= start < end) or len(text) != end - start:
                    raise SchemaError(
                        f"{path}:{lineno}: inconsistent span offsets in {instance_id}"
                    )
                if last_score is not None and score > last_score + 1e-12:
                    raise SchemaError(
                        f"{path}:{lineno}: predictions not sorted by score in {instance_id}"
                    )
                last_score = score
            count += 1
    return count


def validate_mentions(path: Path) -> int:
    records = mentionmap.read_mentions(path)
    for record in records:
        first, last = record.token_span
        if not (first <= record.head_index <= last):
            raise SchemaError(f"mention {record.mention_id}: head outside token span")
        if len(record.tokens) != last - first + 1:
            raise SchemaError(f"mention {record.mention_id}: token list/span length mismatch")
        if not (0 <= record.char_start < record.char_end):
            raise SchemaError(f"mention {record.mention_id}: bad char offsets")
    return len(records)


def validate_quasi(path: Path) -> int:
    instances = quasigen.read_instances(path)
    for i, inst in enumerate(instances):
        context = inst.context
        boundary = len(inst.s_y)
        if not (
            0 <= inst.antecedent_char_start < inst.antecedent_char_end <= boundary
        ):
            raise SchemaError(f"instance {i} ({inst.doc_id}): antecedent span outside s_y")
        if not (
            boundary < inst.anaphor_char_start < inst.anaphor_char_end <= len(context)
        ):
            raise SchemaError(f"instance {i} ({inst.doc_id}): anaphor span outside s_x")
        if context[inst.anaphor_char_start : inst.anaphor_char_end] != inst.anaphor_text:
            raise SchemaError(f"instance {i} ({inst.doc_id}): anaphor text/span mismatch")
        if (
            context[inst.antecedent_char_start : inst.antecedent_char_end]
            != inst.antecedent_text
        ):
            raise SchemaError(f"instance {i} ({inst.doc_id}): antecedent text/span mismatch")
    return len(instances)


def validate_report(path: Path) -> int:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"report file not found: {path}")
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
        report = scoring.EvalReport.from_json(record)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad report ({exc})")
    if report.total_anaphors != len(report.per_anaphor):
        raise SchemaError(f"{path}: total_anaphors does not match per-anaphor rows")
    if report.correct_lenient < report.correct_strict:
        raise SchemaError(f"{path}: lenient correct below strict correct")
    if report.correct_strict != sum(r.strict_correct for r in report.per_anaphor):
        raise SchemaError(f"{path}: strict count does not match rows")
    if report.correct_lenient != sum(r.lenient_correct for r in report.per_anaphor):
        raise SchemaError(f"{path}: lenient count does not match rows")
    return report.total_anaphors


_VALIDATORS = {
    KIND_DATASET: validate_dataset,
    KIND_LOGITS: validate_logits,
    KIND_PREDICTIONS: validate_predictions,
    KIND_MENTIONS: validate_mentions,
    KIND_QUASI: validate_quasi,
    KIND_REPORT: validate_report,
}


def validate_file(path: Path, kind: str = None, dataset_path: Path = None) -> tuple[str, int]:
    """Validate a file, detecting its kind when not given.

    Returns (kind, record count).  For logits files a dataset may be
    supplied for offset cross-checking.
    """
    if kind is None:
        kind = detect_kind(path)
    if kind not in _VALIDATORS:
        raise SchemaError(f"unknown file kind {kind!r}; expected one of {ALL_KINDS}")
    if kind == KIND_LOGITS and dataset_path is not None:
        return kind, validate_logits_against_dataset(path, dataset_path)
    return kind, _VALIDATORS[kind](path)
