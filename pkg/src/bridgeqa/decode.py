"""Constrained span decoding over externally produced start/end scores.

Candidate spans must end before the anaphor, contain at most a fixed
number of tokens, and not consist entirely of function words; the
survivors are ranked by start score + end score and truncated to the
top k.  Scores come from any producer that emits the newline-delimited
logits schema, including the bundled random generator used for testing.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import DecodeError, InputError, ReconciliationError, SchemaError
from .qagen import QAInstance, load_squad_json
from .treebank import ptb_tokenize

FORMAT_VERSION = 1

DEFAULT_TOP_K = 20
DEFAULT_MAX_SPAN_TOKENS = 5
DEFAULT_PRUNE_LIST = ("a", "an", "the", "this", "that")

NO_ANSWER_IF_EMPTY = "empty-only"
NO_ANSWER_BY_SCORE = "score-threshold"


@dataclass(frozen=True)
class ContextToken:
    text: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class LogitsRecord:
    instance_id: str
    context_tokens: tuple[ContextToken, ...]
    start_scores: tuple[float, ...]
    end_scores: tuple[float, ...]
    no_answer_score: Optional[float] = None

    def __post_init__(self):
        if len(self.start_scores) != len(self.context_tokens) or len(
            self.end_scores
        ) != len(self.context_tokens):
            raise SchemaError(
                f"record {self.instance_id}: score arrays must have one entry per context token"
            )

    def to_json(self) -> dict:
        record = {
            "format_version": FORMAT_VERSION,
            "instance_id": self.instance_id,
            "context_tokens": [
                {"text": t.text, "char_start": t.char_start, "char_end": t.char_end}
                for t in self.context_tokens
            ],
            "start_scores": list(self.start_scores),
            "end_scores": list(self.end_scores),
        }
        if self.no_answer_score is not None:
            record["no_answer_score"] = self.no_answer_score
        return record

    @classmethod
    def from_json(cls, record: dict) -> "LogitsRecord":
        return cls(
            instance_id=record["instance_id"],
            context_tokens=tuple(
                ContextToken(t["text"], t["char_start"], t["char_end"])
                for t in record["context_tokens"]
            ),
            start_scores=tuple(float(s) for s in record["start_scores"]),
            end_scores=tuple(float(s) for s in record["end_scores"]),
            no_answer_score=record.get("no_answer_score"),
        )


@dataclass(frozen=True)
class SpanPrediction:
    text: str
    char_start: int
    char_end: int
    score: float
    token_span: Optional[tuple[int, int]] = None  # absent for deserialized spans

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "score": self.score,
        }

    @classmethod
    def from_json(cls, record: dict) -> "SpanPrediction":
        return cls(
            text=record["text"],
            char_start=record["char_start"],
            char_end=record["char_end"],
            score=float(record["score"]),
        )


def decode_spans(
    record: LogitsRecord,
    context: str,
    anaphor_char_start: int,
    k: int = DEFAULT_TOP_K,
    l: int = DEFAULT_MAX_SPAN_TOKENS,
    prune_list: Sequence[str] = DEFAULT_PRUNE_LIST,
) -> list[SpanPrediction]:
    """Ranked candidate spans under the positional and size constraints.

    Every returned span ends at or before the anaphor's start, covers at
    most ``l`` tokens, and contains at least one token outside the prune
    list.  Ranking is by score descending, ties broken by earlier start
    and then shorter span.
    """
    if k < 1 or l < 1:
        raise DecodeError(f"k and l must be >= 1, got k={k}, l={l}")
    tokens = record.context_tokens
    if not any(t.char_start <= anaphor_char_start < t.char_end for t in tokens):
        raise DecodeError(
            f"record {record.instance_id}: anaphor at {anaphor_char_start} "
            "does not fall on any context token"
        )
    pruned = frozenset(w.lower() for w in prune_list)
    last_end = -1
    for idx, tok in enumerate(tokens):
        if tok.char_end <= anaphor_char_start:
            last_end = idx
        else:
            break

    candidates = []
    for i in range(last_end + 1):
        for j in range(i, min(i + l, last_end + 1)):
            if all(tokens[t].text.lower() in pruned for t in range(i, j + 1)):
                continue
            candidates.append(
                (record.start_scores[i] + record.end_scores[j], i, j)
            )
    candidates.sort(key=lambda c: (-c[0], c[1], c[2] - c[1]))
    predictions = []
    for score, i, j in candidates[:k]:
        char_start = tokens[i].char_start
        char_end = tokens[j].char_end
        predictions.append(
            SpanPrediction(
                token_span=(i, j),
                text=context[char_start:char_end],
                char_start=char_start,
                char_end=char_end,
                score=score,
            )
        )
    return predictions


def best_answer(
    predictions: Sequence[SpanPrediction],
    no_answer_score: Optional[float] = None,
    policy: str = NO_ANSWER_IF_EMPTY,
) -> Optional[SpanPrediction]:
    """Top-ranked span, or None for a no-answer outcome.

    Under the score-threshold policy a present no_answer_score that
    exceeds the best span score also yields None.
    """
    if not predictions:
        return None
    top = predictions[0]
    if policy == NO_ANSWER_BY_SCORE and no_answer_score is not None:
        if no_answer_score > top.score:
            return None
    return top


# ---------------------------------------------------------------------------
# File-level decoding


def read_logits(path: Path) -> list[LogitsRecord]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"logits file not found: {path}")
    records = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(LogitsRecord.from_json(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad logits record ({exc})")
    return records


def read_predictions(path: Path) -> list[tuple[str, list[SpanPrediction], dict]]:
    """Predictions file as (instance id, ranked spans, raw record) rows."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"predictions file not found: {path}")
    rows = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                spans = [SpanPrediction.from_json(p) for p in record["predictions"]]
                rows.append((record["instance_id"], spans, record))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad prediction record ({exc})")
    return rows


def write_predictions(predictions: Sequence[tuple[str, list[SpanPrediction]]], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for instance_id, spans in predictions:
            record = {
                "format_version": FORMAT_VERSION,
                "instance_id": instance_id,
                "predictions": [s.to_json() for s in spans],
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def batch_decode(
    logits_path: Path,
    dataset_path: Path,
    out_path: Path,
    k: int = DEFAULT_TOP_K,
    l: int = DEFAULT_MAX_SPAN_TOKENS,
    prune_list: Sequence[str] = DEFAULT_PRUNE_LIST,
    no_answer_policy: str = NO_ANSWER_IF_EMPTY,
) -> int:
    """Decode every dataset instance against its logits record.

    Records are joined on instance id, so file order is irrelevant, but
    every instance must have exactly one record and vice versa.  Under the
    score-threshold policy, an instance whose no-answer score beats its
    best span is emitted with an empty prediction list.
    """
    instances = load_squad_json(dataset_path)
    records = {r.instance_id: r for r in read_logits(logits_path)}
    instance_ids = {inst.id for inst in instances}
    missing = sorted(instance_ids - records.keys())
    extra = sorted(records.keys() - instance_ids)
    if missing or extra:
        detail = []
        if missing:
            detail.append(f"instances without logits: {missing[:10]}")
        if extra:
            detail.append(f"logits without instances: {extra[:10]}")
        raise ReconciliationError("logits/dataset mismatch; " + "; ".join(detail))
    results = []
    for inst in instances:
        record = records[inst.id]
        spans = decode_spans(
            record, inst.context, inst.anaphor_char_start, k=k, l=l, prune_list=prune_list
        )
        if best_answer(spans, record.no_answer_score, no_answer_policy) is None:
            spans = []
        results.append((inst.id, spans))
    write_predictions(results, out_path)
    return len(results)


# ---------------------------------------------------------------------------
# Random logits, for exercising the decoder without a model


def make_random_logits(instances: Sequence[QAInstance], seed: int, with_no_answer: bool = False) -> list[LogitsRecord]:
    """Deterministic random scores over each instance's context tokens.

    Each instance is seeded independently from (seed, instance id), so
    output does not depend on instance order.
    """
    records = []
    for inst in instances:
        rng = random.Random(f"{seed}:{inst.id}")
        tokens = tuple(
            ContextToken(text, start, end) for text, start, end in ptb_tokenize(inst.context)
        )
        records.append(
            LogitsRecord(
                instance_id=inst.id,
                context_tokens=tokens,
                start_scores=tuple(round(rng.uniform(-4.0, 4.0), 6) for _ in tokens),
                end_scores=tuple(round(rng.uniform(-4.0, 4.0), 6) for _ in tokens),
                no_answer_score=round(rng.uniform(-4.0, 4.0), 6) if with_no_answer else None,
            )
        )
    return records


def write_logits(records: Sequence[LogitsRecord], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
