"""Dataset reading and example packing.

Consumes the extended-SQuAD JSON emitted by the bridgeqa pipeline (the
only coupling is the documented file schema).  Each instance is packed as
[CLS] question words [SEP] context words [SEP]; answer spans are located
by exact character-offset alignment against the word tokenization, and a
no-answer instance trains against the [CLS] position.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .tokenizer import Vocab, tokenize_with_offsets


class AdapterError(Exception):
    pass


class AlignmentError(AdapterError):
    """Answer or token offsets do not line up with the word tokenization."""


class TruncationError(AdapterError):
    """Packed sequence exceeds the length budget in a way truncation cannot fix."""


@dataclass(frozen=True)
class Instance:
    id: str
    question: str
    context: str
    answer_text: Optional[str]  # first listed answer; None for no-answer
    answer_char_start: Optional[int]
    is_no_answer: bool


def dataset_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_dataset(path: Path) -> list[Instance]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    instances = []
    for article in payload["data"]:
        for paragraph in article["paragraphs"]:
            context = paragraph["context"]
            for qa in paragraph["qas"]:
                answers = qa.get("answers", [])
                is_no_answer = qa.get("is_no_answer", not answers)
                first = answers[0] if answers else None
                instances.append(
                    Instance(
                        id=qa["id"],
                        question=qa["question"],
                        context=context,
                        answer_text=first["text"] if first else None,
                        answer_char_start=first["answer_start"] if first else None,
                        is_no_answer=is_no_answer,
                    )
                )
    return instances


@dataclass(frozen=True)
class PackedExample:
    instance_id: str
    input_ids: list
    token_type_ids: list
    context_word_positions: list  # sequence index of each context word
    context_words: list  # (text, char_start, char_end)
    start_position: Optional[int] = None  # sequence index; 0 ([CLS]) = no answer
    end_position: Optional[int] = None
    truncated_words: int = 0


def _word_span_for_answer(words, char_start: int, char_end: int, instance_id: str):
    start_word = end_word = None
    for i, (_text, s, e) in enumerate(words):
        if s == char_start:
            start_word = i
        if e == char_end:
            end_word = i
    if start_word is None or end_word is None or end_word < start_word:
        raise AlignmentError(
            f"instance {instance_id}: answer chars [{char_start},{char_end}) "
            "do not align with word boundaries"
        )
    return start_word, end_word


def pack_instance(
    instance: Instance,
    vocab: Vocab,
    max_sequence_tokens: int = 128,
    with_answer: bool = True,
) -> PackedExample:
    question_words = tokenize_with_offsets(instance.question)
    context_words = tokenize_with_offsets(instance.context)

    # [CLS] q [SEP] c [SEP]
    budget = max_sequence_tokens - len(question_words) - 3
    if budget <= 0:
        raise TruncationError(
            f"instance {instance.id}: question alone exceeds {max_sequence_tokens} tokens"
        )
    truncated = max(0, len(context_words) - budget)
    kept_words = context_words[: len(context_words) - truncated]

    answer_span = None
    if with_answer and not instance.is_no_answer:
        char_start = instance.answer_char_start
        char_end = char_start + len(instance.answer_text)
        start_word, end_word = _word_span_for_answer(
            context_words, char_start, char_end, instance.id
        )
        if end_word >= len(kept_words):
            raise TruncationError(
                f"instance {instance.id}: answer lies beyond the {max_sequence_tokens}-token budget"
            )
        answer_span = (start_word, end_word)

    ids = [vocab.cls_id]
    types = [0]
    for word, _, _ in question_words:
        ids.append(vocab.id(word))
        types.append(0)
    ids.append(vocab.sep_id)
    types.append(0)
    context_offset = len(ids)
    positions = []
    for word, _, _ in kept_words:
        positions.append(len(ids))
        ids.append(vocab.id(word))
        types.append(1)
    ids.append(vocab.sep_id)
    types.append(1)

    start_position = end_position = None
    if with_answer:
        if instance.is_no_answer:
            start_position = end_position = 0
        elif answer_span is not None:
            start_position = context_offset + answer_span[0]
            end_position = context_offset + answer_span[1]

    return PackedExample(
        instance_id=instance.id,
        input_ids=ids,
        token_type_ids=types,
        context_word_positions=positions,
        context_words=kept_words,
        start_position=start_position,
        end_position=end_position,
        truncated_words=truncated,
    )
