"""Build extractive-QA datasets from bridging annotations.

Each bridging anaphor becomes one question ("<anaphor truncated at its
head> of what?") over a context window consisting of the document's first
sentence, the two sentences preceding the anaphor's sentence, and the
anaphor's sentence.  Gold answers are the annotated antecedents that fall
inside the window, expanded with their head and the truncated variants;
an anaphor whose antecedents all fall outside the window becomes a
no-answer instance.

Datasets are serialized as SQuAD-1.1-shaped JSON extended with anaphor
position fields, per-answer origin tags, and enough sentence bookkeeping
to project document-level mentions into each context.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import InputError, SchemaError
from .quasigen import QuasiBridgingInstance
from .treebank import Document, Mention, Sentence, mention_from_span, mention_variants, ptb_tokenize

FORMAT_VERSION = 1
DATASET_VERSION = "bridgeqa-qa-1"

ORIGIN_GOLD = "gold"
ORIGIN_VARIATION = "variation"


@dataclass(frozen=True)
class BridgingAnnotation:
    doc_id: str
    anaphor: Mention
    antecedents: tuple[Mention, ...]


@dataclass(frozen=True)
class Answer:
    text: str
    char_start: int
    origin: str  # ORIGIN_GOLD for annotated antecedents, ORIGIN_VARIATION otherwise


@dataclass(frozen=True)
class QAInstance:
    id: str
    doc_id: str
    question: str
    context: str
    anaphor_char_start: int
    anaphor_char_end: int
    anaphor_head: str
    answers: tuple[Answer, ...]
    is_no_answer: bool
    anaphor_sentence_index: Optional[int] = None
    anaphor_token_span: Optional[tuple[int, int]] = None
    context_sentences: tuple[tuple[int, int], ...] = ()  # (sentence index, char offset)
    gold_antecedents: tuple[tuple[int, int, int], ...] = ()  # (sentence, first, last)


@dataclass(frozen=True)
class ContextWindow:
    indices: tuple[int, ...]
    text: str
    offsets: dict  # sentence index -> char offset of its start in text

    def __post_init__(self):
        object.__setattr__(self, "offsets", dict(self.offsets))


# ---------------------------------------------------------------------------
# Question, context, answers


def make_question(anaphor: Mention, sentence: Sentence) -> str:
    """Rephrase the anaphor as a question by truncating it at its head."""
    truncated = sentence.span_text((anaphor.token_span[0], anaphor.head_index))
    return truncated + " of what?"


def build_context(
    doc: Document,
    anaphor_sentence: int,
    previous: int = 2,
    include_first: bool = True,
) -> ContextWindow:
    """Context window around the anaphor's sentence.

    Includes the anaphor's sentence, up to ``previous`` sentences before it,
    and (by default) the document's first sentence; overlaps deduplicate.
    """
    wanted = set(range(max(0, anaphor_sentence - previous), anaphor_sentence + 1))
    if include_first:
        wanted.add(0)
    indices = tuple(sorted(wanted))
    offsets = {}
    parts = []
    pos = 0
    for idx in indices:
        if parts:
            pos += 1  # joining space
        offsets[idx] = pos
        text = doc.sentences[idx].text
        parts.append(text)
        pos += len(text)
    return ContextWindow(indices=indices, text=" ".join(parts), offsets=offsets)


def build_answers(
    doc: Document, annotation: BridgingAnnotation, window: ContextWindow
) -> tuple[tuple[Answer, ...], bool]:
    """Gold answers plus variations for every antecedent inside the window."""
    answers: list[Answer] = []
    seen: set[tuple[str, int]] = set()
    for antecedent in annotation.antecedents:
        if antecedent.sentence_index not in window.offsets:
            continue
        sentence = doc.sentences[antecedent.sentence_index]
        base = window.offsets[antecedent.sentence_index]
        for rank, (text, span) in enumerate(mention_variants(sentence, antecedent)):
            char_start = base + sentence.tokens[span[0]].char_start
            key = (text, char_start)
            if key in seen:
                continue
            seen.add(key)
            origin = ORIGIN_GOLD if rank == 0 else ORIGIN_VARIATION
            answers.append(Answer(text=text, char_start=char_start, origin=origin))
    return tuple(answers), not answers


def build_instance(
    doc: Document,
    annotation: BridgingAnnotation,
    previous: int = 2,
    include_first: bool = True,
) -> QAInstance:
    anaphor = annotation.anaphor
    sentence = doc.sentences[anaphor.sentence_index]
    window = build_context(doc, anaphor.sentence_index, previous, include_first)
    answers, no_answer = build_answers(doc, annotation, window)
    base = window.offsets[anaphor.sentence_index]
    first, last = anaphor.token_span
    return QAInstance(
        id=f"{doc.id}:{anaphor.sentence_index}:{first}-{last}",
        doc_id=doc.id,
        question=make_question(anaphor, sentence),
        context=window.text,
        anaphor_char_start=base + sentence.tokens[first].char_start,
        anaphor_char_end=base + sentence.tokens[last].char_end,
        anaphor_head=sentence.tokens[anaphor.head_index].text,
        answers=answers,
        is_no_answer=no_answer,
        anaphor_sentence_index=anaphor.sentence_index,
        anaphor_token_span=anaphor.token_span,
        context_sentences=tuple((idx, window.offsets[idx]) for idx in window.indices),
        gold_antecedents=tuple(
            (m.sentence_index, m.token_span[0], m.token_span[1])
            for m in annotation.antecedents
        ),
    )


def quasi_to_instance(inst: QuasiBridgingInstance, sequence: int) -> QAInstance:
    """QA instance for a synthesized pair.

    The context is exactly the two synthesized sentences; the anaphor side
    carries no premodifier material beyond its determiner, so the question
    is the anaphor itself, and the antecedent contributes only itself and
    its final (head) token as answers.
    """
    context = inst.context
    antecedent_tokens = ptb_tokenize(inst.antecedent_text)
    head_text, head_off, _ = antecedent_tokens[-1]
    answers = [Answer(text=inst.antecedent_text, char_start=inst.antecedent_char_start, origin=ORIGIN_GOLD)]
    head_answer = Answer(
        text=head_text,
        char_start=inst.antecedent_char_start + head_off,
        origin=ORIGIN_VARIATION,
    )
    if (head_answer.text, head_answer.char_start) != (answers[0].text, answers[0].char_start):
        answers.append(head_answer)
    anaphor_tokens = ptb_tokenize(inst.anaphor_text)
    return QAInstance(
        id=f"{inst.doc_id}:q{sequence}",
        doc_id=inst.doc_id,
        question=inst.anaphor_text + " of what?",
        context=context,
        anaphor_char_start=inst.anaphor_char_start,
        anaphor_char_end=inst.anaphor_char_end,
        anaphor_head=anaphor_tokens[-1][0],
        answers=tuple(answers),
        is_no_answer=False,
    )


def quasi_file_to_instances(instances: Iterable[QuasiBridgingInstance]) -> list[QAInstance]:
    out = []
    counters: dict[str, int] = {}
    for inst in instances:
        seq = counters.get(inst.doc_id, 0)
        counters[inst.doc_id] = seq + 1
        out.append(quasi_to_instance(inst, seq))
    return out


# ---------------------------------------------------------------------------
# Annotation files

ANNOTATION_COLUMNS = "doc_id, anaphor sentence, anaphor first token, anaphor last token, antecedents (sentence:first:last, ';'-separated)"


def _parse_span_triple(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise SchemaError(f"bad antecedent span {text!r}, expected sentence:first:last")
    return int(parts[0]), int(parts[1]), int(parts[2])


def read_annotations(path: Path, documents: dict) -> list[BridgingAnnotation]:
    """Read tab-separated bridging annotations against parsed documents.

    Columns: doc_id, anaphor sentence index, anaphor token span (first,
    last), then a ';'-separated list of antecedent sentence:first:last
    triples (empty for anaphors annotated without in-document antecedents).
    Lines starting with '#' are comments.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"annotations file not found: {path}")
    annotations = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (4, 5):
            raise SchemaError(f"{path}:{lineno}: expected 4 or 5 columns, got {len(fields)}")
        doc_id, sent, first, last = fields[:4]
        if doc_id not in documents:
            raise SchemaError(f"{path}:{lineno}: unknown document {doc_id!r}")
        doc = documents[doc_id]
        try:
            sent_i, first_i, last_i = int(sent), int(first), int(last)
            sentence = doc.sentences[sent_i]
            if not (0 <= first_i <= last_i < len(sentence.tokens)):
                raise IndexError
        except (ValueError, IndexError):
            raise SchemaError(f"{path}:{lineno}: bad anaphor span {sent}:{first}:{last}")
        anaphor = mention_from_span(sentence, (first_i, last_i))
        antecedents = []
        if len(fields) == 5 and fields[4].strip():
            for triple in fields[4].split(";"):
                a_sent, a_first, a_last = _parse_span_triple(triple.strip())
                try:
                    a_sentence = doc.sentences[a_sent]
                    if not (0 <= a_first <= a_last < len(a_sentence.tokens)):
                        raise IndexError
                except IndexError:
                    raise SchemaError(f"{path}:{lineno}: bad antecedent span {triple!r}")
                if (a_sent, a_first) >= (sent_i, first_i):
                    raise SchemaError(
                        f"{path}:{lineno}: antecedent {triple!r} does not precede the anaphor"
                    )
                antecedents.append(mention_from_span(a_sentence, (a_first, a_last)))
        antecedents.sort(key=lambda m: (m.sentence_index, m.token_span))
        annotations.append(
            BridgingAnnotation(doc_id=doc_id, anaphor=anaphor, antecedents=tuple(antecedents))
        )
    return annotations


# ---------------------------------------------------------------------------
# Dataset serialization (extended SQuAD 1.1 shape)


@dataclass
class DatasetStats:
    anaphors: int = 0
    qa_pairs: int = 0
    answer_variants: int = 0
    no_answer: int = 0

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "anaphors": self.anaphors,
            "qa_pairs": self.qa_pairs,
            "answer_variants": self.answer_variants,
            "no_answer": self.no_answer,
        }


def dataset_stats(instances: Sequence[QAInstance]) -> DatasetStats:
    stats = DatasetStats(anaphors=len(instances))
    for inst in instances:
        gold = sum(1 for a in inst.answers if a.origin == ORIGIN_GOLD)
        stats.qa_pairs += max(1, gold)
        stats.answer_variants += len(inst.answers)
        if inst.is_no_answer:
            stats.no_answer += 1
    return stats


def _qa_to_json(inst: QAInstance) -> dict:
    record = {
        "id": inst.id,
        "question": inst.question,
        "answers": [
            {"text": a.text, "answer_start": a.char_start, "origin": a.origin}
            for a in inst.answers
        ],
        "is_no_answer": inst.is_no_answer,
        "anaphor_char_start": inst.anaphor_char_start,
        "anaphor_char_end": inst.anaphor_char_end,
        "anaphor_head": inst.anaphor_head,
    }
    if inst.anaphor_sentence_index is not None:
        record["anaphor_sentence_index"] = inst.anaphor_sentence_index
        record["anaphor_token_span"] = list(inst.anaphor_token_span)
    if inst.context_sentences:
        record["context_sentences"] = [
            {"index": idx, "char_start": off} for idx, off in inst.context_sentences
        ]
    if inst.gold_antecedents:
        record["gold_antecedents"] = [
            {"sentence_index": s, "token_span": [a, b]} for s, a, b in inst.gold_antecedents
        ]
    return record


def emit_squad_json(instances: Sequence[QAInstance], path: Path) -> DatasetStats:
    """Write instances as extended SQuAD JSON, one paragraph per instance."""
    data = []
    by_doc: dict[str, list[QAInstance]] = {}
    order: list[str] = []
    for inst in instances:
        if inst.doc_id not in by_doc:
            by_doc[inst.doc_id] = []
            order.append(inst.doc_id)
        by_doc[inst.doc_id].append(inst)
    for doc_id in order:
        paragraphs = [
            {"context": inst.context, "qas": [_qa_to_json(inst)]} for inst in by_doc[doc_id]
        ]
        data.append({"title": doc_id, "paragraphs": paragraphs})
    payload = {
        "version": DATASET_VERSION,
        "format_version": FORMAT_VERSION,
        "data": data,
    }
    Path(path).write_text(
        json.dumps(payload, indent=1, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return dataset_stats(instances)


def _qa_from_json(record: dict, context: str, doc_id: str) -> QAInstance:
    qa_id = record.get("id", "<missing id>")
    answers = []
    for entry in record.get("answers", []):
        text, start = entry["text"], entry["answer_start"]
        if context[start : start + len(text)] != text:
            raise SchemaError(f"instance {qa_id}: answer {text!r} does not match context at {start}")
        answers.append(Answer(text=text, char_start=start, origin=entry.get("origin", ORIGIN_GOLD)))
    is_no_answer = record.get("is_no_answer", not answers)
    if is_no_answer != (not answers):
        raise SchemaError(f"instance {qa_id}: is_no_answer inconsistent with answer list")
    a_start, a_end = record["anaphor_char_start"], record["anaphor_char_end"]
    if not (0 <= a_start < a_end <= len(context)):
        raise SchemaError(f"instance {qa_id}: anaphor span out of range")
    token_span = record.get("anaphor_token_span")
    return QAInstance(
        id=record["id"],
        doc_id=doc_id,
        question=record["question"],
        context=context,
        anaphor_char_start=a_start,
        anaphor_char_end=a_end,
        anaphor_head=record.get("anaphor_head", ""),
        answers=tuple(answers),
        is_no_answer=is_no_answer,
        anaphor_sentence_index=record.get("anaphor_sentence_index"),
        anaphor_token_span=tuple(token_span) if token_span is not None else None,
        context_sentences=tuple(
            (entry["index"], entry["char_start"])
            for entry in record.get("context_sentences", [])
        ),
        gold_antecedents=tuple(
            (entry["sentence_index"], entry["token_span"][0], entry["token_span"][1])
            for entry in record.get("gold_antecedents", [])
        ),
    )


def load_squad_json(path: Path) -> list[QAInstance]:
    """Load and validate an extended-SQuAD dataset file."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"dataset file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})")
    if not isinstance(payload, dict) or "data" not in payload:
        raise SchemaError(f"{path}: missing top-level 'data'")
    instances = []
    seen_ids = set()
    for article in payload["data"]:
        doc_id = article.get("title", "")
        for paragraph in article.get("paragraphs", []):
            context = paragraph["context"]
            for record in paragraph.get("qas", []):
                inst = _qa_from_json(record, context, doc_id)
                if inst.id in seen_ids:
                    raise SchemaError(f"duplicate instance id {inst.id}")
                seen_ids.add(inst.id)
                instances.append(inst)
    return instances
