"""Project predicted text spans onto gold or system mentions.

A span maps to a mention when the two share a head (the span's final
token against the mention's head token, case-insensitive) and the span's
tokens form a contiguous subsequence of the mention stripped of its
postmodifiers.  When the anaphor is a time expression, only time-typed
mentions survive.  The highest-scoring surviving prediction selects the
antecedent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .decode import SpanPrediction
from .errors import InputError, SchemaError
from .treebank import (
    Document,
    find_head,
    iter_np_nodes,
    ptb_tokenize,
)

FORMAT_VERSION = 1

SEMANTIC_TIME = "time"

# Head nouns treated as time expressions; a 4-digit year also qualifies.
DEFAULT_TIME_LEXICON = frozenset(
    """
    day days week weeks month months year years decade decades century centuries
    hour hours minute minutes second seconds morning mornings afternoon afternoons
    evening evenings night nights today tonight yesterday tomorrow
    monday tuesday wednesday thursday friday saturday sunday
    january february march april may june july august september october
    november december spring summer autumn fall winter quarter
    """.split()
)

_YEAR_PATTERN = re.compile(r"[12]\d{3}")


def load_time_lexicon(path: Path) -> frozenset:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"time lexicon not found: {path}")
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def is_time_expression(head: str, lexicon: frozenset = DEFAULT_TIME_LEXICON) -> bool:
    head = head.lower()
    return head in lexicon or bool(_YEAR_PATTERN.fullmatch(head))


@dataclass(frozen=True)
class MentionRecord:
    """A document-level mention as stored in a mentions file."""

    mention_id: str
    doc_id: str
    sentence_index: int
    token_span: tuple[int, int]
    head_index: int
    tokens: tuple[str, ...]
    text: str
    char_start: int  # sentence-local offsets
    char_end: int
    semantic_type: Optional[str] = None

    @property
    def head_text(self) -> str:
        return self.tokens[self.head_index - self.token_span[0]]

    def core_tokens(self) -> tuple[str, ...]:
        """Tokens up to and including the head (postmodifiers stripped)."""
        return self.tokens[: self.head_index - self.token_span[0] + 1]

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "mention_id": self.mention_id,
            "doc_id": self.doc_id,
            "sentence_index": self.sentence_index,
            "token_span": list(self.token_span),
            "head_index": self.head_index,
            "tokens": list(self.tokens),
            "text": self.text,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "semantic_type": self.semantic_type,
        }

    @classmethod
    def from_json(cls, record: dict) -> "MentionRecord":
        return cls(
            mention_id=record["mention_id"],
            doc_id=record["doc_id"],
            sentence_index=record["sentence_index"],
            token_span=tuple(record["token_span"]),
            head_index=record["head_index"],
            tokens=tuple(record["tokens"]),
            text=record["text"],
            char_start=record["char_start"],
            char_end=record["char_end"],
            semantic_type=record.get("semantic_type"),
        )


@dataclass(frozen=True)
class CandidateMention:
    """A mention projected into one instance's context coordinates."""

    record: MentionRecord
    context_char_start: int
    context_char_end: int


@dataclass(frozen=True)
class MentionMapping:
    span: SpanPrediction
    mention: CandidateMention
    score: float


# ---------------------------------------------------------------------------
# Core mapping rules


def _is_sublist(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    n = len(needle)
    if n == 0 or n > len(haystack):
        return False
    return any(list(haystack[i : i + n]) == list(needle) for i in range(len(haystack) - n + 1))


def map_span_to_mention(
    span: SpanPrediction, candidates: Sequence[CandidateMention]
) -> Optional[CandidateMention]:
    """The mention sharing the span's head that contains it, if any.

    The span's head is its final token.  Among several matches the one
    starting closest before the anaphor (i.e. the latest start) wins.
    """
    span_tokens = [t.lower() for t, _s, _e in ptb_tokenize(span.text)]
    if not span_tokens:
        return None
    span_head = span_tokens[-1]
    matched = [
        c
        for c in candidates
        if c.record.head_text.lower() == span_head
        and _is_sublist(span_tokens, [t.lower() for t in c.record.core_tokens()])
    ]
    if not matched:
        return None
    return max(matched, key=lambda c: c.context_char_start)


def filter_by_time_type(
    anaphor_head: str,
    mappings: Iterable[MentionMapping],
    lexicon: frozenset = DEFAULT_TIME_LEXICON,
) -> list[MentionMapping]:
    """Keep only time-typed mentions when the anaphor is a time expression."""
    mappings = list(mappings)
    if not is_time_expression(anaphor_head, lexicon):
        return mappings
    return [m for m in mappings if m.mention.record.semantic_type == SEMANTIC_TIME]


def select_antecedent(
    predictions: Sequence[SpanPrediction],
    candidates: Sequence[CandidateMention],
    anaphor_head: str,
    lexicon: frozenset = DEFAULT_TIME_LEXICON,
) -> tuple[Optional[MentionMapping], list[MentionMapping]]:
    """Map ranked predictions to mentions and pick the winner.

    Returns the selected mapping (None when nothing maps) and the full
    filtered mapping list; a mention reached by several predictions keeps
    its best (first-ranked) score.
    """
    mappings = []
    for span in predictions:
        mention = map_span_to_mention(span, candidates)
        if mention is not None:
            mappings.append(MentionMapping(span=span, mention=mention, score=span.score))
    mappings = filter_by_time_type(anaphor_head, mappings, lexicon)
    by_mention: dict[str, MentionMapping] = {}
    order: list[str] = []
    for mapping in mappings:
        key = mapping.mention.record.mention_id
        if key not in by_mention:
            by_mention[key] = mapping
            order.append(key)
        elif mapping.score > by_mention[key].score:
            by_mention[key] = mapping
    final = [by_mention[key] for key in order]
    if not final:
        return None, []
    winner = max(final, key=lambda m: m.score)
    return winner, final


# ---------------------------------------------------------------------------
# Mention extraction and files


def mention_id_for(doc_id: str, sentence_index: int, span: tuple[int, int]) -> str:
    return f"{doc_id}:{sentence_index}:{span[0]}-{span[1]}"


def extract_mentions(
    doc: Document, lexicon: frozenset = DEFAULT_TIME_LEXICON
) -> list[MentionRecord]:
    """All NP nodes of a document as mention records.

    NPs without a noun head are skipped; heads in the time lexicon get the
    "time" semantic type.
    """
    records = []
    for sentence in doc.sentences:
        if sentence.tree is None:
            continue
        for np in iter_np_nodes(sentence.tree):
            try:
                head = find_head(np, sentence)
            except Exception:
                continue
            first, last = np.token_span
            head_text = sentence.tokens[head].text
            records.append(
                MentionRecord(
                    mention_id=mention_id_for(doc.id, sentence.index, np.token_span),
                    doc_id=doc.id,
                    sentence_index=sentence.index,
                    token_span=np.token_span,
                    head_index=head,
                    tokens=tuple(t.text for t in sentence.tokens[first : last + 1]),
                    text=sentence.span_text(np.token_span),
                    char_start=sentence.tokens[first].char_start,
                    char_end=sentence.tokens[last].char_end,
                    semantic_type=SEMANTIC_TIME if is_time_expression(head_text, lexicon) else None,
                )
            )
    return records


def read_mentions(path: Path) -> list[MentionRecord]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"mentions file not found: {path}")
    records = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(MentionRecord.from_json(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad mention record ({exc})")
    return records


def write_mentions(records: Sequence[MentionRecord], path: Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")


def project_candidates(
    mentions: Sequence[MentionRecord],
    doc_id: str,
    context_sentences: Sequence[tuple[int, int]],
    anaphor_char_start: int,
) -> list[CandidateMention]:
    """Mentions of the context sentences, shifted into context offsets.

    Only mentions ending before the anaphor's start are candidates.
    """
    offsets = dict(context_sentences)
    candidates = []
    for record in mentions:
        if record.doc_id != doc_id or record.sentence_index not in offsets:
            continue
        base = offsets[record.sentence_index]
        start = base + record.char_start
        end = base + record.char_end
        if end <= anaphor_char_start:
            candidates.append(
                CandidateMention(record=record, context_char_start=start, context_char_end=end)
            )
    return candidates
