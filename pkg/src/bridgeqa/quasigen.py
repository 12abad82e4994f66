"""Synthesize quasi-bridging training pairs from parsed corpora.

An NP of the shape "X preposition Y" or "Y 's X" (where neither noun side
embeds another NP) is split across two sentences: a nearby sentence that
mentions Y but not X becomes the first sentence, and the source sentence is
rewritten with the whole NP replaced by "the X".  The result is a synthetic
bridging link from the Y occurrence to the new "the X" anaphor.
"""

from __future__ import annotations

import csv
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import InputError, SynthesisError, TreeParseError
from .treebank import (
    DETERMINER_TAGS,
    NOUN_TAGS,
    ConstituentNode,
    Document,
    Sentence,
    detokenize,
    parse_ptb,
)

FORMAT_VERSION = 1

PREPOSITIONAL = "prepositional"
POSSESSIVE = "possessive"


@dataclass(frozen=True)
class PairExtraction:
    """A splittable NP: the anaphor-to-be and antecedent-to-be noun spans."""

    sentence_index: int
    np_span: tuple[int, int]
    anaphor_span: tuple[int, int]  # becomes "the <span>" in the rewrite
    antecedent_span: tuple[int, int]
    kind: str  # PREPOSITIONAL or POSSESSIVE
    preposition: Optional[str] = None


@dataclass(frozen=True)
class QuasiBridgingInstance:
    """One synthesized sentence pair with its bridging link.

    ``s_y`` is the antecedent-bearing sentence, ``s_x`` the rewritten source
    sentence containing the anaphor; character spans index into the context
    string ``s_y + " " + s_x``.
    """

    doc_id: str
    s_y: str
    s_x: str
    anaphor_text: str
    antecedent_text: str
    anaphor_char_start: int
    anaphor_char_end: int
    antecedent_char_start: int
    antecedent_char_end: int

    @property
    def context(self) -> str:
        return self.s_y + " " + self.s_x

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "doc_id": self.doc_id,
            "s_y": self.s_y,
            "s_x": self.s_x,
            "anaphor_text": self.anaphor_text,
            "antecedent_text": self.antecedent_text,
            "anaphor_char_start": self.anaphor_char_start,
            "anaphor_char_end": self.anaphor_char_end,
            "antecedent_char_start": self.antecedent_char_start,
            "antecedent_char_end": self.antecedent_char_end,
        }

    @classmethod
    def from_json(cls, record: dict) -> "QuasiBridgingInstance":
        return cls(
            doc_id=record["doc_id"],
            s_y=record["s_y"],
            s_x=record["s_x"],
            anaphor_text=record["anaphor_text"],
            antecedent_text=record["antecedent_text"],
            anaphor_char_start=record["anaphor_char_start"],
            anaphor_char_end=record["anaphor_char_end"],
            antecedent_char_start=record["antecedent_char_start"],
            antecedent_char_end=record["antecedent_char_end"],
        )


@dataclass
class GenerationStats:
    documents: int = 0
    parse_errors: int = 0
    sentences: int = 0
    extractions: int = 0
    emitted: int = 0
    rejections: dict = field(default_factory=dict)

    def reject(self, reason: str, count: int = 1) -> None:
        self.rejections[reason] = self.rejections.get(reason, 0) + count

    def merge(self, other: "GenerationStats") -> None:
        self.documents += other.documents
        self.parse_errors += other.parse_errors
        self.sentences += other.sentences
        self.extractions += other.extractions
        self.emitted += other.emitted
        for reason, count in other.rejections.items():
            self.reject(reason, count)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "documents": self.documents,
            "parse_errors": self.parse_errors,
            "sentences": self.sentences,
            "extractions": self.extractions,
            "emitted": self.emitted,
            "rejections": {k: self.rejections[k] for k in sorted(self.rejections)},
        }


# ---------------------------------------------------------------------------
# Pattern extraction


def _has_inner_np(node: ConstituentNode) -> bool:
    return node.dominates_category("NP")


def _rightmost_noun(sentence: Sentence, span: tuple[int, int]) -> Optional[int]:
    for i in range(span[1], span[0] - 1, -1):
        if sentence.tokens[i].pos in NOUN_TAGS:
            return i
    return None


def _content_span(sentence: Sentence, span: tuple[int, int]) -> Optional[tuple[int, int]]:
    """Strip leading determiners and truncate at the rightmost noun."""
    first, last = span
    while first <= last and sentence.tokens[first].pos in DETERMINER_TAGS:
        first += 1
    if first > last:
        return None
    head = _rightmost_noun(sentence, (first, last))
    if head is None:
        return None
    return (first, head)


def _last_leaf_pos(node: ConstituentNode, sentence: Sentence) -> str:
    return sentence.tokens[node.token_span[1]].pos


def _match_prepositional(
    np: ConstituentNode, sentence: Sentence, prepositions: Optional[frozenset]
) -> Optional[PairExtraction]:
    if len(np.children) != 2:
        return None
    x_node, pp = np.children
    if x_node.is_leaf or x_node.category != "NP" or pp.is_leaf or pp.category != "PP":
        return None
    if len(pp.children) != 2:
        return None
    prep, y_node = pp.children
    if not prep.is_leaf or prep.category != "IN":
        return None
    if y_node.is_leaf or y_node.category != "NP":
        return None
    prep_text = sentence.tokens[prep.token_span[0]].text
    if prepositions is not None and prep_text.lower() not in prepositions:
        return None
    if _has_inner_np(x_node) or _has_inner_np(y_node):
        return None
    if _last_leaf_pos(x_node, sentence) == "POS" or _last_leaf_pos(y_node, sentence) == "POS":
        return None
    x_span = _content_span(sentence, x_node.token_span)
    y_span = _content_span(sentence, y_node.token_span)
    if x_span is None or y_span is None:
        return None
    return PairExtraction(
        sentence_index=sentence.index,
        np_span=np.token_span,
        anaphor_span=x_span,
        antecedent_span=y_span,
        kind=PREPOSITIONAL,
        preposition=prep_text,
    )


def _match_possessive(np: ConstituentNode, sentence: Sentence) -> Optional[PairExtraction]:
    if len(np.children) < 2:
        return None
    possessor = np.children[0]
    rest = np.children[1:]
    if possessor.is_leaf or possessor.category != "NP":
        return None
    if _last_leaf_pos(possessor, sentence) != "POS":
        return None
    if _has_inner_np(possessor):
        return None
    if not all(child.is_leaf for child in rest):
        return None
    if any(child.category == "POS" for child in rest):
        return None
    y_span = _content_span(sentence, (possessor.token_span[0], possessor.token_span[1] - 1))
    x_span = _content_span(sentence, (rest[0].token_span[0], rest[-1].token_span[1]))
    if x_span is None or y_span is None:
        return None
    return PairExtraction(
        sentence_index=sentence.index,
        np_span=np.token_span,
        anaphor_span=x_span,
        antecedent_span=y_span,
        kind=POSSESSIVE,
    )


def extract_split_nps(
    sentence: Sentence, prepositions: Optional[frozenset] = None
) -> list[PairExtraction]:
    """All splittable NPs of a sentence, ordered by NP start position.

    ``prepositions`` restricts the prepositional pattern to an allow-list of
    lowercase preposition surfaces; None accepts any IN-tagged preposition.
    """
    if sentence.tree is None:
        return []
    found = []
    for np in sentence.tree.iter_nodes():
        if np.is_leaf or np.category != "NP":
            continue
        extraction = _match_prepositional(np, sentence, prepositions)
        if extraction is None:
            extraction = _match_possessive(np, sentence)
        if extraction is not None:
            found.append(extraction)
    found.sort(key=lambda e: (e.np_span[0], e.np_span[1], e.kind))
    return found


# ---------------------------------------------------------------------------
# Source-sentence selection and rewriting


def _contains_token(sentence: Sentence, surface: str) -> bool:
    lowered = surface.lower()
    return any(tok.text.lower() == lowered for tok in sentence.tokens)


def select_source_sentence(
    doc: Document, i: int, extraction: PairExtraction
) -> Optional[int]:
    """Closest sentence containing the antecedent head but not the anaphor head.

    Distance ties are broken toward the earlier sentence.
    """
    sentence = doc.sentences[i]
    y_head = sentence.tokens[extraction.antecedent_span[1]].text
    x_head = sentence.tokens[extraction.anaphor_span[1]].text
    for distance in range(1, len(doc.sentences)):
        for j in (i - distance, i + distance):
            if 0 <= j < len(doc.sentences):
                candidate = doc.sentences[j]
                if _contains_token(candidate, y_head) and not _contains_token(candidate, x_head):
                    return j
    return None


def _find_antecedent_occurrence(
    sentence: Sentence, target_texts: Sequence[str]
) -> tuple[int, int]:
    """Earliest token-sequence occurrence of the antecedent in the sentence.

    Falls back from the full antecedent phrase to its head token, which is
    guaranteed present by select_source_sentence.
    """
    lowered = [t.lower() for t in target_texts]
    tokens = [t.text.lower() for t in sentence.tokens]
    n = len(lowered)
    for start in range(len(tokens) - n + 1):
        if tokens[start : start + n] == lowered:
            return (start, start + n - 1)
    head = lowered[-1]
    for start, tok in enumerate(tokens):
        if tok == head:
            return (start, start)
    raise SynthesisError(f"antecedent head {target_texts[-1]!r} not found in source sentence")


def synthesize_pair(
    doc: Document, extraction: PairExtraction, s_y_index: int
) -> QuasiBridgingInstance:
    """Rewrite the extraction's sentence and pair it with the source sentence."""
    sentence = doc.sentences[extraction.sentence_index]
    source = doc.sentences[s_y_index]

    np_first, np_last = extraction.np_span
    x_first, x_last = extraction.anaphor_span
    texts = [t.text for t in sentence.tokens[:np_first]]
    replacement_start = len(texts)
    texts.append("the")
    texts.extend(t.text for t in sentence.tokens[x_first : x_last + 1])
    replacement_end = len(texts) - 1
    texts.extend(t.text for t in sentence.tokens[np_last + 1 :])
    if not texts:
        raise SynthesisError("rewrite produced an empty sentence")

    s_x_text, offsets = detokenize(texts)
    anaphor_start = offsets[replacement_start][0]
    anaphor_end = offsets[replacement_end][1]

    y_texts = [t.text for t in sentence.tokens[extraction.antecedent_span[0] : extraction.antecedent_span[1] + 1]]
    occ_first, occ_last = _find_antecedent_occurrence(source, y_texts)
    antecedent_start = source.tokens[occ_first].char_start
    antecedent_end = source.tokens[occ_last].char_end

    shift = len(source.text) + 1
    return QuasiBridgingInstance(
        doc_id=doc.id,
        s_y=source.text,
        s_x=s_x_text,
        anaphor_text=s_x_text[anaphor_start:anaphor_end],
        antecedent_text=source.text[antecedent_start:antecedent_end],
        anaphor_char_start=shift + anaphor_start,
        anaphor_char_end=shift + anaphor_end,
        antecedent_char_start=antecedent_start,
        antecedent_char_end=antecedent_end,
    )


# ---------------------------------------------------------------------------
# Corpus-scale generation


def generate_for_document(
    doc: Document, prepositions: Optional[frozenset] = None
) -> tuple[list[QuasiBridgingInstance], GenerationStats]:
    stats = GenerationStats(documents=1, sentences=len(doc.sentences))
    instances = []
    for sentence in doc.sentences:
        for extraction in extract_split_nps(sentence, prepositions):
            stats.extractions += 1
            s_y_index = select_source_sentence(doc, sentence.index, extraction)
            if s_y_index is None:
                stats.reject("no_source_sentence")
                continue
            try:
                instances.append(synthesize_pair(doc, extraction, s_y_index))
            except SynthesisError:
                stats.reject("synthesis_failed")
                continue
            stats.emitted += 1
    return instances, stats


def generate_corpus(
    documents: Iterable[Document], prepositions: Optional[frozenset] = None
) -> tuple[list[QuasiBridgingInstance], GenerationStats]:
    """Generate over documents already sorted in canonical (doc id) order."""
    stats = GenerationStats()
    instances = []
    for doc in documents:
        doc_instances, doc_stats = generate_for_document(doc, prepositions)
        instances.extend(doc_instances)
        stats.merge(doc_stats)
    return instances, stats


def _process_tree_file(args: tuple[str, Optional[frozenset]]) -> tuple[str, list[str], dict]:
    path, prepositions = args
    path = Path(path)
    stats = GenerationStats()
    lines: list[str] = []
    try:
        doc = parse_ptb(path.read_text(encoding="utf-8"), doc_id=path.stem)
    except TreeParseError:
        stats.parse_errors += 1
        return (path.stem, lines, stats.to_json())
    instances, stats = generate_for_document(doc, prepositions)
    lines = [json.dumps(inst.to_json(), ensure_ascii=False) for inst in instances]
    return (path.stem, lines, stats.to_json())


def _stats_from_json(record: dict) -> GenerationStats:
    return GenerationStats(
        documents=record["documents"],
        parse_errors=record["parse_errors"],
        sentences=record["sentences"],
        extractions=record["extractions"],
        emitted=record["emitted"],
        rejections=dict(record["rejections"]),
    )


def run_generation(
    trees_dir: Path,
    out_path: Path,
    stats_path: Optional[Path] = None,
    prepositions: Optional[frozenset] = None,
    workers: int = 1,
) -> GenerationStats:
    """Generate instances for every tree file in a directory.

    Output order is canonical (doc id, then within-document order) and
    invariant under the worker count; per-file parse failures are counted
    in the stats and skipped.
    """
    trees_dir = Path(trees_dir)
    if not trees_dir.is_dir():
        raise InputError(f"tree directory not found: {trees_dir}")
    files = sorted(p for p in trees_dir.iterdir() if p.is_file())
    jobs = [(str(p), prepositions) for p in files]

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_process_tree_file, jobs))
    else:
        results = [_process_tree_file(job) for job in jobs]
    results.sort(key=lambda r: r[0])

    stats = GenerationStats()
    out_path = Path(out_path)
    with out_path.open("w", encoding="utf-8") as handle:
        for _doc_id, lines, stats_record in results:
            for line in lines:
                handle.write(line + "\n")
            stats.merge(_stats_from_json(stats_record))
    if stats_path is not None:
        Path(stats_path).write_text(
            json.dumps(stats.to_json(), indent=2) + "\n", encoding="utf-8"
        )
    return stats


# ---------------------------------------------------------------------------
# Quality-audit sampling

AUDIT_COLUMNS = ("doc_id", "s_y", "s_x", "anaphor_text", "antecedent_text", "score")


def read_instances(path: Path) -> list[QuasiBridgingInstance]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"instances file not found: {path}")
    instances = []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                instances.append(QuasiBridgingInstance.from_json(json.loads(line)))
    return instances


def sample_for_audit(instances_path: Path, out_path: Path, n: int, seed: int) -> int:
    """Write a seeded random sample as TSV with an empty manual-score column.

    The score column is to be filled in by hand with 0 (unacceptable),
    1 (makes sense but unnatural), or 2 (correct and natural).
    """
    instances = read_instances(instances_path)
    if n > len(instances):
        raise ValueError(f"sample size {n} exceeds corpus size {len(instances)}")
    sample = random.Random(seed).sample(instances, n)
    with Path(out_path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(AUDIT_COLUMNS)
        for inst in sample:
            writer.writerow(
                [
                    inst.doc_id,
                    inst.s_y.replace("\t", " "),
                    inst.s_x.replace("\t", " "),
                    inst.anaphor_text.replace("\t", " "),
                    inst.antecedent_text.replace("\t", " "),
                    "",
                ]
            )
    return n
