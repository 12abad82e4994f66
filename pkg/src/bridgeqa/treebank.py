"""Bracketed constituency trees, tokens, and noun-phrase surgery.

Reads Penn-Treebank-style bracketed parses into immutable Document /
Sentence / ConstituentNode structures, detokenizes token streams into
surface text with exact character offsets, and implements the NP
operations the rest of the pipeline relies on: head finding, stripping
postmodifiers, and stripping determiners.

All types are frozen dataclasses; every operation is a pure function, so
documents can be shared freely across worker processes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .errors import DegenerateMentionError, HeadNotFoundError, TreeParseError

NOUN_TAGS = frozenset({"NN", "NNS", "NNP", "NNPS"})
DETERMINER_TAGS = frozenset({"DT", "PDT", "PRP$"})

# Child categories that begin the postmodifier field of an NP.  Premodifier
# categories (ADJP, QP, NML, preterminals) are deliberately absent.
_POSTMODIFIER_CATEGORIES = frozenset(
    {"PP", "SBAR", "S", "SINV", "SBARQ", "SQ", "VP", "RRC", "PRN", "UCP"}
)
_POSTMODIFIER_PUNCT = frozenset({",", ":"})

# Detokenization closure rules.  A token glues to its left neighbour when it
# is closing punctuation, a clitic ('s, 're, n't, ...), or a closing quote;
# opening quotes and brackets glue to their right neighbour.
_ATTACH_LEFT = frozenset({".", ",", ";", ":", "!", "?", "%", ")", "]", "}"})
_ATTACH_RIGHT = frozenset({"``", "`", "(", "[", "{", "$", "#"})

# Trailing-period tokens kept intact when retokenizing surface text.
_ABBREVIATIONS = frozenset(
    "mr mrs ms dr prof rev gen sen rep gov corp inc co ltd jr sr st mt "
    "etc vs no fig vol dept est avg".split()
)


@dataclass(frozen=True)
class Token:
    """One surface token with its offsets in the detokenized sentence."""

    index: int
    text: str
    pos: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class ConstituentNode:
    """A tree node; leaves are preterminals covering exactly one token."""

    label: str
    children: tuple["ConstituentNode", ...]
    token_span: tuple[int, int]  # inclusive [first, last]

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def category(self) -> str:
        """Base syntactic category: label minus function tags and indices."""
        if self.label.startswith("-"):  # -NONE-, -LRB-, ...
            return self.label
        return re.split(r"[-=]", self.label, maxsplit=1)[0]

    def iter_nodes(self) -> Iterator["ConstituentNode"]:
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def dominates_category(self, category: str) -> bool:
        """True when any strict descendant has the given base category."""
        return any(
            node.category == category for node in self.iter_nodes() if node is not self
        )


@dataclass(frozen=True)
class Sentence:
    index: int
    tokens: tuple[Token, ...]
    text: str
    tree: Optional[ConstituentNode] = None

    def token_texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    def span_text(self, span: tuple[int, int]) -> str:
        """Surface text of the inclusive token span [first, last]."""
        first, last = span
        return self.text[self.tokens[first].char_start : self.tokens[last].char_end]


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Mention:
    """An NP occurrence: token span plus resolved head token."""

    sentence_index: int
    token_span: tuple[int, int]  # inclusive
    head_index: int
    text: str
    semantic_type: Optional[str] = None


# ---------------------------------------------------------------------------
# Detokenization and its inverse


def _needs_space(prev: str, cur: str) -> bool:
    if prev in _ATTACH_RIGHT:
        return False
    if cur in _ATTACH_LEFT or cur.startswith("'") or cur.lower() == "n't":
        return False
    return True


def detokenize(texts: Sequence[str]) -> tuple[str, list[tuple[int, int]]]:
    """Join tokens into surface text; return it with per-token char offsets.

    The spacing decision for each adjacent pair depends only on that pair,
    so any contiguous slice of the result equals the detokenization of the
    corresponding token slice.
    """
    parts: list[str] = []
    offsets: list[tuple[int, int]] = []
    pos = 0
    for i, text in enumerate(texts):
        if i > 0 and _needs_space(texts[i - 1], text):
            parts.append(" ")
            pos += 1
        offsets.append((pos, pos + len(text)))
        parts.append(text)
        pos += len(text)
    return "".join(parts), offsets


_APOSTROPHE_SUFFIXES = ("''", "'s", "'re", "'ve", "'ll", "'d", "'m")

# Whole chunks that are already complete tokens and must not be re-split.
_ATOMIC_CHUNKS = frozenset({"''", "``", "n't", "...", *_APOSTROPHE_SUFFIXES})


def _keep_trailing_period(core: str) -> bool:
    stem = core[:-1]
    if not stem:
        return True
    if stem.lower() in _ABBREVIATIONS:
        return True
    if len(stem) == 1 and stem.isalpha() and stem.isupper():
        return True
    return "." in stem and stem[-1].isalnum() and "'" not in stem  # U.S., i.e.


def _split_chunk(chunk: str) -> list[str]:
    left: list[str] = []
    changed = True
    while changed and chunk not in _ATTACH_RIGHT:
        changed = False
        for prefix in ("``", "`", "(", "[", "{", "$", "#"):
            if chunk.startswith(prefix) and len(chunk) > len(prefix):
                left.append(prefix)
                chunk = chunk[len(prefix) :]
                changed = True
                break
    right: list[str] = []
    while len(chunk) > 1 and chunk.lower() not in _ATOMIC_CHUNKS:
        low = chunk.lower()
        if low.endswith("''") and len(chunk) > 2:
            cut = 2
        elif low.endswith("n't") and len(chunk) > 3:
            cut = 3
        elif any(low.endswith(s) and len(chunk) > len(s) for s in _APOSTROPHE_SUFFIXES):
            cut = next(len(s) for s in _APOSTROPHE_SUFFIXES if low.endswith(s))
        elif chunk[-1] == "'":
            cut = 1
        elif chunk[-1] in _ATTACH_LEFT:
            if chunk[-1] == "." and _keep_trailing_period(chunk):
                break
            cut = 1
        else:
            break
        right.append(chunk[-cut:])
        chunk = chunk[:-cut]
    return left + [chunk] + list(reversed(right))


def ptb_tokenize(text: str) -> list[tuple[str, int, int]]:
    """Split detokenized surface text back into PTB-style tokens with offsets.

    Inverse of :func:`detokenize` for token streams drawn from treebank
    corpora (clitics, closing punctuation, and quote pairs are restored;
    abbreviation periods are kept attached).
    """
    out: list[tuple[str, int, int]] = []
    for m in re.finditer(r"\S+", text):
        pos = m.start()
        for piece in _split_chunk(m.group()):
            out.append((piece, pos, pos + len(piece)))
            pos += len(piece)
    return out


# ---------------------------------------------------------------------------
# Bracketed-tree reading and printing


@dataclass
class _RawNode:
    label: str
    children: list
    word: Optional[str] = None


_LEX_PATTERN = re.compile(r"\(|\)|[^()\s]+")


def _lex(text: str) -> Iterator[tuple[str, int, int]]:
    for lineno, line in enumerate(text.split("\n"), start=1):
        for m in _LEX_PATTERN.finditer(line):
            yield m.group(), lineno, m.start() + 1


def _parse_raw(text: str) -> list[_RawNode]:
    """Parse every top-level s-expression in the input."""
    roots: list[_RawNode] = []
    stack: list[_RawNode] = []
    last_line, last_col = 1, 1
    for tok, line, col in _lex(text):
        last_line, last_col = line, col
        if tok == "(":
            node = _RawNode(label="", children=[])
            if stack:
                stack[-1].children.append(node)
            stack.append(node)
        elif tok == ")":
            if not stack:
                raise TreeParseError("unbalanced ')'", line, col)
            node = stack.pop()
            if not node.label and not node.children:
                raise TreeParseError("empty constituent '()'", line, col)
            if not stack:
                roots.append(node)
        else:
            if not stack:
                raise TreeParseError(f"token {tok!r} outside brackets", line, col)
            top = stack[-1]
            if not top.label and not top.children:
                top.label = tok
            else:
                top.children.append(_RawNode(label="", children=[], word=tok))
    if stack:
        raise TreeParseError("unbalanced '(' at end of input", last_line, last_col)
    return roots


def _unwrap(root: _RawNode) -> _RawNode:
    # PTB files wrap each tree in an extra label-less layer: ( (S ...) ).
    while not root.label and len(root.children) == 1 and not root.children[0].word:
        root = root.children[0]
    return root


def _build(raw: _RawNode, words: list[tuple[str, str]]) -> ConstituentNode:
    if len(raw.children) == 1 and raw.children[0].word is not None:
        index = len(words)
        words.append((raw.children[0].word, raw.label))
        return ConstituentNode(label=raw.label, children=(), token_span=(index, index))
    if any(child.word is not None for child in raw.children):
        raise TreeParseError(
            f"constituent {raw.label!r} mixes words and subconstituents"
        )
    if not raw.children:
        raise TreeParseError(f"constituent {raw.label!r} has no children")
    children = tuple(_build(child, words) for child in raw.children)
    return ConstituentNode(
        label=raw.label,
        children=children,
        token_span=(children[0].token_span[0], children[-1].token_span[1]),
    )


def sentence_from_tree(tree: ConstituentNode, words: Sequence[tuple[str, str]], index: int) -> Sentence:
    text, offsets = detokenize([w for w, _ in words])
    tokens = tuple(
        Token(index=i, text=w, pos=pos, char_start=s, char_end=e)
        for i, ((w, pos), (s, e)) in enumerate(zip(words, offsets))
    )
    return Sentence(index=index, tokens=tokens, text=text, tree=tree)


def parse_ptb(text: str, doc_id: str = "doc") -> Document:
    """Parse bracketed trees (one s-expression per sentence) into a Document.

    Empty input yields an empty Document; malformed brackets raise
    TreeParseError with the offending position.
    """
    sentences = []
    for i, raw in enumerate(_parse_raw(text)):
        words: list[tuple[str, str]] = []
        tree = _build(_unwrap(raw), words)
        sentences.append(sentence_from_tree(tree, words, i))
    return Document(id=doc_id, sentences=tuple(sentences))


def print_tree(node: ConstituentNode, sentence: Sentence) -> str:
    """Canonical one-line bracketed form of a tree."""
    if node.is_leaf:
        return f"({node.label} {sentence.tokens[node.token_span[0]].text})"
    inner = " ".join(print_tree(child, sentence) for child in node.children)
    return f"({node.label} {inner})"


# ---------------------------------------------------------------------------
# NP operations


def iter_np_nodes(tree: ConstituentNode) -> Iterator[ConstituentNode]:
    for node in tree.iter_nodes():
        if not node.is_leaf and node.category == "NP":
            yield node


def _base_region_end(np: ConstituentNode) -> int:
    """Last token index of the NP's pre-postmodifier segment."""
    for child in np.children:
        if child.is_leaf:
            if child.label in _POSTMODIFIER_PUNCT and child.token_span[0] > np.token_span[0]:
                return child.token_span[0] - 1
            continue
        if child.category in _POSTMODIFIER_CATEGORIES and child.token_span[0] > np.token_span[0]:
            return child.token_span[0] - 1
    return np.token_span[1]


def find_head(np: ConstituentNode, sentence: Sentence) -> int:
    """Head token index of an NP node.

    The head is the rightmost noun-tagged token before the NP's first
    postmodifier constituent; if that segment holds no noun but the NP does
    elsewhere, its rightmost token is used.  An NP with no noun-tagged token
    at all has no head.
    """
    if np.category != "NP":
        raise ValueError(f"find_head expects an NP node, got {np.label!r}")
    first, last = np.token_span
    if not any(sentence.tokens[i].pos in NOUN_TAGS for i in range(first, last + 1)):
        raise HeadNotFoundError(
            f"no noun-tagged token in NP {sentence.span_text(np.token_span)!r}"
        )
    base_end = _base_region_end(np)
    for i in range(base_end, first - 1, -1):
        if sentence.tokens[i].pos in NOUN_TAGS:
            return i
    return base_end


def mention_from_node(np: ConstituentNode, sentence: Sentence) -> Mention:
    """Full-NP mention with its head resolved."""
    head = find_head(np, sentence)
    return Mention(
        sentence_index=sentence.index,
        token_span=np.token_span,
        head_index=head,
        text=sentence.span_text(np.token_span),
    )


def strip_postmodifiers(np: ConstituentNode, sentence: Sentence) -> Mention:
    """Mention truncated at the head token: everything after it is dropped."""
    head = find_head(np, sentence)
    span = (np.token_span[0], head)
    return Mention(
        sentence_index=sentence.index,
        token_span=span,
        head_index=head,
        text=sentence.span_text(span),
    )


def strip_leading_determiners(sentence: Sentence, span: tuple[int, int]) -> tuple[int, int]:
    """Advance the span start past determiner and possessive-pronoun tokens."""
    first, last = span
    while first <= last and sentence.tokens[first].pos in DETERMINER_TAGS:
        first += 1
    if first > last:
        raise DegenerateMentionError(
            f"stripping determiners empties {sentence.span_text(span)!r}"
        )
    return (first, last)


def strip_postmodifiers_and_determiner(np: ConstituentNode, sentence: Sentence) -> Mention:
    """Mention truncated at the head with leading determiners removed."""
    truncated = strip_postmodifiers(np, sentence)
    span = strip_leading_determiners(sentence, truncated.token_span)
    return Mention(
        sentence_index=sentence.index,
        token_span=span,
        head_index=truncated.head_index,
        text=sentence.span_text(span),
    )


def find_covering_np(sentence: Sentence, span: tuple[int, int]) -> Optional[ConstituentNode]:
    """The NP node covering exactly the given token span, when one exists."""
    if sentence.tree is None:
        return None
    for node in iter_np_nodes(sentence.tree):
        if node.token_span == tuple(span):
            return node
    return None


def _flat_head(sentence: Sentence, span: tuple[int, int]) -> int:
    """Head heuristic for spans without a matching NP node.

    Mirrors find_head on a flat token window: the region before the first
    preposition, subordinator, or comma is scanned for its rightmost noun.
    """
    first, last = span
    base_end = last
    for i in range(first + 1, last + 1):
        tok = sentence.tokens[i]
        if tok.pos in {"IN", "WDT", "WP", ",", ":"}:
            base_end = i - 1
            break
    for i in range(base_end, first - 1, -1):
        if sentence.tokens[i].pos in NOUN_TAGS:
            return i
    for i in range(last, first - 1, -1):
        if sentence.tokens[i].pos in NOUN_TAGS:
            return i
    return base_end


def mention_from_span(
    sentence: Sentence,
    span: tuple[int, int],
    semantic_type: Optional[str] = None,
) -> Mention:
    """Mention for an arbitrary annotated token span.

    Uses the exact covering NP node when the tree has one, the flat head
    heuristic otherwise, so hand-annotated spans that do not line up with
    parser constituents still resolve.
    """
    span = (int(span[0]), int(span[1]))
    node = find_covering_np(sentence, span)
    if node is not None:
        head = find_head(node, sentence)
    else:
        head = _flat_head(sentence, span)
    return Mention(
        sentence_index=sentence.index,
        token_span=span,
        head_index=head,
        text=sentence.span_text(span),
        semantic_type=semantic_type,
    )


def mention_variants(sentence: Sentence, mention: Mention) -> list[tuple[str, tuple[int, int]]]:
    """The answer variations of a mention, in canonical order.

    Returns (text, token span) pairs for: the full mention, its bare head,
    the mention truncated at the head, and the truncation additionally
    stripped of leading determiners.  Duplicates are kept; callers dedupe.
    """
    first, _last = mention.token_span
    head = mention.head_index
    variants = [
        (mention.text, mention.token_span),
        (sentence.span_text((head, head)), (head, head)),
    ]
    truncated = (first, head)
    variants.append((sentence.span_text(truncated), truncated))
    try:
        stripped = strip_leading_determiners(sentence, truncated)
    except DegenerateMentionError:
        stripped = truncated
    variants.append((sentence.span_text(stripped), stripped))
    return variants
