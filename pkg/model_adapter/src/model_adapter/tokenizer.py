"""Word-level tokenization and vocabulary for the span-QA model.

The model scores one position per context word, so the tokenizer is
word-level by construction: the "first sub-token" reduction the decoder
expects is the identity here.  Splitting refines the convention used by
the dataset producer (whitespace plus peeled punctuation and clitics such
as 's and n't), so every answer span in a pipeline-built dataset starts
and ends on a word boundary; offsets always index into the original text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIALS = (PAD, UNK, CLS, SEP)

_CLITICS = ("''", "'s", "'re", "'ve", "'ll", "'d", "'m")


def _pieces(chunk: str) -> list[str]:
    left: list[str] = []
    while len(chunk) > 1 and not chunk[0].isalnum() and chunk[0] != "'":
        left.append(chunk[0])
        chunk = chunk[1:]
    right: list[str] = []
    while len(chunk) > 1:
        low = chunk.lower()
        if low.endswith("n't") and len(chunk) > 3:
            cut = 3
        elif any(low.endswith(s) and len(chunk) > len(s) for s in _CLITICS):
            cut = next(len(s) for s in _CLITICS if low.endswith(s))
        elif not chunk[-1].isalnum():
            cut = 1
        else:
            break
        right.append(chunk[-cut:])
        chunk = chunk[:-cut]
    return left + [chunk] + list(reversed(right))


def tokenize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    out: list[tuple[str, int, int]] = []
    start = None
    for i, ch in enumerate(text + " "):
        if ch.isspace():
            if start is not None:
                pos = start
                for piece in _pieces(text[start:i]):
                    out.append((piece, pos, pos + len(piece)))
                    pos += len(piece)
                start = None
        elif start is None:
            start = i
    return out


@dataclass(frozen=True)
class Vocab:
    words: tuple[str, ...]  # includes the specials at the front

    def __post_init__(self):
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    def __len__(self) -> int:
        return len(self.words)

    def id(self, word: str) -> int:
        return self._index.get(word, self._index[UNK])

    @property
    def pad_id(self) -> int:
        return self._index[PAD]

    @property
    def cls_id(self) -> int:
        return self._index[CLS]

    @property
    def sep_id(self) -> int:
        return self._index[SEP]

    def save(self, path: Path) -> None:
        Path(path).write_text(
            json.dumps({"words": list(self.words)}, ensure_ascii=False, indent=0) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: Path) -> "Vocab":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(words=tuple(payload["words"]))

    @classmethod
    def build(cls, texts: Sequence[str]) -> "Vocab":
        seen = set()
        for text in texts:
            for word, _, _ in tokenize_with_offsets(text):
                seen.add(word)
        return cls(words=SPECIALS + tuple(sorted(seen)))
