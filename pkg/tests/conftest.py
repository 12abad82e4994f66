import sys
from pathlib import Path

import pytest

from bridgeqa import treebank

FIXTURES = Path(__file__).parent / "fixtures"
SCRIPTS = Path(__file__).parent.parent / "scripts"


def load_doc(name: str) -> treebank.Document:
    path = FIXTURES / "trees" / f"{name}.mrg"
    return treebank.parse_ptb(path.read_text(encoding="utf-8"), doc_id=name)


def find_np(sentence: treebank.Sentence, surface: str) -> treebank.ConstituentNode:
    """The unique NP node whose surface text equals the given string."""
    matches = [
        np
        for np in treebank.iter_np_nodes(sentence.tree)
        if sentence.span_text(np.token_span) == surface
    ]
    assert len(matches) == 1, f"expected one NP {surface!r}, found {len(matches)}"
    return matches[0]


def find_np_in_doc(doc: treebank.Document, surface: str):
    for sentence in doc.sentences:
        for np in treebank.iter_np_nodes(sentence.tree):
            if sentence.span_text(np.token_span) == surface:
                return sentence, np
    raise AssertionError(f"NP {surface!r} not found in {doc.id}")


@pytest.fixture(scope="session")
def examples_doc():
    return load_doc("examples")


@pytest.fixture(scope="session")
def fig2_doc():
    return load_doc("fig2doc")


@pytest.fixture(scope="session")
def qa_corpus_dir():
    return FIXTURES / "qa_corpus"


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    """50-document synthetic treebank, generated once per session."""
    import subprocess

    out = tmp_path_factory.mktemp("desk") / "trees"
    subprocess.run(
        [
            sys.executable,
            str(SCRIPTS / "make_desk_corpus.py"),
            "--out",
            str(out),
            "--docs",
            "50",
            "--seed",
            "11",
        ],
        check=True,
        capture_output=True,
    )
    return out
