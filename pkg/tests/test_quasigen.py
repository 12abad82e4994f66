"""Tests for quasi-bridging pair synthesis, including an independent
re-implementation of the extraction rules used to recount desk-corpus
output."""

import json
import re
from pathlib import Path

import pytest

from bridgeqa import quasigen, treebank

from conftest import load_doc

NOUNS = {"NN", "NNS", "NNP", "NNPS"}
DETS = {"DT", "PDT", "PRP$"}


# ---------------------------------------------------------------------------
# Independent oracle: a from-scratch s-expression reader and pattern matcher


def _sexp(text):
    tokens = re.findall(r"\(|\)|[^()\s]+", text)
    stack, roots = [], []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            node = stack.pop()
            if stack:
                stack[-1].append(node)
            else:
                roots.append(node)
        else:
            stack[-1].append(tok)
    return roots


def _label(node):
    return node[0] if isinstance(node, list) and node and isinstance(node[0], str) else None


def _is_leaf(node):
    return len(node) == 2 and isinstance(node[1], str)


def _leaves(node):
    if _is_leaf(node):
        return [(node[0], node[1])]
    out = []
    for child in node[1:]:
        out.extend(_leaves(child))
    return out


def _cat(node):
    label = _label(node)
    return label if label.startswith("-") else re.split(r"[-=]", label, maxsplit=1)[0]


def _has_np_inside(node):
    if _is_leaf(node):
        return False
    for child in node[1:]:
        if not _is_leaf(child) and (_cat(child) == "NP" or _has_np_inside(child)):
            return True
    return False


def _content_ok(leaves):
    # determiner-stripped prefix must keep at least one noun
    rest = leaves
    while rest and rest[0][0] in DETS:
        rest = rest[1:]
    return any(pos in NOUNS for pos, _ in rest)


def _content_head(leaves):
    rest = leaves
    while rest and rest[0][0] in DETS:
        rest = rest[1:]
    nouns = [word for pos, word in rest if pos in NOUNS]
    return nouns[-1]


def _oracle_extractions(tree):
    """(x_head, y_head) pairs for every splittable NP, by the stated rules."""
    found = []

    def visit(node):
        if _is_leaf(node):
            return
        if _cat(node) == "NP":
            kids = node[1:]
            # prepositional: NP -> [NP, PP(IN, NP)], no inner NPs, no POS ends
            if (
                len(kids) == 2
                and not _is_leaf(kids[0])
                and _cat(kids[0]) == "NP"
                and not _is_leaf(kids[1])
                and _cat(kids[1]) == "PP"
                and len(kids[1][1:]) == 2
            ):
                prep, y = kids[1][1], kids[1][2]
                if (
                    _is_leaf(prep)
                    and prep[0] == "IN"
                    and not _is_leaf(y)
                    and _cat(y) == "NP"
                    and not _has_np_inside(kids[0])
                    and not _has_np_inside(y)
                    and _leaves(kids[0])[-1][0] != "POS"
                    and _leaves(y)[-1][0] != "POS"
                    and _content_ok(_leaves(kids[0]))
                    and _content_ok(_leaves(y))
                ):
                    found.append((_content_head(_leaves(kids[0])), _content_head(_leaves(y))))
            # possessive: NP -> [NP ending in POS, preterminals...]
            if (
                len(kids) >= 2
                and not _is_leaf(kids[0])
                and _cat(kids[0]) == "NP"
                and _leaves(kids[0])[-1][0] == "POS"
                and not _has_np_inside(kids[0])
                and all(_is_leaf(k) for k in kids[1:])
                and all(k[0] != "POS" for k in kids[1:])
            ):
                y_leaves = _leaves(kids[0])[:-1]
                x_leaves = [(k[0], k[1]) for k in kids[1:]]
                if _content_ok(y_leaves) and _content_ok(x_leaves):
                    found.append((_content_head(x_leaves), _content_head(y_leaves)))
        for child in node[1:]:
            visit(child)

    visit(tree)
    return found


def oracle_instance_count(trees_dir: Path) -> int:
    total = 0
    for path in sorted(Path(trees_dir).iterdir()):
        trees = [
            root[0] if len(root) == 1 and not isinstance(root[0], str) else root
            for root in _sexp(path.read_text(encoding="utf-8"))
        ]
        sent_tokens = [[w.lower() for _, w in _leaves(t)] for t in trees]
        for i, tree in enumerate(trees):
            for x_head, y_head in _oracle_extractions(tree):
                xh, yh = x_head.lower(), y_head.lower()
                if any(
                    j != i and yh in toks and xh not in toks
                    for j, toks in enumerate(sent_tokens)
                ):
                    total += 1
    return total


# ---------------------------------------------------------------------------
# Worked examples


def test_extracts_prepositional_pattern(fig2_doc):
    sentence = fig2_doc.sentences[3]
    extractions = quasigen.extract_split_nps(sentence)
    assert len(extractions) == 1
    e = extractions[0]
    assert sentence.span_text(e.anaphor_span) == "obstruction"
    assert sentence.span_text(e.antecedent_span) == "justice"
    assert e.kind == quasigen.PREPOSITIONAL
    assert e.preposition == "of"


def test_rejects_clausal_complement(examples_doc):
    # "the political value of imposing sanctions against South Africa"
    sentence = examples_doc.sentences[5]
    assert quasigen.extract_split_nps(sentence) == []


def test_rejects_inner_np_on_y_side():
    doc = load_doc("innernp")
    sentence = doc.sentences[1]
    extractions = quasigen.extract_split_nps(sentence)
    # "the cost of the repairs to the system" is rejected (Y embeds an NP);
    # the embedded "the repairs to the system" itself qualifies
    surfaces = {sentence.span_text(e.np_span) for e in extractions}
    assert surfaces == {"the repairs to the system"}


def test_extracts_possessive_pattern():
    doc = load_doc("poss")
    sentence = doc.sentences[1]
    extractions = quasigen.extract_split_nps(sentence)
    assert len(extractions) == 1
    e = extractions[0]
    assert sentence.span_text(e.anaphor_span) == "strategy"
    assert sentence.span_text(e.antecedent_span) == "company"
    assert e.kind == quasigen.POSSESSIVE


def test_preposition_allow_list(fig2_doc):
    sentence = fig2_doc.sentences[3]
    assert quasigen.extract_split_nps(sentence, prepositions=frozenset({"of"}))
    assert quasigen.extract_split_nps(sentence, prepositions=frozenset({"from"})) == []


def test_select_source_sentence(fig2_doc):
    e = quasigen.extract_split_nps(fig2_doc.sentences[3])[0]
    assert quasigen.select_source_sentence(fig2_doc, 3, e) == 1


def _single_sentence_doc(sentence):
    import dataclasses

    return treebank.Document(id="x", sentences=(dataclasses.replace(sentence, index=0),))


def test_select_source_sentence_none_without_candidates():
    doc = load_doc("poss")
    # single-sentence document: no other sentence exists
    single = _single_sentence_doc(doc.sentences[1])
    e = quasigen.extract_split_nps(single.sentences[0])[0]
    assert quasigen.select_source_sentence(single, 0, e) is None


def test_select_source_tie_breaks_earlier():
    doc = load_doc("tie")
    e = quasigen.extract_split_nps(doc.sentences[1])[0]
    assert quasigen.select_source_sentence(doc, 1, e) == 0


def test_synthesize_figure_pair(fig2_doc):
    e = quasigen.extract_split_nps(fig2_doc.sentences[3])[0]
    inst = quasigen.synthesize_pair(fig2_doc, e, 1)
    assert inst.s_x == "He was convicted of the obstruction."
    assert inst.anaphor_text == "the obstruction"
    assert inst.antecedent_text == "justice"
    assert inst.context[inst.anaphor_char_start : inst.anaphor_char_end] == "the obstruction"
    assert inst.context[inst.antecedent_char_start : inst.antecedent_char_end] == "justice"
    assert inst.antecedent_char_end <= len(inst.s_y)
    assert inst.anaphor_char_start > len(inst.s_y)


def test_synthesize_possessive_rewrite_diff():
    doc = load_doc("poss")
    e = quasigen.extract_split_nps(doc.sentences[1])[0]
    inst = quasigen.synthesize_pair(doc, e, 0)
    assert doc.sentences[1].text == "the company's strategy failed."
    assert inst.s_x == "the strategy failed."
    assert inst.s_y == "The company struggled."


def test_synthesize_normalizes_determiner():
    text = """
(S (NP (NN justice)) (VP (VBD prevailed)) (. .))
(S (NP (PRP He)) (VP (VBD feared) (NP (NP (DT an) (NN obstruction)) (PP (IN of) (NP (NN justice))))) (. .))
"""
    doc = treebank.parse_ptb(text, "an")
    e = quasigen.extract_split_nps(doc.sentences[1])[0]
    inst = quasigen.synthesize_pair(doc, e, 0)
    assert inst.anaphor_text == "the obstruction"


def test_multiple_extractions_ordered_by_np_start():
    text = (
        "(S (NP (NP (NN obstruction)) (PP (IN of) (NP (NN justice)))) "
        "(VP (VBD hurt) (NP (NP (DT the) (NN roof)) (PP (IN of) (NP (NN building))))) (. .))\n"
        "(S (NP (NN justice)) (VP (VBD prevailed) (PP (IN in) (NP (DT the) (NN building)))) (. .))\n"
    )
    doc = treebank.parse_ptb(text, "multi")
    extractions = quasigen.extract_split_nps(doc.sentences[0])
    assert len(extractions) == 2
    assert extractions[0].np_span[0] < extractions[1].np_span[0]


# ---------------------------------------------------------------------------
# Document- and corpus-level generation


def test_generate_for_document_counts(fig2_doc):
    instances, stats = quasigen.generate_for_document(fig2_doc)
    assert stats.documents == 1
    assert stats.extractions == 1
    assert stats.emitted == len(instances) == 1


def test_generate_counts_rejections():
    doc = load_doc("poss")
    single = _single_sentence_doc(doc.sentences[1])
    instances, stats = quasigen.generate_for_document(single)
    assert instances == []
    assert stats.rejections == {"no_source_sentence": 1}


def test_generate_corpus_empty():
    instances, stats = quasigen.generate_corpus([])
    assert instances == []
    assert stats.documents == 0
    assert stats.emitted == 0


def _run(trees_dir, tmp_path, name, workers):
    out = tmp_path / f"{name}.jsonl"
    stats = tmp_path / f"{name}.stats.json"
    quasigen.run_generation(trees_dir, out, stats_path=stats, workers=workers)
    return out, stats


def test_run_generation_deterministic_and_worker_invariant(desk_corpus, tmp_path):
    out1, stats1 = _run(desk_corpus, tmp_path, "a", workers=1)
    out2, _ = _run(desk_corpus, tmp_path, "b", workers=1)
    out8, _ = _run(desk_corpus, tmp_path, "c", workers=8)
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes() == out8.read_bytes()


def test_desk_corpus_count_matches_oracle(desk_corpus, tmp_path):
    out, stats_path = _run(desk_corpus, tmp_path, "count", workers=1)
    emitted = sum(1 for line in out.read_text().splitlines() if line.strip())
    stats = json.loads(stats_path.read_text())
    assert stats["emitted"] == emitted
    assert emitted == oracle_instance_count(desk_corpus)
    assert emitted > 0


def test_desk_corpus_instances_satisfy_invariants(desk_corpus, tmp_path):
    out, _ = _run(desk_corpus, tmp_path, "inv", workers=1)
    docs = {
        p.stem: treebank.parse_ptb(p.read_text(encoding="utf-8"), p.stem)
        for p in sorted(desk_corpus.iterdir())
    }
    checked = 0
    for line in out.read_text().splitlines():
        inst = quasigen.QuasiBridgingInstance.from_json(json.loads(line))
        context = inst.context
        # recorded spans match their texts
        assert context[inst.anaphor_char_start : inst.anaphor_char_end] == inst.anaphor_text
        assert (
            context[inst.antecedent_char_start : inst.antecedent_char_end]
            == inst.antecedent_text
        )
        # antecedent in the first sentence, anaphor in the second
        assert inst.antecedent_char_end <= len(inst.s_y)
        assert inst.anaphor_char_start >= len(inst.s_y) + 1
        # the source sentence mentions the antecedent head but not the anaphor head
        s_y_tokens = {t.lower() for t, _, _ in treebank.ptb_tokenize(inst.s_y)}
        x_head = treebank.ptb_tokenize(inst.anaphor_text)[-1][0].lower()
        y_head = treebank.ptb_tokenize(inst.antecedent_text)[-1][0].lower()
        assert y_head in s_y_tokens
        assert x_head not in s_y_tokens
        # single contiguous token edit against the original sentence
        rewritten = [t for t, _, _ in treebank.ptb_tokenize(inst.s_x)]
        assert any(
            _is_rewrite_of([t.text for t in s.tokens], rewritten, x_head)
            for s in docs[inst.doc_id].sentences
        ), f"no source sentence rewrites to {inst.s_x!r}"
        checked += 1
    assert checked > 0


def _is_rewrite_of(original, rewritten, x_head):
    """True when rewritten = original with one token span replaced by
    "the" + content ending in x_head."""
    for a in range(len(original)):
        if rewritten[:a] != original[:a]:
            break
        for b in range(a, len(original)):
            tail = original[b + 1 :]
            mid_len = len(rewritten) - a - len(tail)
            if mid_len < 2:
                continue
            middle = rewritten[a : a + mid_len]
            if (
                middle[0] == "the"
                and middle[-1].lower() == x_head
                and rewritten[a + mid_len :] == tail
            ):
                return True
    return False


def test_select_source_is_distance_minimizer(desk_corpus):
    for path in sorted(desk_corpus.iterdir())[:10]:
        doc = treebank.parse_ptb(path.read_text(encoding="utf-8"), path.stem)
        for sentence in doc.sentences:
            for e in quasigen.extract_split_nps(sentence):
                got = quasigen.select_source_sentence(doc, sentence.index, e)
                y_head = sentence.tokens[e.antecedent_span[1]].text.lower()
                x_head = sentence.tokens[e.anaphor_span[1]].text.lower()
                valid = [
                    j
                    for j, other in enumerate(doc.sentences)
                    if j != sentence.index
                    and any(t.text.lower() == y_head for t in other.tokens)
                    and not any(t.text.lower() == x_head for t in other.tokens)
                ]
                if not valid:
                    assert got is None
                else:
                    assert got in valid
                    best = min(abs(j - sentence.index) for j in valid)
                    assert abs(got - sentence.index) == best
                    # earlier sentence wins ties
                    if sentence.index - best in valid:
                        assert got == sentence.index - best


# ---------------------------------------------------------------------------
# Audit sampling


@pytest.fixture()
def instances_file(fig2_doc, tmp_path):
    doc_multi = load_doc("tie")
    instances, _ = quasigen.generate_corpus([fig2_doc, doc_multi])
    path = tmp_path / "instances.jsonl"
    with path.open("w") as handle:
        for inst in instances:
            handle.write(json.dumps(inst.to_json()) + "\n")
    return path, len(instances)


def test_audit_sample_deterministic(instances_file, tmp_path):
    path, count = instances_file
    out1, out2 = tmp_path / "a1.tsv", tmp_path / "a2.tsv"
    quasigen.sample_for_audit(path, out1, n=count, seed=7)
    quasigen.sample_for_audit(path, out2, n=count, seed=7)
    assert out1.read_bytes() == out2.read_bytes()


def test_audit_sample_empty(instances_file, tmp_path):
    path, _ = instances_file
    out = tmp_path / "empty.tsv"
    quasigen.sample_for_audit(path, out, n=0, seed=1)
    lines = out.read_text().splitlines()
    assert lines == ["\t".join(quasigen.AUDIT_COLUMNS)]


def test_audit_sample_exhaustive(instances_file, tmp_path):
    path, count = instances_file
    out = tmp_path / "all.tsv"
    quasigen.sample_for_audit(path, out, n=count, seed=3)
    rows = out.read_text().splitlines()[1:]
    assert len(rows) == count
    for row in rows:
        assert row.endswith("\t")  # empty score column


def test_audit_sample_oversized_errors(instances_file, tmp_path):
    path, count = instances_file
    with pytest.raises(ValueError):
        quasigen.sample_for_audit(path, tmp_path / "x.tsv", n=count + 1, seed=1)
