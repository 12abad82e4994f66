import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgeqa import decode, qagen, treebank
from bridgeqa.errors import DecodeError, ReconciliationError

from conftest import FIXTURES


# ---------------------------------------------------------------------------
# Brute-force oracle: enumerate every span, filter, stable-sort, truncate


def oracle_decode(record, context, anaphor_start, k, l, prune):
    pruned = {w.lower() for w in prune}
    tokens = record.context_tokens
    spans = []
    for i in range(len(tokens)):
        for j in range(i, len(tokens)):
            if tokens[j].char_end > anaphor_start:
                continue
            if j - i + 1 > l:
                continue
            if all(tokens[t].text.lower() in pruned for t in range(i, j + 1)):
                continue
            spans.append(
                (record.start_scores[i] + record.end_scores[j], i, j - i)
            )
    spans.sort(key=lambda s: (-s[0], s[1], s[2]))
    out = []
    for score, i, length in spans[:k]:
        j = i + length
        out.append(
            decode.SpanPrediction(
                text=context[tokens[i].char_start : tokens[j].char_end],
                char_start=tokens[i].char_start,
                char_end=tokens[j].char_end,
                score=score,
                token_span=(i, j),
            )
        )
    return out


_VOCAB = ["alpha", "bravo", "the", "a", "an", "this", "that", "delta", "echo", "week's", "9"]


def make_record(rng: random.Random, instance_id="r", max_tokens=30):
    n = rng.randint(1, max_tokens)
    words = [rng.choice(_VOCAB) for _ in range(n)]
    tokens = []
    pos = 0
    for word in words:
        tokens.append(decode.ContextToken(word, pos, pos + len(word)))
        pos += len(word) + 1
    context = " ".join(words)
    record = decode.LogitsRecord(
        instance_id=instance_id,
        context_tokens=tuple(tokens),
        start_scores=tuple(round(rng.uniform(-5, 5), 6) for _ in tokens),
        end_scores=tuple(round(rng.uniform(-5, 5), 6) for _ in tokens),
    )
    anaphor_token = rng.randrange(n)
    return record, context, tokens[anaphor_token].char_start


# ---------------------------------------------------------------------------
# Worked examples


def _six_token_record(start_scores, end_scores):
    words = ["alpha", "bravo", "delta", "echo", "golf", "hotel"]
    tokens, pos = [], 0
    for word in words:
        tokens.append(decode.ContextToken(word, pos, pos + len(word)))
        pos += len(word) + 1
    return (
        decode.LogitsRecord(
            instance_id="six",
            context_tokens=tuple(tokens),
            start_scores=tuple(start_scores),
            end_scores=tuple(end_scores),
        ),
        " ".join(words),
        tokens[5].char_start,
    )


def test_decode_top_span():
    record, context, anaphor = _six_token_record(
        [0.1, 2.0, 0.3, 0.0, 0.0, 0.0], [0.0, 1.5, 0.4, 0.0, 0.0, 0.0]
    )
    spans = decode.decode_spans(record, context, anaphor, k=20, l=5)
    assert spans[0].token_span == (1, 1)
    assert spans[0].score == pytest.approx(3.5)
    assert spans[0].text == "bravo"
    assert spans == oracle_decode(record, context, anaphor, 20, 5, decode.DEFAULT_PRUNE_LIST)


def test_anaphor_at_first_token_yields_nothing():
    record, context, _ = _six_token_record([0.0] * 6, [0.0] * 6)
    assert decode.decode_spans(record, context, 0) == []


def test_prune_list_saturation():
    words = ["the", "a", "an", "this", "that", "hotel"]
    tokens, pos = [], 0
    for word in words:
        tokens.append(decode.ContextToken(word, pos, pos + len(word)))
        pos += len(word) + 1
    record = decode.LogitsRecord(
        instance_id="p",
        context_tokens=tuple(tokens),
        start_scores=(1.0,) * 6,
        end_scores=(1.0,) * 6,
    )
    context = " ".join(words)
    assert decode.decode_spans(record, context, tokens[5].char_start) == []


def test_unlocatable_anaphor_errors():
    record, context, _ = _six_token_record([0.0] * 6, [0.0] * 6)
    with pytest.raises(DecodeError):
        decode.decode_spans(record, context, len(context) + 5)


def test_best_answer_rules():
    record, context, anaphor = _six_token_record(
        [0.1, 2.0, 0.3, 0.0, 0.0, 0.0], [0.0, 1.5, 0.4, 0.0, 0.0, 0.0]
    )
    spans = decode.decode_spans(record, context, anaphor)
    assert decode.best_answer(spans).token_span == (1, 1)
    assert decode.best_answer([]) is None
    assert decode.best_answer(spans, no_answer_score=99.0, policy=decode.NO_ANSWER_BY_SCORE) is None
    assert (
        decode.best_answer(spans, no_answer_score=99.0, policy=decode.NO_ANSWER_IF_EMPTY)
        is not None
    )


def test_equal_scores_prefer_earlier_start():
    record, context, anaphor = _six_token_record([0.0] * 6, [0.0] * 6)
    spans = decode.decode_spans(record, context, anaphor, k=3, l=1)
    assert [s.token_span for s in spans] == [(0, 0), (1, 1), (2, 2)]


# ---------------------------------------------------------------------------
# Oracle equivalence and invariants


def test_oracle_equivalence_seeded_sweep():
    rng = random.Random(411)
    for trial in range(250):
        record, context, anaphor = make_record(rng, instance_id=f"t{trial}")
        got = decode.decode_spans(record, context, anaphor)
        want = oracle_decode(record, context, anaphor, 20, 5, decode.DEFAULT_PRUNE_LIST)
        assert got == want


@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=1, max_value=8),
       st.integers(min_value=1, max_value=7))
@settings(max_examples=150)
def test_oracle_equivalence_any_k_l(seed, k, l):
    rng = random.Random(seed)
    record, context, anaphor = make_record(rng)
    got = decode.decode_spans(record, context, anaphor, k=k, l=l)
    want = oracle_decode(record, context, anaphor, k, l, decode.DEFAULT_PRUNE_LIST)
    assert got == want


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=150)
def test_decode_invariants(seed):
    rng = random.Random(seed)
    record, context, anaphor = make_record(rng)
    spans = decode.decode_spans(record, context, anaphor)
    assert len(spans) <= 20
    for span in spans:
        assert span.char_end <= anaphor
        assert span.token_span[1] - span.token_span[0] + 1 <= 5
        assert context[span.char_start : span.char_end] == span.text
        i, j = span.token_span
        assert span.score == pytest.approx(record.start_scores[i] + record.end_scores[j])
    assert all(a.score >= b.score for a, b in zip(spans, spans[1:]))


@given(st.integers(min_value=0, max_value=2**32 - 1), st.floats(-10, 10, allow_nan=False))
@settings(max_examples=100)
def test_constant_start_shift_preserves_ranking(seed, c):
    rng = random.Random(seed)
    record, context, anaphor = make_record(rng)
    base = decode.decode_spans(record, context, anaphor)
    shifted_record = decode.LogitsRecord(
        instance_id=record.instance_id,
        context_tokens=record.context_tokens,
        start_scores=tuple(s + c for s in record.start_scores),
        end_scores=record.end_scores,
    )
    shifted = decode.decode_spans(shifted_record, context, anaphor)
    assert [s.token_span for s in shifted] == [s.token_span for s in base]
    for a, b in zip(shifted, base):
        assert a.score == pytest.approx(b.score + c)


# ---------------------------------------------------------------------------
# Batch decoding


@pytest.fixture()
def small_dataset(tmp_path):
    docs = {
        p.stem: treebank.parse_ptb(p.read_text(encoding="utf-8"), p.stem)
        for p in sorted((FIXTURES / "qa_corpus" / "trees").iterdir())
    }
    annotations = qagen.read_annotations(FIXTURES / "qa_corpus" / "annotations.tsv", docs)
    instances = [qagen.build_instance(docs[a.doc_id], a) for a in annotations]
    dataset = tmp_path / "dataset.json"
    qagen.emit_squad_json(instances, dataset)
    records = decode.make_random_logits(instances, seed=5)
    logits = tmp_path / "logits.jsonl"
    decode.write_logits(records, logits)
    return dataset, logits, instances


def test_batch_decode_aligns_ids(small_dataset, tmp_path):
    dataset, logits, instances = small_dataset
    out = tmp_path / "preds.jsonl"
    count = decode.batch_decode(logits, dataset, out)
    assert count == len(instances)
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["instance_id"] for r in rows] == [i.id for i in instances]
    for row in rows:
        assert len(row["predictions"]) <= 20


def test_batch_decode_order_insensitive(small_dataset, tmp_path):
    dataset, logits, _ = small_dataset
    out1 = tmp_path / "p1.jsonl"
    decode.batch_decode(logits, dataset, out1)
    shuffled = tmp_path / "shuffled.jsonl"
    lines = logits.read_text().splitlines()
    shuffled.write_text("\n".join(reversed(lines)) + "\n")
    out2 = tmp_path / "p2.jsonl"
    decode.batch_decode(shuffled, dataset, out2)
    assert out1.read_bytes() == out2.read_bytes()


def test_batch_decode_reconciliation_error(small_dataset, tmp_path):
    dataset, logits, _ = small_dataset
    truncated = tmp_path / "missing.jsonl"
    truncated.write_text("".join(logits.read_text().splitlines(keepends=True)[1:]))
    with pytest.raises(ReconciliationError):
        decode.batch_decode(truncated, dataset, tmp_path / "x.jsonl")


def test_batch_decode_matches_oracle_on_synthetic_corpus(tmp_path):
    rng = random.Random(99)
    records, contexts, anaphors = [], {}, {}
    instances = []
    for i in range(200):
        record, context, anaphor = make_record(rng, instance_id=f"synth:{i}")
        records.append(record)
        contexts[record.instance_id] = context
        anaphors[record.instance_id] = anaphor
        anaphor_token = next(
            t for t in record.context_tokens if t.char_start == anaphor
        )
        instances.append(
            qagen.QAInstance(
                id=record.instance_id,
                doc_id="synth",
                question="q of what?",
                context=context,
                anaphor_char_start=anaphor,
                anaphor_char_end=anaphor_token.char_end,
                anaphor_head=anaphor_token.text,
                answers=(qagen.Answer(text=context[:1], char_start=0, origin="gold"),),
                is_no_answer=False,
            )
        )
    dataset = tmp_path / "synth.json"
    qagen.emit_squad_json(instances, dataset)
    logits = tmp_path / "synth_logits.jsonl"
    decode.write_logits(records, logits)
    out = tmp_path / "synth_preds.jsonl"
    decode.batch_decode(logits, dataset, out)
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    for row, record in zip(rows, records):
        want = oracle_decode(
            record,
            contexts[record.instance_id],
            anaphors[record.instance_id],
            20,
            5,
            decode.DEFAULT_PRUNE_LIST,
        )
        assert row["predictions"] == [s.to_json() for s in want]


def test_batch_decode_score_threshold_policy(small_dataset, tmp_path):
    dataset, _, instances = small_dataset
    # a no-answer score above any possible span score forces empty lists
    records = decode.make_random_logits(instances, seed=5, with_no_answer=True)
    boosted = [
        decode.LogitsRecord(
            instance_id=r.instance_id,
            context_tokens=r.context_tokens,
            start_scores=r.start_scores,
            end_scores=r.end_scores,
            no_answer_score=100.0,
        )
        for r in records
    ]
    logits = tmp_path / "boosted.jsonl"
    decode.write_logits(boosted, logits)
    out = tmp_path / "preds.jsonl"
    decode.batch_decode(logits, dataset, out, no_answer_policy=decode.NO_ANSWER_BY_SCORE)
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert all(r["predictions"] == [] for r in rows)
    # default policy ignores the score
    out2 = tmp_path / "preds_default.jsonl"
    decode.batch_decode(logits, dataset, out2)
    rows = [json.loads(line) for line in out2.read_text().splitlines()]
    assert all(r["predictions"] for r in rows)
