"""Acceptance tests for the model adapter.

Both criteria drive the trained model's outputs through the main
pipeline's external surfaces: its `decode` subcommand consumes the
exported logits, and its `validate` subcommand cross-checks the logits
schema against the dataset.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from model_adapter.data import read_dataset
from model_adapter.model import TrainingConfig, finetune, init_base_checkpoint, predict
from model_adapter.tokenizer import tokenize_with_offsets

FIXTURES = Path(__file__).parent / "fixtures"
MEMORIZATION = FIXTURES / "memorization.json"


def run_pipeline_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "bridgeqa", *[str(a) for a in args]],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def overfit_run(tmp_path_factory):
    """Base init + memorization fine-tune + logits export, once per module."""
    work = tmp_path_factory.mktemp("overfit")
    base = work / "base"
    tuned = work / "tuned"
    logits = work / "logits.jsonl"
    init_base_checkpoint([MEMORIZATION], base, seed=0)
    config = TrainingConfig(
        learning_rate=3e-5, batch_size=1, epochs=20, base_checkpoint=str(base), seed=0
    )
    metadata = finetune(MEMORIZATION, base, tuned, config)
    predict(MEMORIZATION, tuned, logits)
    return work, logits, metadata


def test_overfit_recovers_all_gold_answers_via_pipeline_decode(overfit_run):
    work, logits, metadata = overfit_run
    assert metadata["metrics"]["final_loss"] < metadata["metrics"]["initial_loss"]

    predictions = work / "predictions.jsonl"
    run_pipeline_cli("decode", "--logits", logits, "--dataset", MEMORIZATION, "--out", predictions)

    gold = {}
    payload = json.loads(MEMORIZATION.read_text())
    for article in payload["data"]:
        for paragraph in article["paragraphs"]:
            qa = paragraph["qas"][0]
            gold[qa["id"]] = qa["answers"][0]["text"]

    rows = [json.loads(line) for line in predictions.read_text().splitlines()]
    assert len(rows) == 5
    for row in rows:
        assert row["predictions"], f"no prediction for {row['instance_id']}"
        top = row["predictions"][0]["text"]
        assert top == gold[row["instance_id"]], (
            f"{row['instance_id']}: top-1 {top!r} != gold {gold[row['instance_id']]!r}"
        )


def test_logits_alignment_and_schema(overfit_run):
    _work, logits, _metadata = overfit_run
    instances = {i.id: i for i in read_dataset(MEMORIZATION)}
    for line in logits.read_text().splitlines():
        record = json.loads(line)
        inst = instances[record["instance_id"]]
        words = tokenize_with_offsets(inst.context)
        assert len(record["context_tokens"]) == len(words)
        assert len(record["start_scores"]) == len(words)
        assert len(record["end_scores"]) == len(words)
        for token, (word, start, end) in zip(record["context_tokens"], words):
            assert (token["text"], token["char_start"], token["char_end"]) == (word, start, end)
            assert inst.context[start:end] == word

    proc = run_pipeline_cli("validate", logits, "--dataset", MEMORIZATION)
    assert "valid logits file" in proc.stdout
