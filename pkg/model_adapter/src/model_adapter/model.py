"""Model construction, fine-tuning, and logits export.

Checkpoints are directories: a standard transformers QA model plus the
word vocabulary and an adapter_metadata.json recording the training
configuration, the sha256 of every dataset in the fine-tuning chain, and
per-epoch losses, so any run is reproducible from its checkpoint alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import torch
from transformers import BertConfig, BertForQuestionAnswering

from .data import (
    AdapterError,
    PackedExample,
    dataset_sha256,
    pack_instance,
    read_dataset,
)
from .tokenizer import Vocab

VOCAB_FILE = "word_vocab.json"
METADATA_FILE = "adapter_metadata.json"


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 3e-5
    batch_size: int = 24
    epochs: int = 5
    max_sequence_tokens: int = 128
    base_checkpoint: str = ""
    seed: int = 0

    def validated(self) -> "TrainingConfig":
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise AdapterError("learning rate, batch size, and epochs must be positive")
        if self.max_sequence_tokens < 8:
            raise AdapterError("max_sequence_tokens is too small to pack any instance")
        return self


def _write_metadata(path: Path, metadata: dict) -> None:
    (Path(path) / METADATA_FILE).write_text(
        json.dumps(metadata, indent=2) + "\n", encoding="utf-8"
    )


def read_metadata(checkpoint: Path) -> dict:
    return json.loads((Path(checkpoint) / METADATA_FILE).read_text(encoding="utf-8"))


def load_checkpoint(checkpoint: Path) -> tuple[BertForQuestionAnswering, Vocab, dict]:
    checkpoint = Path(checkpoint)
    if not checkpoint.is_dir():
        raise AdapterError(f"checkpoint directory not found: {checkpoint}")
    model = BertForQuestionAnswering.from_pretrained(checkpoint)
    vocab = Vocab.load(checkpoint / VOCAB_FILE)
    return model, vocab, read_metadata(checkpoint)


def init_base_checkpoint(
    dataset_paths: list,
    out_dir: Path,
    hidden_size: int = 1280,
    num_layers: int = 2,
    num_heads: int = 8,
    intermediate_size: int = 2560,
    max_position_embeddings: int = 160,
    seed: int = 0,
) -> Path:
    """Create a randomly initialized base checkpoint with a fresh task head.

    The vocabulary is built from the given datasets' questions and
    contexts; the span-scoring head starts at zero so fine-tuning signal
    accumulates from a neutral baseline.
    """
    texts = []
    for path in dataset_paths:
        for inst in read_dataset(path):
            texts.append(inst.question)
            texts.append(inst.context)
    vocab = Vocab.build(texts)

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=num_heads,
        intermediate_size=intermediate_size,
        max_position_embeddings=max_position_embeddings,
    )
    model = BertForQuestionAnswering(config)
    torch.nn.init.zeros_(model.qa_outputs.weight)
    torch.nn.init.zeros_(model.qa_outputs.bias)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    vocab.save(out_dir / VOCAB_FILE)
    _write_metadata(
        out_dir,
        {
            "kind": "base",
            "seed": seed,
            "vocab_size": len(vocab),
            "vocab_datasets": [dataset_sha256(p) for p in dataset_paths],
            "dataset_lineage": [],
            "metrics": {},
        },
    )
    return out_dir


def _batches(examples: list, batch_size: int):
    for i in range(0, len(examples), batch_size):
        yield examples[i : i + batch_size]


def _mean_loss(model, examples, batch_size: int, pad_id: int) -> float:
    model.eval()
    total, steps = 0.0, 0
    with torch.no_grad():
        for batch in _batches(examples, batch_size):
            ids, types, mask, starts, ends = _collate(batch, pad_id)
            out = model(
                input_ids=ids,
                token_type_ids=types,
                attention_mask=mask,
                start_positions=starts,
                end_positions=ends,
            )
            total += float(out.loss)
            steps += 1
    model.train()
    return total / steps


def _collate(batch: list, pad_id: int):
    width = max(len(ex.input_ids) for ex in batch)
    ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
    types = torch.zeros((len(batch), width), dtype=torch.long)
    mask = torch.zeros((len(batch), width), dtype=torch.long)
    starts = torch.zeros(len(batch), dtype=torch.long)
    ends = torch.zeros(len(batch), dtype=torch.long)
    for row, ex in enumerate(batch):
        n = len(ex.input_ids)
        ids[row, :n] = torch.tensor(ex.input_ids)
        types[row, :n] = torch.tensor(ex.token_type_ids)
        mask[row, :n] = 1
        starts[row] = ex.start_position
        ends[row] = ex.end_position
    return ids, types, mask, starts, ends


def finetune(dataset_path: Path, base_checkpoint: Path, out_dir: Path, config: TrainingConfig) -> dict:
    """Fine-tune the base checkpoint on a dataset and save a new checkpoint.

    Chaining runs (pre-train on one corpus, fine-tune on another) is a
    second finetune call whose base is the first call's output; the full
    dataset lineage is carried in the checkpoint metadata.
    """
    config = config.validated()
    model, vocab, base_metadata = load_checkpoint(base_checkpoint)
    instances = read_dataset(dataset_path)
    max_tokens = min(config.max_sequence_tokens, model.config.max_position_embeddings)
    examples = [
        pack_instance(inst, vocab, max_tokens, with_answer=True)
        for inst in instances
    ]
    truncated = sum(1 for ex in examples if ex.truncated_words)

    torch.manual_seed(config.seed)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    initial_loss = _mean_loss(model, examples, config.batch_size, vocab.pad_id)
    epoch_losses = []
    first_step_loss = last_step_loss = None
    for _epoch in range(config.epochs):
        total, steps = 0.0, 0
        for batch in _batches(examples, config.batch_size):
            ids, types, mask, starts, ends = _collate(batch, vocab.pad_id)
            out = model(
                input_ids=ids,
                token_type_ids=types,
                attention_mask=mask,
                start_positions=starts,
                end_positions=ends,
            )
            out.loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            step_loss = float(out.loss.detach())
            if first_step_loss is None:
                first_step_loss = round(step_loss, 6)
            last_step_loss = round(step_loss, 6)
            total += step_loss
            steps += 1
        epoch_losses.append(round(total / steps, 6))
    final_loss = _mean_loss(model, examples, config.batch_size, vocab.pad_id)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    vocab.save(out_dir / VOCAB_FILE)
    metadata = {
        "kind": "finetuned",
        "training_config": {**asdict(config), "base_checkpoint": str(base_checkpoint)},
        "dataset_sha256": dataset_sha256(dataset_path),
        "dataset_lineage": base_metadata.get("dataset_lineage", [])
        + [dataset_sha256(dataset_path)],
        "metrics": {
            "initial_loss": round(initial_loss, 6),
            "final_loss": round(final_loss, 6),
            "first_step_loss": first_step_loss,
            "last_step_loss": last_step_loss,
            "epoch_losses": epoch_losses,
            "instances": len(examples),
            "truncated_instances": truncated,
        },
    }
    _write_metadata(out_dir, metadata)
    return metadata


def predict(dataset_path: Path, checkpoint: Path, out_path: Path) -> int:
    """Write one word-level logits record per dataset instance.

    The tokenizer is word-level, so each context word owns exactly one
    start/end score pair (the first-sub-token reduction is the identity);
    the [CLS] span score is exported as the no-answer score.
    """
    model, vocab, _metadata = load_checkpoint(checkpoint)
    model.eval()
    instances = read_dataset(dataset_path)
    count = 0
    with Path(out_path).open("w", encoding="utf-8") as handle:
        for inst in instances:
            example = pack_instance(inst, vocab, model.config.max_position_embeddings, with_answer=False)
            if example.truncated_words:
                raise AdapterError(
                    f"instance {inst.id}: context exceeds the model's position budget"
                )
            ids = torch.tensor([example.input_ids])
            types = torch.tensor([example.token_type_ids])
            with torch.no_grad():
                out = model(input_ids=ids, token_type_ids=types)
            start = out.start_logits[0]
            end = out.end_logits[0]
            record = {
                "format_version": 1,
                "instance_id": inst.id,
                "context_tokens": [
                    {"text": text, "char_start": s, "char_end": e}
                    for text, s, e in example.context_words
                ],
                "start_scores": [
                    round(float(start[pos]), 6) for pos in example.context_word_positions
                ],
                "end_scores": [
                    round(float(end[pos]), 6) for pos in example.context_word_positions
                ],
                "no_answer_score": round(float(start[0] + end[0]), 6),
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
