"""Command-line entry points: init-base, finetune, predict."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import AdapterError
from .model import TrainingConfig, finetune, init_base_checkpoint, predict


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridgeqa-adapter",
        description=(
            "Fine-tune and serve a word-level span-QA transformer over "
            "bridgeqa datasets; exports logits for the constrained decoder."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-base", help="create a tiny randomly initialized base checkpoint")
    p.add_argument("--dataset", action="append", required=True,
                   help="dataset file(s) whose words form the vocabulary; repeatable")
    p.add_argument("--out", required=True)
    p.add_argument("--hidden-size", type=int, default=1280)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--intermediate-size", type=int, default=2560)
    p.add_argument("--max-positions", type=int, default=160)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--base", required=True, help="base or previously fine-tuned checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--learning-rate", type=float, default=3e-5)
    p.add_argument("--batch-size", type=int, default=24)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--max-sequence-tokens", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="export word-level logits for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "init-base":
            out = init_base_checkpoint(
                [Path(p) for p in args.dataset],
                Path(args.out),
                hidden_size=args.hidden_size,
                num_layers=args.layers,
                num_heads=args.heads,
                intermediate_size=args.intermediate_size,
                max_position_embeddings=args.max_positions,
                seed=args.seed,
            )
            print(f"init-base: checkpoint at {out}")
        elif args.command == "finetune":
            config = TrainingConfig(
                learning_rate=args.learning_rate,
                batch_size=args.batch_size,
                epochs=args.epochs,
                max_sequence_tokens=args.max_sequence_tokens,
                base_checkpoint=str(args.base),
                seed=args.seed,
            )
            metadata = finetune(Path(args.dataset), Path(args.base), Path(args.out), config)
            losses = metadata["metrics"]["epoch_losses"]
            print(f"finetune: loss {losses[0]} -> {losses[-1]} over {len(losses)} epochs -> {args.out}")
        elif args.command == "predict":
            count = predict(Path(args.dataset), Path(args.checkpoint), Path(args.out))
            print(f"predict: {count} records -> {args.out}")
        return 0
    except AdapterError as exc:
        print(f"error:adapter: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error:file-not-found: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
