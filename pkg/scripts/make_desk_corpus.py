#!/usr/bin/env python3
"""Generate a small synthetic treebank for desk-scale experiments.

Writes one bracketed-parse file per document.  Sentences mix prepositional
and possessive split-candidate NPs with plain sentences that mention the
candidate nouns, so quasi-bridging generation finds both source sentences
and rejection cases.  Output is fully determined by --seed.
"""

import argparse
import random
from pathlib import Path

X_NOUNS = [
    "obstruction", "cost", "price", "outcome", "chairman", "owner", "roof",
    "door", "engine", "margin", "review", "summary", "driver", "budget",
    "verdict", "blueprint",
]
Y_NOUNS = [
    "justice", "company", "city", "building", "market", "committee",
    "contract", "project", "harbor", "museum", "factory", "union",
]
PREPOSITIONS = ["of", "from", "in", "for", "with"]
VERBS = ["noted", "cited", "discussed", "reported", "examined", "praised", "questioned"]
SUBJECTS = [
    "(NP (PRP They))",
    "(NP (DT The) (NN analyst))",
    "(NP (NNS Critics))",
    "(NP (DT The) (NN board))",
    "(NP (NNS Reporters))",
]
PLAIN_VERBS = ["mattered", "prevailed", "struggled", "failed", "grew", "shrank"]


def prep_np(x: str, prep: str, y: str) -> str:
    return f"(NP (NP (DT the) (NN {x})) (PP (IN {prep}) (NP (NN {y}))))"


def poss_np(y: str, x: str) -> str:
    return f"(NP (NP (DT the) (NN {y}) (POS 's)) (NN {x}))"


def nested_np(x: str, y: str, z: str) -> str:
    # Y side embeds another NP: must be rejected by the extractor.
    return (
        f"(NP (NP (DT the) (NN {x})) (PP (IN of) "
        f"(NP (NP (DT the) (NN {y})) (PP (IN in) (NP (DT the) (NN {z}))))))"
    )


def pattern_sentence(rng: random.Random, np: str) -> str:
    return f"(S {rng.choice(SUBJECTS)} (VP (VBD {rng.choice(VERBS)}) {np}) (. .))"


def mention_sentence(rng: random.Random, noun: str) -> str:
    return f"(S (NP (DT The) (NN {noun})) (VP (VBD {rng.choice(PLAIN_VERBS)})) (. .))"


def filler_sentence(rng: random.Random) -> str:
    return f"(S {rng.choice(SUBJECTS)} (VP (VBD {rng.choice(PLAIN_VERBS)})) (. .))"


def make_document(rng: random.Random) -> str:
    sentences = []
    n_patterns = rng.randint(1, 4)
    used_y = []
    for _ in range(n_patterns):
        x = rng.choice(X_NOUNS)
        y = rng.choice(Y_NOUNS)
        used_y.append(y)
        roll = rng.random()
        if roll < 0.45:
            np = prep_np(x, rng.choice(PREPOSITIONS), y)
        elif roll < 0.8:
            np = poss_np(y, x)
        else:
            np = nested_np(x, y, rng.choice(Y_NOUNS))
        sentences.append(pattern_sentence(rng, np))
    for y in used_y:
        if rng.random() < 0.85:
            sentences.append(mention_sentence(rng, y))
    for _ in range(rng.randint(1, 4)):
        sentences.append(filler_sentence(rng))
    rng.shuffle(sentences)
    return "\n".join(sentences) + "\n"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--docs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.docs):
        rng = random.Random(f"{args.seed}:{i}")
        (out / f"doc{i:03d}.mrg").write_text(make_document(rng), encoding="utf-8")
    print(f"wrote {args.docs} documents to {out}")


if __name__ == "__main__":
    main()
