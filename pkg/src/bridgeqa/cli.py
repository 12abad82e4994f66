"""Command-line pipeline driver.

Subcommands: quasi-gen, audit-sample, build-qa, decode, map-mentions,
score, compare, validate, mock-logits, extract-mentions.  Settings are
layered: built-in defaults, then an optional JSON config file, then
command-line flags.  All failures exit nonzero with a single
machine-parsable line of the form ``error:<category>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import decode as decode_mod
from . import formats, mentionmap, quasigen, scoring
from . import qagen
from .errors import BridgeQAError, ConfigError, InputError, ReconciliationError
from .treebank import parse_ptb


@dataclass(frozen=True)
class PipelineConfig:
    k: int = decode_mod.DEFAULT_TOP_K
    l: int = decode_mod.DEFAULT_MAX_SPAN_TOKENS
    prune_list: tuple = decode_mod.DEFAULT_PRUNE_LIST
    time_lexicon: frozenset = mentionmap.DEFAULT_TIME_LEXICON
    window_previous: int = 2
    include_first_sentence: bool = True
    no_answer_policy: str = decode_mod.NO_ANSWER_IF_EMPTY
    seed: int = 0
    workers: int = 1

    def validated(self) -> "PipelineConfig":
        if self.k < 1 or self.l < 1:
            raise ConfigError(f"k and l must be >= 1 (got k={self.k}, l={self.l})")
        if self.window_previous < 0:
            raise ConfigError("window_previous must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.no_answer_policy not in (
            decode_mod.NO_ANSWER_IF_EMPTY,
            decode_mod.NO_ANSWER_BY_SCORE,
        ):
            raise ConfigError(f"unknown no-answer policy {self.no_answer_policy!r}")
        return self


def _read_word_list(path: Path) -> tuple:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"word list not found: {path}")
    words = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return tuple(words)


def load_config(path: Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    config = PipelineConfig()
    updates = {}
    simple = {
        "k",
        "l",
        "window_previous",
        "include_first_sentence",
        "no_answer_policy",
        "seed",
        "workers",
    }
    for key, value in raw.items():
        if key in simple:
            updates[key] = value
        elif key == "prune_list":
            updates["prune_list"] = tuple(value)
        elif key == "prune_list_path":
            updates["prune_list"] = _read_word_list(value)
        elif key == "time_lexicon_path":
            updates["time_lexicon"] = mentionmap.load_time_lexicon(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return replace(config, **updates)


def _resolve_config(args) -> PipelineConfig:
    config = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    updates = {}
    for flag, key in (
        ("k", "k"),
        ("l", "l"),
        ("window_previous", "window_previous"),
        ("seed", "seed"),
        ("workers", "workers"),
        ("no_answer_policy", "no_answer_policy"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            updates[key] = value
    if getattr(args, "prune_list", None):
        updates["prune_list"] = _read_word_list(args.prune_list)
    if getattr(args, "time_lexicon", None):
        updates["time_lexicon"] = mentionmap.load_time_lexicon(args.time_lexicon)
    if getattr(args, "no_first_sentence", False):
        updates["include_first_sentence"] = False
    return replace(config, **updates).validated()


def _load_documents(trees_dir: Path) -> dict:
    trees_dir = Path(trees_dir)
    if not trees_dir.is_dir():
        raise InputError(f"tree directory not found: {trees_dir}")
    documents = {}
    for path in sorted(p for p in trees_dir.iterdir() if p.is_file()):
        documents[path.stem] = parse_ptb(path.read_text(encoding="utf-8"), doc_id=path.stem)
    return documents


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_quasi_gen(args) -> int:
    config = _resolve_config(args)
    prepositions = None
    if args.prepositions:
        prepositions = frozenset(w.lower() for w in _read_word_list(args.prepositions))
    stats = quasigen.run_generation(
        Path(args.trees),
        Path(args.out),
        stats_path=Path(args.stats) if args.stats else None,
        prepositions=prepositions,
        workers=config.workers,
    )
    print(f"quasi-gen: {stats.emitted} instances from {stats.documents} documents -> {args.out}")
    return 0


def _cmd_audit_sample(args) -> int:
    config = _resolve_config(args)
    n = quasigen.sample_for_audit(Path(args.instances), Path(args.out), args.n, config.seed)
    print(f"audit-sample: wrote {n} rows -> {args.out}")
    return 0


def _cmd_build_qa(args) -> int:
    config = _resolve_config(args)
    if bool(args.annotations) == bool(args.quasi):
        raise ConfigError("build-qa needs exactly one of --annotations/--trees or --quasi")
    if args.annotations:
        if not args.trees:
            raise ConfigError("--annotations requires --trees")
        documents = _load_documents(Path(args.trees))
        annotations = qagen.read_annotations(Path(args.annotations), documents)
        instances = [
            qagen.build_instance(
                documents[ann.doc_id],
                ann,
                previous=config.window_previous,
                include_first=config.include_first_sentence,
            )
            for ann in annotations
        ]
    else:
        instances = qagen.quasi_file_to_instances(quasigen.read_instances(Path(args.quasi)))
    stats = qagen.emit_squad_json(instances, Path(args.out))
    if args.stats:
        Path(args.stats).write_text(
            json.dumps(stats.to_json(), indent=2) + "\n", encoding="utf-8"
        )
    print(
        f"build-qa: {stats.anaphors} anaphors, {stats.qa_pairs} qa pairs, "
        f"{stats.no_answer} no-answer -> {args.out}"
    )
    return 0


def _cmd_decode(args) -> int:
    config = _resolve_config(args)
    count = decode_mod.batch_decode(
        Path(args.logits),
        Path(args.dataset),
        Path(args.out),
        k=config.k,
        l=config.l,
        prune_list=config.prune_list,
        no_answer_policy=config.no_answer_policy,
    )
    print(f"decode: {count} instances -> {args.out}")
    return 0


def _cmd_map_mentions(args) -> int:
    config = _resolve_config(args)
    instances = {inst.id: inst for inst in qagen.load_squad_json(Path(args.dataset))}
    mentions = mentionmap.read_mentions(Path(args.mentions))
    rows = decode_mod.read_predictions(Path(args.predictions))
    unknown = sorted({row[0] for row in rows} - instances.keys())
    if unknown:
        raise ReconciliationError(f"predictions reference unknown instance ids: {unknown[:10]}")
    out_path = Path(args.out)
    mapped_count = 0
    with out_path.open("w", encoding="utf-8") as handle:
        for instance_id, spans, record in rows:
            inst = instances[instance_id]
            candidates = mentionmap.project_candidates(
                mentions, inst.doc_id, inst.context_sentences, inst.anaphor_char_start
            )
            winner, mappings = mentionmap.select_antecedent(
                spans, candidates, inst.anaphor_head, config.time_lexicon
            )
            record["mapped"] = [
                {
                    "mention_id": m.mention.record.mention_id,
                    "text": m.mention.record.text,
                    "score": m.score,
                }
                for m in mappings
            ]
            if winner is None:
                record["selected_mention"] = None
            else:
                mapped_count += 1
                mention = winner.mention.record
                record["selected_mention"] = {
                    "mention_id": mention.mention_id,
                    "text": mention.text,
                    "sentence_index": mention.sentence_index,
                    "token_span": list(mention.token_span),
                    "score": winner.score,
                }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"map-mentions: {mapped_count}/{len(rows)} instances mapped -> {args.out}")
    return 0


def _cmd_score(args) -> int:
    instances = qagen.load_squad_json(Path(args.dataset))
    entries = scoring.read_prediction_entries(Path(args.predictions))
    report = scoring.score(instances, entries)
    if args.out:
        scoring.write_report(report, Path(args.out))
    if args.mode in ("strict", "both"):
        print(f"strict accuracy  {report.accuracy_strict:.4f} ({report.correct_strict}/{report.total_anaphors})")
    if args.mode in ("lenient", "both"):
        print(f"lenient accuracy {report.accuracy_lenient:.4f} ({report.correct_lenient}/{report.total_anaphors})")
    return 0


def _cmd_compare(args) -> int:
    report_a = scoring.EvalReport.from_json(
        json.loads(Path(args.report_a).read_text(encoding="utf-8"))
    )
    report_b = scoring.EvalReport.from_json(
        json.loads(Path(args.report_b).read_text(encoding="utf-8"))
    )
    diff = scoring.compare_reports(report_a, report_b)
    text = json.dumps(diff, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cmd_validate(args) -> int:
    kind, count = formats.validate_file(
        Path(args.file),
        kind=args.kind,
        dataset_path=Path(args.dataset) if args.dataset else None,
    )
    print(f"ok: {args.file}: valid {kind} file with {count} records")
    return 0


def _cmd_mock_logits(args) -> int:
    config = _resolve_config(args)
    instances = qagen.load_squad_json(Path(args.dataset))
    records = decode_mod.make_random_logits(
        instances, seed=config.seed, with_no_answer=args.with_no_answer
    )
    decode_mod.write_logits(records, Path(args.out))
    print(f"mock-logits: {len(records)} records -> {args.out}")
    return 0


def _cmd_extract_mentions(args) -> int:
    config = _resolve_config(args)
    documents = _load_documents(Path(args.trees))
    records = []
    for doc_id in sorted(documents):
        records.extend(mentionmap.extract_mentions(documents[doc_id], config.time_lexicon))
    mentionmap.write_mentions(records, Path(args.out))
    print(f"extract-mentions: {len(records)} mentions -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring


def _add_config_flags(parser, *, k_l=False, workers=False, seed=False, window=False, time_lex=False):
    parser.add_argument("--config", help="JSON config file (defaults < config < flags)")
    if k_l:
        parser.add_argument("--k", type=int, help="max candidate spans to keep (default 20)")
        parser.add_argument("--l", type=int, help="max tokens per span (default 5)")
        parser.add_argument("--prune-list", help="file of function words, one per line")
        parser.add_argument(
            "--no-answer-policy",
            choices=["empty-only", "score-threshold"],
            help="when a no-answer score may override the best span (default empty-only)",
        )
    if workers:
        parser.add_argument("--workers", type=int, help="parallel workers (default 1)")
    if seed:
        parser.add_argument("--seed", type=int, help="random seed (default 0)")
    if window:
        parser.add_argument(
            "--window-previous", type=int, help="sentences before the anaphor's (default 2)"
        )
        parser.add_argument(
            "--no-first-sentence",
            action="store_true",
            help="do not force the document's first sentence into the context",
        )
    if time_lex:
        parser.add_argument("--time-lexicon", help="file of temporal head nouns, one per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridgeqa",
        description=(
            "Bridging anaphora resolution as span QA: synthesize quasi-bridging "
            "training pairs, build QA datasets, decode antecedent spans under "
            "positional constraints, map spans to mentions, and score."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quasi-gen", help="synthesize quasi-bridging pairs from parsed trees")
    p.add_argument("--trees", required=True, help="directory of bracketed-parse files")
    p.add_argument("--out", required=True, help="output NDJSON instances file")
    p.add_argument("--stats", help="output stats JSON file")
    p.add_argument("--prepositions", help="preposition allow-list file (default: any IN)")
    _add_config_flags(p, workers=True)
    p.set_defaults(func=_cmd_quasi_gen)

    p = sub.add_parser("audit-sample", help="sample instances for manual 0-2 quality scoring")
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True, help="output TSV with empty score column")
    p.add_argument("--n", type=int, required=True)
    _add_config_flags(p, seed=True)
    p.set_defaults(func=_cmd_audit_sample)

    p = sub.add_parser("build-qa", help="build an extended-SQuAD dataset")
    p.add_argument("--annotations", help="bridging annotations TSV")
    p.add_argument("--trees", help="directory of bracketed-parse files")
    p.add_argument("--quasi", help="quasi-bridging instances NDJSON (alternative input)")
    p.add_argument("--out", required=True)
    p.add_argument("--stats", help="output stats JSON file")
    _add_config_flags(p, window=True)
    p.set_defaults(func=_cmd_build_qa)

    p = sub.add_parser("decode", help="decode constrained spans from a logits file")
    p.add_argument("--logits", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, k_l=True)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("map-mentions", help="map predicted spans onto mentions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--mentions", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, time_lex=True)
    p.set_defaults(func=_cmd_map_mentions)

    p = sub.add_parser("score", help="strict/lenient accuracy of top-1 predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="report JSON file")
    p.add_argument("--mode", choices=["strict", "lenient", "both"], default="both")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("compare", help="diff two evaluation reports")
    p.add_argument("--report-a", required=True)
    p.add_argument("--report-b", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("validate", help="check a file against its schema")
    p.add_argument("file")
    p.add_argument("--kind", choices=list(formats.ALL_KINDS))
    p.add_argument("--dataset", help="cross-check logits offsets against this dataset")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("mock-logits", help="random logits for pipeline testing")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--with-no-answer", action="store_true")
    _add_config_flags(p, seed=True)
    p.set_defaults(func=_cmd_mock_logits)

    p = sub.add_parser("extract-mentions", help="emit all treebank NPs as a mentions file")
    p.add_argument("--trees", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p, time_lex=True)
    p.set_defaults(func=_cmd_extract_mentions)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BridgeQAError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error:file-not-found: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
