"""Command-line entry point.

Every subcommand takes --config <path>; exit codes: 0 ok, 1 runtime error,
2 usage error. Runtime errors print one line "error: <code>: <message>".
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset as ds
from . import evaluation as ev
from . import harness
from .harness import HarnessError


def _existing(path: Path, what: str) -> Path:
    if not path.exists():
        raise HarnessError("missing-artifact", f"{what} not found at {path}")
    return path

COMMANDS = (
    "split",
    "index",
    "identifiers",
    "train-scorer",
    "weak-label",
    "train-classifier",
    "retrieve",
    "evaluate",
    "stats",
    "compare",
    "run",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clarifyir",
        description="Offline harness for multimodal query clarification experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the run's JSON config file")
        if name == "evaluate":
            cmd.add_argument("--run", help="rankings file (default: <output_dir>/rankings.jsonl)")
        if name == "compare":
            cmd.add_argument("--report-a", help="report A (default: <output_dir>/report.json)")
            cmd.add_argument("--report-b", help="report B (default: the configured baseline_report)")
    return parser


def _cmd_stats(config: harness.ExperimentConfig) -> None:
    data = ds.load_dataset(config.dataset)
    stats = ev.dataset_stats(data)
    print(f"topics: {stats.topics}")
    print(f"facets: {stats.facets}")
    print(f"questions: {stats.questions}")
    print(f"set 1 questions: {stats.set1_questions}")
    print(f"set 2 questions: {stats.set2_questions}")
    print(f"avg questions per topic (std): {stats.avg_questions_per_topic:.2f} ({stats.std_questions_per_topic:.2f})")
    print(f"avg terms per question (std): {stats.avg_terms_per_question:.2f} ({stats.std_terms_per_question:.2f})")
    print(f"images: {stats.images}")
    print(f"avg images per question (std): {stats.avg_images_per_question:.2f} ({stats.std_images_per_question:.2f})")
    print(f"answers: {stats.answers}")
    print(f"avg answers per question (std): {stats.avg_answers_per_question:.2f} ({stats.std_answers_per_question:.2f})")
    if data.answers:
        answers = ev.answer_stats(list(data.answers))
        print(f"answer avg terms (std): {answers.avg_terms:.2f} ({answers.std_terms:.2f})")
        print(f"answer median terms: {answers.median_terms:g}")
        print(f"answer max terms: {answers.max_terms}")
        print(f"yes/no answers: {answers.pct_yes_no:.2f}%")
        print(f"answer vocabulary size: {answers.vocabulary_size}")
        print("note: a yes/no answer is a single-token answer equal to 'yes' or 'no'")


def _cmd_compare(config: harness.ExperimentConfig, args: argparse.Namespace) -> None:
    path_a = Path(args.report_a) if args.report_a else config.report_file()
    path_b = Path(args.report_b) if args.report_b else config.baseline_report
    if path_b is None:
        raise HarnessError("config", "compare needs --report-b or a baseline_report in the config")
    body_a = harness.read_report_body(_existing(path_a, "report A"))
    body_b = harness.read_report_body(_existing(path_b, "report B"))
    results = harness.compare_runs(body_a, body_b)
    payload = {
        metric: {
            "t": r.t_statistic,
            "p_raw": r.p_raw,
            "p_adjusted": r.p_adjusted,
            "significant": r.significant,
        }
        for metric, r in results.items()
    }
    print(json.dumps(payload, indent=1, sort_keys=True))


def cli_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    try:
        config = harness.load_config(args.config)
        if args.command == "split":
            assignment = harness.step_split(config)
            counts = {name: sum(1 for v in assignment.values() if v == name) for name in ds.SPLIT_NAMES}
            print(f"split written to {config.split_file()}: {counts}")
        elif args.command == "index":
            index = harness.step_index(config)
            print(f"indexed {index.n_docs} documents to {config.index_file()}")
        elif args.command == "identifiers":
            table = harness.step_identifiers(config)
            print(f"wrote {len(table)} identifiers to {config.identifier_file()}")
        elif args.command == "train-scorer":
            scorer = harness.step_train_scorer(config)
            print(f"trained scorer on {scorer.total_tokens} target tokens, saved to {config.scorer_file()}")
        elif args.command == "weak-label":
            records = harness.step_weak_labels(config)
            n_veq = sum(1 for r in records if r.label == "VEQ")
            print(f"labeled {len(records)} questions ({n_veq} VEQ) to {config.weak_label_file()}")
        elif args.command == "train-classifier":
            classifier = harness.step_train_classifier(config)
            print(f"trained classifier ({len(classifier.vocabulary)} vocab) to {config.classifier_file()}")
        elif args.command == "retrieve":
            records = harness.run_retrieval(config)
            harness.save_rankings(records, config.rankings_file())
            n = sum(1 for r in records if "_skipped" not in r)
            print(f"wrote {n} sample rankings to {config.rankings_file()}")
        elif args.command == "evaluate":
            run_path = Path(args.run) if args.run else config.rankings_file()
            samples, skipped = harness.load_rankings(_existing(run_path, "rankings file"))
            qrels = ds.load_qrels(config.qrels)
            report = harness.evaluate_rankings(config, samples, skipped, qrels)
            harness.write_report(config, report)
            print(ev.metrics_tsv([(config.mode, report.macro)]), end="")
        elif args.command == "stats":
            _cmd_stats(config)
        elif args.command == "compare":
            _cmd_compare(config, args)
        elif args.command == "run":
            report = harness.run_experiment(config)
            print(ev.metrics_tsv([(config.mode, report.macro)]), end="")
            print(f"report written to {config.report_file()}")
    except HarnessError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except (ds.DatasetError, ValueError, KeyError, OSError) as exc:
        code = "data" if isinstance(exc, ds.DatasetError) else "runtime"
        print(f"error: {code}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
