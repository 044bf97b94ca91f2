"""Command-line entry point: ``mathinterp {analyze,exam,compare,ingest,flow}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from mathinterp.config import ExamFile, ExamQuestion, RunConfig, load_config, load_exam, with_overrides
from mathinterp.errors import ConfigError, MathInterpError
from mathinterp.flow import extract_flow
from mathinterp.modes import Configuration
from mathinterp.pipeline import (
    QuestionFailed,
    analyze_question,
    make_client,
    make_embedder,
    prompt_builder,
    run_exam,
    write_json,
    write_question_outputs,
)
from mathinterp.report import export_exam_table, export_graph_dot, render_question_report, utc_timestamp
from mathinterp.retrieval import build_index, read_corpus

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("mathinterp")


def _alpha(value: str) -> float:
    alpha = float(value)
    if not 0.0 <= alpha <= 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in [0, 1]")
    return alpha


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--replay-only", action="store_true", default=None,
                        help="serve every model call from the replay cache; never contact the endpoint")
    common.add_argument("--alpha", type=_alpha, help="weight of (1 - cosine) in the divergence score")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--parallelism", type=_positive, help="concurrent model calls per question")
    common.add_argument("--cache-dir", type=Path, help="replay cache directory")
    common.add_argument("--timestamp", help="fixed YYYYMMDD_HHMMSS stamp for reproducible output")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mathinterp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="analyse one question")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--prompt", help="inline question text")
    src.add_argument("--question", help="question id within --exam")
    p.add_argument("--exam", type=Path)
    p.add_argument("--mode", default="baseline", choices=[c.value for c in Configuration])
    p.add_argument("--print", dest="print_format", choices=["markdown", "json"], help="also print the report")

    p = sub.add_parser("exam", parents=[common], help="analyse every question of an exam")
    p.add_argument("exam", type=Path, nargs="?")
    p.add_argument("--mode", default="baseline", choices=[c.value for c in Configuration])
    p.add_argument("--question-parallelism", type=_positive, default=1)

    p = sub.add_parser("compare", parents=[common], help="run an exam under baseline, rag and contextual")
    p.add_argument("exam", type=Path, nargs="?")
    p.add_argument("--question-parallelism", type=_positive, default=1)

    p = sub.add_parser("ingest", parents=[common], help="build a retrieval index snapshot")
    p.add_argument("corpus", type=Path, nargs="?")
    p.add_argument("--index", type=Path, help="snapshot path (default: retrieval.index or <out>/index.json)")

    p = sub.add_parser("flow", parents=[common], help="reasoning flow of a saved response")
    p.add_argument("response", type=Path)
    p.add_argument("--format", choices=["json", "dot", "summary"], default="summary")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    return with_overrides(
        config,
        alpha=args.alpha,
        replay_only=args.replay_only,
        cache_dir=args.cache_dir,
        out_dir=args.out,
        parallelism=args.parallelism,
    )


def _out_dir(config: RunConfig, timestamp: str) -> Path:
    return Path(config.out_dir) if config.out_dir is not None else Path("runs") / timestamp


def _exam(args: argparse.Namespace, config: RunConfig) -> ExamFile:
    path = args.exam or config.exam
    if path is None:
        raise ConfigError("no exam file given (argument or 'exam' config key)")
    return load_exam(path)


def cmd_analyze(args: argparse.Namespace, config: RunConfig, timestamp: str) -> int:
    if args.prompt is not None:
        question = ExamQuestion("inline", args.prompt)
    else:
        question = _exam(args, config).question(args.question)
    out = _out_dir(config, timestamp)
    builder = prompt_builder(config, args.mode)
    client = make_client(config)
    try:
        result = analyze_question(
            question.question_id, question.prompt, config=config, client=client, builder=builder, timestamp=timestamp
        )
    except QuestionFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    finally:
        client.close()
    write_question_outputs(out, result)
    if args.print_format:
        sys.stdout.write(render_question_report(result.report, args.print_format))
    print(f"wrote {out / 'questions' / (result.question_id + '.md')}", file=sys.stderr)
    return EXIT_OK


def _summarize_run(run) -> str:
    return (
        f"{run.exam.exam_id} [{run.configuration.code}]: "
        f"{len(run.results)}/{len(run.exam.questions)} questions analysed"
    )


def cmd_exam(args: argparse.Namespace, config: RunConfig, timestamp: str) -> int:
    exam = _exam(args, config)
    out = _out_dir(config, timestamp)
    client = make_client(config)
    try:
        run = run_exam(exam, args.mode, config, out, timestamp=timestamp, client=client,
                       question_parallelism=args.question_parallelism)
    finally:
        client.close()
    print(_summarize_run(run), file=sys.stderr)
    return EXIT_PARTIAL if run.partial else EXIT_OK


def cmd_compare(args: argparse.Namespace, config: RunConfig, timestamp: str) -> int:
    exam = _exam(args, config)
    out = _out_dir(config, timestamp)
    client = make_client(config)
    rows, configuration_errors, partial = [], [], False
    try:
        for mode in Configuration:
            try:
                builder = prompt_builder(config, mode)
            except MathInterpError as exc:
                log.error("%s: %s", mode.value, exc)
                configuration_errors.append({"configuration": mode.value, "error": str(exc),
                                             "error_type": type(exc).__name__})
                continue
            run = run_exam(exam, mode, config, out / mode.value, timestamp=timestamp, client=client,
                           builder=builder, question_parallelism=args.question_parallelism)
            print(_summarize_run(run), file=sys.stderr)
            partial = partial or run.partial
            if run.metrics is not None:
                rows.append(run.metrics)
    finally:
        client.close()

    if rows:
        for fmt, suffix in (("csv", "csv"), ("markdown", "md")):
            path = out / f"exam_metrics.{suffix}"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(export_exam_table(rows, fmt), encoding="utf-8")
    write_json(out / "run_metadata.json", {
        "timestamp": timestamp,
        "exam_id": exam.exam_id,
        "course": exam.course,
        "configurations": [m.configuration.value for m in rows],
        "configuration_errors": configuration_errors,
        "n": {m.configuration.value: m.n for m in rows},
        "settings": config.to_dict(),
    })
    if not rows and configuration_errors:
        return EXIT_CONFIG
    return EXIT_PARTIAL if partial or configuration_errors else EXIT_OK


def cmd_ingest(args: argparse.Namespace, config: RunConfig, timestamp: str) -> int:
    corpus = args.corpus or config.corpus_dir
    if corpus is None:
        raise ConfigError("no corpus directory given (argument or retrieval.corpus)")
    docs = read_corpus(corpus)
    index = build_index(docs, config.retrieval, make_embedder(config))
    target = args.index or config.index_path or _out_dir(config, timestamp) / "index.json"
    index.save(target)
    docs_used = len({c.doc_id for c in index.chunks})
    print(f"documents: {len(docs)}  documents with retained text: {docs_used}  chunks: {len(index)}  "
          f"dims: {index.dims}")
    print(f"wrote {target}")
    return EXIT_OK


def cmd_flow(args: argparse.Namespace, config: RunConfig, timestamp: str) -> int:
    text = args.response.read_text(encoding="utf-8")
    flow = extract_flow(text, config.lexicon("operations"), config.lexicon("concepts"), config.thresholds)
    if args.format == "json":
        sys.stdout.write(json.dumps(flow.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n")
    elif args.format == "dot":
        sys.stdout.write(export_graph_dot(flow, args.response.stem))
    else:
        s = flow.summary
        print(f"Total steps: {s.total_steps}")
        print(f"Complexity score: {s.reasoning_complexity_score}")
        print(f"Average complexity per step: {s.avg_complexity_per_step:.2f}")
        print(f"Total operations: {s.total_operation_count}")
        print(f"Unique concepts: {s.unique_concepts}")
        print(f"Reasoning patterns: {', '.join(s.pattern_trace)}")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "exam": cmd_exam,
    "compare": cmd_compare,
    "ingest": cmd_ingest,
    "flow": cmd_flow,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    timestamp = args.timestamp or utc_timestamp()
    try:
        config = _config(args)
        return COMMANDS[args.command](args, config, timestamp)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MathInterpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
