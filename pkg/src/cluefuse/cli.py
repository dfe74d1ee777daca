"""Command-line interface: index, retrieve, eval, bench.

Exit codes: 0 on success, 1 on operational errors (missing files, bad
data, unresolvable ids), 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import CluefuseError, ConfigError
from .evaluation import (
    EvalReport,
    answer_coverage,
    answer_ranks,
    compare_runs,
    read_queries,
    render_comparison,
    render_report,
    report_to_dict,
    topk_accuracy,
)
from .fusion import read_trec_run, write_trec_run
from .index import TokenizerConfig, build_index, load_index, read_corpus, save_index
from .pipeline import (
    PipelineConfig,
    bench_retrieval,
    latency_stats,
    load_clue_sets,
    run_retrieval,
)

log = logging.getLogger("cluefuse")


def _parse_clue_args(values: list[str] | None) -> dict[str, str] | None:
    if not values:
        return None
    clues: dict[str, str] = {}
    for value in values:
        tag, sep, path = value.partition("=")
        if not sep:
            tag, path = "context", value
        if not tag or not path:
            raise ConfigError(f"bad --clues value {value!r}, expected [TAG=]PATH")
        if tag in clues:
            raise ConfigError(f"duplicate clue tag {tag!r}")
        clues[tag] = path
    return clues


def _parse_weights(value: str | None) -> dict[str, float] | None:
    if value is None:
        return None
    weights: dict[str, float] = {}
    for item in value.split(","):
        tag, sep, num = item.partition("=")
        try:
            if not sep:
                raise ValueError
            weights[tag.strip()] = float(num)
        except ValueError:
            raise ConfigError(
                f"bad --interpolation-weights value {value!r}, expected TAG=W[,TAG=W...]"
            ) from None
    return weights


def _parse_ks(value: str) -> list[int]:
    try:
        ks = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --ks value {value!r}, expected comma-separated integers") from None
    if not ks or any(k < 1 for k in ks):
        raise ConfigError("--ks values must be positive integers")
    return ks


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {
        "corpus": getattr(args, "corpus", None),
        "index": getattr(args, "index", None),
        "queries": getattr(args, "queries", None),
        "run": getattr(args, "run", None) or getattr(args, "output", None),
        "report": getattr(args, "report", None),
        "run_tag": getattr(args, "run_tag", None),
        "endpoint": getattr(args, "endpoint", None),
        "k1": getattr(args, "k1", None),
        "b": getattr(args, "b", None),
        "stemming": getattr(args, "stemming", None),
        "cutoff": getattr(args, "cutoff", None),
        "per_clue_k": getattr(args, "k", None),
        "output_size": getattr(args, "output_size", None),
        "backfill": getattr(args, "backfill", None),
        "threads": getattr(args, "threads", None),
        "similarity_metric": getattr(args, "metric", None),
        "clues": _parse_clue_args(getattr(args, "clues", None)),
        "interpolation_weights": _parse_weights(getattr(args, "interpolation_weights", None)),
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "no_lowercase", False):
        config.lowercase = False
    if getattr(args, "stopwords", False):
        config.stopword_removal = True
    if getattr(args, "length_normalize", False):
        config.length_normalize = True
    if config.threads < 1:
        raise ConfigError(f"threads must be >= 1, got {config.threads}")
    return config


def _require(config: PipelineConfig, *names: str) -> None:
    for name in names:
        if not getattr(config, name):
            raise ConfigError(f"missing required setting {name!r} (flag or config file)")


def _require_file(path: str, what: str) -> None:
    if not Path(path).is_file():
        raise CluefuseError(f"{what} file not found: {path}")


def cmd_index(config: PipelineConfig, args: argparse.Namespace) -> int:
    _require(config, "corpus", "index")
    _require_file(config.corpus, "corpus")
    tokenizer = TokenizerConfig(
        lowercase=config.lowercase,
        stemming=config.stemming,
        stopword_removal=config.stopword_removal,
    )
    index = build_index(read_corpus(config.corpus), tokenizer, k1=config.k1, b=config.b)
    save_index(index, config.index)
    print(
        f"indexed {config.corpus}: N={index.N} "
        f"vocabulary={index.vocabulary_size} avgdl={index.avgdl:.3f}"
    )
    return 0


def cmd_retrieve(config: PipelineConfig, args: argparse.Namespace) -> int:
    _require(config, "index", "queries", "run")
    if not args.question_only and not config.clues and not config.endpoint:
        raise ConfigError("retrieve needs --clues or --endpoint (or --question-only)")
    _require_file(config.index, "index")
    _require_file(config.queries, "queries")
    index = load_index(config.index)
    queries = read_queries(config.queries)
    clue_sets = {} if args.question_only else load_clue_sets(config, queries)
    results = run_retrieval(
        index, queries, clue_sets, config,
        no_filter=args.no_filter, question_only=args.question_only,
    )
    lines = write_trec_run(config.run, (r.run for r in results), run_tag=config.run_tag)
    searches = sum(r.searches for r in results)
    print(
        f"retrieved {len(queries)} queries ({searches} per-clue searches), "
        f"wrote {lines} lines to {config.run}"
    )
    return 0


def _evaluate_run(
    run_path: str, tag: str, queries, corpus, ks, clue_sets_by_tag, per_query: bool = False
) -> EvalReport:
    _require_file(run_path, "run")
    run = read_trec_run(run_path)
    accuracy = topk_accuracy(run, queries, corpus, ks)
    coverage = None
    if clue_sets_by_tag:
        merged: dict = {}
        for sets in clue_sets_by_tag.values():
            for qid, clue_set in sets.items():
                if qid in merged:
                    merged[qid].clues.extend(clue_set.clues)
                else:
                    merged[qid] = clue_set
        coverage = answer_coverage(merged, queries)
    breakdown = None
    if per_query:
        ranks = answer_ranks(run, queries, corpus, max(ks))
        breakdown = {qid: {"answer_rank": rank} for qid, rank in ranks.items()}
    return EvalReport(
        run_tag=tag, topk_accuracy=accuracy, answer_coverage=coverage, per_query=breakdown
    )


def _write_eval_outputs(report_json: dict, text: str, report_path: str, plot) -> None:
    path = Path(report_path)
    path.write_text(json.dumps(report_json, indent=2) + "\n", encoding="utf-8")
    path.with_suffix(".txt").write_text(text + "\n", encoding="utf-8")
    plot(path.with_suffix(".png"))
    print(f"report written to {path} (+ .txt, .png)")


def cmd_eval(config: PipelineConfig, args: argparse.Namespace) -> int:
    from . import plots  # deferred: pulls in matplotlib

    _require(config, "queries", "corpus", "report")
    _require_file(config.queries, "queries")
    _require_file(config.corpus, "corpus")
    queries = read_queries(config.queries)
    corpus = {p.id: p for p in read_corpus(config.corpus)}
    ks = _parse_ks(args.ks)
    clue_sets_by_tag = load_clue_sets(config, queries) if config.clues else {}

    if args.compare:
        path_a, path_b = args.compare
        report_a = _evaluate_run(path_a, Path(path_a).stem, queries, corpus, ks, clue_sets_by_tag)
        report_b = _evaluate_run(path_b, Path(path_b).stem, queries, corpus, ks, clue_sets_by_tag)
        deltas = compare_runs(report_a, report_b)
        text = render_comparison(report_a, report_b, deltas)
        print(text)
        payload = {
            "report_a": report_to_dict(report_a),
            "report_b": report_to_dict(report_b),
            "accuracy_delta": {str(k): deltas[k] for k in sorted(deltas)},
        }
        _write_eval_outputs(
            payload, text, config.report,
            lambda p: plots.plot_comparison(report_a, report_b, p),
        )
        return 0

    _require(config, "run")
    report = _evaluate_run(
        config.run, config.run_tag, queries, corpus, ks, clue_sets_by_tag,
        per_query=args.per_query,
    )
    text = render_report(report)
    print(text)
    _write_eval_outputs(
        report_to_dict(report), text, config.report,
        lambda p: plots.plot_report(report, p),
    )
    return 0


def cmd_bench(config: PipelineConfig, args: argparse.Namespace) -> int:
    _require(config, "index", "queries")
    if not config.clues and not config.endpoint:
        raise ConfigError("bench needs --clues or --endpoint")
    _require_file(config.index, "index")
    _require_file(config.queries, "queries")
    index = load_index(config.index)
    queries = read_queries(config.queries)
    if not queries:
        raise CluefuseError(f"query file is empty: {config.queries}")
    clue_sets = load_clue_sets(config, queries)

    modes: dict[str, list[float]] = {}
    lat_single, _ = bench_retrieval(index, queries, clue_sets, config, threads=1)
    modes["threads=1"] = lat_single
    if config.threads > 1:
        lat_multi, _ = bench_retrieval(index, queries, clue_sets, config, threads=config.threads)
        modes[f"threads={config.threads}"] = lat_multi

    stats_by_mode = {mode: latency_stats(lat) for mode, lat in modes.items()}
    print(f"{'mode':<14} {'mean':>9} {'median':>9} {'p95':>9}  (per-query, ms)")
    for mode, stats in stats_by_mode.items():
        print(
            f"{mode:<14} {1000 * stats.mean:>9.2f} {1000 * stats.median:>9.2f} "
            f"{1000 * stats.p95:>9.2f}"
        )
    if config.report:
        from . import plots  # deferred: pulls in matplotlib

        payload = {
            mode: {
                "mean_s": stats.mean,
                "median_s": stats.median,
                "p95_s": stats.p95,
                "queries": stats.queries,
            }
            for mode, stats in stats_by_mode.items()
        }
        path = Path(config.report)
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        plots.plot_latency(modes, path.with_suffix(".png"))
        print(f"benchmark report written to {path} (+ .png)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cluefuse",
        description="Clue-augmented BM25 retrieval with filtering and rank fusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--threads", type=int, help="worker threads (default 1)")

    p_index = sub.add_parser("index", help="build and save a BM25 index from a JSONL corpus")
    common(p_index)
    p_index.add_argument("--corpus", help="corpus JSONL: {id, title, text} per line")
    p_index.add_argument("--index", help="output index path")
    p_index.add_argument("--k1", type=float, help="BM25 k1 (default 0.9)")
    p_index.add_argument("--b", type=float, help="BM25 b (default 0.4)")
    p_index.add_argument("--stemming", choices=["none", "porter"], help="stemmer (default none)")
    p_index.add_argument("--stopwords", action="store_true", help="enable stopword removal")
    p_index.add_argument("--no-lowercase", action="store_true", help="keep original case")
    p_index.set_defaults(handler=cmd_index)

    p_ret = sub.add_parser("retrieve", help="clue-augmented retrieval into a TREC run file")
    common(p_ret)
    p_ret.add_argument("--index", help="index file from the index subcommand")
    p_ret.add_argument("--queries", help="queries JSONL: {qid, question, answers}")
    p_ret.add_argument("--clues", action="append", metavar="[TAG=]PATH",
                       help="clue JSONL per source tag; repeatable")
    p_ret.add_argument("--endpoint", help="generation endpoint URL instead of clue files")
    p_ret.add_argument("--output", "--run", dest="output", help="output TREC run path")
    p_ret.add_argument("--run-tag", dest="run_tag", help="tag column for TREC lines")
    p_ret.add_argument("--k", type=int, help="per-clue retrieval depth (default 1000)")
    p_ret.add_argument("--cutoff", type=float, help="clustering similarity cutoff (default 0.8)")
    p_ret.add_argument("--output-size", dest="output_size", type=int,
                       help="fused passages kept per query (default 100)")
    p_ret.add_argument("--backfill", choices=["min_score", "zero"], help="missing-score policy")
    p_ret.add_argument("--metric", choices=["gestalt", "levenshtein"],
                       help="clustering similarity metric")
    p_ret.add_argument("--interpolation-weights", dest="interpolation_weights",
                       metavar="TAG=W[,TAG=W...]", help="per-source fusion interpolation weights")
    p_ret.add_argument("--length-normalize", dest="length_normalize", action="store_true",
                       help="divide logprobs by clue token count before weighting")
    p_ret.add_argument("--no-filter", dest="no_filter", action="store_true",
                       help="skip clue clustering/filtering (unfiltered condition)")
    p_ret.add_argument("--question-only", dest="question_only", action="store_true",
                       help="plain BM25 over the question, ignoring clues")
    p_ret.set_defaults(handler=cmd_retrieve)

    p_eval = sub.add_parser("eval", help="score a run file: top-k accuracy and reports")
    common(p_eval)
    p_eval.add_argument("--run", help="TREC run file to evaluate")
    p_eval.add_argument("--queries", help="queries JSONL with gold answers")
    p_eval.add_argument("--corpus", help="corpus JSONL to resolve passage ids")
    p_eval.add_argument("--report", help="output report JSON (figure + text table go alongside)")
    p_eval.add_argument("--run-tag", dest="run_tag", help="label for the report")
    p_eval.add_argument("--ks", default="5,20,100", help="comma-separated cutoffs (default 5,20,100)")
    p_eval.add_argument("--clues", action="append", metavar="[TAG=]PATH",
                        help="clue files; adds answer coverage to the report")
    p_eval.add_argument("--compare", nargs=2, metavar=("RUN_A", "RUN_B"),
                        help="evaluate two run files and report accuracy deltas")
    p_eval.add_argument("--per-query", dest="per_query", action="store_true",
                        help="include per-query answer ranks in the report JSON")
    p_eval.set_defaults(handler=cmd_eval)

    p_bench = sub.add_parser("bench", help="per-query latency of the retrieve+fuse path")
    common(p_bench)
    p_bench.add_argument("--index", help="index file")
    p_bench.add_argument("--queries", help="queries JSONL")
    p_bench.add_argument("--clues", action="append", metavar="[TAG=]PATH", help="clue JSONL files")
    p_bench.add_argument("--endpoint", help="generation endpoint URL")
    p_bench.add_argument("--k", type=int, help="per-clue retrieval depth")
    p_bench.add_argument("--cutoff", type=float, help="clustering similarity cutoff")
    p_bench.add_argument("--output-size", dest="output_size", type=int, help="fused output size")
    p_bench.add_argument("--backfill", choices=["min_score", "zero"], help="missing-score policy")
    p_bench.add_argument("--report", help="write latency stats JSON (+ figure) here")
    p_bench.set_defaults(handler=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        return args.handler(config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CluefuseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
