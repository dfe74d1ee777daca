"""End-to-end retrieval orchestration shared by the CLI and tests.

A pipeline run is: ingest clues, cluster and filter them per query,
retrieve once per kept clue, fuse with likelihood weights, and (when
several generators contribute) interpolate their fused runs. Queries are
independent, so batches parallelize over a thread pool while output order
stays fixed by input order.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

from .clues import (
    ClueSet,
    cluster_clues,
    fetch_clues,
    filter_clues,
    normalize_weights,
    read_clue_file,
)
from .errors import ConfigError
from .evaluation import QueryRecord
from .fusion import FusedRun, FusionConfig, as_fused_run, fuse, interpolate_runs, retrieve_per_clue
from .index import InvertedIndex, search

log = logging.getLogger("cluefuse")


@dataclass
class PipelineConfig:
    """File paths plus every tunable the subcommands share.

    Values come from an optional JSON config file with command-line flags
    taking precedence. Unknown keys in the file are rejected by name.
    """

    corpus: str | None = None
    index: str | None = None
    queries: str | None = None
    clues: dict[str, str] = field(default_factory=dict)  # source_tag -> path
    endpoint: str | None = None
    run: str | None = None
    report: str | None = None
    run_tag: str = "cluefuse"
    lowercase: bool = True
    stemming: str = "none"
    stopword_removal: bool = False
    k1: float = 0.9
    b: float = 0.4
    cutoff: float = 0.8
    per_clue_k: int = 1000
    output_size: int = 100
    backfill: str = "min_score"
    interpolation_weights: dict[str, float] | None = None
    threads: int = 1
    endpoint_timeout: float = 10.0
    num_candidates: int = 100
    similarity_metric: str = "gestalt"
    length_normalize: bool = False

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError(f"{path}: unknown config key {key!r}")
        if "clues" in raw:
            clues = raw["clues"]
            if isinstance(clues, str):
                raw["clues"] = {"context": clues}
            elif not (
                isinstance(clues, dict)
                and all(isinstance(k, str) and isinstance(v, str) for k, v in clues.items())
            ):
                raise ConfigError(f"{path}: 'clues' must be a path or a tag-to-path object")
        try:
            return cls(**raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc


@dataclass
class QueryResult:
    qid: str
    run: FusedRun
    searches: int
    warning: str | None = None


def load_clue_sets(
    config: PipelineConfig, queries: Sequence[QueryRecord]
) -> dict[str, dict[str, ClueSet]]:
    """Gather clue sets per source tag from files and/or an endpoint."""
    by_tag: dict[str, dict[str, ClueSet]] = {}
    for tag, path in config.clues.items():
        by_tag[tag] = read_clue_file(path)
    if config.endpoint:
        by_tag["context"] = fetch_clues(
            config.endpoint,
            [(q.qid, q.question) for q in queries],
            num_candidates=config.num_candidates,
            timeout=config.endpoint_timeout,
        )
    return by_tag


def _interpolation_weights_for(
    config: PipelineConfig, tags: Sequence[str]
) -> dict[str, float]:
    # restrict configured weights to the tags that produced a run for this
    # query, renormalizing; fall back to uniform
    configured = config.interpolation_weights or {}
    restricted = {tag: configured.get(tag, 0.0) for tag in tags}
    total = math.fsum(restricted.values())
    if total <= 0:
        return {tag: 1.0 / len(tags) for tag in tags}
    return {tag: w / total for tag, w in restricted.items()}


def process_query(
    index: InvertedIndex,
    query: QueryRecord,
    clue_sets_by_tag: Mapping[str, Mapping[str, ClueSet]],
    config: PipelineConfig,
    no_filter: bool = False,
    question_only: bool = False,
) -> QueryResult:
    """Run the retrieve+fuse path for one query.

    An empty clue set is a soft error: the query falls back to plain
    question-only retrieval and the result carries a warning.
    """
    if question_only:
        ranked = search(index, query.question, config.output_size, query_id=query.qid)
        return QueryResult(qid=query.qid, run=as_fused_run(ranked), searches=1)

    fusion_config = FusionConfig(
        per_clue_K=config.per_clue_k, backfill=config.backfill, output_size=None
    )
    per_tag: dict[str, FusedRun] = {}
    searches = 0
    for tag in sorted(clue_sets_by_tag):
        clue_set = clue_sets_by_tag[tag].get(query.qid)
        if clue_set is None or not clue_set.clues:
            continue
        clues = clue_set.clues
        if not no_filter:
            clusters = cluster_clues(clues, config.cutoff, metric=config.similarity_metric)
            clues = filter_clues(clusters)
        weights = normalize_weights(clues, length_normalize=config.length_normalize)
        lists = retrieve_per_clue(
            index,
            query.question,
            ClueSet(query_id=query.qid, clues=list(clues)),
            config.per_clue_k,
        )
        searches += len(lists)
        per_tag[tag] = fuse(lists, weights, fusion_config)

    if not per_tag:
        ranked = search(index, query.question, config.output_size, query_id=query.qid)
        return QueryResult(
            qid=query.qid,
            run=as_fused_run(ranked),
            searches=searches + 1,
            warning=f"qid {query.qid!r}: no clues available, fell back to question-only retrieval",
        )
    if len(per_tag) == 1:
        fused = next(iter(per_tag.values()))
    else:
        fused = interpolate_runs(per_tag, _interpolation_weights_for(config, sorted(per_tag)))
    return QueryResult(qid=query.qid, run=fused.truncated(config.output_size), searches=searches)


def run_retrieval(
    index: InvertedIndex,
    queries: Sequence[QueryRecord],
    clue_sets_by_tag: Mapping[str, Mapping[str, ClueSet]],
    config: PipelineConfig,
    no_filter: bool = False,
    question_only: bool = False,
) -> list[QueryResult]:
    """Process all queries, in input order, with a bounded worker pool."""

    def work(query: QueryRecord) -> QueryResult:
        return process_query(
            index, query, clue_sets_by_tag, config,
            no_filter=no_filter, question_only=question_only,
        )

    if config.threads <= 1:
        results = [work(q) for q in queries]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, queries))
    for result in results:
        if result.warning:
            log.warning("%s", result.warning)
    return results


# ---------------------------------------------------------------------------
# Latency benchmarking
# ---------------------------------------------------------------------------


@dataclass
class LatencyStats:
    mean: float
    median: float
    p95: float
    total: float
    queries: int


def latency_stats(latencies: Sequence[float]) -> LatencyStats:
    if not latencies:
        raise ValueError("no latencies recorded")
    ordered = sorted(latencies)
    n = len(ordered)
    median = (ordered[(n - 1) // 2] + ordered[n // 2]) / 2.0
    p95 = ordered[max(0, math.ceil(0.95 * n) - 1)]
    return LatencyStats(
        mean=math.fsum(ordered) / n,
        median=median,
        p95=p95,
        total=math.fsum(ordered),
        queries=n,
    )


def bench_retrieval(
    index: InvertedIndex,
    queries: Sequence[QueryRecord],
    clue_sets_by_tag: Mapping[str, Mapping[str, ClueSet]],
    config: PipelineConfig,
    threads: int,
) -> tuple[list[float], list[QueryResult]]:
    """Time the full retrieve+fuse path per query under a given pool size."""

    def work(query: QueryRecord) -> tuple[float, QueryResult]:
        start = time.perf_counter()
        result = process_query(index, query, clue_sets_by_tag, config)
        return time.perf_counter() - start, result

    if threads <= 1:
        timed = [work(q) for q in queries]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            timed = list(pool.map(work, queries))
    return [t for t, _ in timed], [r for _, r in timed]
