"""Query augmentation, weighted rank fusion, and run interpolation.

Per-clue ranked lists are merged over the union of their passages by a
likelihood-weighted sum. A passage missing from one list is backfilled
with that list's minimum score (or zero, by policy), so a passage is never
rewarded merely for being absent from a short list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .clues import ClueSet, ContextualClue
from .index import InvertedIndex, RankedList, search

WEIGHT_SUM_TOL = 1e-9
BACKFILL_POLICIES = ("min_score", "zero")


@dataclass(frozen=True)
class FusionConfig:
    """Knobs for the per-clue retrieval + fusion stage."""

    per_clue_K: int = 1000
    backfill: str = "min_score"
    interpolation_weights: Mapping[str, float] | None = None
    output_size: int | None = 100

    def __post_init__(self):
        if self.per_clue_K < 1:
            raise ValueError(f"per_clue_K must be >= 1, got {self.per_clue_K}")
        if self.backfill not in BACKFILL_POLICIES:
            raise ValueError(f"backfill must be one of {BACKFILL_POLICIES}, got {self.backfill!r}")
        if self.output_size is not None and self.output_size < 1:
            raise ValueError("output_size must be >= 1 or None")
        if self.interpolation_weights is not None:
            _check_weights(self.interpolation_weights.values())


def _check_weights(weights: Iterable[float]) -> None:
    ws = list(weights)
    if any(w < 0 for w in ws):
        raise ValueError("weights must be non-negative")
    total = math.fsum(ws)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights must sum to 1 (got {total!r})")


@dataclass
class FusedRun:
    """Final fused ranking for one query plus per-source contributions.

    provenance maps every ranked passage id to the tuple of weighted
    score contributions that sum (exactly rounded) to its fused score.
    """

    query_id: str
    entries: RankedList
    provenance: dict[str, tuple[float, ...]]

    def __post_init__(self):
        ranked = {pid for pid, _ in self.entries.entries}
        if ranked != set(self.provenance):
            raise ValueError("provenance must cover exactly the ranked passage ids")

    def truncated(self, n: int | None) -> "FusedRun":
        if n is None or len(self.entries.entries) <= n:
            return self
        kept = self.entries.entries[:n]
        return FusedRun(
            query_id=self.query_id,
            entries=RankedList(query_id=self.entries.query_id, entries=kept),
            provenance={pid: self.provenance[pid] for pid, _ in kept},
        )


def as_fused_run(ranked: RankedList) -> FusedRun:
    """Wrap a plain ranked list (e.g. an external TREC run) as a FusedRun.

    This is the bridge for interpolating runs produced outside the
    pipeline, such as a dense retriever's run file, with fused runs.
    """
    return FusedRun(
        query_id=ranked.query_id,
        entries=ranked,
        provenance={pid: (score,) for pid, score in ranked.entries},
    )


def augment_query(question: str, clue: ContextualClue) -> str:
    """Append the clue to the question with a single separating space."""
    q = question.strip()
    if not q:
        raise ValueError("question must be non-empty")
    return q + " " + clue.text.strip()


def retrieve_per_clue(
    index: InvertedIndex, question: str, clue_set: ClueSet, K: int
) -> list[RankedList]:
    """Run one search per clue-augmented query, preserving clue order."""
    if not clue_set.clues:
        raise ValueError(f"clue set for query {clue_set.query_id!r} is empty")
    return [
        search(index, augment_query(question, clue), K, query_id=clue_set.query_id)
        for clue in clue_set.clues
    ]


def fuse(
    lists: Sequence[RankedList],
    weights: Sequence[float],
    config: FusionConfig = FusionConfig(),
) -> FusedRun:
    """Merge per-clue ranked lists into one run by weighted score sum.

    The candidate pool is the union of passages across lists. For each
    pool passage, list i contributes weight_i times its score there, with
    the list's minimum score (policy "min_score") or 0 (policy "zero")
    standing in when the passage is absent; an empty list contributes 0.
    Ties are broken by passage id, and math.fsum keeps the result
    independent of list order.
    """
    if len(lists) != len(weights):
        raise ValueError(f"{len(lists)} lists but {len(weights)} weights")
    if not lists:
        raise ValueError("nothing to fuse: no ranked lists given")
    _check_weights(weights)
    qid = lists[0].query_id
    for rl in lists:
        if rl.query_id != qid:
            raise ValueError(f"ranked lists mix query ids {qid!r} and {rl.query_id!r}")

    score_maps = [dict(rl.entries) for rl in lists]
    if config.backfill == "min_score":
        backfills = [min(m.values()) if m else 0.0 for m in score_maps]
    else:
        backfills = [0.0 for _ in score_maps]

    pool: set[str] = set()
    for m in score_maps:
        pool.update(m)

    provenance: dict[str, tuple[float, ...]] = {}
    fused: list[tuple[str, float]] = []
    for pid in pool:
        contribs = tuple(
            w * m.get(pid, backfill) if m else 0.0
            for w, m, backfill in zip(weights, score_maps, backfills)
        )
        provenance[pid] = contribs
        fused.append((pid, math.fsum(contribs)))
    fused.sort(key=lambda e: (-e[1], e[0]))
    run = FusedRun(
        query_id=qid,
        entries=RankedList(query_id=qid, entries=fused),
        provenance=provenance,
    )
    return run.truncated(config.output_size)


def interpolate_runs(
    runs: Mapping[str, FusedRun], weights: Mapping[str, float]
) -> FusedRun:
    """Linearly combine fused runs from different generators.

    Weight keys must cover exactly the run keys and sum to 1. A passage
    missing from one run takes that run's minimum fused score (the same
    backfill rule fusion uses); contributions are ordered by sorted tag.
    """
    if set(runs) != set(weights):
        raise ValueError(
            f"weight keys {sorted(weights)} do not match run keys {sorted(runs)}"
        )
    if not runs:
        raise ValueError("nothing to interpolate: no runs given")
    _check_weights(weights.values())
    tags = sorted(runs)
    qid = runs[tags[0]].query_id
    for tag in tags:
        if runs[tag].query_id != qid:
            raise ValueError(f"runs mix query ids {qid!r} and {runs[tag].query_id!r}")

    score_maps = {tag: dict(runs[tag].entries.entries) for tag in tags}
    backfills = {tag: min(m.values()) if m else 0.0 for tag, m in score_maps.items()}
    pool: set[str] = set()
    for m in score_maps.values():
        pool.update(m)

    provenance: dict[str, tuple[float, ...]] = {}
    fused: list[tuple[str, float]] = []
    for pid in pool:
        contribs = tuple(
            weights[tag] * score_maps[tag].get(pid, backfills[tag]) if score_maps[tag] else 0.0
            for tag in tags
        )
        provenance[pid] = contribs
        fused.append((pid, math.fsum(contribs)))
    fused.sort(key=lambda e: (-e[1], e[0]))
    return FusedRun(
        query_id=qid,
        entries=RankedList(query_id=qid, entries=fused),
        provenance=provenance,
    )


def _grid_values(step: float) -> list[float]:
    values = []
    i = 0
    while i * step < 1.0 - 1e-12:
        values.append(round(i * step, 12))
        i += 1
    values.append(1.0)
    return values


def grid_search_weights(
    runs: Mapping[str, Mapping[str, FusedRun]],
    qrels: Mapping[str, set[str]],
    grid_step: float = 0.1,
    top_k: int = 20,
) -> dict[str, float]:
    """Exhaustive simplex grid search for interpolation weights.

    runs maps source_tag -> qid -> fused run; qrels maps qid -> relevant
    passage ids. Returns the grid point with the highest top-k accuracy on
    the dev queries, breaking ties toward the lexicographically smallest
    weight vector (tags in sorted order). Limited to 2 or 3 runs.
    """
    tags = sorted(runs)
    if not 2 <= len(tags) <= 3:
        raise ValueError(f"grid search supports 2 or 3 runs, got {len(tags)}")
    if not 0.0 < grid_step <= 0.5:
        raise ValueError(f"grid_step must be in (0, 0.5], got {grid_step}")
    qid_sets = {tag: set(runs[tag]) for tag in tags}
    qids = sorted(qid_sets[tags[0]])
    for tag in tags[1:]:
        if qid_sets[tag] != qid_sets[tags[0]]:
            raise ValueError(f"run {tag!r} covers a different query set")
    if not qids:
        raise ValueError("no queries to evaluate")

    values = _grid_values(grid_step)
    if len(tags) == 2:
        candidates = [(v, round(1.0 - v, 12)) for v in values]
    else:
        candidates = []
        for v1 in values:
            for v2 in values:
                rest = 1.0 - v1 - v2
                if rest < -1e-12:
                    continue
                candidates.append((v1, v2, max(rest, 0.0)))

    best_weights: dict[str, float] | None = None
    best_accuracy = -1.0
    for vector in candidates:
        weights = dict(zip(tags, vector))
        hits = 0
        for qid in qids:
            fused = interpolate_runs({tag: runs[tag][qid] for tag in tags}, weights)
            relevant = qrels.get(qid, set())
            top = fused.entries.entries[:top_k]
            if any(pid in relevant for pid, _ in top):
                hits += 1
        accuracy = hits / len(qids)
        if accuracy > best_accuracy:
            best_accuracy = accuracy
            best_weights = weights
    assert best_weights is not None
    return best_weights


# ---------------------------------------------------------------------------
# TREC run files
# ---------------------------------------------------------------------------


def format_trec_lines(run: FusedRun | RankedList, run_tag: str) -> list[str]:
    entries = run.entries.entries if isinstance(run, FusedRun) else run.entries
    qid = run.query_id
    return [
        f"{qid} Q0 {pid} {rank} {score:.6f} {run_tag}"
        for rank, (pid, score) in enumerate(entries, 1)
    ]


def write_trec_run(
    path: str | Path, runs: Iterable[FusedRun | RankedList], run_tag: str = "cluefuse"
) -> int:
    """Write runs in TREC format; returns the number of lines written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for run in runs:
            for line in format_trec_lines(run, run_tag):
                fh.write(line + "\n")
                count += 1
    return count


def read_trec_run(path: str | Path) -> dict[str, RankedList]:
    """Read a TREC run file, re-sorting each query by (score desc, id asc).

    Accepts any whitespace-delimited 6-column run (external runs included);
    duplicate passage ids within a query are an error.
    """
    per_qid: dict[str, list[tuple[str, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 TREC columns, got {len(parts)}")
            qid, _, pid, _, score, _ = parts
            try:
                value = float(score)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad score {score!r}") from None
            per_qid.setdefault(qid, []).append((pid, value))
    result = {}
    for qid, entries in per_qid.items():
        entries.sort(key=lambda e: (-e[1], e[0]))
        result[qid] = RankedList(query_id=qid, entries=entries)
    return result
