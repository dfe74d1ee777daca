"""Retrieval and generation metrics: top-k accuracy, ROUGE, answer coverage.

Answer matching follows open-domain QA convention: both sides are
lowercased and split on non-alphanumerics, and a passage counts as a hit
when some gold answer's token sequence appears contiguously in it.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .clues import ClueSet
from .errors import MalformedRecordError, UnknownDocumentError
from .fusion import FusedRun
from .index import DEFAULT_TOKENIZER, Passage, RankedList, tokenize

DEFAULT_KS = (5, 20, 100)


@dataclass(frozen=True)
class QueryRecord:
    """A question with its gold answer strings."""

    qid: str
    question: str
    answers: tuple[str, ...]

    def __post_init__(self):
        if not self.answers:
            raise ValueError(f"query {self.qid!r} has no answers")


@dataclass
class EvalReport:
    """Metrics for one run; retrieval-only runs leave the clue metrics None."""

    run_tag: str
    topk_accuracy: dict[int, float]
    rouge: tuple[float, float, float] | None = None
    answer_coverage: float | None = None
    per_query: dict[str, dict] | None = None

    def __post_init__(self):
        previous = 0.0
        for k in sorted(self.topk_accuracy):
            value = self.topk_accuracy[k]
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"top-{k} accuracy {value} outside [0, 1]")
            if value < previous:
                raise ValueError("top-k accuracy must be non-decreasing in k")
            previous = value


def read_queries(path: str | Path) -> list[QueryRecord]:
    """Read JSON-Lines {"qid", "question", "answers"} query records."""
    records: list[QueryRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"invalid JSON: {exc}", line=lineno) from exc
            if not isinstance(obj, dict):
                raise MalformedRecordError("query record is not an object", line=lineno)
            qid = obj.get("qid")
            question = obj.get("question")
            answers = obj.get("answers")
            if not isinstance(qid, str) or not qid:
                raise MalformedRecordError("query record needs a non-empty 'qid'", line=lineno)
            if qid in seen:
                raise MalformedRecordError(f"duplicate qid {qid!r}", line=lineno)
            seen.add(qid)
            if not isinstance(question, str) or not question.strip():
                raise MalformedRecordError("query record needs a non-empty 'question'", line=lineno)
            if (
                not isinstance(answers, list)
                or not answers
                or not all(isinstance(a, str) for a in answers)
            ):
                raise MalformedRecordError(
                    "query record needs a non-empty 'answers' list of strings", line=lineno
                )
            records.append(QueryRecord(qid=qid, question=question, answers=tuple(answers)))
    return records


def _norm_tokens(text: str) -> list[str]:
    return tokenize(text, DEFAULT_TOKENIZER)


def _contains_tokens(haystack: list[str], needle: list[str]) -> bool:
    n = len(needle)
    if n == 0 or n > len(haystack):
        return False
    first = needle[0]
    for i in range(len(haystack) - n + 1):
        if haystack[i] == first and haystack[i : i + n] == needle:
            return True
    return False


def contains_answer(passage_text: str, answers: Iterable[str]) -> bool:
    """True iff some normalized answer appears as a contiguous token run."""
    haystack = _norm_tokens(passage_text)
    return any(_contains_tokens(haystack, _norm_tokens(a)) for a in answers)


def _run_entries(run: FusedRun | RankedList) -> list[tuple[str, float]]:
    return run.entries.entries if isinstance(run, FusedRun) else run.entries


def _passage_text(passage: Passage) -> str:
    # match the indexed field so "retrieved passage contains answer" and
    # "indexed content" agree
    return passage.title + " " + passage.text


def answer_ranks(
    run: Mapping[str, FusedRun | RankedList] | Iterable[FusedRun | RankedList],
    queries: Sequence[QueryRecord],
    corpus: Mapping[str, Passage] | Callable[[str], Passage | None],
    kmax: int,
) -> dict[str, int | None]:
    """Best rank (1-based) of an answer-bearing passage per query.

    None marks a query with no hit in the top kmax (or absent from the
    run); a passage id that cannot be resolved raises
    :class:`UnknownDocumentError`.
    """
    if not isinstance(run, Mapping):
        run = {r.query_id: r for r in run}
    lookup = corpus.get if isinstance(corpus, Mapping) else corpus
    for qid, ranked in run.items():
        for pid, _ in _run_entries(ranked):
            if lookup(pid) is None:
                raise UnknownDocumentError(
                    f"run references unknown passage id {pid!r} (query {qid!r})"
                )
    ranks: dict[str, int | None] = {}
    for query in queries:
        ranked = run.get(query.qid)
        best: int | None = None
        if ranked is not None:
            for rank, (pid, _) in enumerate(_run_entries(ranked)[:kmax], 1):
                if contains_answer(_passage_text(lookup(pid)), query.answers):
                    best = rank
                    break
        ranks[query.qid] = best
    return ranks


def topk_accuracy(
    run: Mapping[str, FusedRun | RankedList] | Iterable[FusedRun | RankedList],
    queries: Sequence[QueryRecord],
    corpus: Mapping[str, Passage] | Callable[[str], Passage | None],
    ks: Sequence[int] = DEFAULT_KS,
) -> dict[int, float]:
    """Fraction of queries whose top-k passages contain a gold answer.

    Queries absent from the run count as misses; a passage id that cannot
    be resolved raises :class:`UnknownDocumentError`.
    """
    if not ks or any(k < 1 for k in ks):
        raise ValueError("ks must be positive")
    if not queries:
        raise ValueError("no queries to evaluate")
    ranks = answer_ranks(run, queries, corpus, max(ks))
    return {
        k: sum(1 for r in ranks.values() if r is not None and r <= k) / len(queries)
        for k in ks
    }


# ---------------------------------------------------------------------------
# ROUGE
# ---------------------------------------------------------------------------


def _f1(overlap: float, pred_total: int, ref_total: int) -> float:
    p = overlap / pred_total if pred_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _rouge_n(cand: list[str], ref: list[str], n: int) -> float:
    cand_ngrams = _ngrams(cand, n)
    ref_ngrams = _ngrams(ref, n)
    overlap = sum(min(c, ref_ngrams[g]) for g, c in cand_ngrams.items())
    return _f1(overlap, sum(cand_ngrams.values()), sum(ref_ngrams.values()))


def _lcs_length(xs: list[str], ys: list[str]) -> int:
    if not xs or not ys:
        return 0
    prev = [0] * (len(ys) + 1)
    for x in xs:
        row = [0]
        for j, y in enumerate(ys, 1):
            row.append(prev[j - 1] + 1 if x == y else max(prev[j], row[-1]))
        prev = row
    return prev[-1]


def _rouge_l(cand: list[str], ref: list[str]) -> float:
    return _f1(_lcs_length(cand, ref), len(cand), len(ref))


def rouge_f(
    candidates: Sequence[str],
    references: Sequence[str],
    aggregate: str = "max",
) -> tuple[float, float, float]:
    """ROUGE-1/2/L F1 of generated candidates against references.

    For each reference, each metric is aggregated over candidates (max by
    default, "mean" as the alternative reading) and the result is averaged
    over references. Callers average over queries themselves.
    """
    if not candidates or not references:
        raise ValueError("candidates and references must be non-empty")
    if aggregate not in ("max", "mean"):
        raise ValueError(f"aggregate must be 'max' or 'mean', got {aggregate!r}")
    combine = max if aggregate == "max" else lambda xs: sum(xs) / len(xs)
    cand_tokens = [_norm_tokens(c) for c in candidates]
    ref_tokens = [_norm_tokens(r) for r in references]
    r1_total = r2_total = rl_total = 0.0
    for ref in ref_tokens:
        r1_total += combine([_rouge_n(c, ref, 1) for c in cand_tokens])
        r2_total += combine([_rouge_n(c, ref, 2) for c in cand_tokens])
        rl_total += combine([_rouge_l(c, ref) for c in cand_tokens])
    n = len(ref_tokens)
    return (r1_total / n, r2_total / n, rl_total / n)


def answer_coverage(
    clue_sets: Mapping[str, ClueSet],
    queries: Sequence[QueryRecord],
    per_clue: bool = False,
) -> float:
    """Share of questions (default) or of individual clues hitting an answer.

    Question-level coverage counts a query as covered when at least one of
    its clues contains a gold answer; per_clue switches the denominator to
    the total clue count.
    """
    if not queries:
        raise ValueError("no queries to evaluate")
    covered = 0
    clue_hits = 0
    clue_total = 0
    for query in queries:
        clue_set = clue_sets.get(query.qid)
        if clue_set is None:
            raise ValueError(f"no clue set for qid {query.qid!r}")
        hits = sum(1 for c in clue_set.clues if contains_answer(c.text, query.answers))
        clue_hits += hits
        clue_total += len(clue_set.clues)
        if hits:
            covered += 1
    if per_clue:
        return clue_hits / clue_total if clue_total else 0.0
    return covered / len(queries)


def compare_runs(report_a: EvalReport, report_b: EvalReport) -> dict[int, float]:
    """Per-k accuracy deltas (b - a); the k sets must match."""
    if set(report_a.topk_accuracy) != set(report_b.topk_accuracy):
        raise ValueError(
            f"k sets differ: {sorted(report_a.topk_accuracy)} vs {sorted(report_b.topk_accuracy)}"
        )
    return {
        k: report_b.topk_accuracy[k] - report_a.topk_accuracy[k]
        for k in sorted(report_a.topk_accuracy)
    }


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def report_to_dict(report: EvalReport) -> dict:
    out: dict = {
        "run_tag": report.run_tag,
        "topk_accuracy": {str(k): report.topk_accuracy[k] for k in sorted(report.topk_accuracy)},
    }
    if report.rouge is not None:
        out["rouge"] = {
            "rouge1_f": report.rouge[0],
            "rouge2_f": report.rouge[1],
            "rougeL_f": report.rouge[2],
        }
    if report.answer_coverage is not None:
        out["answer_coverage"] = report.answer_coverage
    if report.per_query is not None:
        out["per_query"] = report.per_query
    return out


def render_report(report: EvalReport) -> str:
    """Aligned plain-text table, accuracies as percentages to one decimal."""
    lines = [f"run: {report.run_tag}"]
    header = f"  {'k':>6}  {'accuracy':>9}"
    lines.append(header)
    lines.append("  " + "-" * (len(header) - 2))
    for k in sorted(report.topk_accuracy):
        lines.append(f"  {k:>6}  {100.0 * report.topk_accuracy[k]:>8.1f}%")
    if report.rouge is not None:
        r1, r2, rl = report.rouge
        lines.append(f"  ROUGE-1/2/L F: {100 * r1:.1f} / {100 * r2:.1f} / {100 * rl:.1f}")
    if report.answer_coverage is not None:
        lines.append(f"  answer coverage: {100 * report.answer_coverage:.1f}%")
    return "\n".join(lines)


def render_comparison(
    report_a: EvalReport, report_b: EvalReport, deltas: dict[int, float] | None = None
) -> str:
    """Side-by-side accuracy table with signed deltas (b - a)."""
    if deltas is None:
        deltas = compare_runs(report_a, report_b)
    tag_a, tag_b = report_a.run_tag, report_b.run_tag
    wa = max(len(tag_a), 8)
    wb = max(len(tag_b), 8)
    lines = [f"  {'k':>6}  {tag_a:>{wa}}  {tag_b:>{wb}}  {'delta':>7}"]
    lines.append("  " + "-" * (6 + wa + wb + 7 + 6))
    for k in sorted(deltas):
        a = 100.0 * report_a.topk_accuracy[k]
        b = 100.0 * report_b.topk_accuracy[k]
        lines.append(f"  {k:>6}  {a:>{wa}.1f}  {b:>{wb}.1f}  {100.0 * deltas[k]:>+7.1f}")
    return "\n".join(lines)


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8")
