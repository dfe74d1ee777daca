"""Generated-clue handling: similarity, clustering, filtering, weighting, ingest.

Clues arrive as (text, log-probability) pairs produced by an external
generator. Lexically similar clues are grouped with greedy leader
clustering and each group is reduced to its most probable member, which
both removes near-duplicate searches and suppresses low-likelihood
corruptions of the same sentence (wrong dates, numbers, entities).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import requests

from .errors import EndpointError, MalformedRecordError

SIMILARITY_CUTOFF = 0.8
API_TOKEN_ENV = "CLUEFUSE_API_TOKEN"


@dataclass(frozen=True)
class ContextualClue:
    """One generated sentence plus its natural-log sequence probability."""

    text: str
    logprob: float
    source_tag: str = "context"

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("clue text must be non-empty")
        if not math.isfinite(self.logprob):
            raise ValueError(f"clue logprob must be finite, got {self.logprob!r}")


@dataclass
class ClueCluster:
    """Lexically similar clues with the highest-probability member marked."""

    members: list[ContextualClue]
    representative: int

    def __post_init__(self):
        if not self.members:
            raise ValueError("cluster must have at least one member")
        if not 0 <= self.representative < len(self.members):
            raise ValueError("representative index out of range")
        best = min(range(len(self.members)), key=lambda i: (-self.members[i].logprob, self.members[i].text))
        rep = self.members[self.representative]
        if (rep.logprob, rep.text) != (self.members[best].logprob, self.members[best].text):
            raise ValueError("representative is not the maximum-probability member")


@dataclass
class ClueSet:
    """All clues for one query, optionally with fusion weights attached."""

    query_id: str
    clues: list[ContextualClue]
    weights: list[float] | None = None

    def __post_init__(self):
        if self.weights is not None:
            if len(self.weights) != len(self.clues):
                raise ValueError("weights must be parallel to clues")
            if any(w < 0 for w in self.weights):
                raise ValueError("weights must be non-negative")
            if abs(math.fsum(self.weights) - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1")


def _longest_match(a: str, b: str, alo: int, ahi: int, blo: int, bhi: int, b2j) -> tuple[int, int, int]:
    # Longest common substring of a[alo:ahi] / b[blo:bhi]; ties prefer the
    # smallest starting position in a, then in b.
    besti, bestj, bestsize = alo, blo, 0
    j2len: dict[int, int] = {}
    for i in range(alo, ahi):
        newj2len: dict[int, int] = {}
        for j in b2j.get(a[i], ()):
            if j < blo:
                continue
            if j >= bhi:
                break
            k = newj2len[j] = j2len.get(j - 1, 0) + 1
            if k > bestsize:
                besti, bestj, bestsize = i - k + 1, j - k + 1, k
        j2len = newj2len
    return besti, bestj, bestsize


def similarity_ratio(a: str, b: str) -> float:
    """Gestalt (Ratcliff/Obershelp) similarity: 2M / (len(a) + len(b)).

    M is the total length of matching blocks from recursive
    longest-common-substring decomposition. Two empty strings score 1.0.
    Mildly order-sensitive in pathological cases, as the algorithm itself
    is; callers should keep a consistent argument order.
    """
    if not a and not b:
        return 1.0
    b2j: dict[str, list[int]] = {}
    for j, ch in enumerate(b):
        b2j.setdefault(ch, []).append(j)
    matched = 0
    queue = [(0, len(a), 0, len(b))]
    while queue:
        alo, ahi, blo, bhi = queue.pop()
        i, j, k = _longest_match(a, b, alo, ahi, blo, bhi, b2j)
        if k:
            matched += k
            queue.append((alo, i, blo, j))
            queue.append((i + k, ahi, j + k, bhi))
    return 2.0 * matched / (len(a) + len(b))


def levenshtein_ratio(a: str, b: str) -> float:
    """Alternative similarity: 1 - edit_distance / max(len(a), len(b))."""
    if not a and not b:
        return 1.0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        row = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            row.append(min(row[-1] + 1, prev[j] + 1, prev[j - 1] + cost))
        prev = row
    return 1.0 - prev[-1] / len(a)


_METRICS = {"gestalt": similarity_ratio, "levenshtein": levenshtein_ratio}


def cluster_clues(
    clues: Sequence[ContextualClue],
    cutoff: float = SIMILARITY_CUTOFF,
    metric: str = "gestalt",
) -> list[ClueCluster]:
    """Greedy leader clustering in descending-probability order.

    Clues are visited by (logprob desc, text asc); each joins the first
    cluster whose leader scores >= cutoff as similarity(candidate, leader),
    otherwise it founds a new cluster. Because leaders are visited first,
    the leader is always the cluster's representative.
    """
    if not 0.0 <= cutoff <= 1.0:
        raise ValueError(f"cutoff must be in [0, 1], got {cutoff}")
    try:
        sim = _METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown similarity metric: {metric!r}") from None
    members: list[list[ContextualClue]] = []
    leaders: list[str] = []
    for clue in sorted(clues, key=lambda c: (-c.logprob, c.text)):
        for i, leader in enumerate(leaders):
            if sim(clue.text, leader) >= cutoff:
                members[i].append(clue)
                break
        else:
            members.append([clue])
            leaders.append(clue.text)
    return [ClueCluster(members=m, representative=0) for m in members]


def filter_clues(clusters: Sequence[ClueCluster]) -> list[ContextualClue]:
    """Keep one clue per cluster: its maximum-probability representative."""
    return [c.members[c.representative] for c in clusters]


def normalize_weights(
    clues: Sequence[ContextualClue], length_normalize: bool = False
) -> list[float]:
    """Softmax the clue log-probabilities into fusion weights.

    Uses the max-shifted exponential for stability. With length_normalize,
    each logprob is first divided by the clue's whitespace token count, a
    proxy for generated sequence length.
    """
    if not clues:
        raise ValueError("cannot normalize weights for an empty clue list")
    logprobs = []
    for clue in clues:
        lp = clue.logprob
        if length_normalize:
            lp = lp / max(1, len(clue.text.split()))
        logprobs.append(lp)
    m = max(logprobs)
    exps = [math.exp(lp - m) for lp in logprobs]
    total = math.fsum(exps)
    return [e / total for e in exps]


# ---------------------------------------------------------------------------
# Ingest
# ---------------------------------------------------------------------------


def _parse_clue_record(obj, *, line: int | None = None, qid: str | None = None) -> ContextualClue:
    if not isinstance(obj, dict):
        raise MalformedRecordError("clue entry is not an object", line=line, qid=qid)
    text = obj.get("text")
    logprob = obj.get("logprob")
    if not isinstance(text, str) or not text.strip():
        raise MalformedRecordError("clue 'text' must be a non-empty string", line=line, qid=qid)
    if isinstance(logprob, bool) or not isinstance(logprob, (int, float)) or not math.isfinite(logprob):
        raise MalformedRecordError(
            f"clue 'logprob' must be a finite number, got {logprob!r}", line=line, qid=qid
        )
    tag = obj.get("source_tag", "context")
    if not isinstance(tag, str) or not tag:
        raise MalformedRecordError("clue 'source_tag' must be a non-empty string", line=line, qid=qid)
    return ContextualClue(text=text, logprob=float(logprob), source_tag=tag)


def read_clue_file(path: str | Path) -> dict[str, ClueSet]:
    """Read a JSON-Lines clue file into per-query clue sets.

    One line per (qid, generator) pair: {"qid": ..., "clues": [...]};
    repeated qids extend the same set, preserving file order.
    """
    result: dict[str, ClueSet] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"invalid JSON: {exc}", line=lineno) from exc
            if not isinstance(record, dict):
                raise MalformedRecordError("clue record is not an object", line=lineno)
            qid = record.get("qid")
            if not isinstance(qid, str) or not qid:
                raise MalformedRecordError("clue record needs a non-empty string 'qid'", line=lineno)
            raw = record.get("clues")
            if not isinstance(raw, list):
                raise MalformedRecordError("clue record needs a 'clues' array", line=lineno)
            clues = [_parse_clue_record(o, line=lineno) for o in raw]
            if qid in result:
                result[qid].clues.extend(clues)
            else:
                result[qid] = ClueSet(query_id=qid, clues=clues)
    return result


def fetch_clues(
    endpoint: str,
    queries: Iterable[tuple[str, str]],
    num_candidates: int = 100,
    timeout: float = 10.0,
    max_attempts: int = 3,
    backoff: float = 0.5,
    session: requests.Session | None = None,
) -> dict[str, ClueSet]:
    """POST each question to a generation endpoint and collect its clues.

    Protocol: {"question": ..., "num_candidates": ...} -> 200 with
    {"clues": [{"text": ..., "logprob": ...}]}. Failed requests are retried
    with exponential backoff (0.5 s, 1 s, ...); a request that is still
    failing after max_attempts raises :class:`EndpointError`. A bearer token
    is sent when the CLUEFUSE_API_TOKEN environment variable is set.
    """
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(API_TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    http = session or requests.Session()
    result: dict[str, ClueSet] = {}
    for qid, question in queries:
        payload = {"question": question, "num_candidates": num_candidates}
        last_error = None
        response = None
        for attempt in range(max_attempts):
            if attempt:
                time.sleep(backoff * (2 ** (attempt - 1)))
            try:
                response = http.post(endpoint, json=payload, headers=headers, timeout=timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                response = None
                continue
            if 200 <= response.status_code < 300:
                break
            last_error = f"HTTP {response.status_code}"
            response = None
        if response is None:
            raise EndpointError(
                f"generation endpoint failed for qid {qid!r} after {max_attempts} attempts: {last_error}"
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise MalformedRecordError(f"endpoint returned invalid JSON: {exc}", qid=qid) from exc
        if not isinstance(body, dict) or not isinstance(body.get("clues"), list):
            raise MalformedRecordError("endpoint response needs a 'clues' array", qid=qid)
        clues = [_parse_clue_record(o, qid=qid) for o in body["clues"]]
        result[qid] = ClueSet(query_id=qid, clues=clues)
    return result


def ingest_clues(
    source: str | Path,
    queries: Iterable[tuple[str, str]] | None = None,
    **endpoint_options,
) -> dict[str, ClueSet]:
    """Load clues from a JSON-Lines path or an HTTP(S) generation endpoint.

    Endpoint sources need the (qid, question) pairs to post; keyword
    options are forwarded to :func:`fetch_clues`.
    """
    if isinstance(source, str) and source.startswith(("http://", "https://")):
        if queries is None:
            raise ValueError("an endpoint source requires the queries to post")
        return fetch_clues(source, queries, **endpoint_options)
    return read_clue_file(source)
