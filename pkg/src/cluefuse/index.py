"""Tokenization, inverted-index construction, BM25 scoring, and persistence.

The index is built once (single writer), after which it is immutable: any
number of threads may call :func:`bm25_score` and :func:`search`
concurrently on the same instance.
"""

from __future__ import annotations

import heapq
import json
import math
import re
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    DuplicatePassageError,
    EmptyCorpusError,
    IndexFormatError,
    IndexVersionError,
    MalformedRecordError,
    UnknownDocumentError,
)
from .stem import porter_stem

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4

# Unicode alphanumerics; underscores and punctuation act as separators.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Lucene's classic English stopword list.
STOPWORDS = frozenset(
    "a an and are as at be but by for if in into is it no not of on or such "
    "that the their then there these they this to was will with".split()
)

_MAGIC = b"CFIX"
_FORMAT_VERSION = 1
_STEMMING_CODES = {"none": 0, "porter": 1}
_STEMMING_NAMES = {v: k for k, v in _STEMMING_CODES.items()}


@dataclass(frozen=True)
class TokenizerConfig:
    """Text analysis switches applied identically at index and query time."""

    lowercase: bool = True
    stemming: str = "none"  # "none" or "porter"
    stopword_removal: bool = False

    def __post_init__(self):
        if self.stemming not in _STEMMING_CODES:
            raise ValueError(f"unknown stemming mode: {self.stemming!r}")


DEFAULT_TOKENIZER = TokenizerConfig()


@dataclass(frozen=True)
class Passage:
    """One retrieval unit: a corpus document with a stable id."""

    id: str
    title: str
    text: str


@dataclass
class RankedList:
    """Scored passages for one query, best first.

    Entries are (passage_id, score) sorted by score descending with ties
    broken by passage_id ascending; duplicate ids are rejected.
    """

    query_id: str
    entries: list[tuple[str, float]]

    def __post_init__(self):
        seen = set()
        prev_pid: str | None = None
        prev_score = math.inf
        for pid, score in self.entries:
            if pid in seen:
                raise ValueError(f"duplicate passage id in ranked list: {pid!r}")
            seen.add(pid)
            if score > prev_score or (score == prev_score and prev_pid is not None and pid < prev_pid):
                raise ValueError("ranked list entries are not in (score desc, id asc) order")
            prev_pid, prev_score = pid, score

    def __len__(self) -> int:
        return len(self.entries)


def tokenize(text: str, config: TokenizerConfig = DEFAULT_TOKENIZER) -> list[str]:
    """Split on runs of non-alphanumerics, then apply the configured stages.

    Stage order is lowercase, stopword removal, stemming; the stopword list
    is lowercase, so stopword removal without lowercasing only drops tokens
    that are already lowercase.
    """
    tokens = _TOKEN_RE.findall(text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.stopword_removal:
        tokens = [t for t in tokens if t not in STOPWORDS]
    if config.stemming == "porter":
        tokens = [porter_stem(t) for t in tokens]
    return tokens


class InvertedIndex:
    """BM25 inverted index over a fixed corpus.

    Scores use idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is
    strictly positive, and the (k1 + 1)-numerator tf saturation form. Term
    statistics live in numpy arrays; postings are per-term sorted ordinal
    arrays with parallel term frequencies.
    """

    def __init__(
        self,
        vocabulary: dict[str, int],
        postings_ordinals: list[np.ndarray],
        postings_tfs: list[np.ndarray],
        doc_lengths: np.ndarray,
        doc_ids: list[str],
        k1: float,
        b: float,
        tokenizer_config: TokenizerConfig,
        avgdl: float | None = None,
    ):
        self.vocabulary = vocabulary
        self._post_ords = postings_ordinals
        self._post_tfs = postings_tfs
        self.doc_lengths = doc_lengths
        self.doc_ids = doc_ids
        self.N = len(doc_ids)
        self.k1 = float(k1)
        self.b = float(b)
        self.tokenizer_config = tokenizer_config
        self.avgdl = float(doc_lengths.sum() / self.N) if avgdl is None else float(avgdl)

        df = np.array([len(o) for o in postings_ordinals], dtype=np.float64)
        self._idf = np.log(1.0 + (self.N - df + 0.5) / (df + 0.5))
        # per-document k1 * (1 - b + b * dl/avgdl), shared by both scoring
        # paths; an all-empty corpus has every dl equal to avgdl, so the
        # ratio degenerates to 1
        dl = doc_lengths.astype(np.float64)
        ratio = dl / self.avgdl if self.avgdl > 0.0 else np.ones_like(dl)
        self._norm = self.k1 * (1.0 - self.b + self.b * ratio)

    @property
    def vocabulary_size(self) -> int:
        return len(self.vocabulary)

    def postings(self, term: str) -> tuple[np.ndarray, np.ndarray] | None:
        tid = self.vocabulary.get(term)
        if tid is None:
            return None
        return self._post_ords[tid], self._post_tfs[tid]

    def term_idf(self, term: str) -> float:
        tid = self.vocabulary.get(term)
        return float(self._idf[tid]) if tid is not None else 0.0


def read_corpus(path: str | Path) -> Iterator[Passage]:
    """Stream passages from a JSON-Lines corpus file.

    Each line holds {"id": ..., "title": ..., "text": ...}; unknown keys
    are ignored, a missing title or text defaults to "".
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"invalid JSON: {exc}", line=lineno) from exc
            if not isinstance(record, dict):
                raise MalformedRecordError("corpus record is not an object", line=lineno)
            pid = record.get("id")
            if not isinstance(pid, str) or not pid:
                raise MalformedRecordError("corpus record needs a non-empty string 'id'", line=lineno)
            title = record.get("title", "")
            text = record.get("text", "")
            if not isinstance(title, str) or not isinstance(text, str):
                raise MalformedRecordError("'title' and 'text' must be strings", line=lineno)
            yield Passage(id=pid, title=title, text=text)


def build_index(
    corpus: Iterable[Passage],
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> InvertedIndex:
    """Index a corpus; the indexed field is title + " " + text.

    Raises :class:`DuplicatePassageError` on a repeated id and
    :class:`EmptyCorpusError` on an empty corpus.
    """
    vocabulary: dict[str, int] = {}
    ords_acc: list[list[int]] = []
    tfs_acc: list[list[int]] = []
    doc_ids: list[str] = []
    doc_lengths: list[int] = []
    seen: set[str] = set()

    for ordinal, passage in enumerate(corpus):
        if passage.id in seen:
            raise DuplicatePassageError(passage.id)
        seen.add(passage.id)
        doc_ids.append(passage.id)
        tokens = tokenize(passage.title + " " + passage.text, config)
        doc_lengths.append(len(tokens))
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            tid = vocabulary.get(term)
            if tid is None:
                tid = vocabulary[term] = len(vocabulary)
                ords_acc.append([])
                tfs_acc.append([])
            ords_acc[tid].append(ordinal)
            tfs_acc[tid].append(tf)

    if not doc_ids:
        raise EmptyCorpusError("cannot build an index over an empty corpus")

    postings_ordinals = [np.asarray(o, dtype=np.int64) for o in ords_acc]
    postings_tfs = [np.asarray(t, dtype=np.float64) for t in tfs_acc]
    return InvertedIndex(
        vocabulary=vocabulary,
        postings_ordinals=postings_ordinals,
        postings_tfs=postings_tfs,
        doc_lengths=np.asarray(doc_lengths, dtype=np.int64),
        doc_ids=doc_ids,
        k1=k1,
        b=b,
        tokenizer_config=config,
    )


def bm25_score(index: InvertedIndex, query_tokens: list[str], doc: int) -> float:
    """Score one document ordinal against pre-tokenized query terms.

    Each query token occurrence contributes independently; terms missing
    from the vocabulary or the document contribute zero.
    """
    if not 0 <= doc < index.N:
        raise UnknownDocumentError(f"no document with ordinal {doc} (N={index.N})")
    k1p1 = index.k1 + 1.0
    norm = float(index._norm[doc])
    score = 0.0
    for term in query_tokens:
        tid = index.vocabulary.get(term)
        if tid is None:
            continue
        ords = index._post_ords[tid]
        pos = int(np.searchsorted(ords, doc))
        if pos < len(ords) and ords[pos] == doc:
            tf = float(index._post_tfs[tid][pos])
            score += float(index._idf[tid]) * (tf * k1p1) / (tf + norm)
    return score


def search(
    index: InvertedIndex, query_text: str, K: int, query_id: str = ""
) -> RankedList:
    """Return up to K positive-scoring passages for a raw query string.

    Ordering is score descending, ties by passage id ascending; an empty
    or out-of-vocabulary query yields an empty list.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    tokens = tokenize(query_text, index.tokenizer_config)
    scores = np.zeros(index.N, dtype=np.float64)
    k1p1 = index.k1 + 1.0
    for term in tokens:
        tid = index.vocabulary.get(term)
        if tid is None:
            continue
        ords = index._post_ords[tid]
        tfs = index._post_tfs[tid]
        # identical expression shape to bm25_score so both paths agree bitwise
        scores[ords] += float(index._idf[tid]) * (tfs * k1p1) / (tfs + index._norm[ords])
    candidates = np.flatnonzero(scores > 0.0)
    doc_ids = index.doc_ids
    top = heapq.nsmallest(K, candidates.tolist(), key=lambda o: (-scores[o], doc_ids[o]))
    entries = [(doc_ids[o], float(scores[o])) for o in top]
    return RankedList(query_id=query_id, entries=entries)


# ---------------------------------------------------------------------------
# Persistence: versioned binary container.
#
# Layout (little-endian):
#   magic "CFIX" | u32 version | f64 k1 | f64 b | u8 lowercase | u8 stemming
#   | u8 stopword_removal | varint N | f64 avgdl
#   | N x (varstr doc_id, varint doc_length)
#   | varint vocab_size
#   | vocab_size x (varstr term, varint postings_len,
#                   postings_len x varint delta_ordinal,
#                   postings_len x varint tf)
#   | u32 crc32 of everything before the checksum
# ---------------------------------------------------------------------------


def _write_varint(out: bytearray, value: int) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _write_str(out: bytearray, s: str) -> None:
    data = s.encode("utf-8")
    _write_varint(out, len(data))
    out.extend(data)


class _Reader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexFormatError("index file is truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def varint(self) -> int:
        result = 0
        shift = 0
        while True:
            byte = self.take(1)[0]
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7
            if shift > 63:
                raise IndexFormatError("varint overflow while reading index file")

    def string(self) -> str:
        n = self.varint()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IndexFormatError(f"index file holds invalid UTF-8: {exc}") from exc

    def f64(self) -> float:
        return float(np.frombuffer(self.take(8), dtype="<f8")[0])

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "little")

    def u8(self) -> int:
        return self.take(1)[0]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Serialize the index so a later load scores bit-identically."""
    out = bytearray()
    out.extend(_MAGIC)
    out.extend(_FORMAT_VERSION.to_bytes(4, "little"))
    out.extend(np.float64(index.k1).tobytes())
    out.extend(np.float64(index.b).tobytes())
    cfg = index.tokenizer_config
    out.append(1 if cfg.lowercase else 0)
    out.append(_STEMMING_CODES[cfg.stemming])
    out.append(1 if cfg.stopword_removal else 0)
    _write_varint(out, index.N)
    out.extend(np.float64(index.avgdl).tobytes())
    for ordinal in range(index.N):
        _write_str(out, index.doc_ids[ordinal])
        _write_varint(out, int(index.doc_lengths[ordinal]))
    terms = sorted(index.vocabulary, key=index.vocabulary.__getitem__)
    _write_varint(out, len(terms))
    for term in terms:
        tid = index.vocabulary[term]
        ords = index._post_ords[tid]
        tfs = index._post_tfs[tid]
        _write_str(out, term)
        _write_varint(out, len(ords))
        prev = 0
        for o in ords.tolist():
            _write_varint(out, o - prev)
            prev = o
        for tf in tfs.tolist():
            _write_varint(out, int(tf))
    out.extend(zlib.crc32(out).to_bytes(4, "little"))
    Path(path).write_bytes(bytes(out))


def load_index(path: str | Path) -> InvertedIndex:
    """Load an index written by :func:`save_index`.

    Distinguishes a bad/corrupt file (:class:`IndexFormatError`), an
    unsupported format version (:class:`IndexVersionError`), and plain
    I/O failures (propagated ``OSError``).
    """
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != _MAGIC:
        raise IndexFormatError(f"{path}: not a cluefuse index (bad magic bytes)")
    version = int.from_bytes(data[4:8], "little")
    if version != _FORMAT_VERSION:
        raise IndexVersionError(found=version, supported=_FORMAT_VERSION)
    if len(data) < 12:
        raise IndexFormatError("index file is truncated")
    stored_crc = int.from_bytes(data[-4:], "little")
    if zlib.crc32(data[:-4]) != stored_crc:
        raise IndexFormatError(f"{path}: checksum mismatch, file is corrupt")

    r = _Reader(data[:-4], offset=8)
    k1 = r.f64()
    b = r.f64()
    lowercase = bool(r.u8())
    stemming_code = r.u8()
    if stemming_code not in _STEMMING_NAMES:
        raise IndexFormatError(f"unknown stemming code {stemming_code} in index file")
    stopword_removal = bool(r.u8())
    config = TokenizerConfig(
        lowercase=lowercase,
        stemming=_STEMMING_NAMES[stemming_code],
        stopword_removal=stopword_removal,
    )
    n_docs = r.varint()
    if n_docs == 0:
        raise IndexFormatError("index file declares zero documents")
    avgdl = r.f64()
    doc_ids = []
    doc_lengths = np.empty(n_docs, dtype=np.int64)
    for ordinal in range(n_docs):
        doc_ids.append(r.string())
        doc_lengths[ordinal] = r.varint()
    vocab_size = r.varint()
    vocabulary: dict[str, int] = {}
    postings_ordinals: list[np.ndarray] = []
    postings_tfs: list[np.ndarray] = []
    for tid in range(vocab_size):
        term = r.string()
        if term in vocabulary:
            raise IndexFormatError(f"duplicate term {term!r} in index file")
        vocabulary[term] = tid
        m = r.varint()
        ords = np.empty(m, dtype=np.int64)
        prev = 0
        for i in range(m):
            prev += r.varint()
            ords[i] = prev
        if m and prev >= n_docs:
            raise IndexFormatError("posting references a document past the corpus size")
        tfs = np.empty(m, dtype=np.float64)
        for i in range(m):
            tfs[i] = r.varint()
        postings_ordinals.append(ords)
        postings_tfs.append(tfs)
    if r.pos != len(r.data):
        raise IndexFormatError("trailing bytes after index payload")
    return InvertedIndex(
        vocabulary=vocabulary,
        postings_ordinals=postings_ordinals,
        postings_tfs=postings_tfs,
        doc_lengths=doc_lengths,
        doc_ids=doc_ids,
        k1=k1,
        b=b,
        tokenizer_config=config,
        avgdl=avgdl,
    )
