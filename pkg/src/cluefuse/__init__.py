"""cluefuse: clue-augmented lexical retrieval with filtering and rank fusion.

The pipeline ingests LM-generated contextual clues with their generation
log-probabilities, deduplicates them by gestalt string similarity, keeps
the most probable member of each group, retrieves per augmented query
over a BM25 inverted index, and fuses the ranked lists with the
likelihood weights.
"""

from .clues import (
    ClueCluster,
    ClueSet,
    ContextualClue,
    cluster_clues,
    fetch_clues,
    filter_clues,
    ingest_clues,
    levenshtein_ratio,
    normalize_weights,
    read_clue_file,
    similarity_ratio,
)
from .errors import (
    CluefuseError,
    ConfigError,
    DuplicatePassageError,
    EmptyCorpusError,
    EndpointError,
    IndexFormatError,
    IndexVersionError,
    MalformedRecordError,
    UnknownDocumentError,
)
from .evaluation import (
    EvalReport,
    QueryRecord,
    answer_coverage,
    answer_ranks,
    compare_runs,
    contains_answer,
    read_queries,
    rouge_f,
    topk_accuracy,
)
from .fusion import (
    FusedRun,
    FusionConfig,
    as_fused_run,
    augment_query,
    fuse,
    grid_search_weights,
    interpolate_runs,
    read_trec_run,
    retrieve_per_clue,
    write_trec_run,
)
from .index import (
    InvertedIndex,
    Passage,
    RankedList,
    TokenizerConfig,
    bm25_score,
    build_index,
    load_index,
    read_corpus,
    save_index,
    search,
    tokenize,
)
from .pipeline import PipelineConfig, process_query, run_retrieval

__version__ = "0.1.0"

__all__ = [
    "ClueCluster",
    "ClueSet",
    "CluefuseError",
    "ConfigError",
    "ContextualClue",
    "DuplicatePassageError",
    "EmptyCorpusError",
    "EndpointError",
    "EvalReport",
    "FusedRun",
    "FusionConfig",
    "IndexFormatError",
    "IndexVersionError",
    "InvertedIndex",
    "MalformedRecordError",
    "Passage",
    "PipelineConfig",
    "QueryRecord",
    "RankedList",
    "TokenizerConfig",
    "UnknownDocumentError",
    "answer_coverage",
    "answer_ranks",
    "as_fused_run",
    "augment_query",
    "bm25_score",
    "build_index",
    "cluster_clues",
    "compare_runs",
    "contains_answer",
    "fetch_clues",
    "filter_clues",
    "fuse",
    "grid_search_weights",
    "ingest_clues",
    "interpolate_runs",
    "levenshtein_ratio",
    "load_index",
    "normalize_weights",
    "process_query",
    "read_clue_file",
    "read_corpus",
    "read_queries",
    "read_trec_run",
    "retrieve_per_clue",
    "rouge_f",
    "run_retrieval",
    "save_index",
    "search",
    "similarity_ratio",
    "tokenize",
    "topk_accuracy",
    "write_trec_run",
]
