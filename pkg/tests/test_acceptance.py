"""Acceptance suite: one test per criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary (see conftest).
"""

import difflib
import json
import math
import random
import re
import string
import time

from cluefuse import (
    ContextualClue,
    Passage,
    build_index,
    bm25_score,
    cluster_clues,
    filter_clues,
    fuse,
    load_index,
    rouge_f,
    save_index,
    search,
    similarity_ratio,
    topk_accuracy,
)
from cluefuse.cli import main
from cluefuse.fusion import FusionConfig, RankedList

from oracles import oracle_fuse, oracle_lcs_f1, oracle_rouge_n_f1, oracle_search


def _random_corpus(rng, max_docs=50, max_vocab=30):
    vocab = [f"w{v}" for v in range(rng.randint(1, max_vocab))]
    n = rng.randint(1, max_docs)
    passages, token_lists = [], []
    for d in range(n):
        tokens = [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
        passages.append(Passage(f"doc{d:03d}", "", " ".join(tokens)))
        token_lists.append(tokens)
    return passages, token_lists, vocab


def test_c01_bm25_oracle_equivalence():
    """Criterion 1: 200 random corpora, search(K=N) matches brute force."""
    rng = random.Random(20240)
    started = time.perf_counter()
    for trial in range(200):
        passages, token_lists, vocab = _random_corpus(rng)
        index = build_index(passages)
        query_tokens = [rng.choice(vocab) for _ in range(rng.randint(1, 6))]
        expected = oracle_search([p.id for p in passages], token_lists, query_tokens, 0.9, 0.4)
        got = search(index, " ".join(query_tokens), index.N).entries
        assert [pid for pid, _ in got] == [pid for pid, _ in expected], f"trial {trial}"
        for (_, a), (_, b) in zip(got, expected):
            assert abs(a - b) <= 1e-9, f"trial {trial}"
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"oracle sweep took {elapsed:.1f}s"


def test_c02_hand_computed_bm25_value():
    """Criterion 2: toy 2-doc corpus scores d1 = ln 2 for query 'cat'."""
    index = build_index(
        [Passage("d1", "", "cat sat"), Passage("d2", "", "dog ran")], k1=0.9, b=0.4
    )
    assert abs(bm25_score(index, ["cat"], 0) - math.log(2)) <= 1e-12
    top = search(index, "cat", 10).entries
    assert top[0][0] == "d1"
    assert abs(top[0][1] - math.log(2)) <= 1e-12


def test_c03_fusion_oracle_equivalence():
    """Criterion 3: 500 random instances match brute-force fusion."""
    rng = random.Random(777)
    for trial in range(500):
        n_lists = rng.randint(1, 5)
        pool = [f"p{i:02d}" for i in range(rng.randint(1, 30))]
        lists, maps = [], []
        for _ in range(n_lists):
            chosen = rng.sample(pool, rng.randint(0, len(pool)))
            entries = [(pid, rng.uniform(-2, 10)) for pid in chosen]
            lists.append(RankedList("q", sorted(entries, key=lambda e: (-e[1], e[0]))))
            maps.append(dict(entries))
        raw = [rng.random() + 1e-6 for _ in range(n_lists)]
        weights = [r / sum(raw) for r in raw]
        backfill = rng.choice(["min_score", "zero"])
        expected = oracle_fuse(maps, weights, backfill)
        got = fuse(lists, weights, FusionConfig(backfill=backfill, output_size=None))
        assert [pid for pid, _ in got.entries.entries] == [pid for pid, _ in expected], trial
        for (_, a), (_, b) in zip(got.entries.entries, expected):
            assert abs(a - b) <= 1e-9, trial


def test_c04_filtering_invariants():
    """Criterion 4: planted near-duplicates; representative and cutoff laws."""
    rng = random.Random(31337)
    for trial in range(40):
        clues = []
        for g in range(rng.randint(1, 5)):
            # base sentence with a fact number; duplicates differ by single
            # numeric character edits
            number = rng.randint(1000, 8999)
            base = f"the {('event','game','treaty','bridge')[g % 4]} number {g} dates to {number}"
            for _ in range(rng.randint(1, 5)):
                digits = list(str(number))
                digits[rng.randrange(4)] = str(rng.randint(0, 9))
                text = base.replace(str(number), "".join(digits))
                clues.append(ContextualClue(text, -rng.random() * 5))
        # unique texts so that cutoff 1.0 means all-singletons
        seen = {}
        for c in clues:
            if c.text not in seen or seen[c.text].logprob < c.logprob:
                seen[c.text] = c
        clues = list(seen.values())

        clusters = cluster_clues(clues, cutoff=0.8)
        for cluster in clusters:
            rep = cluster.members[cluster.representative]
            assert all(rep.logprob >= m.logprob for m in cluster.members)
        kept = filter_clues(clusters)
        assert len(kept) == len(clusters) <= len(clues)

        assert all(
            len(c.members) == 1 for c in cluster_clues(clues, cutoff=1.0)
        ), f"trial {trial}: cutoff 1.0 must give singletons"
        assert len(cluster_clues(clues, cutoff=0.0)) == 1


def test_c05_similarity_reference_check():
    """Criterion 5: gestalt ratio matches the difflib oracle to 1e-12."""
    rng = random.Random(4242)
    alphabet = string.ascii_lowercase[:8] + "0123456789 "
    for trial in range(1000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        expected = difflib.SequenceMatcher(None, a, b).ratio()
        assert abs(similarity_ratio(a, b) - expected) <= 1e-12, (trial, a, b)


def test_c06_metric_oracles():
    """Criterion 6: ROUGE matches brute force; top-k accuracy is monotone."""
    rng = random.Random(606)
    vocab = [f"tok{i}" for i in range(15)]
    for trial in range(500):
        cand = [rng.choice(vocab) for _ in range(rng.randint(1, 20))]
        ref = [rng.choice(vocab) for _ in range(rng.randint(1, 20))]
        r1, r2, rl = rouge_f([" ".join(cand)], [" ".join(ref)])
        assert abs(r1 - oracle_rouge_n_f1(cand, ref, 1)) <= 1e-12, trial
        assert abs(r2 - oracle_rouge_n_f1(cand, ref, 2)) <= 1e-12, trial
        assert abs(rl - oracle_lcs_f1(cand, ref)) <= 1e-12, trial

    from cluefuse import QueryRecord

    corpus = {f"p{i}": Passage(f"p{i}", "", f"text {i}") for i in range(40)}
    corpus["gold"] = Passage("gold", "", "the hidden answer token")
    pids = list(corpus)
    for trial in range(30):
        queries = [
            QueryRecord(f"q{i}", "question", ("hidden answer",))
            for i in range(rng.randint(1, 8))
        ]
        run = {}
        for q in queries:
            if rng.random() < 0.8:
                chosen = rng.sample(pids, rng.randint(1, len(pids)))
                n = len(chosen)
                run[q.qid] = RankedList(q.qid, [(pid, float(n - i)) for i, pid in enumerate(chosen)])
        accuracy = topk_accuracy(run, queries, corpus, [1, 2, 5, 10, 20, 41])
        values = [accuracy[k] for k in sorted(accuracy)]
        assert values == sorted(values), f"trial {trial}: not monotone: {accuracy}"


def test_c07_directional_filtering_benefit(
    fixture_index, fixture_query_records, fixture_clue_sets, fixture_lookup
):
    """Criterion 7: on the planted-corruption fixture, filtering does not
    hurt top-5 accuracy and cuts per-clue searches by at least half."""
    from cluefuse.pipeline import PipelineConfig, run_retrieval

    config = PipelineConfig(per_clue_k=1000, output_size=100)
    filtered = run_retrieval(fixture_index, fixture_query_records, fixture_clue_sets, config)
    unfiltered = run_retrieval(
        fixture_index, fixture_query_records, fixture_clue_sets, config, no_filter=True
    )
    acc_filtered = topk_accuracy(
        {r.qid: r.run for r in filtered}, fixture_query_records, fixture_lookup, [5]
    )
    acc_unfiltered = topk_accuracy(
        {r.qid: r.run for r in unfiltered}, fixture_query_records, fixture_lookup, [5]
    )
    searches_filtered = sum(r.searches for r in filtered)
    searches_unfiltered = sum(r.searches for r in unfiltered)
    assert acc_filtered[5] >= acc_unfiltered[5], (acc_filtered, acc_unfiltered)
    assert searches_filtered <= 0.5 * searches_unfiltered, (
        searches_filtered,
        searches_unfiltered,
    )


def test_c08_thread_count_determinism(fixture_paths, tmp_path):
    """Criterion 8: retrieve with 1 and 8 threads writes identical bytes."""
    index_path = tmp_path / "fixture.cfix"
    assert main(["index", "--corpus", str(fixture_paths["corpus"]), "--index", str(index_path)]) == 0
    outputs = []
    for threads in (1, 8):
        run_path = tmp_path / f"run_t{threads}.trec"
        code = main(
            [
                "retrieve",
                "--index", str(index_path),
                "--queries", str(fixture_paths["queries"]),
                "--clues", str(fixture_paths["clues"]),
                "--output", str(run_path),
                "--threads", str(threads),
            ]
        )
        assert code == 0
        outputs.append(run_path.read_bytes())
    assert outputs[0] == outputs[1]


def test_c09_round_trip_persistence(tmp_path):
    """Criterion 9: saved/loaded index answers 100 random queries identically."""
    rng = random.Random(909)
    passages, _, vocab = _random_corpus(rng, max_docs=50, max_vocab=30)
    index = build_index(passages, k1=1.2, b=0.68)
    path = tmp_path / "persist.cfix"
    save_index(index, path)
    loaded = load_index(path)
    for trial in range(100):
        query = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 6)))
        assert (
            search(loaded, query, index.N).entries == search(index, query, index.N).entries
        ), f"trial {trial}: {query!r}"


def test_c10_end_to_end_smoke(fixture_paths, tmp_path):
    """Criterion 10: index -> retrieve -> eval completes quickly and emits
    a well-formed TREC run and JSON report."""
    started = time.perf_counter()
    index_path = tmp_path / "smoke.cfix"
    run_path = tmp_path / "smoke.trec"
    report_path = tmp_path / "smoke.json"
    assert main(["index", "--corpus", str(fixture_paths["corpus"]), "--index", str(index_path)]) == 0
    assert (
        main(
            [
                "retrieve",
                "--index", str(index_path),
                "--queries", str(fixture_paths["queries"]),
                "--clues", str(fixture_paths["clues"]),
                "--output", str(run_path),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "eval",
                "--run", str(run_path),
                "--queries", str(fixture_paths["queries"]),
                "--corpus", str(fixture_paths["corpus"]),
                "--report", str(report_path),
            ]
        )
        == 0
    )
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"end-to-end took {elapsed:.1f}s"

    trec_line = re.compile(r"^\S+ Q0 \S+ \d+ -?\d+\.\d{6} \S+$")
    lines = run_path.read_text().splitlines()
    assert lines, "empty run file"
    ranks = {}
    for line in lines:
        assert trec_line.match(line), line
        qid, _, _, rank, _, _ = line.split()
        assert int(rank) == ranks.get(qid, 0) + 1, "ranks must count up from 1"
        ranks[qid] = int(rank)

    report = json.loads(report_path.read_text())
    assert report["run_tag"]
    assert set(report["topk_accuracy"]) == {"5", "20", "100"}
    for value in report["topk_accuracy"].values():
        assert 0.0 <= value <= 1.0
