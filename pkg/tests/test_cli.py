import json
import re

import pytest

from cluefuse.cli import main


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


@pytest.fixture
def workspace(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    queries = tmp_path / "queries.jsonl"
    clues = tmp_path / "clues.jsonl"
    write_jsonl(
        corpus,
        [
            {"id": "d1", "title": "", "text": "the moon landing happened in 1969"},
            {"id": "d2", "title": "", "text": "the mars rover landed in 2021"},
            {"id": "d3", "title": "", "text": "bread is baked from flour"},
        ],
    )
    write_jsonl(
        queries,
        [
            {"qid": "q1", "question": "when was the moon landing", "answers": ["1969"]},
            {"qid": "q2", "question": "when did the rover land on mars", "answers": ["2021"]},
        ],
    )
    write_jsonl(
        clues,
        [
            {
                "qid": "q1",
                "clues": [
                    {"text": "the moon landing happened in 1969", "logprob": -0.5},
                    {"text": "the moon landing happened in 1969", "logprob": -0.9},
                    {"text": "it was watched worldwide", "logprob": -2.0},
                ],
            },
            {
                "qid": "q2",
                "clues": [{"text": "the rover landed in 2021", "logprob": -0.3}],
            },
        ],
    )
    return {
        "dir": tmp_path,
        "corpus": str(corpus),
        "queries": str(queries),
        "clues": str(clues),
        "index": str(tmp_path / "idx.cfix"),
        "run": str(tmp_path / "out.trec"),
        "report": str(tmp_path / "report.json"),
    }


def build(ws):
    assert main(["index", "--corpus", ws["corpus"], "--index", ws["index"]]) == 0


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------


def test_index_prints_stats(workspace, capsys):
    code = main(["index", "--corpus", workspace["corpus"], "--index", workspace["index"]])
    out = capsys.readouterr().out
    assert code == 0
    assert "N=3" in out
    assert "vocabulary=" in out and "avgdl=" in out


def test_index_missing_corpus_is_exit_1(workspace, capsys):
    missing = str(workspace["dir"] / "nope.jsonl")
    code = main(["index", "--corpus", missing, "--index", workspace["index"]])
    err = capsys.readouterr().err
    assert code == 1
    assert "nope.jsonl" in err


def test_index_duplicate_ids_exit_1(workspace, capsys):
    bad = workspace["dir"] / "dup.jsonl"
    write_jsonl(bad, [{"id": "x", "text": "a"}, {"id": "x", "text": "b"}])
    code = main(["index", "--corpus", str(bad), "--index", workspace["index"]])
    err = capsys.readouterr().err
    assert code == 1
    assert "'x'" in err


def test_index_requires_paths(capsys):
    assert main(["index"]) == 2
    assert "corpus" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# retrieve
# ---------------------------------------------------------------------------


def _searches(capsys):
    out = capsys.readouterr().out
    match = re.search(r"\((\d+) per-clue searches\)", out)
    assert match, out
    return int(match.group(1))


def test_retrieve_writes_run(workspace, capsys):
    build(workspace)
    code = main(
        [
            "retrieve",
            "--index", workspace["index"],
            "--queries", workspace["queries"],
            "--clues", workspace["clues"],
            "--output", workspace["run"],
        ]
    )
    assert code == 0
    lines = open(workspace["run"]).read().splitlines()
    assert lines
    per_qid = {}
    for line in lines:
        qid, q0, pid, rank, score, tag = line.split()
        assert q0 == "Q0" and tag == "cluefuse"
        per_qid.setdefault(qid, []).append(int(rank))
    for qid, ranks in per_qid.items():
        assert ranks == list(range(1, len(ranks) + 1))
        assert len(ranks) <= 100


def test_retrieve_no_filter_issues_more_searches(workspace, capsys):
    build(workspace)
    capsys.readouterr()
    args = [
        "retrieve",
        "--index", workspace["index"],
        "--queries", workspace["queries"],
        "--clues", workspace["clues"],
        "--output", workspace["run"],
    ]
    assert main(args) == 0
    filtered = _searches(capsys)
    assert main(args + ["--no-filter"]) == 0
    unfiltered = _searches(capsys)
    # q1 has an exact duplicate clue that filtering removes
    assert filtered < unfiltered


def test_retrieve_question_only(workspace, capsys):
    build(workspace)
    code = main(
        [
            "retrieve",
            "--index", workspace["index"],
            "--queries", workspace["queries"],
            "--output", workspace["run"],
            "--question-only",
        ]
    )
    assert code == 0
    assert open(workspace["run"]).read().strip()


def test_retrieve_empty_clue_set_falls_back(workspace, capsys, caplog):
    build(workspace)
    only_q1 = workspace["dir"] / "partial.jsonl"
    write_jsonl(
        only_q1,
        [{"qid": "q1", "clues": [{"text": "the moon landing happened in 1969", "logprob": -0.5}]}],
    )
    code = main(
        [
            "retrieve",
            "--index", workspace["index"],
            "--queries", workspace["queries"],
            "--clues", str(only_q1),
            "--output", workspace["run"],
        ]
    )
    assert code == 0
    assert any("q2" in rec.message and "question-only" in rec.message for rec in caplog.records)
    qids = {line.split()[0] for line in open(workspace["run"]).read().splitlines()}
    assert "q2" in qids  # fallback still produced results


def test_retrieve_needs_clue_source(workspace, capsys):
    build(workspace)
    code = main(
        [
            "retrieve",
            "--index", workspace["index"],
            "--queries", workspace["queries"],
            "--output", workspace["run"],
        ]
    )
    assert code == 2
    assert "--clues" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _retrieve(workspace):
    build(workspace)
    assert (
        main(
            [
                "retrieve",
                "--index", workspace["index"],
                "--queries", workspace["queries"],
                "--clues", workspace["clues"],
                "--output", workspace["run"],
            ]
        )
        == 0
    )


def test_eval_reports_perfect_run(workspace, capsys):
    _retrieve(workspace)
    code = main(
        [
            "eval",
            "--run", workspace["run"],
            "--queries", workspace["queries"],
            "--corpus", workspace["corpus"],
            "--report", workspace["report"],
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "100.0" in out
    report = json.loads(open(workspace["report"]).read())
    assert report["topk_accuracy"] == {"5": 1.0, "20": 1.0, "100": 1.0}
    # figure and text table land alongside the JSON
    assert (workspace["dir"] / "report.png").exists()
    assert (workspace["dir"] / "report.txt").exists()


def test_eval_per_query_breakdown(workspace):
    _retrieve(workspace)
    code = main(
        [
            "eval",
            "--run", workspace["run"],
            "--queries", workspace["queries"],
            "--corpus", workspace["corpus"],
            "--report", workspace["report"],
            "--per-query",
        ]
    )
    assert code == 0
    report = json.loads(open(workspace["report"]).read())
    assert report["per_query"]["q1"]["answer_rank"] == 1
    assert report["per_query"]["q2"]["answer_rank"] == 1


def test_eval_with_clues_adds_coverage(workspace):
    _retrieve(workspace)
    code = main(
        [
            "eval",
            "--run", workspace["run"],
            "--queries", workspace["queries"],
            "--corpus", workspace["corpus"],
            "--report", workspace["report"],
            "--clues", workspace["clues"],
        ]
    )
    assert code == 0
    report = json.loads(open(workspace["report"]).read())
    assert report["answer_coverage"] == 1.0


def test_eval_compare_emits_delta_table(workspace, capsys):
    _retrieve(workspace)
    run_b = str(workspace["dir"] / "second.trec")
    assert (
        main(
            [
                "retrieve",
                "--index", workspace["index"],
                "--queries", workspace["queries"],
                "--clues", workspace["clues"],
                "--output", run_b,
                "--no-filter",
            ]
        )
        == 0
    )
    capsys.readouterr()
    code = main(
        [
            "eval",
            "--queries", workspace["queries"],
            "--corpus", workspace["corpus"],
            "--report", workspace["report"],
            "--compare", workspace["run"], run_b,
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "delta" in out
    payload = json.loads(open(workspace["report"]).read())
    assert set(payload) == {"report_a", "report_b", "accuracy_delta"}
    assert (workspace["dir"] / "report.png").exists()


def test_eval_unknown_passage_id_exit_1(workspace, capsys):
    _retrieve(workspace)
    with open(workspace["run"], "a") as fh:
        fh.write("q1 Q0 ghost 99 0.000001 cluefuse\n")
    code = main(
        [
            "eval",
            "--run", workspace["run"],
            "--queries", workspace["queries"],
            "--corpus", workspace["corpus"],
            "--report", workspace["report"],
        ]
    )
    assert code == 1
    assert "ghost" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def test_bench_reports_latency(workspace, capsys):
    build(workspace)
    report = str(workspace["dir"] / "bench.json")
    code = main(
        [
            "bench",
            "--index", workspace["index"],
            "--queries", workspace["queries"],
            "--clues", workspace["clues"],
            "--threads", "2",
            "--report", report,
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "mean" in out and "p95" in out
    stats = json.loads(open(report).read())
    assert set(stats) == {"threads=1", "threads=2"}
    for mode in stats.values():
        assert mode["mean_s"] >= 0.0
        assert mode["p95_s"] >= mode["median_s"]
    assert (workspace["dir"] / "bench.png").exists()


def test_bench_empty_queries_exit_1(workspace, capsys):
    build(workspace)
    empty = workspace["dir"] / "empty.jsonl"
    empty.write_text("")
    code = main(
        [
            "bench",
            "--index", workspace["index"],
            "--queries", str(empty),
            "--clues", workspace["clues"],
        ]
    )
    assert code == 1
    assert "empty" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# config file handling
# ---------------------------------------------------------------------------


def test_config_file_unknown_key_exit_2(workspace, capsys):
    config = workspace["dir"] / "config.json"
    config.write_text('{"corpus": "x.jsonl", "not_a_setting": 1}\n')
    code = main(["index", "--config", str(config), "--index", workspace["index"]])
    err = capsys.readouterr().err
    assert code == 2
    assert "not_a_setting" in err


def test_config_file_with_flag_override(workspace, capsys):
    config = workspace["dir"] / "config.json"
    config.write_text(json.dumps({"corpus": "does-not-exist.jsonl", "index": workspace["index"]}))
    # flag wins over the config's bad corpus path
    code = main(["index", "--config", str(config), "--corpus", workspace["corpus"]])
    assert code == 0
    assert "N=3" in capsys.readouterr().out


def test_config_clues_mapping(workspace, capsys):
    build(workspace)
    config = workspace["dir"] / "config.json"
    config.write_text(
        json.dumps(
            {
                "index": workspace["index"],
                "queries": workspace["queries"],
                "clues": {"context": workspace["clues"]},
                "run": workspace["run"],
            }
        )
    )
    assert main(["retrieve", "--config", str(config)]) == 0
    assert open(workspace["run"]).read().strip()


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 2


def test_bad_interpolation_weights_exit_2(workspace, capsys):
    build(workspace)
    code = main(
        [
            "retrieve",
            "--index", workspace["index"],
            "--queries", workspace["queries"],
            "--clues", workspace["clues"],
            "--output", workspace["run"],
            "--interpolation-weights", "context0.7",
        ]
    )
    assert code == 2
