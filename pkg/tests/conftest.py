import pytest

from cluefuse import Passage, build_index, read_clue_file, read_corpus, read_queries

from fixture_data import write_fixture

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE_RESULTS.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _ACCEPTANCE_RESULTS:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"  {status}  {name}")


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory):
    return write_fixture(tmp_path_factory.mktemp("fixture"))


@pytest.fixture(scope="session")
def fixture_corpus(fixture_paths):
    return list(read_corpus(fixture_paths["corpus"]))


@pytest.fixture(scope="session")
def fixture_index(fixture_corpus):
    return build_index(iter(fixture_corpus))


@pytest.fixture(scope="session")
def fixture_query_records(fixture_paths):
    return read_queries(fixture_paths["queries"])


@pytest.fixture(scope="session")
def fixture_clue_sets(fixture_paths):
    return {"context": read_clue_file(fixture_paths["clues"])}


@pytest.fixture(scope="session")
def fixture_lookup(fixture_corpus):
    return {p.id: p for p in fixture_corpus}


@pytest.fixture()
def toy_index():
    return build_index(
        [Passage("d1", "", "cat sat"), Passage("d2", "", "dog ran")],
        k1=0.9,
        b=0.4,
    )
