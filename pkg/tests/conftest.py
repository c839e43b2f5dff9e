import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from millqe.corpus import AnalyzerConfig, Document
from millqe.index import build_index
from millqe.synthetic import make_benchmark

RAW = AnalyzerConfig(lowercase=True, stopwords=False, stemming=False)


@pytest.fixture
def toy_docs():
    return [Document("D1", "the cat sat"), Document("D2", "the dog sat"), Document("D3", "cat cat cat")]


@pytest.fixture
def toy_index(toy_docs):
    return build_index(toy_docs, RAW)


@pytest.fixture(scope="session")
def bench():
    return make_benchmark()


@pytest.fixture(scope="session")
def bench_index(bench):
    return build_index(bench.docs)


@pytest.fixture(scope="session")
def bench_files(bench, tmp_path_factory):
    return bench.write(tmp_path_factory.mktemp("synthetic"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
