import pytest

from twgraph.corpus import ReplayStub, build_corpus


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("corpus"), crawls=4)


@pytest.fixture(scope="session")
def replay(corpus):
    with ReplayStub(corpus) as stub:
        yield stub


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
