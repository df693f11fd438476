import pytest

from tablegen import Config, Corpus, Engine
from tablegen.synthetic import river_world

# deep-matcher features off: the fixtures run without trained models
NO_DEEP_ENTITY = (1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
NO_DEEP_LABEL = (1.0, 1.0, 0.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def world():
    return river_world()


@pytest.fixture(scope="session")
def corpus(world):
    return Corpus.ingest(world.tables, world.kb)


@pytest.fixture(scope="session")
def config():
    return Config(entity_weights=NO_DEEP_ENTITY, label_weights=NO_DEEP_LABEL)


@pytest.fixture(scope="session")
def engine(corpus, config):
    return Engine.build(corpus, config)


# -- acceptance report ------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number = int(name.split("_")[2])
        title = " ".join(name.split("_")[3:])
        ok = report.outcome == "passed"
        prev = _CRITERIA.get(number, (title, True))[1]
        _CRITERIA[number] = (title, prev and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
