import pytest

from rsgraphic.corpus import CORPUS
from rsgraphic.pipeline import load_problem, trace_pair

_CACHE = {}


def traced(name, step=2e-3):
    """Trace a corpus example once per session and step."""
    key = (name, step)
    if key not in _CACHE:
        ex = next(e for e in CORPUS if e.name == name)
        _CACHE[key] = trace_pair(load_problem(ex.F, ex.G), step)
    return _CACHE[key]


@pytest.fixture(scope="session")
def circle_trace():
    return traced("circle")


@pytest.fixture(scope="session")
def genus_one_trace():
    return traced("genus_one")


@pytest.fixture(scope="session")
def cusp_pair_trace():
    return traced("cusp_pair")


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    table = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(name, ok, detail=""):
        table[name] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(ACCEPTANCE_KEY, {})
    if not table:
        return
    terminalreporter.section("acceptance")
    for name in sorted(table):
        ok, detail = table[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
