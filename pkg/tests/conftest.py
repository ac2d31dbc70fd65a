import pytest

from exploding import build
from exploding.cli import load_definition

FIXTURES = ("eight_cycle", "two_two_cycles", "identity", "fair_coin", "biased_coin", "fair_coin_cap10")

_ACCEPTANCE = []


def make_op(name, mode=None):
    d = load_definition(name, mode)
    return build(d.backend, d.weights)


@pytest.fixture(scope="session")
def fixture_op():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = make_op(name)
        return cache[name]

    return get


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(label, passed, detail=""):
        _ACCEPTANCE.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _ACCEPTANCE:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}" + (f" -- {detail}" if detail else ""))
