import pytest
from hypothesis import HealthCheck, settings

from sentrewrite.textproc import Document

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def abc_doc():
    """Three sentences whose greedy/combination oracle is {0, 2}."""
    return Document.from_texts("abc", ["a b c", "b c d", "e f"])


@pytest.fixture
def abc_ref():
    return Document.from_texts("abc#ref", ["a b c d", "e f"])


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; returns the outcome."""
    def emit(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda l: int(l.split()[2].rstrip(':'))):
            terminalreporter.write_line(line)
