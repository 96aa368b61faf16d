import os
import sys
from importlib import resources

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA: list = []


def corpus_path(name: str) -> str:
    return str(resources.files("avbracket") / "corpus" / name)


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _CRITERIA.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
