from pathlib import Path

import pytest

from redsched.pipeline import load_program

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "redsched" / "fixtures"

_criteria: dict[int, tuple[bool, str]] = {}


def fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture
def fixture_program():
    return lambda name: load_program(fixture_path(name))


@pytest.fixture
def record_criterion():
    """Tests in the acceptance suite report their verdict here."""

    def record(number: int, ok: bool, detail: str = ""):
        _criteria[number] = (ok, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, detail = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
