import pytest

ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    """Record one acceptance line: record(number, ok, detail)."""

    def _record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE, key=_order):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>3}: {'PASS' if ok else 'FAIL'}  {detail}")


def _order(key):
    key = str(key)
    digits = "".join(ch for ch in key if ch.isdigit())
    return int(digits), key
