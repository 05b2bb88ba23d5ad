import pytest

ACCEPTANCE: dict[int, tuple[bool, str]] = {}
N_CRITERIA = 13


@pytest.fixture
def report():
    """Record the outcome of an acceptance criterion for the terminal summary."""

    def _report(n: int, ok: bool, detail: str):
        ACCEPTANCE[n] = (bool(ok), detail)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
