import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL (or SKIP, with ``ok=None``) line for the terminal summary."""

    def _report(name, ok, detail=""):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{status}  {name}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
