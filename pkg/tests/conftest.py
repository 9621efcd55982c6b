"""Collects acceptance verdict lines and prints them after the run.

test_acceptance.py registers one line per contract item through
record_criterion; printing them from the terminal-summary hook keeps
them visible even though pytest captures test output.
"""

_CRITERIA: list[tuple[int, bool, str]] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    _CRITERIA.append((number, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number, ok, detail in sorted(_CRITERIA):
        word = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[criterion {number:2d}] {word}  {detail}")
