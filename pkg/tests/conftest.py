"""Shared pytest hooks: the acceptance report printed at the end of the run."""

from contactkit.hitting import EssentialRecord
from contactkit.stats.estimators import OrderStats

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> bool:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
    terminalreporter.write_line(
        f"invariant checks this run: {EssentialRecord.n_checked} EssentialRecords, "
        f"{OrderStats.n_checked} OrderStats (any violation raises on construction)"
    )
