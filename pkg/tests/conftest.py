"""Shared acceptance bookkeeping: each acceptance test records its sub-checks,
and one PASS/FAIL line per criterion is printed at the end of the run."""
from collections import defaultdict

import pytest

ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


@pytest.fixture(scope="session")
def acceptance():
    def record(criterion: int, name: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE[criterion].append((name, bool(passed), detail))
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[criterion]
        ok = all(passed for _, passed, _ in checks)
        parts = "; ".join(f"{name} {'ok' if passed else 'FAILED'}{f' ({d})' if d else ''}"
                          for name, passed, d in checks)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} -- {parts}")
