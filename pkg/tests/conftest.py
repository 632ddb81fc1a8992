"""Shared fixtures and the acceptance-summary terminal hook."""
from __future__ import annotations

import numpy as np
import pytest

from xmod.core import l2_normalize_rows

# Acceptance tests append (number, name, passed, detail) entries here; the
# terminal summary prints one line per criterion at the end of the run.
ACCEPTANCE_LINES: list[tuple[int, str, bool, str]] = []


def record_criterion(num: int, name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_LINES.append((num, name, passed, detail))
    line = format_criterion(num, name, passed, detail)
    print(line)
    assert passed, line


def format_criterion(num: int, name: str, passed: bool, detail: str) -> str:
    status = "PASS" if passed else "FAIL"
    suffix = f" -- {detail}" if detail else ""
    return f"[{status}] criterion {num:02d}: {name}{suffix}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num, name, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(format_criterion(num, name, passed, detail))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_unit_rows(rng, n: int, d: int) -> np.ndarray:
    return l2_normalize_rows(rng.standard_normal((n, d)))
