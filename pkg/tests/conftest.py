from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    def report(number: int, ok: bool, detail: str):
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        print(ACCEPTANCE_LINES[-1])
    return report


@pytest.fixture
def gen():
    return np.random.default_rng(20260101)
