from pathlib import Path

import numpy as np
import pytest

from phibranch.model import PeriodicGrid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

_CRITERIA = {}


def record_criterion(number, title, passed, note=""):
    _CRITERIA[number] = (title, passed, note)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, note = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title} | {note}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid128():
    return PeriodicGrid(128, 1.0)
