from pathlib import Path

import pytest
from hypothesis import settings

from jointsurv import FirmParams

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
INDUSTRIALS_CSV = ROOT / "data" / "industrials.csv"


@pytest.fixture
def base_firm():
    return FirmParams("BASE", sigma=0.30, d_over_v0=0.30)


@pytest.fixture
def industrials():
    from jointsurv import read_firm_csv

    return read_firm_csv(INDUSTRIALS_CSV)


@pytest.fixture
def industrials_csv():
    return INDUSTRIALS_CSV


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
