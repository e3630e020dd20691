import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("default")

TWO_PI = 2 * math.pi


def cycle_oracle(n: int, shift: float = 0.0, length: float = TWO_PI) -> np.ndarray:
    h = length / n
    return np.sort((2 - 2 * np.cos(TWO_PI * np.arange(n) / n + shift)) / h**2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# filled by test_acceptance.py; echoed after the run so the table is visible without -s
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
