from __future__ import annotations

import numpy as np
import pytest

from countpoint.scene import REDUCED_GEOMETRY, World

# a tiny image for fast network tests: 8x20 pixels, 3 pooled rows x 9 columns
TINY_SHAPE = (8, 20)


@pytest.fixture(scope="session")
def reduced_world():
    return World(REDUCED_GEOMETRY)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
