import numpy as np
import pytest
from hypothesis import strategies as st

from eiou.boxes import Box

coords = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)
sizes = st.floats(min_value=0.01, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw):
    x, y, w, h = draw(coords), draw(coords), draw(sizes), draw(sizes)
    return Box(x, y, x + w, y + h)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit():
    return Box(0.0, 0.0, 1.0, 1.0)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
