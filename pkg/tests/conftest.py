import numpy as np
import pytest
from hypothesis import strategies as st

from smqka.qubit import PureState


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@st.composite
def pure_states(draw):
    """Random normalized single-qubit state."""
    parts = [draw(st.floats(-1, 1, allow_nan=False)) for _ in range(4)]
    v = np.array([complex(parts[0], parts[1]), complex(parts[2], parts[3])])
    norm = np.linalg.norm(v)
    if norm < 1e-3:
        v, norm = np.array([1 + 0j, 0j]), 1.0
    v = v / norm
    return PureState(complex(v[0]), complex(v[1]))


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, text = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}")
