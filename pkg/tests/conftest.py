import numpy as np
import pytest

from topomaps import Dataset, GridTopology, LabelAnchors


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def rgb_data():
    """1000 uniform RGB points labeled by their dominant channel."""
    rng = np.random.default_rng(3)
    x = rng.random((1000, 3))
    labels = tuple("rgb"[int(np.argmax(p))] for p in x)
    return Dataset(x, labels)


@pytest.fixture
def rgb_anchors():
    return LabelAnchors({"r": (1, 1), "g": (1, 8), "b": (8, 4)})


@pytest.fixture
def grid_10x10():
    return GridTopology((10, 10))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one PASS/FAIL line per acceptance criterion after the run."""
    try:
        from test_acceptance import REPORT_LINES
    except ImportError:
        return
    if REPORT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(REPORT_LINES):
            terminalreporter.write_line(line)
