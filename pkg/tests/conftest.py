from pathlib import Path

import numpy as np
import pytest

from ntklab.numerics import RngStream

DATA = Path(__file__).parent / "data"
MNIST_IMAGES = DATA / "mnist100-images-idx3-ubyte.gz"
MNIST_LABELS = DATA / "mnist100-labels-idx1-ubyte.gz"

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def stream():
    return RngStream(2024)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
