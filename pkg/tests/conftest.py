import os

import numpy as np
import pytest

from dcsc.imageio import read_image

DATA = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def camera128():
    """128 x 128 crop of the 'camera' test image on [0, 255]."""
    return read_image(os.path.join(DATA, "camera128.pgm"))


@pytest.fixture(scope="session")
def camera64(camera128):
    return camera128[32:96, 32:96].copy()


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
