import math

import numpy as np
import pytest
from hypothesis import settings

from kfilter.motion import build_so3_alphabet, so3_quantizer

settings.register_profile("default", deadline=None, max_examples=100, derandomize=True)
settings.load_profile("default")

THETA = 2 * math.pi / 100


@pytest.fixture(scope="session")
def so3():
    return build_so3_alphabet(THETA)


@pytest.fixture(scope="session")
def quantizer():
    return so3_quantizer(THETA)


def random_word(alphabet, n, rng):
    return alphabet.word([alphabet.label(int(t)) for t in rng.integers(0, len(alphabet), n)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results, printed once at the end of the run
ACCEPTANCE: dict = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE[number] = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
