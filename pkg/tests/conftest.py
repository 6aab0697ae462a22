import numpy as np
import pytest
from hypothesis import settings

from diffgsp.fixtures import load_fixture
from diffgsp.graph_core import spectral_basis

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def geo20():
    return load_fixture("geo20")


@pytest.fixture(scope="session")
def geo20_support(geo20):
    return spectral_basis(geo20).lowest(5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])


@pytest.fixture
def criterion(request):
    """``criterion(number, passed, detail)`` records and prints one result line."""

    def report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.acceptance_lines[number] = line
        print(line)
        return passed

    return report
